//! Modulation functions.
//!
//! A modulation function rescales residuals so that band width can vary
//! along the domain. Functions equal up to a positive factor induce the same
//! band, so every [`ModulationCurve`] is stored as the unit-integral
//! representative of its class.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{std_curve, sup_abs_diff_values, Curve, FunctionalSample, Grid};
use crate::scalar::Scalar;

/// Relative size of the positivity shift, as a fraction of the envelope maximum.
pub const POSITIVITY_EPSILON: f64 = 1e-6;

/// Where a modulation function came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationKind {
    /// Constant `1/|T|`.
    SZero,
    /// Normalized pointwise standard deviation of the training set.
    SSigma,
    /// Trimmed max-envelope of training residuals.
    SBarTraining,
    /// Trimmed max-envelope of calibration residuals (analysis object only).
    SBarCalibration,
    Custom,
}

impl std::fmt::Display for ModulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModulationKind::SZero => "s0",
            ModulationKind::SSigma => "sigma",
            ModulationKind::SBarTraining => "sbar",
            ModulationKind::SBarCalibration => "sbar_c",
            ModulationKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Strictly positive, unit-integral modulation function.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationCurve<T> {
    curve: Curve<T>,
    kind: ModulationKind,
}

impl<T: Scalar> ModulationCurve<T> {
    pub fn curve(&self) -> &Curve<T> {
        &self.curve
    }

    pub fn values(&self) -> &[T] {
        self.curve.values()
    }

    pub fn kind(&self) -> ModulationKind {
        self.kind
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.curve.grid()
    }

    pub fn with_kind(mut self, kind: ModulationKind) -> Self {
        self.kind = kind;
        self
    }

    /// Unit-integral shape of a nonnegative radius profile that may touch
    /// zero, with the scale it was divided by. `None` when the profile
    /// integrates to zero.
    /// Trusted constructor for curves already known to be a valid modulation.
    pub(crate) fn from_parts(curve: Curve<T>, kind: ModulationKind) -> Self {
        Self { curve, kind }
    }

    pub(crate) fn from_radius_profile(profile: &Curve<T>) -> Option<(T, Self)> {
        let area = profile.integrate();
        if !(area > T::zero()) {
            return None;
        }
        Some((
            area,
            ModulationCurve {
                curve: profile.map(|v| v / area),
                kind: ModulationKind::Custom,
            },
        ))
    }
}

/// Indices of the non-extreme curves kept for an envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedIndexSet<T> {
    /// Positions (within the scored sample) whose sup-score is at most `threshold`.
    pub kept: Vec<usize>,
    pub threshold: T,
    /// 1-based rank of `threshold` among the sorted sup-scores.
    pub quantile_index: usize,
}

/// `s⁰(t) = 1/|T|`.
pub fn s_zero<T: Scalar>(grid: &Arc<Grid<T>>) -> ModulationCurve<T> {
    ModulationCurve {
        curve: Curve::constant(grid.clone(), T::one() / grid.length()),
        kind: ModulationKind::SZero,
    }
}

/// Adds `epsilon` at every grid point. The input must be nonnegative and not
/// identically zero.
pub fn adjust_positive<T: Scalar>(curve: &Curve<T>, epsilon: T) -> Result<Curve<T>> {
    if let Some(i) = curve.values().iter().position(|&v| v < T::zero()) {
        return Err(Error::NonPositive {
            index: i,
            value: curve.values()[i].to_f64_lossy(),
        });
    }
    if curve.values().iter().all(|&v| v == T::zero()) {
        return Err(Error::Pathological(
            "modulation candidate is identically zero".into(),
        ));
    }
    Ok(curve.map(|v| v + epsilon))
}

/// Divides a strictly positive curve by its integral.
pub fn normalize<T: Scalar>(curve: &Curve<T>) -> Result<ModulationCurve<T>> {
    normalize_as(curve, ModulationKind::Custom)
}

pub fn normalize_as<T: Scalar>(curve: &Curve<T>, kind: ModulationKind) -> Result<ModulationCurve<T>> {
    if let Some(i) = curve.values().iter().position(|&v| !(v > T::zero())) {
        return Err(Error::NonPositive {
            index: i,
            value: curve.values()[i].to_f64_lossy(),
        });
    }
    let area = curve.integrate();
    Ok(ModulationCurve {
        curve: curve.map(|v| v / area),
        kind,
    })
}

/// Shifts a nonnegative candidate by `POSITIVITY_EPSILON · max` when it
/// touches zero, then normalizes.
fn positive_normalized<T: Scalar>(curve: &Curve<T>, kind: ModulationKind) -> Result<ModulationCurve<T>> {
    if curve.values().iter().all(|&v| v > T::zero()) {
        return normalize_as(curve, kind);
    }
    let eps = T::lit(POSITIVITY_EPSILON) * curve.max();
    let adjusted = adjust_positive(curve, eps)?;
    normalize_as(&adjusted, kind)
}

/// Normalized pointwise standard deviation of the training set.
pub fn s_sigma<T: Scalar>(training: &FunctionalSample<T>) -> Result<ModulationCurve<T>> {
    let sd = std_curve(training)?;
    positive_normalized(&sd, ModulationKind::SSigma).map_err(|e| match e {
        Error::Pathological(_) => Error::Pathological(
            "training curves have zero variance at every grid point".into(),
        ),
        other => other,
    })
}

/// Sup-norm distances `sup_t |y_j(t) − g(t)|` of every curve in the sample.
pub fn sup_scores<T: Scalar>(sample: &FunctionalSample<T>, g: &Curve<T>) -> Result<Vec<T>> {
    g.check_grid(sample.grid())?;
    Ok(sample
        .iter()
        .map(|c| sup_abs_diff_values(c.values(), g.values()))
        .collect())
}

/// `rank`-th smallest value (1-based) of `values`.
pub(crate) fn order_statistic<T: Scalar>(values: &[T], rank: usize) -> T {
    debug_assert!(rank >= 1 && rank <= values.len());
    let mut buf = values.to_vec();
    let (_, nth, _) = buf.select_nth_unstable_by(rank - 1, |a, b| {
        a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
    });
    *nth
}

/// Keeps every index whose score is at most the `rank`-th smallest score.
/// A rank beyond the sample size keeps everything.
pub fn trim_by_rank<T: Scalar>(scores: &[T], rank: usize) -> TrimmedIndexSet<T> {
    let threshold = if rank >= scores.len() {
        scores.iter().copied().fold(T::neg_infinity(), T::max)
    } else {
        order_statistic(scores, rank.max(1))
    };
    let kept = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= threshold)
        .map(|(i, _)| i)
        .collect();
    TrimmedIndexSet {
        kept,
        threshold,
        quantile_index: rank,
    }
}

/// Pointwise maximum of `|y_j − g|` over the given sample positions, before
/// normalization.
pub fn envelope<T: Scalar>(sample: &FunctionalSample<T>, g: &Curve<T>, kept: &[usize]) -> Result<Curve<T>> {
    g.check_grid(sample.grid())?;
    let mut env = vec![T::zero(); g.len()];
    for &j in kept {
        let c = sample
            .get(j)
            .ok_or_else(|| Error::Config(format!("index {j} outside sample")))?;
        for ((e, &y), &gv) in env.iter_mut().zip(c.values()).zip(g.values()) {
            *e = e.max((y - gv).abs());
        }
    }
    Ok(Curve::from_parts_unchecked(g.grid().clone(), env))
}

fn envelope_modulation<T: Scalar>(
    sample: &FunctionalSample<T>,
    g: &Curve<T>,
    kept: &[usize],
    kind: ModulationKind,
) -> Result<ModulationCurve<T>> {
    let env = envelope(sample, g, kept)?;
    positive_normalized(&env, kind).map_err(|e| match e {
        Error::Pathological(_) => Error::Pathological(
            "every retained curve coincides with the point predictor".into(),
        ),
        other => other,
    })
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange {
            alpha: alpha.to_f64_lossy(),
            range: "(0, 1)".into(),
        })
    }
}

/// Trimmed envelope of training residuals (the usable t-function).
pub fn s_bar_training<T: Scalar>(
    training: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
) -> Result<ModulationCurve<T>> {
    check_alpha(alpha)?;
    let m = training.len();
    let rank = ((T::from_usize_lossy(m + 1)) * (T::one() - alpha)).ceil_int();
    let scores = sup_scores(training, g)?;
    let trimmed = trim_by_rank(&scores, rank.max(1) as usize);
    envelope_modulation(training, g, &trimmed.kept, ModulationKind::SBarTraining)
}

/// Smoothed-framework t-function: the trimming rank becomes
/// `⌈m + τ − (m+1)α⌉`; a rank of zero or less falls back to `s⁰`.
pub fn s_bar_training_smoothed<T: Scalar>(
    training: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
    tau: T,
) -> Result<ModulationCurve<T>> {
    check_alpha(alpha)?;
    let m = training.len();
    let rank = (T::from_usize_lossy(m) + tau - T::from_usize_lossy(m + 1) * alpha).ceil_int();
    if rank <= 0 {
        return Ok(s_zero(training.grid()).with_kind(ModulationKind::SBarTraining));
    }
    let scores = sup_scores(training, g)?;
    let trimmed = trim_by_rank(&scores, rank as usize);
    envelope_modulation(training, g, &trimmed.kept, ModulationKind::SBarTraining)
}

/// Trimmed envelope of calibration residuals (the c-function) and the set
/// of retained calibration positions.
pub fn s_bar_calibration<T: Scalar>(
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
) -> Result<(ModulationCurve<T>, TrimmedIndexSet<T>)> {
    let trimmed = calibration_trim(calibration, g, alpha)?;
    let s = envelope_modulation(calibration, g, &trimmed.kept, ModulationKind::SBarCalibration)?;
    Ok((s, trimmed))
}

/// The retained set of the c-function: positions with sup-score at most `k`.
pub fn calibration_trim<T: Scalar>(
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
) -> Result<TrimmedIndexSet<T>> {
    check_alpha(alpha)?;
    let l = calibration.len();
    let rank = (T::from_usize_lossy(l + 1) * (T::one() - alpha)).ceil_int();
    if rank > l as i64 {
        return Err(Error::AlphaOutOfRange {
            alpha: alpha.to_f64_lossy(),
            range: format!("[1/(l+1), 1) with l = {l}"),
        });
    }
    let scores = sup_scores(calibration, g)?;
    Ok(trim_by_rank(&scores, rank.max(1) as usize))
}
