//! Split conformal bands with modulated sup-metric scores.
//!
//! The sample is split once into a training part, which fixes the point
//! predictor `g` and the modulation `s`, and a calibration part, whose
//! scores `sup_t |y(t) − g(t)| / s(t)` are ranked. The band is
//! `g ± k·s` where `k` is the `⌈(l+1)(1−α)⌉`-th smallest calibration score.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mean_curve, Curve, FunctionalSample, Grid};
use crate::modulation::{
    normalize_as, s_bar_training, s_bar_training_smoothed, s_sigma, s_zero, ModulationCurve,
    ModulationKind,
};
use crate::scalar::{LevelScalar, Scalar};

/// Disjoint training / calibration index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub training: Vec<usize>,
    pub calibration: Vec<usize>,
    pub seed: u64,
}

impl SplitIndices {
    /// Validates an explicit partition of `0..n`.
    pub fn new(training: Vec<usize>, calibration: Vec<usize>, seed: u64) -> Result<Self> {
        let n = training.len() + calibration.len();
        if training.is_empty() || calibration.is_empty() {
            return Err(Error::DegenerateSplit { n, rho: f64::NAN });
        }
        let mut seen = vec![false; n];
        for &i in training.iter().chain(&calibration) {
            if i >= n || seen[i] {
                return Err(Error::Config(format!(
                    "split is not a partition of 0..{n} (index {i})"
                )));
            }
            seen[i] = true;
        }
        Ok(Self {
            training,
            calibration,
            seed,
        })
    }

    pub fn m(&self) -> usize {
        self.training.len()
    }

    pub fn l(&self) -> usize {
        self.calibration.len()
    }

    pub fn n(&self) -> usize {
        self.m() + self.l()
    }
}

/// Uniformly random split with `l = round(n·ρ)` calibration curves.
pub fn split(n: usize, rho: f64, seed: u64) -> Result<SplitIndices> {
    let degenerate = || Error::DegenerateSplit { n, rho };
    if n < 2 || !(rho > 0.0 && rho < 1.0) {
        return Err(degenerate());
    }
    let l = (n as f64 * rho).round() as usize;
    if l < 1 || l >= n {
        return Err(degenerate());
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut calibration = perm[..l].to_vec();
    let mut training = perm[l..].to_vec();
    calibration.sort_unstable();
    training.sort_unstable();
    Ok(SplitIndices {
        training,
        calibration,
        seed,
    })
}

/// Rank of the calibration quantile, or the whole function space when
/// `α < 1/(l+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileIndex {
    Rank(usize),
    FullSpace,
}

/// `⌈(l+1)(1−α)⌉`, or [`QuantileIndex::FullSpace`] when that exceeds `l`.
pub fn quantile_index<A: LevelScalar>(l: usize, alpha: A) -> QuantileIndex {
    let rank = (A::from_count(l + 1) * (A::one() - alpha)).ceil_int();
    if rank > l as i64 {
        QuantileIndex::FullSpace
    } else {
        QuantileIndex::Rank(rank.max(1) as usize)
    }
}

/// Builds the point predictor `g` from the training curves.
pub trait PointPredictor<T: Scalar>: Send + Sync {
    fn predict(&self, training: &FunctionalSample<T>) -> Result<Curve<T>>;

    fn describe(&self) -> String {
        "custom".into()
    }
}

/// Pointwise training mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanPredictor;

impl<T: Scalar> PointPredictor<T> for MeanPredictor {
    fn predict(&self, training: &FunctionalSample<T>) -> Result<Curve<T>> {
        mean_curve(training)
    }

    fn describe(&self) -> String {
        "mean".into()
    }
}

/// A predictor fixed in advance, ignoring the training curves.
#[derive(Debug, Clone)]
pub struct FixedPredictor<T>(pub Curve<T>);

impl<T: Scalar> PointPredictor<T> for FixedPredictor<T> {
    fn predict(&self, training: &FunctionalSample<T>) -> Result<Curve<T>> {
        self.0.check_grid(training.grid())?;
        Ok(self.0.clone())
    }

    fn describe(&self) -> String {
        "fixed".into()
    }
}

impl<T, F> PointPredictor<T> for F
where
    T: Scalar,
    F: Fn(&FunctionalSample<T>) -> Result<Curve<T>> + Send + Sync,
{
    fn predict(&self, training: &FunctionalSample<T>) -> Result<Curve<T>> {
        self(training)
    }
}

/// How the modulation function is obtained from the training set.
#[derive(Debug, Clone, PartialEq)]
pub enum ModulationRule<T> {
    SZero,
    SSigma,
    SBar,
    /// User-supplied function, normalized to unit integral.
    Fixed(ModulationCurve<T>),
}

impl<T: Scalar> ModulationRule<T> {
    /// Wraps a strictly positive user curve.
    pub fn fixed(curve: &Curve<T>) -> Result<Self> {
        normalize_as(curve, ModulationKind::Custom).map(ModulationRule::Fixed)
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModulationRule::SZero => "s0",
            ModulationRule::SSigma => "sigma",
            ModulationRule::SBar => "sbar",
            ModulationRule::Fixed(_) => "custom",
        }
    }

    fn build(
        &self,
        training: &FunctionalSample<T>,
        g: &Curve<T>,
        alpha: T,
        tau: Option<T>,
    ) -> Result<ModulationCurve<T>> {
        match self {
            ModulationRule::SZero => Ok(s_zero(training.grid())),
            ModulationRule::SSigma => s_sigma(training),
            ModulationRule::SBar => match tau {
                None => s_bar_training(training, g, alpha),
                Some(tau) => s_bar_training_smoothed(training, g, alpha, tau),
            },
            ModulationRule::Fixed(s) => {
                s.curve().check_grid(training.grid())?;
                Ok(s.clone())
            }
        }
    }
}

/// Which construction produced a band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMethod {
    Conformal,
    Pointwise,
    Naive,
}

/// Randomization used by a smoothed band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedParams<T> {
    pub tau: T,
    /// Scores equal to `w` sorted to its right.
    pub tie_right: usize,
    /// Scores equal to `w` sorted to its left.
    pub tie_left: usize,
}

/// A band `{y : lower(t) ≤ y(t) ≤ upper(t) ∀t}` (strict when open).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBand<T> {
    pub(crate) center: Curve<T>,
    pub(crate) radius_scale: T,
    pub(crate) modulation: ModulationCurve<T>,
    pub(crate) lower: Curve<T>,
    pub(crate) upper: Curve<T>,
    pub(crate) closed: bool,
    pub(crate) full_space: bool,
    pub(crate) lower_clip: Option<T>,
    pub(crate) method: BandMethod,
    pub(crate) smoothing: Option<SmoothedParams<T>>,
}

impl<T: Scalar> PredictionBand<T> {
    /// `center ± radius_scale · modulation`.
    pub fn from_parts(
        center: Curve<T>,
        radius_scale: T,
        modulation: ModulationCurve<T>,
        closed: bool,
        method: BandMethod,
    ) -> Result<Self> {
        modulation.curve().check_grid(center.grid())?;
        if !(radius_scale >= T::zero()) || !radius_scale.is_finite() {
            return Err(Error::Config(format!("invalid radius scale {radius_scale}")));
        }
        let lower = center
            .zip_with(modulation.curve(), |g, s| g - radius_scale * s)
            .expect("grids checked");
        let upper = center
            .zip_with(modulation.curve(), |g, s| g + radius_scale * s)
            .expect("grids checked");
        Ok(Self {
            center,
            radius_scale,
            modulation,
            lower,
            upper,
            closed,
            full_space: false,
            lower_clip: None,
            method,
            smoothing: None,
        })
    }

    /// The degenerate band equal to the whole function space.
    pub fn full_space(center: Curve<T>, modulation: ModulationCurve<T>, method: BandMethod) -> Self {
        Self {
            lower: center.clone(),
            upper: center.clone(),
            center,
            radius_scale: T::zero(),
            modulation,
            closed: true,
            full_space: true,
            lower_clip: None,
            method,
            smoothing: None,
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.center.grid()
    }

    pub fn center(&self) -> &Curve<T> {
        &self.center
    }

    pub fn radius_scale(&self) -> T {
        self.radius_scale
    }

    pub fn modulation(&self) -> &ModulationCurve<T> {
        &self.modulation
    }

    pub fn lower(&self) -> &Curve<T> {
        &self.lower
    }

    pub fn upper(&self) -> &Curve<T> {
        &self.upper
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn is_full_space(&self) -> bool {
        self.full_space
    }

    pub fn lower_clip(&self) -> Option<T> {
        self.lower_clip
    }

    pub fn method(&self) -> BandMethod {
        self.method
    }

    pub fn smoothing(&self) -> Option<SmoothedParams<T>> {
        self.smoothing
    }

    /// Membership test on raw values aligned with the band's grid.
    pub fn contains_values(&self, y: &[T]) -> bool {
        if self.full_space {
            return true;
        }
        debug_assert_eq!(y.len(), self.lower.len());
        let lo = self.lower.values();
        let hi = self.upper.values();
        if self.closed {
            y.iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&a, &b))| a <= v && v <= b)
        } else {
            y.iter()
                .zip(lo.iter().zip(hi))
                .all(|(&v, (&a, &b))| a < v && v < b)
        }
    }

    /// Pointwise membership at grid index `i`.
    pub fn contains_at(&self, i: usize, v: T) -> bool {
        if self.full_space {
            return true;
        }
        let (a, b) = (self.lower.values()[i], self.upper.values()[i]);
        if self.closed {
            a <= v && v <= b
        } else {
            a < v && v < b
        }
    }
}

/// `contains(band, y)`.
pub fn contains<T: Scalar>(band: &PredictionBand<T>, y: &Curve<T>) -> Result<bool> {
    y.check_grid(band.grid())?;
    Ok(band.contains_values(y.values()))
}

/// Modulated sup-scores `sup_t |y_j(t) − g(t)| / s(t)`.
pub fn scores<T: Scalar>(
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    s: &ModulationCurve<T>,
) -> Result<Vec<T>> {
    g.check_grid(calibration.grid())?;
    s.curve().check_grid(calibration.grid())?;
    Ok(calibration
        .iter()
        .map(|y| modulated_score(y.values(), g.values(), s.values()))
        .collect())
}

pub(crate) fn modulated_score<T: Scalar>(y: &[T], g: &[T], s: &[T]) -> T {
    y.iter()
        .zip(g)
        .zip(s)
        .map(|((&y, &g), &s)| ((y - g) / s).abs())
        .fold(T::zero(), T::max)
}

/// Fitted predictor, modulation and sorted calibration scores: everything a
/// band or a conformal p-value needs.
#[derive(Debug, Clone)]
pub struct Calibration<T> {
    center: Curve<T>,
    modulation: ModulationCurve<T>,
    /// Ascending.
    sorted_scores: Vec<T>,
}

impl<T: Scalar> Calibration<T> {
    /// Fits `g` and `s` on the training curves and scores the calibration
    /// curves. `alpha` is only used by data-driven trimmed modulations.
    pub fn fit<P: PointPredictor<T> + ?Sized>(
        sample: &FunctionalSample<T>,
        split: &SplitIndices,
        g_rule: &P,
        s_rule: &ModulationRule<T>,
        alpha: T,
    ) -> Result<Self> {
        Self::fit_inner(sample, split, g_rule, s_rule, alpha, None)
    }

    fn fit_inner<P: PointPredictor<T> + ?Sized>(
        sample: &FunctionalSample<T>,
        split: &SplitIndices,
        g_rule: &P,
        s_rule: &ModulationRule<T>,
        alpha: T,
        tau: Option<T>,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        if split.n() != sample.len() {
            return Err(Error::Config(format!(
                "split covers {} curves but sample has {}",
                split.n(),
                sample.len()
            )));
        }
        let training = sample.select(&split.training)?;
        let calibration = sample.select(&split.calibration)?;
        let center = g_rule.predict(&training)?;
        center.check_grid(sample.grid())?;
        let modulation = s_rule.build(&training, &center, alpha, tau)?;
        Ok(Self::from_calibration_set(&calibration, center, modulation)?)
    }

    /// Scores an already separated calibration set.
    pub fn from_calibration_set(
        calibration: &FunctionalSample<T>,
        center: Curve<T>,
        modulation: ModulationCurve<T>,
    ) -> Result<Self> {
        let mut sorted_scores = scores(calibration, &center, &modulation)?;
        sorted_scores.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(Self {
            center,
            modulation,
            sorted_scores,
        })
    }

    pub fn center(&self) -> &Curve<T> {
        &self.center
    }

    pub fn modulation(&self) -> &ModulationCurve<T> {
        &self.modulation
    }

    pub fn sorted_scores(&self) -> &[T] {
        &self.sorted_scores
    }

    pub fn l(&self) -> usize {
        self.sorted_scores.len()
    }

    /// Nonconformity score of a new curve.
    pub fn score(&self, y: &Curve<T>) -> Result<T> {
        y.check_grid(self.center.grid())?;
        Ok(modulated_score(
            y.values(),
            self.center.values(),
            self.modulation.values(),
        ))
    }

    /// `δ_y = |{j ∈ I₂ ∪ {n+1} : R_j ≥ R_{n+1}}| / (l+1)`.
    pub fn p_value(&self, y: &Curve<T>) -> Result<T> {
        let r = self.score(y)?;
        let at_least = self.sorted_scores.iter().filter(|&&s| s >= r).count();
        Ok(T::from_usize_lossy(at_least + 1) / T::from_usize_lossy(self.l() + 1))
    }

    /// Non-smoothed band `g ± k·s`.
    pub fn band(&self, alpha: T) -> Result<PredictionBand<T>> {
        check_alpha(alpha)?;
        match quantile_index(self.l(), alpha) {
            QuantileIndex::FullSpace => Ok(PredictionBand::full_space(
                self.center.clone(),
                self.modulation.clone(),
                BandMethod::Conformal,
            )),
            QuantileIndex::Rank(r) => PredictionBand::from_parts(
                self.center.clone(),
                self.sorted_scores[r - 1],
                self.modulation.clone(),
                true,
                BandMethod::Conformal,
            ),
        }
    }

    /// Smoothed band with randomization `tau`: radius `w` at rank
    /// `⌈l + τ − (l+1)α⌉`, closed or open depending on `tau` and the ties
    /// around `w`.
    pub fn smoothed_band(&self, alpha: T, tau: T) -> Result<PredictionBand<T>> {
        if !(tau >= T::zero() && tau <= T::one()) {
            return Err(Error::TauOutOfRange(tau.to_f64_lossy()));
        }
        let l = self.l();
        let lp1 = T::from_usize_lossy(l + 1);
        let lo = tau / lp1;
        let hi = (T::from_usize_lossy(l) + tau) / lp1;
        let out_of_range = || Error::AlphaOutOfRange {
            alpha: alpha.to_f64_lossy(),
            range: format!("[{}, {}) for l = {l}, tau = {tau}", lo, hi),
        };
        if !(alpha > T::zero() && alpha < T::one()) || alpha < lo || alpha >= hi {
            return Err(out_of_range());
        }
        let rank = (T::from_usize_lossy(l) + tau - lp1 * alpha).ceil_int();
        if rank < 1 || rank > l as i64 {
            return Err(out_of_range());
        }
        let idx = rank as usize - 1;
        let w = self.sorted_scores[idx];
        let tie_left = self.sorted_scores[..idx].iter().filter(|&&s| s == w).count();
        let tie_right = self.sorted_scores[idx + 1..].iter().filter(|&&s| s == w).count();
        let threshold = (lp1 * alpha - T::from(((lp1 * alpha) - tau).floor_int()).unwrap()
            + T::from_usize_lossy(tie_right))
            / T::from_usize_lossy(tie_right + tie_left + 2);
        let closed = tau > threshold;
        let mut band = PredictionBand::from_parts(
            self.center.clone(),
            w,
            self.modulation.clone(),
            closed,
            BandMethod::Conformal,
        )?;
        band.smoothing = Some(SmoothedParams {
            tau,
            tie_right,
            tie_left,
        });
        Ok(band)
    }
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

/// Split conformal band `g ± kˢ·s`.
pub fn fit_band<T: Scalar, P: PointPredictor<T> + ?Sized>(
    sample: &FunctionalSample<T>,
    alpha: T,
    split: &SplitIndices,
    g_rule: &P,
    s_rule: &ModulationRule<T>,
) -> Result<PredictionBand<T>> {
    Calibration::fit(sample, split, g_rule, s_rule, alpha)?.band(alpha)
}

/// Smoothed split conformal band.
pub fn fit_band_smoothed<T: Scalar, P: PointPredictor<T> + ?Sized>(
    sample: &FunctionalSample<T>,
    alpha: T,
    split: &SplitIndices,
    g_rule: &P,
    s_rule: &ModulationRule<T>,
    tau: T,
) -> Result<PredictionBand<T>> {
    if !(tau >= T::zero() && tau <= T::one()) {
        return Err(Error::TauOutOfRange(tau.to_f64_lossy()));
    }
    Calibration::fit_inner(sample, split, g_rule, s_rule, alpha, Some(tau))?.smoothed_band(alpha, tau)
}

/// Concatenation of per-point conformal intervals `g(t) ± k̃(t)`, where
/// `k̃(t)` is the `⌈(l+1)(1−α)⌉`-th smallest `|y_j(t) − g(t)|` over the
/// calibration curves. Stored as radius scale `∫k̃` times the unit-integral
/// shape of `k̃`.
pub fn pointwise_band<T: Scalar, P: PointPredictor<T> + ?Sized>(
    sample: &FunctionalSample<T>,
    alpha: T,
    split: &SplitIndices,
    g_rule: &P,
) -> Result<PredictionBand<T>> {
    check_alpha(alpha)?;
    let training = sample.select(&split.training)?;
    let calibration = sample.select(&split.calibration)?;
    let center = g_rule.predict(&training)?;
    center.check_grid(sample.grid())?;
    let grid = sample.grid().clone();
    let rank = match quantile_index(calibration.len(), alpha) {
        QuantileIndex::FullSpace => {
            return Ok(PredictionBand::full_space(center, s_zero(&grid), BandMethod::Pointwise))
        }
        QuantileIndex::Rank(r) => r,
    };
    let p = grid.len();
    let mut column = vec![T::zero(); calibration.len()];
    let mut radius = Vec::with_capacity(p);
    for t in 0..p {
        for (c, y) in column.iter_mut().zip(calibration.iter()) {
            *c = (y.values()[t] - center.values()[t]).abs();
        }
        radius.push(crate::modulation::order_statistic(&column, rank));
    }
    let profile = Curve::from_parts_unchecked(grid.clone(), radius);
    radius_profile_band(center, &profile, BandMethod::Pointwise)
}

fn radius_profile_band<T: Scalar>(
    center: Curve<T>,
    profile: &Curve<T>,
    method: BandMethod,
) -> Result<PredictionBand<T>> {
    let grid = center.grid().clone();
    match ModulationCurve::from_radius_profile(profile) {
        Some((scale, shape)) => {
            let mut band = PredictionBand::from_parts(center, scale, shape, true, method)?;
            // keep the exact profile rather than scale * (profile / scale)
            band.lower = band.center.zip_with(profile, |g, r| g - r)?;
            band.upper = band.center.zip_with(profile, |g, r| g + r)?;
            Ok(band)
        }
        None => PredictionBand::from_parts(center, T::zero(), s_zero(&grid), true, method),
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = (n−1)q`). `sorted` must be ascending and non-empty.
pub fn empirical_quantile<T: Scalar>(sorted: &[T], q: T) -> T {
    let n = sorted.len();
    let h = T::from_usize_lossy(n - 1) * q;
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::from_usize_lossy(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Pointwise empirical quantiles `[q_{α/2}(t), q_{1−α/2}(t)]` of the whole
/// (unsplit) sample. No coverage guarantee.
pub fn naive_band<T: Scalar>(sample: &FunctionalSample<T>, alpha: T) -> Result<PredictionBand<T>> {
    check_alpha(alpha)?;
    if sample.len() < 2 {
        return Err(Error::SampleTooSmall {
            need: 2,
            got: sample.len(),
        });
    }
    let grid = sample.grid().clone();
    let half = alpha / (T::one() + T::one());
    let mut column = vec![T::zero(); sample.len()];
    let mut lo = Vec::with_capacity(grid.len());
    let mut hi = Vec::with_capacity(grid.len());
    for t in 0..grid.len() {
        for (c, y) in column.iter_mut().zip(sample.iter()) {
            *c = y.values()[t];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        lo.push(empirical_quantile(&column, half));
        hi.push(empirical_quantile(&column, T::one() - half));
    }
    let two = T::one() + T::one();
    let center: Vec<T> = lo.iter().zip(&hi).map(|(&a, &b)| (a + b) / two).collect();
    let center = Curve::from_parts_unchecked(grid.clone(), center);
    let profile = Curve::from_parts_unchecked(
        grid.clone(),
        lo.iter().zip(&hi).map(|(&a, &b)| (b - a) / two).collect(),
    );
    let mut band = radius_profile_band(center, &profile, BandMethod::Naive)?;
    band.lower = Curve::from_parts_unchecked(grid.clone(), lo);
    band.upper = Curve::from_parts_unchecked(grid, hi);
    Ok(band)
}

/// Clips the lower bound at `lower_limit`. Curves known to satisfy
/// `y ≥ lower_limit` keep their membership.
pub fn truncate<T: Scalar>(band: &PredictionBand<T>, lower_limit: T) -> PredictionBand<T> {
    let mut out = band.clone();
    out.lower_clip = Some(match band.lower_clip {
        Some(c) => c.max(lower_limit),
        None => lower_limit,
    });
    if !band.full_space {
        out.lower = band
            .lower
            .zip_with(&band.upper, |lo, hi| lo.max(lower_limit).min(hi))
            .expect("band bounds share a grid");
    }
    out
}
