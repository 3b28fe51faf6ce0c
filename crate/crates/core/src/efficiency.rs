//! Band size `Q = ∫(upper − lower)` and checks of the optimality results for
//! the calibration envelope modulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Curve, FunctionalSample};
use crate::modulation::{
    envelope, normalize_as, s_bar_calibration, s_zero, sup_scores, ModulationCurve,
    ModulationKind,
};
use crate::scalar::Scalar;
use crate::split::{scores, PredictionBand};

/// Area and average width of a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeMetric<T> {
    /// `∫(upper − lower)`; infinite for a full-space band.
    pub q: T,
    /// `q / |T|`.
    pub average_width: T,
    pub modulation_kind: ModulationKind,
    /// `2·radius_scale`. `None` once the band is clipped, because the clipped
    /// area no longer equals it.
    pub q_from_radius: Option<T>,
    pub clipped: bool,
    pub full_space: bool,
}

pub fn band_size<T: Scalar>(band: &PredictionBand<T>) -> SizeMetric<T> {
    let kind = band.modulation().kind();
    if band.is_full_space() {
        return SizeMetric {
            q: T::infinity(),
            average_width: T::infinity(),
            modulation_kind: kind,
            q_from_radius: None,
            clipped: band.lower_clip().is_some(),
            full_space: true,
        };
    }
    let width = band
        .upper()
        .zip_with(band.lower(), |u, l| u - l)
        .expect("band bounds share a grid");
    let q = width.integrate();
    let clipped = band.lower_clip().is_some();
    let two = T::one() + T::one();
    SizeMetric {
        q,
        average_width: q / band.grid().length(),
        modulation_kind: kind,
        q_from_radius: (!clipped).then(|| two * band.radius_scale()),
        clipped,
        full_space: false,
    }
}

/// Both sides of `k^{s̄ᶜ} = ∫ max_{j∈ℋ₂} |y_j − g|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeIdentity<T> {
    pub k_sbar_c: T,
    pub envelope_integral: T,
    /// The envelope touched zero and was shifted before normalizing; the
    /// identity is then only approximate.
    pub adjusted: bool,
}

impl<T: Scalar> EnvelopeIdentity<T> {
    pub fn relative_gap(&self) -> T {
        (self.k_sbar_c - self.envelope_integral).abs() / self.envelope_integral.abs()
    }
}

pub fn envelope_identity<T: Scalar>(
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
) -> Result<EnvelopeIdentity<T>> {
    let (s, trimmed) = s_bar_calibration(calibration, g, alpha)?;
    let env = envelope(calibration, g, &trimmed.kept)?;
    let k = kth_score(calibration, g, &s, trimmed.quantile_index)?;
    Ok(EnvelopeIdentity {
        k_sbar_c: k,
        envelope_integral: env.integrate(),
        adjusted: env.values().iter().any(|&v| v <= T::zero()),
    })
}

fn kth_score<T: Scalar>(
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    s: &ModulationCurve<T>,
    rank: usize,
) -> Result<T> {
    let mut r = scores(calibration, g, s)?;
    r.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(r[rank - 1])
}

/// `Q(s⁰)` against `Q(s̄ᶜ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem3Report<T> {
    /// `2|T|·max_t E(t)`.
    pub q_s0: T,
    /// `2∫E`.
    pub q_sbar_c: T,
    /// Both sizes recomputed by scoring the calibration set.
    pub q_s0_scored: Option<T>,
    pub q_sbar_c_scored: Option<T>,
    /// The envelope is constant on the grid (within `1e−9` relative).
    pub equality: bool,
}

impl<T: Scalar> Theorem3Report<T> {
    /// `Q(s⁰) ≥ Q(s̄ᶜ)` up to `1e−9·Q(s⁰)`.
    pub fn inequality_holds(&self) -> bool {
        self.q_s0 >= self.q_sbar_c - T::lit(1e-9) * self.q_s0
    }
}

/// Closed-form sizes from a raw envelope.
pub fn theorem3_from_envelope<T: Scalar>(env: &Curve<T>) -> Theorem3Report<T> {
    let two = T::one() + T::one();
    let hi = env.max();
    let lo = env.min();
    Theorem3Report {
        q_s0: two * env.grid().length() * hi,
        q_sbar_c: two * env.integrate(),
        q_s0_scored: None,
        q_sbar_c_scored: None,
        equality: hi - lo <= T::lit(1e-9) * hi.abs(),
    }
}

pub fn theorem3_check<T: Scalar>(
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
) -> Result<Theorem3Report<T>> {
    let (s, trimmed) = s_bar_calibration(calibration, g, alpha)?;
    let env = envelope(calibration, g, &trimmed.kept)?;
    let mut report = theorem3_from_envelope(&env);
    let two = T::one() + T::one();
    let s0 = s_zero(calibration.grid());
    report.q_s0_scored = Some(two * kth_score(calibration, g, &s0, trimmed.quantile_index)?);
    report.q_sbar_c_scored = Some(two * kth_score(calibration, g, &s, trimmed.quantile_index)?);
    Ok(report)
}

/// Why the strict-improvement result does not apply to an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Theorem4Violation {
    /// Scores tie, so `|ℋ₂|` may exceed the quantile rank.
    ScoreTies,
    /// Condition 1: the candidate equals `s̄ᶜ` at every grid point.
    SameAsEnvelope,
    /// Condition 2: at the sup point `t*` of a curve outside `ℋ₂`, the
    /// candidate exceeds `s̄ᶜ`.
    ExceedsAtArgmax {
        curve: usize,
        grid_index: usize,
        candidate: f64,
        envelope: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem4Report<T> {
    /// `2k` under the candidate modulation.
    pub q_candidate: T,
    /// `2k` under `s̄ᶜ`.
    pub q_sbar_c: T,
    /// Empty when both conditions hold and scores are distinct.
    pub violations: Vec<Theorem4Violation>,
    /// Condition 2 holds at every argmax of every excluded curve, not only
    /// the smallest-index one.
    pub all_argmax_agree: bool,
}

impl<T: Scalar> Theorem4Report<T> {
    pub fn applicable(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn strictly_larger(&self) -> bool {
        self.q_candidate > self.q_sbar_c + T::lit(1e-9) * self.q_sbar_c.abs()
    }

    /// The conclusion holds, or the hypotheses are not met.
    pub fn consistent(&self) -> bool {
        !self.applicable() || self.strictly_larger()
    }
}

/// Smallest grid index where `|y − g|` reaches its maximum.
pub(crate) fn argmax_abs<T: Scalar>(y: &[T], g: &[T]) -> usize {
    argmax_set(y, g)[0]
}

fn argmax_set<T: Scalar>(y: &[T], g: &[T]) -> Vec<usize> {
    let d: Vec<T> = y.iter().zip(g).map(|(&a, &b)| (a - b).abs()).collect();
    let hi = d.iter().copied().fold(T::neg_infinity(), T::max);
    d.iter()
        .enumerate()
        .filter(|(_, &v)| v == hi)
        .map(|(i, _)| i)
        .collect()
}

/// Compares a candidate modulation with `s̄ᶜ` and checks the theorem's
/// hypotheses. `t*_i` is the smallest-index sup point.
pub fn theorem4_check<T: Scalar>(
    s_d: &ModulationCurve<T>,
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
) -> Result<Theorem4Report<T>> {
    s_d.curve().check_grid(calibration.grid())?;
    let (sbar, trimmed) = s_bar_calibration(calibration, g, alpha)?;
    let rank = trimmed.quantile_index;
    let two = T::one() + T::one();
    let q_candidate = two * kth_score(calibration, g, s_d, rank)?;
    let q_sbar_c = two * kth_score(calibration, g, &sbar, rank)?;

    let mut violations = Vec::new();
    let sup = sup_scores(calibration, g)?;
    let mut sorted = sup.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    if sorted.windows(2).any(|w| w[0] == w[1]) || trimmed.kept.len() != rank {
        violations.push(Theorem4Violation::ScoreTies);
    }
    let tol = T::lit(1e-12);
    let differs = s_d
        .values()
        .iter()
        .zip(sbar.values())
        .any(|(&a, &b)| (a - b).abs() > tol * b.abs());
    if !differs {
        violations.push(Theorem4Violation::SameAsEnvelope);
    }
    let mut kept = vec![false; calibration.len()];
    for &j in &trimmed.kept {
        kept[j] = true;
    }
    let mut all_argmax_agree = true;
    for (i, y) in calibration.iter().enumerate().filter(|(i, _)| !kept[*i]) {
        let cands = argmax_set(y.values(), g.values());
        let ok = |t: usize| s_d.values()[t] <= sbar.values()[t];
        let first = cands[0];
        if !ok(first) {
            violations.push(Theorem4Violation::ExceedsAtArgmax {
                curve: i,
                grid_index: first,
                candidate: s_d.values()[first].to_f64_lossy(),
                envelope: sbar.values()[first].to_f64_lossy(),
            });
        }
        if cands.iter().any(|&t| ok(t) != ok(first)) {
            all_argmax_agree = false;
        }
    }
    Ok(Theorem4Report {
        q_candidate,
        q_sbar_c,
        violations,
        all_argmax_agree,
    })
}

/// A modulation that meets both hypotheses of the strict-improvement result
/// whenever some grid point is not a sup point of an excluded curve.
///
/// The raw envelope `E` is raised to the floor `c = min_i E(t*_i)` over the
/// excluded curves and renormalized. Values at the `t*_i` are untouched
/// before normalization and the integral can only grow, so condition 2
/// holds. If `E ≥ c` already, mass is added away from every `t*_i` instead.
pub fn dominated_modulation<T: Scalar>(
    calibration: &FunctionalSample<T>,
    g: &Curve<T>,
    alpha: T,
) -> Result<ModulationCurve<T>> {
    let (sbar, trimmed) = s_bar_calibration(calibration, g, alpha)?;
    let mut kept = vec![false; calibration.len()];
    for &j in &trimmed.kept {
        kept[j] = true;
    }
    let stars: Vec<usize> = calibration
        .iter()
        .enumerate()
        .filter(|(i, _)| !kept[*i])
        .map(|(_, y)| argmax_abs(y.values(), g.values()))
        .collect();
    let base = sbar.values();
    let floor = stars
        .iter()
        .map(|&t| base[t])
        .fold(T::infinity(), T::min);
    let raised: Vec<T> = base.iter().map(|&v| v.max(floor)).collect();
    let changed = raised.iter().zip(base).any(|(a, b)| a != b);
    let values = if changed && floor.is_finite() {
        raised
    } else {
        let mut is_star = vec![false; base.len()];
        for &t in &stars {
            is_star[t] = true;
        }
        if is_star.iter().all(|&b| b) {
            return Err(Error::Pathological(
                "every grid point is a sup point of an excluded curve".into(),
            ));
        }
        let bump = sbar.curve().max();
        base.iter()
            .zip(&is_star)
            .map(|(&v, &star)| if star { v } else { v + bump })
            .collect()
    };
    let curve = Curve::new(g.grid().clone(), values)?;
    normalize_as(&curve, ModulationKind::Custom)
}
