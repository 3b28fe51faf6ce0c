//! Monte Carlo coverage and size experiments.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::scenario::{default_grid, Scenario, ScenarioGenerator, DEFAULT_BETA};
use crate::efficiency::band_size;
use crate::error::{Error, Result};
use crate::grid::{Curve, FunctionalSample};
use crate::modulation::{s_bar_calibration, s_bar_training};
use crate::scalar::{LevelScalar, Scalar};
use crate::split::{
    fit_band, fit_band_smoothed, naive_band, pointwise_band, split, Calibration, MeanPredictor,
    ModulationRule, PredictionBand, SplitIndices,
};

/// `1 − ⌊(l+1)α⌋/(l+1)`: exact coverage of the non-smoothed band.
pub fn theoretical_coverage<A: LevelScalar>(l: usize, alpha: A) -> A {
    let lp1 = A::from_count(l + 1);
    let fl = (lp1.clone() * alpha).floor_int();
    A::one() - A::from_count(fl.max(0) as usize) / lp1
}

/// `1 − α`: exact coverage of the smoothed band.
pub fn theoretical_coverage_smoothed<A: LevelScalar>(alpha: A) -> A {
    A::one() - alpha
}

/// `1 − α ≤ coverage < 1 − α + 1/(l+1)`.
pub fn validity_sandwich_holds<A: LevelScalar>(l: usize, alpha: A) -> bool {
    let cov = theoretical_coverage(l, alpha.clone());
    let lo = A::one() - alpha;
    let hi = lo.clone() + A::one() / A::from_count(l + 1);
    lo <= cov && cov < hi
}

/// A band construction compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    /// Conformal, constant modulation.
    S0,
    /// Conformal, standard-deviation modulation.
    Sigma,
    /// Conformal, trimmed training envelope.
    Sbar,
    /// Pointwise empirical quantiles of the whole sample.
    Naive,
    /// Per-point conformal intervals.
    Pointwise,
}

impl MethodSpec {
    pub const CONFORMAL: [MethodSpec; 3] = [MethodSpec::S0, MethodSpec::Sigma, MethodSpec::Sbar];

    pub fn name(self) -> &'static str {
        match self {
            MethodSpec::S0 => "s0",
            MethodSpec::Sigma => "sigma",
            MethodSpec::Sbar => "sbar",
            MethodSpec::Naive => "naive",
            MethodSpec::Pointwise => "pointwise",
        }
    }

    pub fn is_conformal(self) -> bool {
        matches!(self, MethodSpec::S0 | MethodSpec::Sigma | MethodSpec::Sbar)
    }

    fn rule<T: Scalar>(self) -> Option<ModulationRule<T>> {
        match self {
            MethodSpec::S0 => Some(ModulationRule::SZero),
            MethodSpec::Sigma => Some(ModulationRule::SSigma),
            MethodSpec::Sbar => Some(ModulationRule::SBar),
            _ => None,
        }
    }

    /// Fits this method's band. `tau` switches conformal methods to the
    /// smoothed construction.
    pub fn fit<T: Scalar>(
        self,
        sample: &FunctionalSample<T>,
        alpha: T,
        sp: &SplitIndices,
        tau: Option<T>,
    ) -> Result<PredictionBand<T>> {
        match (self.rule(), tau) {
            (Some(rule), None) => fit_band(sample, alpha, sp, &MeanPredictor, &rule),
            (Some(rule), Some(tau)) => fit_band_smoothed(sample, alpha, sp, &MeanPredictor, &rule, tau),
            (None, _) if self == MethodSpec::Naive => naive_band(sample, alpha),
            (None, _) => pointwise_band(sample, alpha, sp, &MeanPredictor),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s0" | "s_zero" => Ok(MethodSpec::S0),
            "sigma" | "s_sigma" => Ok(MethodSpec::Sigma),
            "sbar" | "s_bar" => Ok(MethodSpec::Sbar),
            "naive" => Ok(MethodSpec::Naive),
            "pointwise" => Ok(MethodSpec::Pointwise),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected s0, sigma, sbar, naive or pointwise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub beta: f64,
    pub grid_points: usize,
    pub alpha: f64,
    pub rho: f64,
    /// `N`.
    pub replications: usize,
    /// `M`, fresh curves per replication.
    pub test_curves: usize,
    pub methods: Vec<MethodSpec>,
    pub smoothed: bool,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::S1,
            n: 198,
            beta: DEFAULT_BETA,
            grid_points: 101,
            alpha: 0.1,
            rho: 0.5,
            replications: 500,
            test_curves: 10_000,
            methods: vec![MethodSpec::S0, MethodSpec::Sigma, MethodSpec::Sbar, MethodSpec::Naive],
            smoothed: false,
            master_seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications < 1 {
            return bad("replications must be at least 1".into());
        }
        if self.test_curves < 1 {
            return bad("test_curves must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta = {} outside [0, 1]", self.beta));
        }
        if self.n < 2 {
            return bad(format!("n = {} is below 2", self.n));
        }
        if self.grid_points < 2 {
            return bad(format!("grid_points = {} is below 2", self.grid_points));
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        split(self.n, self.rho, 0).map(|_| ())
    }

    /// Calibration set size.
    pub fn l(&self) -> usize {
        (self.n as f64 * self.rho).round() as usize
    }
}

/// Independent stream for replication `index`.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Fraction of `m` fresh curves inside `band` (every grid point).
pub fn empirical_conditional_coverage<T: Scalar, R: Rng + ?Sized>(
    band: &PredictionBand<T>,
    generator: &ScenarioGenerator<T>,
    m: usize,
    rng: &mut R,
) -> T {
    let hits = (0..m)
        .filter(|_| band.contains_values(&generator.draw_values(rng).0))
        .count();
    T::from_usize_lossy(hits) / T::from_usize_lossy(m)
}

/// Per grid point, fraction of `m` fresh curves inside the band's interval.
pub fn pointwise_coverage_curve<T: Scalar, R: Rng + ?Sized>(
    band: &PredictionBand<T>,
    generator: &ScenarioGenerator<T>,
    m: usize,
    rng: &mut R,
) -> Curve<T> {
    let p = band.grid().len();
    let mut hits = vec![0usize; p];
    for _ in 0..m {
        let y = generator.draw_values(rng).0;
        for (i, h) in hits.iter_mut().enumerate() {
            if band.contains_at(i, y[i]) {
                *h += 1;
            }
        }
    }
    let denom = T::from_usize_lossy(m);
    Curve::from_parts_unchecked(
        band.grid().clone(),
        hits.into_iter().map(|h| T::from_usize_lossy(h) / denom).collect(),
    )
}

/// Outcome of one method in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: MethodSpec,
    pub coverage: f64,
    /// Band area; `None` for a full-space band.
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub split_seed: u64,
    pub tau: Option<f64>,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: MethodSpec,
    pub replications: usize,
    pub mean: f64,
    pub sd: f64,
    /// 99% Student-t interval for the unconditional coverage, `N − 1`
    /// degrees of freedom.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// The interval contains `1 − α`.
    pub covers_nominal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scenario: Scenario,
    pub n: usize,
    pub l: usize,
    pub alpha: f64,
    pub smoothed: bool,
    pub replications: usize,
    pub test_curves: usize,
    pub theoretical_coverage: f64,
    pub methods: Vec<MethodCoverage>,
    /// Competing constructions that are not implemented.
    pub not_reproduced: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSize {
    pub method: MethodSpec,
    /// Replications with a finite band.
    pub replications: usize,
    pub mean: f64,
    pub sd: f64,
    pub full_space: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub scenario: Scenario,
    pub n: usize,
    pub alpha: f64,
    pub methods: Vec<MethodSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub coverage: CoverageReport,
    pub size: SizeReport,
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<ReplicationFailure>,
}

fn replicate<T: Scalar>(
    cfg: &ExperimentConfig,
    generator: &ScenarioGenerator<T>,
    index: usize,
) -> Result<ReplicationRecord> {
    let mut rng = replication_rng(cfg.master_seed, index as u64);
    let sample = generator.sample(cfg.n, &mut rng)?;
    let split_seed = rng.next_u64();
    let sp = split(cfg.n, cfg.rho, split_seed)?;
    let tau = cfg.smoothed.then(|| rng.random::<f64>());
    let alpha = T::lit(cfg.alpha);
    let bands = cfg
        .methods
        .iter()
        .map(|m| m.fit(&sample, alpha, &sp, tau.filter(|_| m.is_conformal()).map(T::lit)))
        .collect::<Result<Vec<_>>>()?;
    let mut hits = vec![0usize; bands.len()];
    for _ in 0..cfg.test_curves {
        let y = generator.draw_values(&mut rng).0;
        for (h, b) in hits.iter_mut().zip(&bands) {
            if b.contains_values(&y) {
                *h += 1;
            }
        }
    }
    let outcomes = cfg
        .methods
        .iter()
        .zip(&bands)
        .zip(hits)
        .map(|((&method, band), h)| MethodOutcome {
            method,
            coverage: h as f64 / cfg.test_curves as f64,
            q: (!band.is_full_space()).then(|| band_size(band).q.to_f64_lossy()),
        })
        .collect();
    Ok(ReplicationRecord {
        index,
        split_seed,
        tau,
        outcomes,
    })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Runs all replications (in parallel, aggregated in index order) and
/// summarizes coverage and size per method.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let grid = default_grid::<T>(cfg.grid_points)?;
    let generator = ScenarioGenerator::new(cfg.scenario, grid, cfg.beta)?;
    let results: Vec<Result<ReplicationRecord>> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| replicate(cfg, &generator, i))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(ReplicationFailure {
                index,
                message: e.to_string(),
            }),
        }
    }
    let target = 1.0 - cfg.alpha;
    let mut cov_methods = Vec::new();
    let mut size_methods = Vec::new();
    for (k, &method) in cfg.methods.iter().enumerate() {
        let cov: Vec<f64> = records.iter().map(|r| r.outcomes[k].coverage).collect();
        let (mean, sd) = mean_sd(&cov);
        let ci = (cov.len() > 1 && sd > 0.0).then(|| {
            let t = StudentsT::new(0.0, 1.0, (cov.len() - 1) as f64)
                .expect("positive degrees of freedom")
                .inverse_cdf(0.995);
            let half = t * sd / (cov.len() as f64).sqrt();
            (mean - half, mean + half)
        });
        cov_methods.push(MethodCoverage {
            method,
            replications: cov.len(),
            mean,
            sd,
            ci_low: ci.map(|c| c.0),
            ci_high: ci.map(|c| c.1),
            covers_nominal: ci.map(|(lo, hi)| lo <= target && target <= hi),
        });
        let qs: Vec<f64> = records.iter().filter_map(|r| r.outcomes[k].q).collect();
        let (mean, sd) = mean_sd(&qs);
        size_methods.push(MethodSize {
            method,
            replications: qs.len(),
            mean,
            sd,
            full_space: records.len() - qs.len(),
        });
    }
    let l = cfg.l();
    let theoretical = if cfg.smoothed {
        theoretical_coverage_smoothed(cfg.alpha)
    } else {
        theoretical_coverage(l, cfg.alpha)
    };
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        coverage: CoverageReport {
            scenario: cfg.scenario,
            n: cfg.n,
            l,
            alpha: cfg.alpha,
            smoothed: cfg.smoothed,
            replications: cfg.replications,
            test_curves: cfg.test_curves,
            theoretical_coverage: theoretical,
            methods: cov_methods,
            not_reproduced: vec!["bootstrap".into(), "band_depth".into(), "modified_band_depth".into()],
        },
        size: SizeReport {
            scenario: cfg.scenario,
            n: cfg.n,
            alpha: cfg.alpha,
            methods: size_methods,
        },
        records,
        failures,
    })
}

/// Setup for measuring the marginal coverage law directly: each trial draws
/// a fresh sample, fits one band and tests one fresh curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageLawConfig {
    pub scenario: Scenario,
    pub m: usize,
    pub l: usize,
    pub alpha: f64,
    pub trials: usize,
    /// Draw `τ ~ Unif[0, 1]` per trial and use the smoothed band.
    pub smoothed: bool,
    pub grid_points: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageLawEstimate {
    pub hits: usize,
    pub trials: usize,
    pub theoretical: f64,
}

impl CoverageLawEstimate {
    pub fn frequency(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    /// Binomial standard error under the theoretical coverage.
    pub fn std_error(&self) -> f64 {
        (self.theoretical * (1.0 - self.theoretical) / self.trials as f64).sqrt()
    }

    pub fn z_score(&self) -> f64 {
        (self.frequency() - self.theoretical) / self.std_error()
    }
}

/// Hit frequency of the constant-modulation band over independent trials.
pub fn coverage_law_frequency<T: Scalar>(cfg: &CoverageLawConfig) -> Result<CoverageLawEstimate> {
    let grid = default_grid::<T>(cfg.grid_points)?;
    let generator = ScenarioGenerator::new(cfg.scenario, grid, DEFAULT_BETA)?;
    let n = cfg.m + cfg.l;
    let sp = SplitIndices::new((0..cfg.m).collect(), (cfg.m..n).collect(), cfg.seed)?;
    let alpha = T::lit(cfg.alpha);
    let hits = (0..cfg.trials)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let mut rng = replication_rng(cfg.seed, i as u64);
            let sample = generator.sample(n, &mut rng)?;
            let cal = Calibration::fit(&sample, &sp, &MeanPredictor, &ModulationRule::SZero, alpha)?;
            let band = if cfg.smoothed {
                let tau = T::lit(rng.random::<f64>());
                cal.smoothed_band(alpha, tau)?
            } else {
                cal.band(alpha)?
            };
            Ok(band.contains_values(&generator.draw_values(&mut rng).0))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&h| h)
        .count();
    let theoretical = if cfg.smoothed {
        theoretical_coverage_smoothed(cfg.alpha)
    } else {
        theoretical_coverage(cfg.l, cfg.alpha)
    };
    Ok(CoverageLawEstimate {
        hits,
        trials: cfg.trials,
        theoretical,
    })
}

/// `∫|s̄ − s̄ᶜ|`: distance between the training (usable) and calibration
/// envelope modulations, both centred on the training mean.
pub fn envelope_modulation_gap<T: Scalar>(
    sample: &FunctionalSample<T>,
    sp: &SplitIndices,
    alpha: T,
) -> Result<T> {
    let training = sample.select(&sp.training)?;
    let calibration = sample.select(&sp.calibration)?;
    let g = crate::grid::mean_curve(&training)?;
    let t_fn = s_bar_training(&training, &g, alpha)?;
    let (c_fn, _) = s_bar_calibration(&calibration, &g, alpha)?;
    let diff = t_fn.curve().zip_with(c_fn.curve(), |a, b| (a - b).abs())?;
    Ok(diff.integrate())
}
