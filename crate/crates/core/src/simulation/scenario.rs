//! Curve generators for the three simulation settings.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bspline::BSplineBasis;
use super::mvn::Mvn;
use crate::error::{Error, Result};
use crate::grid::{make_uniform_grid, Curve, FunctionalSample, Grid};
use crate::scalar::Scalar;

/// Outlier weight used in the contaminated setting unless overridden.
pub const DEFAULT_BETA: f64 = 0.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Randomly shifted harmonics with equicorrelated Gaussian coefficients:
    /// constant variance over the domain.
    #[serde(alias = "s1")]
    S1,
    /// Cubic B-spline expansion whose central coefficient has a tiny
    /// variance.
    #[serde(alias = "s2")]
    S2,
    /// `S2` where each curve is, with probability `β`, an outlier with a
    /// large central coefficient variance.
    #[serde(alias = "s3")]
    S3,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" | "1" => Ok(Scenario::S1),
            "S2" | "2" => Ok(Scenario::S2),
            "S3" | "3" => Ok(Scenario::S3),
            _ => Err(Error::Config(format!("unknown scenario `{s}` (expected S1, S2 or S3)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig<T> {
    pub scenario: Scenario,
    pub n: usize,
    /// Outlier probability; only read by `S3`.
    pub beta: f64,
    pub grid: Arc<Grid<T>>,
    pub seed: u64,
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn new(scenario: Scenario, n: usize, grid: Arc<Grid<T>>, seed: u64) -> Self {
        Self {
            scenario,
            n,
            beta: DEFAULT_BETA,
            grid,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::SampleTooSmall { need: 2, got: self.n });
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta = {} outside [0, 1]", self.beta)));
        }
        Ok(())
    }
}

/// Default evaluation grid: 101 points on `[0, 1]`.
pub fn default_grid<T: Scalar>(p: usize) -> Result<Arc<Grid<T>>> {
    make_uniform_grid(T::zero(), T::one(), p)
}

#[derive(Debug, Clone)]
enum Kind<T> {
    Harmonic {
        coef: Mvn<T>,
        /// `cos(6πt)` and `sin(6πt)` on the grid.
        cos: Vec<T>,
        sin: Vec<T>,
    },
    Spline {
        /// Row-major `p × 13`.
        basis: Vec<T>,
        nb: usize,
        sd: Vec<T>,
        outlier_sd: Vec<T>,
        beta: f64,
    },
}

/// Draws curves of one setting on a fixed grid.
#[derive(Debug, Clone)]
pub struct ScenarioGenerator<T> {
    grid: Arc<Grid<T>>,
    kind: Kind<T>,
}

impl<T: Scalar> ScenarioGenerator<T> {
    pub fn new(scenario: Scenario, grid: Arc<Grid<T>>, beta: f64) -> Result<Self> {
        match scenario {
            Scenario::S1 => {
                let cov: Vec<Vec<T>> = (0..3)
                    .map(|i| (0..3).map(|j| T::lit(if i == j { 1.0 } else { 0.6 })).collect())
                    .collect();
                Self::harmonic(grid, Mvn::new(vec![T::zero(); 3], &cov)?)
            }
            Scenario::S2 => Self::spline(grid, 0.0),
            Scenario::S3 => Self::spline(grid, beta),
        }
    }

    /// Harmonic curves `x₁ + x₂cos(6π(t+u)) + x₃sin(6π(t+u))` with arbitrary
    /// Gaussian coefficients and `u ~ Unif[−1/6, 1/6]`.
    pub fn harmonic(grid: Arc<Grid<T>>, coef: Mvn<T>) -> Result<Self> {
        if coef.dim() != 3 {
            return Err(Error::Config("harmonic coefficients must be 3-dimensional".into()));
        }
        let w = T::lit(6.0 * PI);
        let cos = grid.points().iter().map(|&t| (w * t).cos()).collect();
        let sin = grid.points().iter().map(|&t| (w * t).sin()).collect();
        Ok(Self {
            grid,
            kind: Kind::Harmonic { coef, cos, sin },
        })
    }

    fn spline(grid: Arc<Grid<T>>, beta: f64) -> Result<Self> {
        if grid.start() < T::zero() || grid.end() > T::one() {
            return Err(Error::Config("spline scenarios live on [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("beta = {beta} outside [0, 1]")));
        }
        let b = BSplineBasis::<T>::cubic_deciles();
        let nb = b.len();
        let mut basis = Vec::with_capacity(grid.len() * nb);
        for &t in grid.points() {
            basis.extend(b.eval(t)?);
        }
        let mut sd = vec![T::lit(0.03); nb];
        sd[6] = T::lit(0.003);
        let mut outlier_sd = sd.clone();
        outlier_sd[6] = T::lit(0.3);
        Ok(Self {
            grid,
            kind: Kind::Spline {
                basis,
                nb,
                sd,
                outlier_sd,
                beta,
            },
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    /// One curve's values; also reports whether it came from the outlier
    /// component.
    pub fn draw_values<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<T>, bool) {
        match &self.kind {
            Kind::Harmonic { coef, cos, sin } => {
                let x = coef.sample(rng);
                let u: f64 = rng.random_range(-1.0 / 6.0..=1.0 / 6.0);
                let (su, cu) = T::lit(6.0 * PI * u).sin_cos();
                // cos(a+b), sin(a+b) expanded to reuse the grid tables
                let v = cos
                    .iter()
                    .zip(sin)
                    .map(|(&c, &s)| {
                        let cs = c * cu - s * su;
                        let sn = s * cu + c * su;
                        x[0] + x[1] * cs + x[2] * sn
                    })
                    .collect();
                (v, false)
            }
            Kind::Spline {
                basis,
                nb,
                sd,
                outlier_sd,
                beta,
            } => {
                let outlier = *beta > 0.0 && rng.random_bool(*beta);
                let sds = if outlier { outlier_sd } else { sd };
                let c: Vec<T> = sds
                    .iter()
                    .map(|&s| s * T::lit(rng.sample(rand_distr::StandardNormal)))
                    .collect();
                let v = basis
                    .chunks_exact(*nb)
                    .map(|row| row.iter().zip(&c).map(|(&b, &c)| b * c).sum())
                    .collect();
                (v, outlier)
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Curve<T> {
        Curve::from_parts_unchecked(self.grid.clone(), self.draw_values(rng).0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<FunctionalSample<T>> {
        let curves = (0..n).map(|_| self.draw(rng)).collect();
        FunctionalSample::new(self.grid.clone(), curves)
    }
}

/// `n` curves of the configured setting, seeded by `config.seed`.
pub fn gen_scenario<T: Scalar>(config: &ScenarioConfig<T>) -> Result<FunctionalSample<T>> {
    config.validate()?;
    let generator = ScenarioGenerator::new(config.scenario, config.grid.clone(), config.beta)?;
    generator.sample(config.n, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::std_curve;

    #[test]
    fn forced_coefficients_give_constant_curves() {
        let g = default_grid::<f64>(21).unwrap();
        let coef = Mvn::new(vec![1.0, 0.0, 0.0], &vec![vec![0.0; 3]; 3]).unwrap();
        let generator = ScenarioGenerator::harmonic(g, coef).unwrap();
        let s = generator.sample(5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s.iter().all(|c| c.values().iter().all(|&v| (v - 1.0).abs() < 1e-15)));
    }

    #[test]
    fn harmonic_matches_direct_formula() {
        let g = default_grid::<f64>(11).unwrap();
        let coef = Mvn::new(vec![0.5, 1.0, -2.0], &vec![vec![0.0; 3]; 3]).unwrap();
        let generator = ScenarioGenerator::harmonic(g.clone(), coef).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (v, _) = generator.draw_values(&mut rng);
        // replay the same stream to recover u
        let mut replay = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3 {
            let _: f64 = replay.sample(rand_distr::StandardNormal);
        }
        let u: f64 = replay.random_range(-1.0 / 6.0..=1.0 / 6.0);
        for (&t, &y) in g.points().iter().zip(&v) {
            let a = 6.0 * PI * (t + u);
            assert!((y - (0.5 + a.cos() - 2.0 * a.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn scenario_two_variance_dips_in_the_middle() {
        let cfg = ScenarioConfig::new(Scenario::S2, 10_000, default_grid::<f64>(101).unwrap(), 3);
        let s = gen_scenario(&cfg).unwrap();
        let sd = std_curve(&s).unwrap();
        let v = sd.values();
        assert!(v[50] < 0.5 * v[5]);
        assert!(v[50] < 0.5 * v[95]);
    }

    #[test]
    fn scenario_three_outlier_fraction() {
        let g = default_grid::<f64>(11).unwrap();
        let generator = ScenarioGenerator::new(Scenario::S3, g, 0.06).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let hits = (0..10_000).filter(|_| generator.draw_values(&mut rng).1).count();
        assert!((hits as f64 / 1e4 - 0.06).abs() < 0.01, "{hits}");
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let g = default_grid::<f64>(31).unwrap();
        for sc in [Scenario::S1, Scenario::S2, Scenario::S3] {
            let cfg = ScenarioConfig::new(sc, 12, g.clone(), 99);
            let a = gen_scenario(&cfg).unwrap();
            let b = gen_scenario(&cfg).unwrap();
            assert_eq!(a.curves(), b.curves());
        }
    }

    #[test]
    fn parse_scenarios() {
        assert_eq!("s3".parse::<Scenario>().unwrap(), Scenario::S3);
        assert!("S4".parse::<Scenario>().is_err());
    }
}
