//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::efficiency::band_size;
use crate::error::{Error, Result};
use crate::grid::{Curve, FunctionalSample};
use crate::io::{
    read_curves, write_band, write_band_table, write_coverage_table, write_json, write_replications,
    write_size_table, BandRecord, FitMeta,
};
use crate::simulation::{run_experiment, ExperimentConfig, MethodSpec, Scenario};
use crate::split::{
    fit_band, fit_band_smoothed, split, truncate, FixedPredictor, MeanPredictor, ModulationRule, PointPredictor,
    PredictionBand,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_STATISTICAL: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "funcband", version, about = "Conformal prediction bands for functional data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one band to a curve table.
    Band(BandArgs),
    /// Run a Monte Carlo coverage and size experiment.
    Simulate(SimulateArgs),
    /// Fit several bands to the same data and tabulate them side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct BandArgs {
    /// Curve table (CSV, first row = grid).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    /// Fraction of curves used for calibration.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// s0, sigma, sbar or file:<path> (curve table whose first row is used).
    #[arg(long, default_value = "s0")]
    pub modulation: String,
    /// mean or file:<path>.
    #[arg(long, default_value = "mean")]
    pub predictor: String,
    /// Smoothed (randomized) band.
    #[arg(long)]
    pub smoothed: bool,
    /// Randomization value in [0, 1]; drawn from the seed when omitted.
    #[arg(long, requires = "smoothed")]
    pub tau: Option<f64>,
    /// Clip the lower bound at this value.
    #[arg(long, allow_hyphen_values = true)]
    pub truncate: Option<f64>,
    /// Band record (JSON).
    #[arg(long)]
    pub output: PathBuf,
    /// Plot table (CSV: t, lower, center, upper).
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment config (TOML). Flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Number of replications.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Fresh curves per replication.
    #[arg(long)]
    pub test_curves: Option<usize>,
    /// Comma-separated list of s0, sigma, sbar, naive, pointwise.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<MethodSpec>>,
    #[arg(long)]
    pub smoothed: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated list of s0, sigma, sbar, naive, pointwise.
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<MethodSpec>,
    /// Curves for the pointwise coverage curves; the input is used when
    /// omitted.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_io() {
        EXIT_IO
    } else if e.is_statistical() {
        EXIT_STATISTICAL
    } else {
        EXIT_CONFIG
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Band(a) => cmd_band(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Compare(a) => cmd_compare(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_single_curve(path: &Path, like: &FunctionalSample<f64>) -> Result<Curve<f64>> {
    let table = read_curves::<f64>(path)?;
    let curve = table.curves()[0].clone();
    if table.grid().as_ref() != like.grid().as_ref() {
        return Err(Error::GridMismatch {
            expected: like.grid().len(),
            a: like.grid().start(),
            b: like.grid().end(),
        });
    }
    // rebind to the sample's grid so shared-grid checks pass by pointer
    Curve::new(like.grid().clone(), curve.into_values())
}

fn parse_modulation(spec: &str, sample: &FunctionalSample<f64>) -> Result<ModulationRule<f64>> {
    match spec {
        "s0" => Ok(ModulationRule::SZero),
        "sigma" => Ok(ModulationRule::SSigma),
        "sbar" => Ok(ModulationRule::SBar),
        other => match other.strip_prefix("file:") {
            Some(path) => ModulationRule::fixed(&load_single_curve(Path::new(path), sample)?),
            None => Err(Error::Config(format!(
                "unknown modulation `{other}` (expected s0, sigma, sbar or file:<path>)"
            ))),
        },
    }
}

fn parse_predictor(spec: &str, sample: &FunctionalSample<f64>) -> Result<Box<dyn PointPredictor<f64>>> {
    match spec {
        "mean" => Ok(Box::new(MeanPredictor)),
        other => match other.strip_prefix("file:") {
            Some(path) => Ok(Box::new(FixedPredictor(load_single_curve(Path::new(path), sample)?))),
            None => Err(Error::Config(format!(
                "unknown predictor `{other}` (expected mean or file:<path>)"
            ))),
        },
    }
}

fn cmd_band(a: &BandArgs) -> Result<i32> {
    let sample = read_curves::<f64>(&a.input)?;
    let rule = parse_modulation(&a.modulation, &sample)?;
    let predictor = parse_predictor(&a.predictor, &sample)?;
    let sp = split(sample.len(), a.rho, a.seed)?;
    let tau = a.smoothed.then(|| {
        a.tau.unwrap_or_else(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            rng.set_stream(1);
            rng.random::<f64>()
        })
    });
    let band = match tau {
        Some(t) => fit_band_smoothed(&sample, a.alpha, &sp, predictor.as_ref(), &rule, t)?,
        None => fit_band(&sample, a.alpha, &sp, predictor.as_ref(), &rule)?,
    };
    if band.is_full_space() {
        eprintln!(
            "warning: alpha = {} is below 1/(l+1) = {:.6} with l = {}; the band is the whole function space",
            a.alpha,
            1.0 / (sp.l() as f64 + 1.0),
            sp.l()
        );
    }
    let band = match a.truncate {
        Some(c) => truncate(&band, c),
        None => band,
    };
    let meta = FitMeta {
        modulation_rule: a.modulation.clone(),
        predictor: predictor.describe(),
        rho: Some(a.rho),
        seed: Some(a.seed),
        training_size: Some(sp.m()),
        calibration_size: Some(sp.l()),
        tau,
        ..FitMeta::default()
    };
    write_band(&a.output, &BandRecord::from_band(&band, a.alpha, meta))?;
    if let Some(t) = &a.table {
        write_band_table(t, &band)?;
    }
    let size = band_size(&band);
    println!(
        "m = {}, l = {}, radius = {}, Q = {}, average width = {}, {}",
        sp.m(),
        sp.l(),
        band.radius_scale(),
        size.q,
        size.average_width,
        if band.is_closed() { "closed" } else { "open" }
    );
    Ok(EXIT_OK)
}

fn simulate_config(a: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str::<ExperimentConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = a.scenario {
        cfg.scenario = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.beta {
        cfg.beta = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.rho {
        cfg.rho = v;
    }
    if let Some(v) = a.grid_points {
        cfg.grid_points = v;
    }
    if let Some(v) = a.replications {
        cfg.replications = v;
    }
    if let Some(v) = a.test_curves {
        cfg.test_curves = v;
    }
    if let Some(v) = &a.methods {
        cfg.methods = v.clone();
    }
    if a.smoothed {
        cfg.smoothed = true;
    }
    if let Some(v) = a.seed {
        cfg.master_seed = v;
    }
    Ok(cfg)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let cfg = simulate_config(a)?;
    if cfg.methods.is_empty() {
        eprintln!("error: no methods requested");
        return Ok(EXIT_USAGE);
    }
    let out = run_experiment::<f64>(&cfg)?;
    fs::create_dir_all(&a.output_dir)?;
    write_coverage_table(a.output_dir.join("coverage.csv"), &out.coverage)?;
    write_size_table(a.output_dir.join("size.csv"), &out.size)?;
    write_replications(a.output_dir.join("replications.csv"), &out.records)?;
    write_json(
        a.output_dir.join("report.json"),
        &serde_json::json!({
            "config": out.config,
            "coverage": out.coverage,
            "size": out.size,
            "failures": out.failures,
        }),
    )?;
    println!(
        "{} n = {} alpha = {} N = {} M = {}; theoretical coverage {}",
        cfg.scenario, cfg.n, cfg.alpha, cfg.replications, cfg.test_curves, out.coverage.theoretical_coverage
    );
    println!("{:<10} {:>9} {:>9} {:>11} {:>11}", "method", "coverage", "(sd)", "Q", "(sd)");
    for (c, s) in out.coverage.methods.iter().zip(&out.size.methods) {
        println!(
            "{:<10} {:>9.3} {:>9.3} {:>11.4} {:>11.4}",
            c.method.name(),
            c.mean,
            c.sd,
            s.mean,
            s.sd
        );
    }
    if !out.failures.is_empty() {
        eprintln!("error: {} replication(s) failed", out.failures.len());
        for f in out.failures.iter().take(5) {
            eprintln!("  replication {}: {}", f.index, f.message);
        }
        return Ok(EXIT_STATISTICAL);
    }
    Ok(EXIT_OK)
}

fn fmt_bound(band: &PredictionBand<f64>, v: f64, upper: bool) -> String {
    match (band.is_full_space(), upper) {
        (true, false) => "-inf".into(),
        (true, true) => "inf".into(),
        _ => v.to_string(),
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<i32> {
    if a.methods.is_empty() {
        eprintln!("error: no methods requested");
        return Ok(EXIT_USAGE);
    }
    let sample = read_curves::<f64>(&a.input)?;
    let eval = match &a.test {
        Some(p) => {
            let t = read_curves::<f64>(p)?;
            if t.grid().as_ref() != sample.grid().as_ref() {
                return Err(Error::GridMismatch {
                    expected: sample.grid().len(),
                    a: sample.grid().start(),
                    b: sample.grid().end(),
                });
            }
            t
        }
        None => sample.clone(),
    };
    let sp = split(sample.len(), a.rho, a.seed)?;
    let bands = a
        .methods
        .iter()
        .map(|m| m.fit(&sample, a.alpha, &sp, None))
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&a.output_dir)?;
    let grid = sample.grid();

    let mut w = csv::Writer::from_path(a.output_dir.join("bands.csv"))?;
    let mut header = vec!["t".to_string()];
    for m in &a.methods {
        header.extend(["lower", "center", "upper"].map(|s| format!("{m}_{s}")));
    }
    w.write_record(&header)?;
    for (i, t) in grid.points().iter().enumerate() {
        let mut row = vec![t.to_string()];
        for b in &bands {
            row.push(fmt_bound(b, b.lower().values()[i], false));
            row.push(b.center().values()[i].to_string());
            row.push(fmt_bound(b, b.upper().values()[i], true));
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(a.output_dir.join("pointwise_coverage.csv"))?;
    let mut header = vec!["t".to_string()];
    header.extend(a.methods.iter().map(|m| m.to_string()));
    w.write_record(&header)?;
    let denom = eval.len() as f64;
    for (i, t) in grid.points().iter().enumerate() {
        let mut row = vec![t.to_string()];
        for b in &bands {
            let inside = eval.iter().filter(|y| b.contains_at(i, y.values()[i])).count();
            row.push((inside as f64 / denom).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(a.output_dir.join("summary.csv"))?;
    w.write_record(["method", "q", "average_width", "full_space", "coverage"])?;
    println!("{:<10} {:>12} {:>14} {:>9}", "method", "Q", "average width", "coverage");
    for (m, b) in a.methods.iter().zip(&bands) {
        let size = band_size(b);
        let cov = eval.iter().filter(|y| b.contains_values(y.values())).count() as f64 / denom;
        w.write_record([
            m.to_string(),
            size.q.to_string(),
            size.average_width.to_string(),
            b.is_full_space().to_string(),
            cov.to_string(),
        ])?;
        println!("{:<10} {:>12.6} {:>14.6} {:>9.3}", m.name(), size.q, size.average_width, cov);
    }
    w.flush()?;

    let find = |spec: MethodSpec| a.methods.iter().position(|&m| m == spec).map(|i| &bands[i]);
    if let (Some(sim), Some(pw)) = (find(MethodSpec::S0), find(MethodSpec::Pointwise)) {
        let inside = sim.is_full_space()
            || (0..grid.len()).all(|i| {
                sim.lower().values()[i] <= pw.lower().values()[i] && pw.upper().values()[i] <= sim.upper().values()[i]
            });
        println!(
            "subset check: pointwise band inside the s0 band at every grid point: {}",
            if inside { "yes" } else { "NO" }
        );
        if !inside {
            return Ok(EXIT_STATISTICAL);
        }
    }
    Ok(EXIT_OK)
}
