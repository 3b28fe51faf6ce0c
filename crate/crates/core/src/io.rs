//! Curve tables, band records and report files.
//!
//! Curve tables are CSV: the first row holds the grid points, every later
//! row one curve. If the first header cell is `id`, the first column holds
//! curve identifiers. Lines starting with `#` are ignored.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Curve, FunctionalSample, Grid};
use crate::modulation::{ModulationCurve, ModulationKind};
use crate::scalar::Scalar;
use crate::simulation::{CoverageReport, ReplicationRecord, SizeReport};
use crate::split::{BandMethod, PredictionBand, SmoothedParams};

/// Relative tolerance for grid uniformity when reading text files, looser
/// than the in-memory invariant to absorb decimal rounding.
pub const GRID_READ_TOLERANCE: f64 = 1e-9;

pub const BAND_SCHEMA: &str = "funcband.band.v1";

#[derive(Debug, Clone)]
pub struct CurveTable<T> {
    pub sample: FunctionalSample<T>,
    pub ids: Option<Vec<String>>,
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn parse_cell<T: Scalar>(cell: &str, row: usize, column: usize) -> Result<T> {
    let v: f64 = cell.parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
        row,
        column,
        message: format!("`{cell}`: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column,
            message: format!("`{cell}` is not finite"),
        });
    }
    Ok(T::lit(v))
}

/// Reads a curve table. Rows and columns in errors are 1-based.
pub fn read_curve_table<T: Scalar>(path: impl AsRef<Path>) -> Result<CurveTable<T>> {
    let mut rdr = reader(path.as_ref())?;
    let mut records = rdr.records();
    let header = records
        .next()
        .ok_or_else(|| Error::BadGrid("file is empty".into()))??;
    let row_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line() as usize);
    let header_row = row_of(&header);
    let with_ids = header.get(0).is_some_and(|c| c.eq_ignore_ascii_case("id"));
    let skip = usize::from(with_ids);
    let points = header
        .iter()
        .enumerate()
        .skip(skip)
        .map(|(c, cell)| parse_cell::<T>(cell, header_row, c + 1))
        .collect::<Result<Vec<T>>>()?;
    let grid = Arc::new(Grid::from_points(&points, T::lit(GRID_READ_TOLERANCE))?);
    let p = grid.len();
    let mut rows = Vec::new();
    let mut ids = Vec::new();
    for rec in records {
        let rec = rec?;
        let row = row_of(&rec);
        if rec.len() != p + skip {
            return Err(Error::RaggedRow {
                row,
                expected: p + skip,
                got: rec.len(),
            });
        }
        if with_ids {
            ids.push(rec[0].to_string());
        }
        rows.push(
            rec.iter()
                .enumerate()
                .skip(skip)
                .map(|(c, cell)| parse_cell::<T>(cell, row, c + 1))
                .collect::<Result<Vec<T>>>()?,
        );
    }
    Ok(CurveTable {
        sample: FunctionalSample::from_rows(grid, rows)?,
        ids: with_ids.then_some(ids),
    })
}

pub fn read_curves<T: Scalar>(path: impl AsRef<Path>) -> Result<FunctionalSample<T>> {
    read_curve_table(path).map(|t| t.sample)
}

pub fn write_curve_table<T: Scalar>(
    path: impl AsRef<Path>,
    sample: &FunctionalSample<T>,
    ids: Option<&[String]>,
) -> Result<()> {
    if let Some(ids) = ids {
        if ids.len() != sample.len() {
            return Err(Error::LengthMismatch {
                expected: sample.len(),
                got: ids.len(),
            });
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ids.map(|_| "id".to_string()).into_iter().collect();
    header.extend(sample.grid().points().iter().map(|t| fmt_num(*t)));
    w.write_record(&header)?;
    for (i, c) in sample.iter().enumerate() {
        let mut row: Vec<String> = ids.map(|ids| ids[i].clone()).into_iter().collect();
        row.extend(c.values().iter().map(|v| fmt_num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves<T: Scalar>(path: impl AsRef<Path>, sample: &FunctionalSample<T>) -> Result<()> {
    write_curve_table(path, sample, None)
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_num<T: Scalar>(v: T) -> String {
    format!("{}", v.to_f64_lossy())
}

/// Everything needed to redraw a band and to refit it from the same data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRecord {
    pub schema: String,
    pub grid_start: f64,
    pub grid_end: f64,
    pub grid_points: usize,
    pub center: Vec<f64>,
    pub modulation: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub radius_scale: f64,
    pub closed: bool,
    pub full_space: bool,
    pub lower_clip: Option<f64>,
    pub method: BandMethod,
    pub modulation_kind: ModulationKind,
    pub alpha: f64,
    pub meta: FitMeta,
}

/// How a band was fitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub modulation_rule: String,
    pub predictor: String,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
    pub training_size: Option<usize>,
    pub calibration_size: Option<usize>,
    pub tau: Option<f64>,
    pub tie_right: Option<usize>,
    pub tie_left: Option<usize>,
}

impl BandRecord {
    pub fn from_band<T: Scalar>(band: &PredictionBand<T>, alpha: T, mut meta: FitMeta) -> Self {
        let v = |c: &Curve<T>| c.values().iter().map(|x| x.to_f64_lossy()).collect();
        if let Some(sm) = band.smoothing() {
            meta.tau = Some(sm.tau.to_f64_lossy());
            meta.tie_right = Some(sm.tie_right);
            meta.tie_left = Some(sm.tie_left);
        }
        let grid = band.grid();
        Self {
            schema: BAND_SCHEMA.into(),
            grid_start: grid.start().to_f64_lossy(),
            grid_end: grid.end().to_f64_lossy(),
            grid_points: grid.len(),
            center: v(band.center()),
            modulation: v(band.modulation().curve()),
            lower: v(band.lower()),
            upper: v(band.upper()),
            radius_scale: band.radius_scale().to_f64_lossy(),
            closed: band.is_closed(),
            full_space: band.is_full_space(),
            lower_clip: band.lower_clip().map(|c| c.to_f64_lossy()),
            method: band.method(),
            modulation_kind: band.modulation().kind(),
            alpha: alpha.to_f64_lossy(),
            meta,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.schema != BAND_SCHEMA {
            return Err(Error::SchemaVersion {
                found: self.schema.clone(),
                expected: BAND_SCHEMA.into(),
            });
        }
        for (name, arr) in [
            ("center", &self.center),
            ("modulation", &self.modulation),
            ("lower", &self.lower),
            ("upper", &self.upper),
        ] {
            if arr.len() != self.grid_points {
                return Err(Error::Config(format!(
                    "band record field `{name}` has {} values for {} grid points",
                    arr.len(),
                    self.grid_points
                )));
            }
        }
        Ok(())
    }

    /// Rebuilds the in-memory band.
    pub fn to_band(&self) -> Result<PredictionBand<f64>> {
        self.validate()?;
        let grid = Arc::new(Grid::uniform(self.grid_start, self.grid_end, self.grid_points)?);
        let curve = |v: &[f64]| Curve::new(grid.clone(), v.to_vec());
        let modulation = ModulationCurve::from_parts(curve(&self.modulation)?, self.modulation_kind);
        Ok(PredictionBand {
            center: curve(&self.center)?,
            radius_scale: self.radius_scale,
            modulation,
            lower: curve(&self.lower)?,
            upper: curve(&self.upper)?,
            closed: self.closed,
            full_space: self.full_space,
            lower_clip: self.lower_clip,
            method: self.method,
            smoothing: self.meta.tau.map(|tau| SmoothedParams {
                tau,
                tie_right: self.meta.tie_right.unwrap_or(0),
                tie_left: self.meta.tie_left.unwrap_or(0),
            }),
        })
    }
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_band(path: impl AsRef<Path>, record: &BandRecord) -> Result<()> {
    write_json(path, record)
}

pub fn read_band(path: impl AsRef<Path>) -> Result<BandRecord> {
    let record: BandRecord = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    record.validate()?;
    Ok(record)
}

/// Plot table: one row per grid point with `t, lower, center, upper`.
pub fn write_band_table<T: Scalar>(path: impl AsRef<Path>, band: &PredictionBand<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "lower", "center", "upper"])?;
    let (lo, c, hi) = (band.lower().values(), band.center().values(), band.upper().values());
    for (i, &t) in band.grid().points().iter().enumerate() {
        if band.is_full_space() {
            w.write_record([fmt_num(t), "-inf".into(), fmt_num(c[i]), "inf".into()])?;
        } else {
            w.write_record([fmt_num(t), fmt_num(lo[i]), fmt_num(c[i]), fmt_num(hi[i])])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_coverage_table(path: impl AsRef<Path>, report: &CoverageReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "scenario",
        "n",
        "method",
        "mean",
        "sd",
        "ci99_low",
        "ci99_high",
        "covers_nominal",
        "theoretical",
    ])?;
    for m in &report.methods {
        w.write_record([
            report.scenario.to_string(),
            report.n.to_string(),
            m.method.to_string(),
            m.mean.to_string(),
            m.sd.to_string(),
            opt(m.ci_low),
            opt(m.ci_high),
            m.covers_nominal.map(|b| b.to_string()).unwrap_or_default(),
            report.theoretical_coverage.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_size_table(path: impl AsRef<Path>, report: &SizeReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "n", "method", "mean_q", "sd_q", "full_space"])?;
    for m in &report.methods {
        w.write_record([
            report.scenario.to_string(),
            report.n.to_string(),
            m.method.to_string(),
            m.mean.to_string(),
            m.sd.to_string(),
            m.full_space.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (replication, method).
pub fn write_replications(path: impl AsRef<Path>, records: &[ReplicationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["replication", "split_seed", "tau", "method", "coverage", "q"])?;
    for r in records {
        for o in &r.outcomes {
            w.write_record([
                r.index.to_string(),
                r.split_seed.to_string(),
                opt(r.tau),
                o.method.to_string(),
                o.coverage.to_string(),
                opt(o.q),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
