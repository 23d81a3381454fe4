//! CSV ingestion, report emission and run manifests.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bootstrap::{BootstrapConfig, ConfidenceBand};
use crate::error::{CureError, Result};
use crate::error_dist::ErrorDistEstimate;
use crate::kernel::{BandwidthRule, KernelFamily};
use crate::sample::{Observation, TiePolicy};
use crate::score::ScoreFunction;
use crate::simulation::{AmiseGrid, MonteCarloReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "lscure";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Data rows with fewer than this many observations are refused by the fit commands.
pub const MIN_FIT_ROWS: usize = 10;

/// Floats are written with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub has_header: bool,
    pub log_transform_z: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub path: PathBuf,
    pub has_header: bool,
    pub rows: Vec<Observation>,
}

/// Whether the first record of a CSV file is a header, i.e. its first
/// field is not a number.
pub fn sniff_header(path: &Path) -> Result<bool> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CureError::Io(format!("{}: {e}", path.display())))?;
    let mut record = csv::StringRecord::new();
    let found = reader
        .read_record(&mut record)
        .map_err(|e| CureError::Io(format!("{}: {e}", path.display())))?;
    Ok(found && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()))
}

const COLUMNS: [&str; 3] = ["x", "z", "delta"];

pub fn load_csv(path: &Path, options: LoadOptions) -> Result<DatasetFile> {
    let io_err = |e: csv::Error| CureError::Io(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(io_err)?;
    let parse_err = |row: usize, column: &str, message: String| CureError::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        message,
    };
    let first_row = if options.has_header { 2 } else { 1 };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = first_row + i;
        let record = record.map_err(io_err)?;
        if record.len() != 3 {
            return Err(parse_err(
                row,
                "*",
                format!("expected 3 columns (x,z,delta), found {}", record.len()),
            ));
        }
        let number = |k: usize| -> Result<f64> {
            let field = &record[k];
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(row, COLUMNS[k], format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(row, COLUMNS[k], format!("`{field}` is not finite")));
            }
            Ok(v)
        };
        let x = number(0)?;
        let mut z = number(1)?;
        let delta = match record[2].parse::<f64>() {
            Ok(d) if d == 0.0 => false,
            Ok(d) if d == 1.0 => true,
            _ => {
                return Err(parse_err(
                    row,
                    "delta",
                    format!("`{}` is not 0 or 1", &record[2]),
                ))
            }
        };
        if options.log_transform_z {
            if !(z > 0.0) {
                return Err(CureError::NonPositiveTime {
                    path: path.to_path_buf(),
                    row,
                    z,
                });
            }
            z = z.ln();
        }
        rows.push(Observation::new(x, z, delta));
    }
    Ok(DatasetFile {
        path: path.to_path_buf(),
        has_header: options.has_header,
        rows,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CureError::Io(format!("{}: {e}", path.display())))
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{header}")?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_dataset_csv(path: &Path, rows: &[Observation]) -> Result<()> {
    write_lines(
        path,
        "x,z,delta",
        rows.iter()
            .map(|o| format!("{},{},{}", fmt_f64(o.x), fmt_f64(o.z), u8::from(o.delta))),
    )
}

/// `t,F_hat`.
pub fn write_fhat_csv(path: &Path, est: &ErrorDistEstimate) -> Result<()> {
    write_lines(
        path,
        "t,F_hat",
        est.grid
            .iter()
            .zip(&est.values)
            .map(|(t, v)| format!("{},{}", fmt_f64(*t), fmt_f64(*v))),
    )
}

/// `t,lower,point,upper`.
pub fn write_band_csv(path: &Path, band: &ConfidenceBand) -> Result<()> {
    write_lines(
        path,
        "t,lower,point,upper",
        (0..band.grid.len()).map(|i| {
            format!(
                "{},{},{},{}",
                fmt_f64(band.grid[i]),
                fmt_f64(band.lower[i]),
                fmt_f64(band.point[i]),
                fmt_f64(band.upper[i])
            )
        }),
    )
}

/// One row of local estimates; absent values are written empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub pi_hat: Option<f64>,
    pub m_hat: Option<f64>,
    pub s_hat: Option<f64>,
}

pub fn write_curves_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    write_lines(
        path,
        "x,pi_hat,m_hat,s_hat",
        curve
            .iter()
            .map(|p| format!("{},{},{},{}", fmt_f64(p.x), opt(p.pi_hat), opt(p.m_hat), opt(p.s_hat))),
    )
}

fn ratio_label(x: f64) -> String {
    // small denominators first so 0.75 prints as 3/4 and 1/28 as 1/28
    for den in 1..=64u32 {
        let num = x * den as f64;
        if (num - num.round()).abs() < 1e-9 {
            let num = num.round() as i64;
            return if den == 1 {
                num.to_string()
            } else {
                format!("{num}/{den}")
            };
        }
    }
    format!("{x}")
}

/// Rows `n, C, gamma`, one AMSE column per evaluation point.
pub fn write_table1_csv(path: &Path, reports: &[MonteCarloReport]) -> Result<()> {
    let points: Vec<f64> = reports
        .first()
        .map(|r| r.amse.iter().map(|p| p.t).collect())
        .unwrap_or_default();
    let mut header = String::from("n,C,gamma");
    for t in &points {
        header.push_str(&format!(",t={t}"));
    }
    let mut sorted: Vec<&MonteCarloReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.config.n.cmp(&b.config.n));
    write_lines(
        path,
        &header,
        sorted.into_iter().map(|r| {
            let mut line = format!(
                "{},{},{}",
                r.config.n,
                ratio_label(r.config.bandwidth.c),
                ratio_label(r.config.bandwidth.gamma)
            );
            for p in &r.amse {
                line.push(',');
                line.push_str(&fmt_f64(p.amse));
            }
            line
        }),
    )
}

/// Rows `(C, gamma)`, one AMISE column per sample size.
pub fn write_table2_csv(path: &Path, reports: &[MonteCarloReport]) -> Result<()> {
    let mut sizes: Vec<usize> = reports.iter().map(|r| r.config.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut configs: Vec<(f64, f64)> = Vec::new();
    for r in reports {
        let key = (r.config.bandwidth.c, r.config.bandwidth.gamma);
        if !configs.contains(&key) {
            configs.push(key);
        }
    }
    let mut header = String::from("C,gamma");
    for n in &sizes {
        header.push_str(&format!(",n={n}"));
    }
    write_lines(
        path,
        &header,
        configs.into_iter().map(|(c, g)| {
            let mut line = format!("{},{}", ratio_label(c), ratio_label(g));
            for &n in &sizes {
                line.push(',');
                if let Some(r) = reports.iter().find(|r| {
                    r.config.n == n && r.config.bandwidth.c == c && r.config.bandwidth.gamma == g
                }) {
                    line.push_str(&fmt_f64(r.amise));
                }
            }
            line
        }),
    )
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| CureError::Io(format!("{}: {e}", path.display())))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| CureError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(file)
        .map_err(|e| CureError::InvalidInput(format!("{}: {e}", path.display())))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_checksum(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| CureError::Io(format!("{}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Explicit bandwidth or the rule that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BandwidthChoice {
    Explicit { value: f64 },
    Rule { c: f64, gamma: f64 },
}

impl BandwidthChoice {
    pub fn rule(&self) -> Option<BandwidthRule> {
        match *self {
            BandwidthChoice::Rule { c, gamma } => Some(BandwidthRule::new(c, gamma)),
            BandwidthChoice::Explicit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub has_header: bool,
    pub log_transform: bool,
}

/// Evaluation grid; `None` bounds fall back to the estimate's default range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
    pub steps: usize,
}

/// Everything needed to rerun a command and reproduce its files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Command {
    Fit(FitSettings),
    Bootstrap {
        fit: FitSettings,
        bootstrap: BootstrapConfig,
    },
    Simulate(SimulateSettings),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub input: InputRecord,
    pub kernel: KernelFamily,
    pub bandwidth: BandwidthChoice,
    pub score: ScoreFunction,
    pub ties: TiePolicy,
    pub grid: GridSpec,
    pub curve_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSettings {
    pub sizes: Vec<usize>,
    pub rules: Vec<BandwidthRule>,
    pub runs: usize,
    pub seed: u64,
    pub kernel: KernelFamily,
    pub score: ScoreFunction,
    pub eval_points: Vec<f64>,
    pub amise_grid: AmiseGrid,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command,
        }
    }
}
