//! Tidy time-series output and figure-specific extracts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column header of every tidy series file.
pub const TIDY_HEADER: &str = "k,series,policy,value";

/// One observation of a named series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub k: usize,
    pub series: String,
    pub policy: String,
    pub value: f64,
}

impl TidyRow {
    pub fn new(k: usize, series: &str, policy: &str, value: f64) -> Self {
        Self {
            k,
            series: series.into(),
            policy: policy.into(),
            value,
        }
    }
}

pub fn write_tidy<W: std::io::Write>(rows: &[TidyRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(TIDY_HEADER.split(','))?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io("<tidy output>", e))?;
    Ok(())
}

/// Figure layouts that can be extracted from a run directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Predecessor acceleration, tracking errors and IVoMI over one episode.
    Fig4Style,
    /// Throughput, IVoMI and position error for gated and always-transmit.
    Fig5Style,
}

impl Figure {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fig4_style" | "fig4" => Some(Self::Fig4Style),
            "fig5_style" | "fig5" => Some(Self::Fig5Style),
            _ => None,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Fig4Style => "fig4_style.csv",
            Self::Fig5Style => "fig5_style.csv",
        }
    }

    fn series(self) -> &'static [&'static str] {
        match self {
            Self::Fig4Style => &["acc_pred", "e_p", "e_v", "acc_follower", "ivoi"],
            Self::Fig5Style => &["throughput", "ivoi", "e_p", "phi"],
        }
    }
}

/// Writes the figure extract of `run_dir/trajectory.csv` into `run_dir`.
/// A missing or empty series file yields a header-only extract.
pub fn emit_plotdata(run_dir: &Path, figure: Figure) -> Result<PathBuf> {
    let src = run_dir.join("trajectory.csv");
    let keep = figure.series();
    let mut rows = Vec::new();
    if src.exists() {
        let mut rdr = csv::Reader::from_path(&src)?;
        for r in rdr.deserialize::<TidyRow>() {
            let r = r?;
            if keep.contains(&r.series.as_str()) {
                rows.push(r);
            }
        }
    }
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let dst = run_dir.join(figure.file_name());
    let mut buf = Vec::new();
    write_tidy(&rows, &mut buf)?;
    fs::write(&dst, buf).map_err(|e| Error::io(&dst, e))?;
    Ok(dst)
}
