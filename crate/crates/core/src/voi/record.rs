//! VoI results and their CSV export.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoiKind {
    EVoMI,
    EVoII,
    IVoMI,
    IVoII,
    ITVoI,
}

impl VoiKind {
    pub fn name(self) -> &'static str {
        match self {
            VoiKind::EVoMI => "EVoMI",
            VoiKind::EVoII => "EVoII",
            VoiKind::IVoMI => "IVoMI",
            VoiKind::IVoII => "IVoII",
            VoiKind::ITVoI => "ITVoI",
        }
    }

    /// Utility-based kinds are non-positive up to estimator noise.
    pub fn is_utility(self) -> bool {
        !matches!(self, VoiKind::ITVoI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoiMethod {
    ExactDp,
    MonteCarlo,
    A,
    B,
    C,
    KlBruteForce,
}

impl VoiMethod {
    pub fn name(self) -> &'static str {
        match self {
            VoiMethod::ExactDp => "exact_dp",
            VoiMethod::MonteCarlo => "monte_carlo",
            VoiMethod::A => "A",
            VoiMethod::B => "B",
            VoiMethod::C => "C",
            VoiMethod::KlBruteForce => "kl_brute_force",
        }
    }
}

/// Whether the inferior observation misses the information or sees a
/// corrupted/delayed version of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoScenario {
    #[default]
    Missing,
    Imperfect,
}

impl InfoScenario {
    pub fn expected_kind(self) -> VoiKind {
        match self {
            InfoScenario::Missing => VoiKind::EVoMI,
            InfoScenario::Imperfect => VoiKind::EVoII,
        }
    }

    pub fn immediate_kind(self) -> VoiKind {
        match self {
            InfoScenario::Missing => VoiKind::IVoMI,
            InfoScenario::Imperfect => VoiKind::IVoII,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiRecord {
    pub kind: VoiKind,
    pub value: f64,
    pub ci: Option<(f64, f64)>,
    pub method: VoiMethod,
    /// Control interval, for per-step records.
    pub k: Option<usize>,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// Free-form note, e.g. the ITVoI weighting measure or sample count.
    pub note: String,
}

impl VoiRecord {
    pub fn aggregate(kind: VoiKind, method: VoiMethod, value: f64) -> Self {
        VoiRecord {
            kind,
            value,
            ci: None,
            method,
            k: None,
            state: Vec::new(),
            action: Vec::new(),
            note: String::new(),
        }
    }

    pub fn with_ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci = Some((lo, hi));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn at(mut self, k: usize, state: Vec<f64>, action: Vec<f64>) -> Self {
        self.k = Some(k);
        self.state = state;
        self.action = action;
        self
    }
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Columns `kind,value,ci_lo,ci_hi,method,k,s0..,a0..,note`; the state and
/// action widths are the widest among the records, shorter rows padded
/// with blanks.
pub fn write_voi_csv<W: std::io::Write>(records: &[VoiRecord], w: W) -> Result<()> {
    let ns = records.iter().map(|r| r.state.len()).max().unwrap_or(0);
    let na = records.iter().map(|r| r.action.len()).max().unwrap_or(0);
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["kind", "value", "ci_lo", "ci_hi", "method", "k"].iter().map(|s| s.to_string()).collect();
    header.extend((0..ns).map(|i| format!("s{i}")));
    header.extend((0..na).map(|i| format!("a{i}")));
    header.push("note".into());
    wr.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.kind.name().to_string(),
            fmt(r.value),
            r.ci.map(|c| fmt(c.0)).unwrap_or_default(),
            r.ci.map(|c| fmt(c.1)).unwrap_or_default(),
            r.method.name().to_string(),
            r.k.map(|k| k.to_string()).unwrap_or_default(),
        ];
        row.extend((0..ns).map(|i| r.state.get(i).map(|&x| fmt(x)).unwrap_or_default()));
        row.extend((0..na).map(|i| r.action.get(i).map(|&x| fmt(x)).unwrap_or_default()));
        row.push(r.note.clone());
        wr.write_record(&row)?;
    }
    wr.flush().map_err(|e| Error::io("<voi records>", e))?;
    Ok(())
}
