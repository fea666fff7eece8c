//! Analytic wear and destruction-time model for the garbage-collection case
//! and the one-page-update case, plus a cross-check of simulator counters
//! against the model.
//!
//! Wear is counted in degradation units: `a` per block erase and `b` per page
//! program. Times are in abstract model units. None of the default timings are
//! measured values; they only make the formulas printable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sanitizer::DestructionReport;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Degradation per block erase.
    pub a: f64,
    /// Degradation per page program.
    pub b: f64,
    pub t_pgm: f64,
    pub t_rdg: f64,
    pub t_sdg: f64,
    pub t_pow: f64,
    pub t_slcp: f64,
    pub t_ddp: f64,
    pub t_oneshot: f64,
    /// Block erase time, only used for the sanity warning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_erase: Option<f64>,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            a: 1000.0,
            b: 1.0,
            t_pgm: 200.0,
            t_rdg: 10.0,
            t_sdg: 5.0,
            t_pow: 400.0,
            t_slcp: 150.0,
            t_ddp: 50.0,
            t_oneshot: 300.0,
            t_erase: None,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let all =
            [self.a, self.b, self.t_pgm, self.t_rdg, self.t_sdg, self.t_pow, self.t_slcp, self.t_ddp, self.t_oneshot];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.t_erase.is_some_and(|t| !(t.is_finite() && t > 0.0))
        {
            return Err(Error::InvalidConfig("cost parameters must all be finite and > 0".into()));
        }
        Ok(())
    }

    /// Non-fatal oddities in the parameter set.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let Some(t_erase) = self.t_erase {
            if t_erase < 1000.0 * self.t_pgm {
                w.push(format!(
                    "t_erase {t_erase} is below 1000 x t_pgm ({}); block erase is normally that much slower",
                    1000.0 * self.t_pgm
                ));
            }
        }
        if self.a < 1000.0 * self.b {
            w.push(format!("a = {} is below 1000 x b = {}", self.a, 1000.0 * self.b));
        }
        w
    }

    pub fn degradation(&self, erase_count: u64, pgm_count: u64) -> f64 {
        self.a * erase_count as f64 + self.b * pgm_count as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostScheme {
    BlockErase,
    Lin,
    #[serde(rename = "po")]
    PartialOverwrite,
    Slc,
    Ddp,
}

impl CostScheme {
    pub const ALL: [CostScheme; 5] =
        [CostScheme::BlockErase, CostScheme::Lin, CostScheme::PartialOverwrite, CostScheme::Slc, CostScheme::Ddp];

    pub fn name(self) -> &'static str {
        match self {
            CostScheme::BlockErase => "block_erase",
            CostScheme::Lin => "lin",
            CostScheme::PartialOverwrite => "po",
            CostScheme::Slc => "slc",
            CostScheme::Ddp => "ddp",
        }
    }
}

impl fmt::Display for CostScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "block_erase" | "erase" | "block-erase" => Ok(CostScheme::BlockErase),
            "lin" | "oneshot" => Ok(CostScheme::Lin),
            "po" | "partial_overwrite" | "fold" => Ok(CostScheme::PartialOverwrite),
            "slc" => Ok(CostScheme::Slc),
            "ddp" => Ok(CostScheme::Ddp),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Gc,
    Update,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gc" => Ok(Scenario::Gc),
            "update" => Ok(Scenario::Update),
            _ => Err(Error::Parse(format!("unknown scenario {s:?}"))),
        }
    }
}

/// A count or amount that the model knows exactly, only as an upper bound,
/// or not at all.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tally<T> {
    Exact(T),
    AtMost(T),
    NotApplicable,
}

impl<T: Copy> Tally<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Tally::Exact(v) | Tally::AtMost(v) => Some(*v),
            Tally::NotApplicable => None,
        }
    }
}

impl<T: fmt::Display> fmt::Display for Tally<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tally::Exact(v) => write!(f, "{v}"),
            Tally::AtMost(v) => write!(f, "<= {v}"),
            Tally::NotApplicable => f.write_str("x"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DestructionTime {
    Exact {
        value: f64,
    },
    /// Destruction waits for the internal erase policy.
    PolicyDependent {
        lower_bound: Option<f64>,
    },
    NotApplicable,
}

impl DestructionTime {
    pub fn value(&self) -> Option<f64> {
        match self {
            DestructionTime::Exact { value } => Some(*value),
            _ => None,
        }
    }
}

impl fmt::Display for DestructionTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DestructionTime::Exact { value } => write!(f, "{value}"),
            DestructionTime::PolicyDependent { lower_bound: Some(lb) } => {
                write!(f, "policy-dependent (> {lb})")
            }
            DestructionTime::PolicyDependent { lower_bound: None } => f.write_str("policy-dependent"),
            DestructionTime::NotApplicable => f.write_str("x"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub scheme: CostScheme,
    pub scenario: Scenario,
    /// Valid pages copied by garbage collection before destruction starts.
    pub gc_copies: u64,
    pub pgm_count: Tally<u64>,
    pub erase_count: Tally<u64>,
    pub degradation: Tally<f64>,
    pub destruction_time: DestructionTime,
}

fn exact(value: f64) -> DestructionTime {
    DestructionTime::Exact { value }
}

/// Cost of destroying `n` residual invalid pages left after a garbage
/// collection that copied `m` valid pages.
pub fn gc_case(scheme: CostScheme, m: u64, n: u64, p: &CostParams) -> CostReport {
    let (mf, nf) = (m as f64, n as f64);
    let gc = mf * p.t_pgm;
    let proposed = |time: f64| CostReport {
        scheme,
        scenario: Scenario::Gc,
        gc_copies: m,
        pgm_count: Tally::AtMost(n),
        erase_count: Tally::Exact(0),
        degradation: Tally::AtMost(p.b * nf),
        destruction_time: exact(time),
    };
    match scheme {
        CostScheme::BlockErase => CostReport {
            scheme,
            scenario: Scenario::Gc,
            gc_copies: m,
            pgm_count: Tally::Exact(0),
            erase_count: Tally::Exact(1),
            degradation: Tally::Exact(p.a),
            destruction_time: DestructionTime::PolicyDependent { lower_bound: Some(gc) },
        },
        // The one-shot scheme only covers updates; residual GC copies are untouched.
        CostScheme::Lin => CostReport {
            scheme,
            scenario: Scenario::Gc,
            gc_copies: m,
            pgm_count: Tally::NotApplicable,
            erase_count: Tally::NotApplicable,
            degradation: Tally::NotApplicable,
            destruction_time: DestructionTime::NotApplicable,
        },
        CostScheme::PartialOverwrite => proposed(gc + nf * p.t_rdg + p.t_pow),
        CostScheme::Slc => proposed(gc + nf * p.t_sdg + p.t_slcp),
        CostScheme::Ddp => proposed(gc + nf * p.t_ddp),
    }
}

/// Cost of destroying one updated page of privacy data, `m` being the
/// programs spent before destruction.
pub fn update_case(scheme: CostScheme, m: u64, p: &CostParams) -> CostReport {
    let gc = m as f64 * p.t_pgm;
    let one_program = |time: f64| CostReport {
        scheme,
        scenario: Scenario::Update,
        gc_copies: m,
        pgm_count: Tally::Exact(1),
        erase_count: Tally::Exact(0),
        degradation: Tally::Exact(p.b),
        destruction_time: exact(time),
    };
    match scheme {
        CostScheme::BlockErase => CostReport {
            scheme,
            scenario: Scenario::Update,
            gc_copies: m,
            pgm_count: Tally::Exact(0),
            erase_count: Tally::Exact(1),
            degradation: Tally::Exact(p.a),
            destruction_time: DestructionTime::PolicyDependent { lower_bound: None },
        },
        CostScheme::Lin => one_program(gc + p.t_oneshot),
        CostScheme::PartialOverwrite => one_program(gc + p.t_rdg + p.t_pow),
        CostScheme::Slc => one_program(gc + p.t_sdg + p.t_slcp),
        CostScheme::Ddp => one_program(gc + p.t_ddp),
    }
}

/// One row per scheme, in the given order except that rows without a
/// numeric destruction time move to the end.
pub fn compare(scenario: Scenario, schemes: &[CostScheme], m: u64, n: u64, p: &CostParams) -> Vec<CostReport> {
    let mut rows: Vec<CostReport> = schemes
        .iter()
        .map(|&s| match scenario {
            Scenario::Gc => gc_case(s, m, n, p),
            Scenario::Update => update_case(s, m, p),
        })
        .collect();
    rows.sort_by_key(|r| r.destruction_time.value().is_none());
    rows
}

pub fn render_table(rows: &[CostReport]) -> String {
    let header = ["scheme", "pgm_count", "erase_count", "degradation", "destruction_time"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.scheme.to_string(),
                r.pgm_count.to_string(),
                r.erase_count.to_string(),
                r.degradation.to_string(),
                r.destruction_time.to_string(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |row: &[String]| {
        row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = line(&header.map(String::from));
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// Simulator counter deltas observed around one destruction flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRun {
    pub scheme: CostScheme,
    pub treated_pages: u64,
    /// Page programs the flow reports having issued.
    pub reported_programs: u64,
    /// Blocks the flow reports having erased.
    pub reported_erases: u64,
    pub reported_model_time: Option<f64>,
    pub pgm_delta: u64,
    pub erase_delta: u64,
}

impl MeasuredRun {
    /// `before`/`after` are total (pgm_count, erase_count) over the device.
    pub fn from_destruction(report: &DestructionReport, before: (u64, u64), after: (u64, u64)) -> Self {
        MeasuredRun {
            scheme: report.scheme.cost_scheme(),
            treated_pages: report.pages.len() as u64,
            reported_programs: report.pages.iter().map(|p| u64::from(p.programs)).sum(),
            reported_erases: 0,
            reported_model_time: Some(report.model_time),
            pgm_delta: after.0 - before.0,
            erase_delta: after.1 - before.1,
        }
    }

    pub fn from_block_erase(erased_blocks: &[u32], before: (u64, u64), after: (u64, u64)) -> Self {
        MeasuredRun {
            scheme: CostScheme::BlockErase,
            treated_pages: 0,
            reported_programs: 0,
            reported_erases: erased_blocks.len() as u64,
            reported_model_time: None,
            pgm_delta: after.0 - before.0,
            erase_delta: after.1 - before.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCheck {
    pub model: CostReport,
    pub measured_degradation: f64,
}

/// Checks that the simulator's counters agree with the model for a flow
/// that treated `treated_pages` residual pages.
pub fn measured_vs_model(run: &MeasuredRun, p: &CostParams) -> Result<ModelCheck> {
    let model = gc_case(run.scheme, 0, run.treated_pages, p);
    let mut diffs = Vec::new();

    let expected_erase = match run.scheme {
        CostScheme::BlockErase => run.reported_erases,
        _ => 0,
    };
    if run.erase_delta != expected_erase {
        diffs.push(format!("erase delta {} != expected {expected_erase}", run.erase_delta));
    }
    let expected_pgm = match run.scheme {
        CostScheme::PartialOverwrite | CostScheme::Slc => run.reported_programs,
        _ => 0,
    };
    if run.pgm_delta != expected_pgm {
        diffs.push(format!("pgm delta {} != expected {expected_pgm}", run.pgm_delta));
    }
    if run.scheme == CostScheme::PartialOverwrite {
        if let Tally::AtMost(bound) = model.pgm_count {
            if run.pgm_delta > bound {
                diffs.push(format!("pgm delta {} exceeds model bound {bound}", run.pgm_delta));
            }
        }
    }
    if let (Some(reported), Some(model_time)) = (run.reported_model_time, model.destruction_time.value()) {
        if reported != model_time {
            diffs.push(format!("reported model time {reported} != recomputed {model_time}"));
        }
    }
    if !diffs.is_empty() {
        return Err(Error::Mismatch(diffs.join("; ")));
    }
    Ok(ModelCheck { model, measured_degradation: p.degradation(run.erase_delta, run.pgm_delta) })
}
