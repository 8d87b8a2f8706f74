//! The run report (schema `v1`) and its json, csv and text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const SCHEMA: &str = "v1";

/// Floats that may be infinite or NaN; json has no literal for either,
/// so those are written as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }

    pub mod opt {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct W(#[serde(with = "super")] f64);
            Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// One verified relation `lhs ≤ rhs` (identities use `lhs = |residual|`, `rhs = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    /// The relation being checked, in symbols.
    pub tag: String,
    /// Sweep item the row belongs to; absent for model-level checks.
    #[serde(default)]
    pub seed_index: Option<usize>,
    #[serde(with = "float")]
    pub lhs: f64,
    #[serde(with = "float")]
    pub rhs: f64,
    #[serde(with = "float")]
    pub slack: f64,
    #[serde(with = "float")]
    pub tol: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(name: &str, tag: &str, seed_index: Option<usize>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = if lhs == rhs { 0.0 } else { lhs - rhs };
        Self {
            name: name.to_string(),
            tag: tag.to_string(),
            seed_index,
            lhs,
            rhs,
            slack,
            tol,
            // NaN slack fails
            pass: slack <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub suite: String,
    pub reason: String,
}

/// Model constants the suites relied on.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(with = "float::opt", default, skip_serializing_if = "Option::is_none")]
    pub norm_a: Option<f64>,
    #[serde(with = "float::opt", default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "C", with = "float::opt", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(with = "float::opt", default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimistic_profile: Option<bool>,
    #[serde(rename = "mixing_C", with = "float::opt", default, skip_serializing_if = "Option::is_none")]
    pub mixing_c: Option<f64>,
    #[serde(with = "float::opt", default, skip_serializing_if = "Option::is_none")]
    pub mixing_c_block: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub seed: u64,
    /// Wall-clock milliseconds per suite; the only non-reproducible block.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub status: Status,
    pub rows: Vec<CheckRow>,
    #[serde(default)]
    pub not_applicable: Vec<Skipped>,
    #[serde(default)]
    pub constants: Constants,
    pub environment: Environment,
    /// Echo of the configuration that produced the report.
    #[serde(default)]
    pub config: Option<RunConfig>,
}

impl Report {
    /// A report without checks.
    pub fn empty() -> Self {
        Self {
            schema: SCHEMA.to_string(),
            status: Status::Pass,
            rows: Vec::new(),
            not_applicable: Vec::new(),
            constants: Constants::default(),
            environment: Environment {
                version: env!("CARGO_PKG_VERSION").to_string(),
                ..Default::default()
            },
            config: None,
        }
    }

    /// Sorts rows by name then sweep index and recomputes the status.
    pub fn finish(&mut self) {
        self.rows
            .sort_by(|a, b| a.name.cmp(&b.name).then(a.seed_index.cmp(&b.seed_index)));
        self.status = if self.rows.iter().any(|r| !r.pass) {
            Status::Fail
        } else if !self.not_applicable.is_empty() {
            Status::NotApplicable
        } else {
            Status::Pass
        };
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => 0,
            Status::Fail | Status::NotApplicable => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(CliError::Usage(format!("unknown format `{other}`"))),
        }
    }
}

pub fn report_render(report: &Report, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).map_err(|e| CliError::Output(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => render_csv(&report.rows),
        Format::Text => Ok(render_text(report).into_bytes()),
    }
}

pub fn render_csv(rows: &[CheckRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(["name", "tag", "seed_index", "lhs", "rhs", "slack", "tol", "pass"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.tag.clone(),
            r.seed_index.map(|i| i.to_string()).unwrap_or_default(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.slack.to_string(),
            r.tol.to_string(),
            r.pass.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

fn render_text(report: &Report) -> String {
    let mut s = String::new();
    let status = match report.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::NotApplicable => "NOT APPLICABLE",
    };
    let _ = writeln!(
        s,
        "{status}: {} checks, {} failed (schema {})",
        report.rows.len(),
        report.failures(),
        report.schema
    );
    let c = &report.constants;
    for (k, v) in [
        ("‖A‖₂", c.norm_a),
        ("α", c.alpha),
        ("C", c.c),
        ("Θ_m", c.theta),
        ("mixing C", c.mixing_c),
        ("mixing C (block exponent)", c.mixing_c_block),
    ] {
        if let Some(v) = v {
            let _ = writeln!(s, "  {k} = {v:.6e}");
        }
    }
    if let Some(m) = c.m {
        let _ = writeln!(s, "  m = {m}");
    }
    for sk in &report.not_applicable {
        let _ = writeln!(s, "  not applicable: {} ({})", sk.suite, sk.reason);
    }
    for r in &report.rows {
        let idx = r.seed_index.map(|i| format!("#{i}")).unwrap_or_else(|| "model".into());
        let _ = writeln!(
            s,
            "{} {:<32} {:<8} lhs={:.6e} rhs={:.6e} slack={:.3e}  [{}]",
            if r.pass { "ok  " } else { "FAIL" },
            r.name,
            idx,
            r.lhs,
            r.rhs,
            r.slack,
            r.tag
        );
    }
    s
}
