//! One-off subcommands: model constants, the mixing profile and a single
//! transport distance.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spinlab::dobrushin::{coupling_matrix, dobrushin_report, theorem2_constant};
use spinlab::measures::{alpha_constant, tv_distance};
use spinlab::mixing::{estimate_phi, phi_norm, scan_m0, theorem3_constant, theta_m, PhiOptions, R_SCAN_CAP};
use spinlab::transport::{w2_distance, w2_lower_bound};
use spinlab::Distribution;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{float, Format};

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| CliError::Output(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsOut {
    pub coupling_matrix: Vec<Vec<f64>>,
    pub norm_a: f64,
    pub norm_l1: f64,
    pub alpha: f64,
    /// `1/(1 − ‖A‖₂)²`; absent when `‖A‖₂ ≥ 1`.
    #[serde(rename = "C", with = "float::opt")]
    pub c: Option<f64>,
    pub m: u64,
    pub m0: u64,
    #[serde(with = "float")]
    pub theta: f64,
    pub r_star: u64,
    pub optimistic_profile: bool,
    #[serde(rename = "mixing_C", with = "float::opt")]
    pub mixing_c: Option<f64>,
    #[serde(with = "float::opt")]
    pub mixing_c_block: Option<f64>,
}

pub fn constants(cfg: &RunConfig) -> Result<ConstantsOut, CliError> {
    let model = cfg.model.build()?;
    let q = model.measure().map_err(|e| CliError::Config(format!("[model]: {e}")))?;
    let a = coupling_matrix(&q)?;
    let rep = dobrushin_report(&q)?;
    let profile = estimate_phi(
        model.spec(),
        PhiOptions {
            budget: cfg.mixing.budget,
            seed: cfg.mixing.seed,
        },
    )?;
    let d = model.lattice().dim();
    let m0 = scan_m0(&profile, d)?;
    let theta = match cfg.mixing.m {
        Some(m) => theta_m(&profile, d, m)?,
        None => m0,
    };
    let alpha = alpha_constant(&q)?.value();
    let mixing = theorem3_constant(&profile, d, Some(theta.m), alpha, q.space().q()).ok();
    Ok(ConstantsOut {
        coupling_matrix: a.entries.clone(),
        norm_a: rep.norm,
        norm_l1: rep.norm_l1,
        alpha: rep.alpha.value(),
        c: theorem2_constant(&rep).ok(),
        m: theta.m,
        m0: m0.m,
        theta: theta.theta,
        r_star: theta.r_star,
        optimistic_profile: theta.optimistic,
        mixing_c: mixing.map(|k| k.c),
        mixing_c_block: mixing.map(|k| k.c_block),
    })
}

pub fn render_constants(c: &ConstantsOut, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => json(c),
        Format::Csv => Err(CliError::Usage("csv is not available for `constants`".into())),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "A =");
            for row in &c.coupling_matrix {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
                let _ = writeln!(s, "  [{}]", cells.join(", "));
            }
            let _ = writeln!(s, "‖A‖₂ = {:.6e}  ‖A‖₁ = {:.6e}  α = {:.6e}", c.norm_a, c.norm_l1, c.alpha);
            match c.c {
                Some(v) => {
                    let _ = writeln!(s, "C = {v:.6e}");
                }
                None => {
                    let _ = writeln!(s, "C: not applicable (‖A‖₂ ≥ 1)");
                }
            }
            let _ = writeln!(
                s,
                "Θ_m = {:.6e} at m = {} (R* = {}, smallest usable m = {}){}",
                c.theta,
                c.m,
                c.r_star,
                c.m0,
                if c.optimistic_profile { ", profile taken as zero beyond the measured radius" } else { "" }
            );
            match (c.mixing_c, c.mixing_c_block) {
                (Some(a), Some(b)) => {
                    let _ = writeln!(s, "mixing C = {a:.6e}  (with the full-cube exponent: {b:.6e})");
                }
                _ => {
                    let _ = writeln!(s, "mixing C: not applicable (Θ_m ≥ 1)");
                }
            }
            Ok(s.into_bytes())
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiOut {
    /// `(r, φ(r))` for every observed distance.
    pub phi: Vec<(u64, f64)>,
    pub exhaustive: bool,
    pub triples: usize,
    /// `Σ_r #shell(r)·φ(r)` up to the scan radius.
    pub norm: f64,
    pub optimistic: bool,
}

pub fn phi(cfg: &RunConfig) -> Result<PhiOut, CliError> {
    let model = cfg.model.build()?;
    let profile = estimate_phi(
        model.spec(),
        PhiOptions {
            budget: cfg.mixing.budget,
            seed: cfg.mixing.seed,
        },
    )?;
    let norm = phi_norm(&profile, model.lattice().dim(), R_SCAN_CAP)?;
    Ok(PhiOut {
        phi: profile.phi.clone(),
        exhaustive: profile.exhaustive,
        triples: profile.triples,
        norm: norm.value,
        optimistic: norm.optimistic,
    })
}

pub fn render_phi(p: &PhiOut, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => json(p),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| CliError::Output(e.to_string());
            w.write_record(["r", "phi"]).map_err(err)?;
            for (r, v) in &p.phi {
                w.write_record([r.to_string(), v.to_string()]).map_err(err)?;
            }
            w.into_inner().map_err(|e| CliError::Output(e.to_string()))
        }
        Format::Text => {
            let mut s = String::new();
            let how = if p.exhaustive { "exhaustive" } else { "sampled" };
            let _ = writeln!(s, "φ profile ({how}, {} configurations compared)", p.triples);
            for (r, v) in &p.phi {
                let _ = writeln!(s, "  r = {r:<4} φ = {v:.6e}");
            }
            let _ = writeln!(s, "‖Φ‖ = {:.6e}{}", p.norm, if p.optimistic { " (zero beyond the measured radius)" } else { "" });
            Ok(s.into_bytes())
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct W2Out {
    pub value: f64,
    /// Certified lower bound on `W₂` from the solver's duality gap.
    pub lower_bound: f64,
    pub gap: f64,
    /// `√(Σ_i tv(r_i, s_i)²)` from the site marginals.
    pub marginal_lower_bound: f64,
    pub tv: f64,
    pub disagreement: Vec<f64>,
    pub iterations: usize,
}

fn load_measure(path: &Path) -> Result<Distribution, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `W₂` between two measures stored as json.
pub fn w2(a: &Path, b: &Path, tol: f64) -> Result<W2Out, CliError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    let r = load_measure(a)?;
    let s = load_measure(b)?;
    if r.space() != s.space() {
        return Err(CliError::Config("the two measures live on different spaces".into()));
    }
    let w = w2_distance(&r, &s, tol)?;
    Ok(W2Out {
        value: w.value,
        lower_bound: w.lower_bound,
        gap: w.gap,
        marginal_lower_bound: w2_lower_bound(&r, &s)?,
        tv: tv_distance(&r, &s)?,
        disagreement: w.disagreement.0.clone(),
        iterations: w.iterations,
    })
}

pub fn render_w2(w: &W2Out, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => json(w),
        Format::Csv => Err(CliError::Usage("csv is not available for `w2`".into())),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "W₂ = {:.9e}  (certified ≥ {:.9e}, gap {:.3e})", w.value, w.lower_bound, w.gap);
            let _ = writeln!(s, "marginal lower bound = {:.9e}  tv = {:.9e}", w.marginal_lower_bound, w.tv);
            let cells: Vec<String> = w.disagreement.iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(s, "disagreement = [{}]  ({} iterations)", cells.join(", "), w.iterations);
            Ok(s.into_bytes())
        }
    }
}
