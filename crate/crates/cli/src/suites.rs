//! The check suites and the sweep driver.

use std::time::Instant;

use rayon::prelude::*;
use spinlab::dobrushin::{
    dobrushin_report, lemma4_bound, theorem2_constant, verify_condition_1_3, verify_corollary1, verify_corollary2,
    verify_theorem1, ConditionOptions, InequalityCheck,
};
use spinlab::measures::{
    alpha_constant, chain_expansion_check, hellinger_affinity, hellinger_distance, lemma1_gap,
    lemma2_reverse_pinsker, pinsker_gap,
};
use spinlab::mixing::{
    block_contraction_check, d_matrix_norm_bound, estimate_phi, scan_m0, theta_m, verify_aux_theorem,
    verify_theorem3, PhiOptions,
};
use spinlab::models::perturb;
use spinlab::samplers::{
    check_reversibility, dirichlet_closed_form, dirichlet_form, entropy_decay_identity, gibbs_sampler, sqrt_density,
    stationarity_residual, GibbsSampler,
};
use spinlab::transport::{w2_distance, w2_lower_bound, W2Options};
use spinlab::state_space::SiteSet;
use spinlab::{Distribution, Error, MixingProfile, ThetaParams};

use crate::config::{BuiltModel, RunConfig, Suite};
use crate::error::CliError;
use crate::report::{CheckRow, Report, Skipped};

/// Largest cube family the block-sampler suites will enumerate.
const CUBE_FAMILY_CAP: u128 = 1 << 16;

struct Item {
    index: usize,
    p: Distribution,
}

/// Everything the suites share; expensive pieces are built on first use.
struct Ctx<'a> {
    cfg: &'a RunConfig,
    model: BuiltModel,
    q: Distribution,
    items: Vec<Item>,
    gamma: Option<GibbsSampler<f64>>,
    dobrushin: Option<Result<f64, String>>,
    mixing: Option<Result<(MixingProfile, ThetaParams), String>>,
}

type Rows = Result<Vec<CheckRow>, CliError>;

/// Runs the configured suites over the seeded sweep.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let model = cfg.model.build()?;
    let q = model
        .measure()
        .map_err(|e| CliError::Config(format!("[model]: {e}")))?;
    let eps = &cfg.sweep.eps;
    let items = (0..cfg.sweep.count * eps.len())
        .map(|index| {
            let (s, e) = (index / eps.len(), index % eps.len());
            let p = perturb(&q, eps[e], cfg.sweep.seed.wrapping_add(s as u64))?;
            Ok(Item { index, p })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut ctx = Ctx {
        cfg,
        model,
        q,
        items,
        gamma: None,
        dobrushin: None,
        mixing: None,
    };

    let mut report = Report::empty();
    report.environment.seed = cfg.sweep.seed;
    report.config = Some(cfg.clone());
    report.constants.alpha = alpha_constant(&ctx.q).ok().map(|a| a.value());
    for suite in cfg.sweep.suite.expand() {
        let start = Instant::now();
        let rows = match suite {
            Suite::Lemmas => lemmas(&mut ctx),
            Suite::Theorem1 | Suite::Theorem2 | Suite::Corollaries => match dobrushin_c(&mut ctx, &mut report) {
                Ok(c) => match suite {
                    Suite::Theorem1 => theorem1(&ctx, c),
                    Suite::Theorem2 => theorem2(&ctx, c),
                    _ => corollaries(&ctx, c),
                },
                Err(reason) => {
                    report.not_applicable.push(Skipped {
                        suite: suite.name().into(),
                        reason,
                    });
                    Ok(Vec::new())
                }
            },
            Suite::Aux | Suite::Theorem3 => match mixing(&mut ctx, &mut report) {
                Ok((profile, theta)) => {
                    let cubes = cube_family_size(&ctx.model.lattice(), theta.m);
                    if suite == Suite::Theorem3 {
                        theorem3(&ctx, &profile, &theta, &mut report)
                    } else if cubes > CUBE_FAMILY_CAP {
                        report.not_applicable.push(Skipped {
                            suite: suite.name().into(),
                            reason: format!("m = {} gives {cubes} cubes; set [mixing] m smaller", theta.m),
                        });
                        Ok(Vec::new())
                    } else {
                        aux(&ctx, &profile, &theta)
                    }
                }
                Err(reason) => {
                    report.not_applicable.push(Skipped {
                        suite: suite.name().into(),
                        reason,
                    });
                    Ok(Vec::new())
                }
            },
            Suite::All => unreachable!("expanded above"),
        }?;
        report.rows.extend(rows);
        report
            .environment
            .timings
            .insert(suite.name().into(), start.elapsed().as_secs_f64() * 1e3);
    }
    report.finish();
    Ok(report)
}

fn solver_opts(cfg: &RunConfig) -> W2Options<f64> {
    W2Options {
        tol: cfg.tolerances.solver,
        ..Default::default()
    }
}

fn ineq(
    name: &str,
    tag: &str,
    index: Option<usize>,
    c: &InequalityCheck<f64>,
    tol: f64,
) -> CheckRow {
    CheckRow::new(name, tag, index, c.lhs, c.rhs, tol)
}

fn per_item(ctx: &Ctx, f: impl Fn(&Item) -> Rows + Sync + Send) -> Rows {
    let parts: Vec<Vec<CheckRow>> = ctx.items.par_iter().map(f).collect::<Result<_, _>>()?;
    Ok(parts.into_iter().flatten().collect())
}

fn lemmas(ctx: &mut Ctx) -> Rows {
    if ctx.gamma.is_none() {
        ctx.gamma = Some(gibbs_sampler(&ctx.q)?);
    }
    let ctx = &*ctx;
    let gamma = ctx.gamma.as_ref().expect("built above");
    let t = ctx.cfg.tolerances;
    let q = &ctx.q;
    let n = q.space().n();
    let mut rows = vec![
        CheckRow::new(
            "identities.stationarity",
            "‖qΓ − q‖₁ = 0",
            None,
            stationarity_residual(q, &gamma.mixture)?,
            0.0,
            t.identity,
        ),
        CheckRow::new(
            "identities.reversibility",
            "q(y)Γ(y,z) = q(z)Γ(z,y)",
            None,
            check_reversibility(q, &gamma.mixture)?,
            0.0,
            t.identity,
        ),
    ];
    rows.extend(per_item(ctx, |item| {
        let p = &item.p;
        let i = Some(item.index);
        let mut rows = Vec::new();
        let (tv2, aff) = lemma1_gap(p, q)?;
        rows.push(CheckRow::new("lemmas.affinity", "tv² ≤ 1 − A²", i, tv2, aff, t.inequality));
        let (tv2, half_d) = pinsker_gap(p, q)?;
        rows.push(CheckRow::new("lemmas.pinsker", "tv² ≤ D/2", i, tv2, half_d, t.inequality));
        let (d, rp) = lemma2_reverse_pinsker(p, q)?;
        rows.push(CheckRow::new("lemmas.reverse_pinsker", "D ≤ (4/min q)·tv²", i, d, rp, t.inequality));
        rows.push(ineq(
            "lemmas.product_tv",
            "tv² ≤ (2/(|X|α)²)^(n+log₂n)·Σ_i E tv_i²",
            i,
            &lemma4_bound(p, q)?,
            t.inequality,
        ));
        let w = w2_distance(p, q, t.solver)?;
        let tv = spinlab::measures::tv_distance(p, q)?;
        rows.push(CheckRow::new(
            "lemmas.w2_vs_tv",
            "W₂² ≤ n·tv²",
            i,
            w.value * w.value,
            n as f64 * tv * tv,
            t.inequality + t.solver,
        ));
        rows.push(CheckRow::new(
            "lemmas.w2_lower_bound",
            "√(Σ_i tv(p_i, q_i)²) ≤ W₂",
            i,
            w2_lower_bound(p, q)?,
            w.value,
            t.inequality,
        ));

        let h = hellinger_distance(p, q)?;
        let a = hellinger_affinity(p, q)?;
        rows.push(CheckRow::new(
            "identities.hellinger",
            "H² = 2(1 − A)",
            i,
            (h * h - 2.0 * (1.0 - a)).abs(),
            0.0,
            t.identity,
        ));
        rows.push(CheckRow::new(
            "identities.chain_rule",
            "D = (1/n)Σ_i D(p_i‖q_i) + (1/n)Σ_i E D(p̄_i‖q̄_i)",
            i,
            chain_expansion_check(p, q)?.residual,
            0.0,
            t.identity,
        ));
        let decay = (0..n)
            .map(|s| entropy_decay_identity(p, q, s).map(|e| e.residual))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        rows.push(CheckRow::new(
            "identities.entropy_decay",
            "D(p‖q) − D(pΓ_i‖q) = E D(p_i‖q_i)",
            i,
            decay,
            0.0,
            t.identity,
        ));
        let direct = dirichlet_form(&gamma.mixture, q, &sqrt_density(p, q))?;
        rows.push(CheckRow::new(
            "identities.dirichlet",
            "E_Γ(√(p/q)) = (1/n)Σ_i E(1 − A_i²)",
            i,
            (direct - dirichlet_closed_form(p, q)?).abs(),
            0.0,
            t.identity,
        ));
        Ok(rows)
    })?);
    Ok(rows)
}

/// `C = 1/(1 − ‖A‖₂)²`, or why it is unavailable.
fn dobrushin_c(ctx: &mut Ctx, report: &mut Report) -> Result<f64, String> {
    if ctx.dobrushin.is_none() {
        let res = match dobrushin_report(&ctx.q) {
            Ok(rep) => {
                report.constants.norm_a = Some(rep.norm);
                report.constants.alpha = Some(rep.alpha.value());
                match theorem2_constant(&rep) {
                    Ok(c) => {
                        report.constants.c = Some(c);
                        Ok(c)
                    }
                    Err(_) => Err(format!("‖A‖₂ = {:.6} is not below 1", rep.norm)),
                }
            }
            Err(e) => Err(e.to_string()),
        };
        ctx.dobrushin = Some(res);
    }
    ctx.dobrushin.clone().expect("computed above")
}

fn theorem1(ctx: &Ctx, c: f64) -> Rows {
    let tol = ctx.cfg.tolerances.inequality;
    per_item(ctx, |item| {
        let chk = verify_theorem1(&item.p, &ctx.q, c)?;
        let i = Some(item.index);
        let mut rows = vec![ineq(
            "theorem1.divergence",
            "D ≤ (2C/α)·Σ_i E D(p_i‖q_i)",
            i,
            &chk.second_line,
            tol,
        )];
        if let Some(first) = &chk.first_line {
            rows.push(ineq("theorem1.tv", "D ≤ (4C/α)·Σ_i E tv_i²", i, first, tol));
        }
        Ok(rows)
    })
}

fn theorem2(ctx: &Ctx, c: f64) -> Rows {
    let t = ctx.cfg.tolerances;
    let opts = ConditionOptions {
        w2: solver_opts(ctx.cfg),
        seed: ctx.cfg.sweep.seed,
        ..Default::default()
    };
    per_item(ctx, |item| {
        let rep = verify_condition_1_3(&item.p, &ctx.q, c, None, opts)?;
        Ok(rep
            .worst
            .map(|w| {
                CheckRow::new(
                    "theorem2.transport",
                    "W₂²(p_I, q_I) ≤ C·E Σ_{i∈I} tv_i²",
                    Some(item.index),
                    w.lhs,
                    w.rhs,
                    t.inequality + t.solver,
                )
            })
            .into_iter()
            .collect())
    })
}

fn corollaries(ctx: &Ctx, c: f64) -> Rows {
    let tol = ctx.cfg.tolerances.inequality;
    per_item(ctx, |item| {
        let i = Some(item.index);
        Ok(vec![
            ineq(
                "corollaries.contraction",
                "D(pΓ‖q) ≤ (1 − α/(2nC))·D(p‖q)",
                i,
                &verify_corollary1(&item.p, &ctx.q, c)?,
                tol,
            ),
            ineq(
                "corollaries.log_sobolev",
                "D(pΓ‖q)/n ≤ (4C/α)·E_Γ(√(p/q))",
                i,
                &verify_corollary2(&item.p, &ctx.q, c)?,
                tol,
            ),
        ])
    })
}

/// The measured mixing profile and the cube side the block suites use.
fn mixing(ctx: &mut Ctx, report: &mut Report) -> Result<(MixingProfile, ThetaParams), String> {
    if ctx.mixing.is_none() {
        let res = (|| {
            let mc = ctx.cfg.mixing;
            let opts = PhiOptions {
                budget: mc.budget,
                seed: mc.seed,
            };
            let profile = estimate_phi(ctx.model.spec(), opts).map_err(|e| e.to_string())?;
            let lattice = ctx.model.lattice();
            let d = lattice.dim();
            let theta = match mc.m {
                Some(m) => theta_m(&profile, d, m),
                None => scan_m0(&profile, d),
            }
            .map_err(|e| e.to_string())?;
            report.constants.m = Some(theta.m);
            report.constants.theta = Some(theta.theta);
            report.constants.optimistic_profile = Some(theta.optimistic);
            if !theta.usable {
                return Err(format!("Θ_m = {:.6} is not below 1 at m = {}", theta.theta, theta.m));
            }
            Ok((profile, theta))
        })();
        ctx.mixing = Some(res);
    }
    ctx.mixing.clone().expect("computed above")
}

/// `|I_m|` for the bounding box of `lattice`.
fn cube_family_size(lattice: &SiteSet, m: u64) -> u128 {
    (0..lattice.dim())
        .map(|ax| {
            let coords = lattice.sites().iter().map(|s| s.0[ax]);
            let span = (coords.clone().max().unwrap_or(0) - coords.min().unwrap_or(0)) as u128 + 1;
            span + m as u128 - 1
        })
        .product()
}

fn aux(ctx: &Ctx, profile: &MixingProfile, theta: &ThetaParams) -> Rows {
    let t = ctx.cfg.tolerances;
    let lattice = ctx.model.lattice();
    let m = theta.m;
    let spec = ctx.model.spec();
    let boundary = ctx.model.boundary();
    let opts = solver_opts(ctx.cfg);
    let dm = d_matrix_norm_bound(profile, m, &lattice)?;
    let mut rows = vec![
        CheckRow::new(
            "aux.d_entrywise",
            "d_{k,i} ≤ m^d·φ(ρ)·min(dρ/m, 1)",
            None,
            dm.entrywise_worst_slack,
            0.0,
            t.inequality,
        ),
        CheckRow::new("aux.d_norm", "‖D‖ ≤ m^d·Θ_m", None, dm.norm, dm.bound, t.inequality),
    ];
    rows.extend(per_item(ctx, |item| {
        let i = Some(item.index);
        let rep = verify_aux_theorem(&item.p, spec, boundary, m, profile, opts)?;
        let tol = t.inequality + t.solver;
        let mut rows = vec![
            ineq(
                "aux.transport",
                "W₂²(p, q) ≤ Σ_I E W₂²(p_I, q_I)/(m^d(1−Θ_m)²)",
                i,
                &rep.first,
                tol,
            ),
            ineq(
                "aux.transport_tv",
                "Σ_I E W₂²(p_I, q_I)/m^d ≤ Σ_I E Σ_{i∈I} tv_i²",
                i,
                &rep.second,
                tol,
            ),
            ineq(
                "aux.one_step",
                "W₂²(p, pΓ_m) ≤ (m^d/N²)·Σ_I E W₂²(p_I, q_I)",
                i,
                &rep.one_step,
                tol,
            ),
        ];
        let q = &ctx.q;
        let con = block_contraction_check(spec, boundary, m, profile, &[(item.p.clone(), q.clone())], opts)?;
        if con.observed.evaluated > 0 {
            rows.push(ineq(
                "aux.contraction",
                "W₂(pΓ_m, q)/W₂(p, q) ≤ 1 − (m^d/N)(1 − Θ_m)",
                i,
                &con.check,
                tol,
            ));
        }
        Ok(rows)
    })?);
    Ok(rows)
}

fn theorem3(ctx: &Ctx, profile: &MixingProfile, theta: &ThetaParams, report: &mut Report) -> Rows {
    let tol = ctx.cfg.tolerances.inequality;
    let spec = ctx.model.spec();
    let boundary = ctx.model.boundary();
    let m = Some(theta.m);
    let rows = per_item(ctx, |item| {
        let chk = verify_theorem3(&item.p, spec, boundary, profile, m)?;
        let i = Some(item.index);
        let mut rows = vec![ineq(
            "theorem3.divergence",
            "D ≤ (2C/α)·Σ_i E D(p_i‖q_i), mixing C",
            i,
            &chk.bound.second_line,
            tol,
        )];
        if let Some(first) = &chk.bound.first_line {
            rows.push(ineq("theorem3.tv", "D ≤ (4C/α)·Σ_i E tv_i², mixing C", i, first, tol));
        }
        Ok(rows)
    })?;
    let q = &ctx.q;
    let chk = verify_theorem3(q, spec, boundary, profile, m)?;
    report.constants.mixing_c = Some(chk.constant.c);
    report.constants.mixing_c_block = Some(chk.constant.c_block);
    Ok(rows)
}
