//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print;
//! the process fails when any criterion fails.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use spinlab::dobrushin::{
    dobrushin_report, lemma4_bound, theorem2_constant, verify_condition_1_3, verify_corollary1,
    verify_corollary2, verify_theorem1, ConditionOptions,
};
use spinlab::measures::{
    chain_expansion_check, hellinger_affinity, hellinger_distance, lemma1_gap, lemma2_reverse_pinsker, pinsker_gap,
    tv_distance,
};
use spinlab::mixing::{
    block_contraction_check, d_matrix_norm_bound, estimate_phi, scan_m0, theta_m, verify_aux_theorem,
    verify_theorem3, PhiOptions,
};
use spinlab::models::{perturb, random_spec, BoundaryCondition, GibbsModel, PairPotential};
use spinlab::samplers::{
    check_reversibility, dirichlet_closed_form, dirichlet_form, entropy_decay_identity, free_space, gibbs_sampler,
    sqrt_density, stationarity_residual, Kernel,
};
use spinlab::spec::JointSpec;
use spinlab::state_space::{Alphabet, ConfigSpace, SiteSet};
use spinlab::transport::mirror::{mirror_descent_w2, MirrorOptions};
use spinlab::transport::{goldstein_coupling, w2_distance, w2_lower_bound, W2Options};
use spinlab::{Distribution, Error, LocalSpec};
use spinlab_cli::report::Status;
use spinlab_cli::RunConfig;

#[path = "../../core/tests/common/mod.rs"]
mod common;

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);

fn random(rng: &mut ChaCha8Rng, space: &ConfigSpace, floor: f64, zeros: bool) -> Distribution {
    let w = (0..space.len())
        .map(|_| {
            if zeros && rng.gen::<f64>() < 0.2 {
                0.0
            } else {
                floor + rng.gen::<f64>()
            }
        })
        .collect::<Vec<_>>();
    if w.iter().all(|x| *x == 0.0) {
        return Distribution::uniform(space.clone());
    }
    Distribution::from_unnormalized(space.clone(), w).unwrap()
}

fn criterion1() -> Result<Outcome, Error> {
    let cases: Vec<(usize, usize, u64)> = [2usize, 3]
        .iter()
        .flat_map(|&a| (1..=5usize).flat_map(move |n| (0..20u64).map(move |s| (a, n, s))))
        .collect();
    let worst = cases
        .par_iter()
        .map(|&(a, n, seed)| -> Result<f64, Error> {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed * 31 + (a * 7 + n) as u64);
            let space = ConfigSpace::chain(a, n)?;
            let q = random(&mut rng, &space, 0.05, false);
            let p = random(&mut rng, &space, 0.0, seed % 2 == 0);
            let gamma = gibbs_sampler(&q)?;
            let mut w = chain_expansion_check(&p, &q)?.residual;
            for i in 0..n {
                w = w.max(entropy_decay_identity(&p, &q, i)?.residual);
                w = w.max(check_reversibility(&q, &gamma.site_kernels[i])?);
                w = w.max(stationarity_residual(&q, &gamma.site_kernels[i])?);
            }
            let h = hellinger_distance(&p, &q)?;
            let aff = hellinger_affinity(&p, &q)?;
            w = w.max((h * h - 2.0 * (1.0 - aff)).abs());
            let direct = dirichlet_form(&gamma.mixture, &q, &sqrt_density(&p, &q))?;
            w = w.max((direct - dirichlet_closed_form(&p, &q)?).abs());
            w = w.max(stationarity_residual(&q, &gamma.mixture)?);
            w = w.max(check_reversibility(&q, &gamma.mixture)?);
            Ok(w)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-9,
        format!("{} instances, worst identity residual {worst:.2e}", cases.len()),
    ))
}

fn criterion2() -> Result<Outcome, Error> {
    const PAIRS: u64 = 10_000;
    let solver = 1e-7;
    let worst = (0..PAIRS)
        .into_par_iter()
        .map(|seed| -> Result<[f64; 6], Error> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = 2 + (seed % 2) as usize;
            let n = 1 + (seed / 2 % 3) as usize;
            let space = ConfigSpace::chain(a, n)?;
            let q = random(&mut rng, &space, 0.01, false);
            let p = random(&mut rng, &space, 0.0, seed % 3 == 0);
            let (tv2, aff) = lemma1_gap(&p, &q)?;
            let (tv2b, half_d) = pinsker_gap(&p, &q)?;
            let (d, rp) = lemma2_reverse_pinsker(&p, &q)?;
            let l4 = lemma4_bound(&p, &q)?;
            let w = w2_distance(&p, &q, solver)?;
            let tv = tv_distance(&p, &q)?;
            let lb = w2_lower_bound(&p, &q)?;
            Ok([
                tv2 - aff,
                tv2b - half_d,
                d - rp,
                l4.lhs - l4.rhs,
                // the solver value is feasible, so it may exceed W₂² by its gap
                w.value * w.value - n as f64 * tv * tv - solver,
                lb - w.value,
            ])
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold([f64::NEG_INFINITY; 6], |mut acc, s| {
            for (a, b) in acc.iter_mut().zip(s) {
                *a = a.max(b);
            }
            acc
        });
    let ok = worst.iter().all(|s| *s <= 1e-9);
    Ok((
        ok,
        format!(
            "{PAIRS} pairs, worst slacks: affinity {:.1e}, Pinsker {:.1e}, reverse Pinsker {:.1e}, product tv {:.1e}, W₂²≤n·tv² {:.1e}, marginal bound {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    ))
}

/// Models for the Dobrushin sweep, all with `‖A‖₂ < 1`.
fn dobrushin_models() -> Result<Vec<(String, Distribution)>, Error> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for n in 1..=4usize {
        for a in [2usize, 3] {
            for _ in 0..2 {
                let margs: Vec<Vec<f64>> = (0..n)
                    .map(|_| {
                        let w: Vec<f64> = (0..a).map(|_| 0.1 + rng.gen::<f64>()).collect();
                        let s: f64 = w.iter().sum();
                        w.iter().map(|x| x / s).collect()
                    })
                    .collect();
                out.push((format!("product n={n} |X|={a}"), Distribution::product(ConfigSpace::chain(a, n)?, &margs)?));
            }
        }
    }
    for n in 2..=4usize {
        for beta in [0.05, 0.1, 0.2, 0.3] {
            for boundary in [BoundaryCondition::Free, BoundaryCondition::Constant(1)] {
                let m = GibbsModel::ising_chain(n, beta, 0.1, boundary.clone())?;
                out.push((format!("ising n={n} β={beta} {boundary:?}"), m.joint()?));
            }
        }
    }
    let mut seed = 0;
    let mut added = 0;
    while added < 14 {
        let n = 2 + (seed % 3) as usize;
        let a = 2 + (seed % 2) as usize;
        let q = random_spec(seed, &SiteSet::chain(n), Alphabet::new(a)?, 0.6)?;
        seed += 1;
        if dobrushin_report(&q)?.satisfied {
            out.push((format!("random n={n} |X|={a} seed={}", seed - 1), q));
            added += 1;
        }
    }
    Ok(out)
}

struct SweepStats {
    models: usize,
    measures: usize,
    condition_cases: usize,
    condition_worst: f64,
    theorem1_worst: f64,
    corollary1_worst: f64,
    corollary2_worst: f64,
    max_norm: f64,
}

/// Measures, transport cases, four worst slacks and `‖A‖₂` of one model.
type ModelTally = (usize, usize, f64, f64, f64, f64, f64);

fn dobrushin_sweep() -> Result<SweepStats, Error> {
    let models = dobrushin_models()?;
    let eps = [0.05, 0.2, 0.5, 1.0];
    let per_model = models
        .par_iter()
        .map(|(_, q)| -> Result<ModelTally, Error> {
            let rep = dobrushin_report(q)?;
            let c = theorem2_constant(&rep)?;
            let mut acc = (0usize, 0usize, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, rep.norm);
            for s in 0..20u64 {
                let p = perturb(q, eps[s as usize % eps.len()], s)?;
                let cond = verify_condition_1_3(&p, q, c, None, ConditionOptions::default())?;
                assert!(cond.exhaustive);
                let t = verify_theorem1(&p, q, c)?;
                let first = t.first_line.as_ref().map_or(f64::NEG_INFINITY, |l| l.slack);
                acc.0 += 1;
                acc.1 += cond.checked;
                acc.2 = acc.2.max(cond.worst_slack);
                acc.3 = acc.3.max(first).max(t.second_line.slack);
                acc.4 = acc.4.max(verify_corollary1(&p, q, c)?.slack);
                acc.5 = acc.5.max(verify_corollary2(&p, q, c)?.slack);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut st = SweepStats {
        models: models.len(),
        measures: 0,
        condition_cases: 0,
        condition_worst: f64::NEG_INFINITY,
        theorem1_worst: f64::NEG_INFINITY,
        corollary1_worst: f64::NEG_INFINITY,
        corollary2_worst: f64::NEG_INFINITY,
        max_norm: 0.0,
    };
    for r in per_model {
        st.measures += r.0;
        st.condition_cases += r.1;
        st.condition_worst = st.condition_worst.max(r.2);
        st.theorem1_worst = st.theorem1_worst.max(r.3);
        st.corollary1_worst = st.corollary1_worst.max(r.4);
        st.corollary2_worst = st.corollary2_worst.max(r.5);
        st.max_norm = st.max_norm.max(r.6);
    }
    Ok(st)
}

fn criterion3(st: &SweepStats) -> Outcome {
    let ok = st.models >= 50
        && st.max_norm < 1.0
        && st.condition_worst <= 1e-6
        && st.theorem1_worst <= 1e-6
        && st.corollary1_worst <= 1e-6;
    (
        ok,
        format!(
            "{} models (max ‖A‖₂ {:.3}), {} measures, {} transport cases; worst slacks: transport {:.1e}, entropy bounds {:.1e}, contraction {:.1e}",
            st.models, st.max_norm, st.measures, st.condition_cases, st.condition_worst, st.theorem1_worst, st.corollary1_worst
        ),
    )
}

fn criterion4(st: &SweepStats) -> Outcome {
    (
        st.corollary2_worst <= 1e-6,
        format!("{} measures, worst log-Sobolev slack {:.1e}", st.measures, st.corollary2_worst),
    )
}

fn criterion5() -> Result<Outcome, Error> {
    // pair space |X^n|² ≤ 2^12: up to 64 configurations
    let shapes = [(2usize, 1usize), (3, 1), (2, 2), (3, 2), (2, 3), (2, 4), (3, 3), (2, 5), (2, 6)];
    let instances: Vec<(usize, usize, u64)> = shapes
        .iter()
        // one instance per shape above 16 states keeps the single-core runtime sane
        .flat_map(|&(a, n)| (0..if a.pow(n as u32) > 16 { 1 } else { 3 }).map(move |s| (a, n, s)))
        .collect();
    let restarts = instances
        .par_iter()
        .map(|&(a, n, seed)| -> Result<f64, Error> {
            let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed * 13 + (a * 10 + n) as u64);
            let space = ConfigSpace::chain(a, n)?;
            let q = random(&mut rng, &space, 0.01, false);
            let p = random(&mut rng, &space, 0.0, seed % 2 == 1);
            let w = w2_distance(&p, &q, 1e-7)?;
            let reported = w.value * w.value;
            let mut improvement = f64::NEG_INFINITY;
            for r in 0..10u64 {
                let md = mirror_descent_w2(&p, &q, r, MirrorOptions::default())?;
                improvement = improvement.max(reported - md.best_objective);
            }
            Ok(improvement)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    let products = (0..60u64)
        .into_par_iter()
        .map(|seed| -> Result<(f64, f64), Error> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, n) = shapes[seed as usize % shapes.len()];
            let space = ConfigSpace::chain(a, n)?;
            let mut marg = || -> Vec<Vec<f64>> {
                (0..n)
                    .map(|_| {
                        let w: Vec<f64> = (0..a).map(|_| 0.05 + rng.gen::<f64>()).collect();
                        let s: f64 = w.iter().sum();
                        w.iter().map(|x| x / s).collect()
                    })
                    .collect()
            };
            let r = Distribution::product(space.clone(), &marg())?;
            let s = Distribution::product(space, &marg())?;
            let w = w2_distance(&r, &s, 1e-12)?;
            let exact = w2_lower_bound(&r, &s)?;
            let true_gap = w.value * w.value - exact * exact;
            Ok(((w.value - exact).abs(), true_gap - w.gap))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let eq = products.iter().map(|x| x.0).fold(0.0, f64::max);
    let gap_excess = products.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        restarts <= 1e-6 && eq <= 1e-8 && gap_excess <= 1e-12,
        format!(
            "{} instances × 10 restarts: best improvement {restarts:.1e}; {} product pairs: |W₂ − bound| ≤ {eq:.1e}, true gap − certified gap ≤ {gap_excess:.1e}",
            instances.len(),
            products.len()
        ),
    ))
}

type NamedSpec = (String, Box<dyn LocalSpec<f64> + Send>);

fn goldstein_specs() -> Result<Vec<NamedSpec>, Error> {
    let mut out: Vec<NamedSpec> = Vec::new();
    for beta in [0.2, 0.5, 1.0] {
        for (field, boundary) in [(0.0, BoundaryCondition::Free), (0.3, BoundaryCondition::Constant(1)), (-0.2, BoundaryCondition::Explicit(vec![0, 1]))] {
            let m = GibbsModel::new(
                PairPotential::ising(beta, 1.0, field),
                SiteSet::chain(4),
                Alphabet::new(2)?,
                boundary.clone(),
            )?;
            out.push((format!("ising β={beta} {boundary:?}"), Box::new(m)));
        }
    }
    let mut nn = PairPotential::ising(0.4, 1.0, 0.1);
    nn.range = 2;
    nn.extra_couplings.push((vec![1].into(), vec![3].into(), 0.5));
    let m = GibbsModel::new(nn, SiteSet::chain(4), Alphabet::new(2)?, BoundaryCondition::Constant(0))?;
    out.push(("ising range 2".into(), Box::new(m)));
    for seed in 0..4 {
        let n = 4 + seed as usize % 2;
        let q = random_spec(seed, &SiteSet::chain(n), Alphabet::new(2)?, 0.1)?;
        out.push((format!("random n={n}"), Box::new(JointSpec::new(q))));
    }
    Ok(out)
}

fn criterion6() -> Result<Outcome, Error> {
    let specs = goldstein_specs()?;
    let results = specs
        .par_iter()
        .map(|(_, spec)| -> Result<(usize, f64, f64, usize), Error> {
            let spec: &dyn LocalSpec<f64> = spec.as_ref();
            let profile = estimate_phi(spec, PhiOptions::default())?;
            assert!(profile.exhaustive);
            let u = spec.universe();
            let free = spec.free_sites().to_vec();
            let mut count = 0;
            let mut level = 0.0f64;
            let mut site = f64::NEG_INFINITY;
            let mut lp = 0;
            for mask in 1usize..1 << free.len() {
                let block: Vec<usize> = (0..free.len()).filter(|j| mask >> j & 1 == 1).map(|j| free[j]).collect();
                if block.len() > 4 {
                    continue;
                }
                let outside: Vec<usize> = (0..u.n()).filter(|p| !block.contains(p)).collect();
                for c in 0..1usize << outside.len() {
                    let mut y = 0;
                    for (j, &p) in outside.iter().enumerate() {
                        y = u.with_digit(y, p, c >> j & 1);
                    }
                    for &k in &outside {
                        if u.digit(y, k) != 0 {
                            continue;
                        }
                        let z = u.with_digit(y, k, 1);
                        let g = goldstein_coupling(spec, &block, y, z)?;
                        count += 1;
                        lp += g.used_lp as usize;
                        level = level.max(g.max_level_error());
                        for (_, pr, tv, dist) in g.site_bounds() {
                            site = site.max(pr - tv).max(pr - profile.value(dist));
                        }
                    }
                }
            }
            Ok((count, level, site, lp))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let count: usize = results.iter().map(|r| r.0).sum();
    let lp: usize = results.iter().map(|r| r.3).sum();
    let level = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let site = results.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    Ok((
        level <= 1e-9 && site <= 1e-9,
        format!(
            "{} specifications, {count} couplings ({lp} via LP): worst level error {level:.1e}, worst site slack {site:.1e}",
            specs.len()
        ),
    ))
}

fn criterion7() -> Result<Outcome, Error> {
    let mut ok = true;
    let mut notes = Vec::new();
    let opts = W2Options {
        tol: 1e-9,
        ..Default::default()
    };
    for (sides, beta, field) in [(vec![4usize], 0.1, 0.1), (vec![2usize, 2], 0.05, 0.1)] {
        let d = sides.len();
        let model = common::ising_box(&sides, beta, field, BoundaryCondition::Constant(1));
        let profile = estimate_phi(&model, PhiOptions::default())?;

        // profile against direct enumeration
        let w = common::brute_weights(&model, beta, field, false);
        let brute = common::brute_phi(&model, &w);
        let mut phi_err = 0.0f64;
        for (&r, &v) in &brute {
            phi_err = phi_err.max((profile.empirical(r) - v).abs());
        }
        phi_err = phi_err.max(if profile.phi.len() == brute.len() { 0.0 } else { 1.0 });

        // Θ_m against an independent scan
        let mut theta_err = 0.0f64;
        for m in 1..=12u64 {
            let t = theta_m(&profile, d, m)?;
            let (v, _) = common::theta_oracle(|r| profile.empirical(r), d as i32, m);
            theta_err = theta_err.max((t.theta - v).abs() / v.max(1.0));
        }

        let space = free_space(&model)?;
        let q = model.joint()?;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ps: Vec<Distribution> = (0..6).map(|_| common::random_p(&space, &mut rng)).collect();
        let mut pairs: Vec<_> = ps.iter().map(|p| (p.clone(), q.clone())).collect();
        pairs.push((ps[0].clone(), ps[1].clone()));
        pairs.push((ps[2].clone(), ps[3].clone()));

        // the smallest admissible side and the next one
        let m0 = scan_m0(&profile, d)?.m;
        let lattice = model.lattice();
        let mut counts_ok = true;
        let mut entry_slack = f64::NEG_INFINITY;
        let mut aux_worst = f64::NEG_INFINITY;
        let mut con_worst = f64::NEG_INFINITY;
        let mut con_note = Vec::new();
        for m in [m0, m0 + 1] {
            let dm = d_matrix_norm_bound(&profile, m, &lattice)?;
            counts_ok &= dm.entrywise_ok;
            entry_slack = entry_slack.max(dm.entrywise_worst_slack);
            for k in 0..lattice.len() {
                for i in 0..lattice.len() {
                    let want = if k == i {
                        0
                    } else {
                        common::separating_closed_form(&lattice.site(k).0, &lattice.site(i).0, m)
                    };
                    counts_ok &= dm.counts[k][i] == want;
                }
            }
            let aux = ps
                .par_iter()
                .map(|p| verify_aux_theorem(p, &model, model.boundary_id(), m, &profile, opts))
                .collect::<Result<Vec<_>, _>>()?;
            aux_worst = aux
                .iter()
                .map(|r| r.first.slack.max(r.second.slack).max(r.one_step.slack))
                .fold(aux_worst, f64::max);
            let con = block_contraction_check(&model, model.boundary_id(), m, &profile, &pairs, opts)?;
            con_worst = con_worst.max(con.check.slack);
            con_note.push(format!("m={m}: {:.3}≤{:.3}", con.check.lhs, con.check.rhs));
        }

        let t3 = ps
            .par_iter()
            .map(|p| verify_theorem3(p, &model, model.boundary_id(), &profile, None))
            .collect::<Result<Vec<_>, _>>()?;
        let t3_worst = t3
            .iter()
            .map(|r| r.bound.first_line.map_or(f64::INFINITY, |l| l.slack))
            .fold(f64::NEG_INFINITY, f64::max);

        let here = phi_err <= 1e-12
            && theta_err <= 1e-10
            && counts_ok
            && entry_slack <= 0.0
            && aux_worst <= 1e-5
            && con_worst <= 1e-5
            && t3_worst <= 1e-9;
        ok &= here;
        notes.push(format!(
            "{sides:?} β={beta}: φ err {phi_err:.0e}, Θ err {theta_err:.0e}, D counts {}, aux slack {aux_worst:.1e}, contraction {}, theorem-3 slack {t3_worst:.1e} (C={:.3e})",
            if counts_ok { "exact" } else { "MISMATCH" },
            con_note.join(", "),
            t3[0].constant.c
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn criterion8() -> Result<Outcome, Error> {
    // a rotation with holding: uniform is stationary, detailed balance fails
    let space = ConfigSpace::chain(3, 1)?;
    let k = Kernel::dense(
        space.clone(),
        vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]],
    )?;
    let u = Distribution::uniform(space);
    let rev = check_reversibility(&u, &k)?;
    let stat = stationarity_residual(&u, &k)?;
    let rev_ok = rev > 1e-3 && stat < 1e-12;

    let cfg_text = "[model]\nkind = \"ising\"\nbox = [3]\nbeta = 0.3\n[sweep]\nsuite = \"all\"\ncount = 1\n";
    let mut cfg: RunConfig = cfg_text.parse().expect("valid config");
    let lib_rejects = cfg.set_tolerance(0.0).map_err(|e| e.exit_code()) == Err(2);
    let dir = std::env::temp_dir().join(format!("spinlab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = dir.join("run.toml");
    std::fs::write(&path, cfg_text).expect("write config");
    let status = Command::new(env!("CARGO_BIN_EXE_spinlab"))
        .args(["verify", "--tol", "0", "--config"])
        .arg(&path)
        .output()
        .expect("run binary")
        .status
        .code();
    let tol_ok = lib_rejects && status.is_some_and(|c| c != 0);

    let strong = "[model]\nkind = \"ising\"\ndim = 2\nbox = [2, 2]\nbeta = 1.0\ncouplings = [ { a = [0, 0], b = [1, 1], j = 1.0 }, { a = [1, 0], b = [0, 1], j = 1.0 } ]\n[sweep]\nsuite = \"all\"\ncount = 1\n";
    let strong_cfg: RunConfig = strong.parse().expect("valid config");
    let q = strong_cfg.model.build().expect("model builds").measure()?;
    let constant_refused = matches!(theorem2_constant(&dobrushin_report(&q)?), Err(Error::NotApplicable(_)));
    let rep = spinlab_cli::run(&strong_cfg).expect("run completes");
    let norm = rep.constants.norm_a.unwrap_or(0.0);
    let skipped: Vec<&str> = rep.not_applicable.iter().map(|s| s.suite.as_str()).collect();
    let strong_ok = constant_refused
        && rep.status == Status::NotApplicable
        && norm >= 1.0
        && ["theorem1", "theorem2", "corollaries"].iter().all(|s| skipped.contains(s))
        && !rep.rows.iter().any(|r| r.name.starts_with("theorem1.") || r.name.starts_with("theorem2."));
    let _ = std::fs::remove_dir_all(&dir);
    Ok((
        rev_ok && tol_ok && strong_ok,
        format!(
            "rotation kernel reversibility residual {rev:.2e}; tolerance 0 → exit {:?}; strong coupling ‖A‖₂ = {norm:.3} → {:?} ({})",
            status,
            rep.status,
            skipped.join(", ")
        ),
    ))
}

fn report(n: usize, name: &str, start: Instant, res: Result<Outcome, Error>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match res {
        Ok((ok, msg)) => {
            println!("criterion {n} [{name}]: {} ({secs:.1}s) {msg}", if ok { "PASS" } else { "FAIL" });
            ok
        }
        Err(e) => {
            println!("criterion {n} [{name}]: FAIL ({secs:.1}s) error: {e}");
            false
        }
    }
}

fn main() {
    // `SPINLAB_CRITERIA=5,7` runs a subset; libtest flags are ignored
    let only: Option<Vec<usize>> = std::env::var("SPINLAB_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut all = true;
    if want(1) {
        all &= report(1, "identities", Instant::now(), criterion1());
    }
    if want(2) {
        all &= report(2, "inequalities", Instant::now(), criterion2());
    }
    if want(3) || want(4) {
        let t = Instant::now();
        match dobrushin_sweep() {
            Ok(st) => {
                all &= report(3, "dobrushin end-to-end", t, Ok(criterion3(&st)));
                all &= report(4, "log-Sobolev form", t, Ok(criterion4(&st)));
            }
            Err(e) => {
                all &= report(3, "dobrushin end-to-end", t, Err(Error::InvalidArgument(e.to_string())));
                all &= report(4, "log-Sobolev form", t, Err(e));
            }
        }
    }
    if want(5) {
        all &= report(5, "transport solver", Instant::now(), criterion5());
    }
    if want(6) {
        all &= report(6, "level coupling", Instant::now(), criterion6());
    }
    if want(7) {
        all &= report(7, "strong mixing", Instant::now(), criterion7());
    }
    if want(8) {
        all &= report(8, "negative controls", Instant::now(), criterion8());
    }
    if !all {
        std::process::exit(1);
    }
}
