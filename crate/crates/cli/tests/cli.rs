use std::path::Path;
use std::process::Command;

use spinlab_cli::report::{render_csv, Status};
use spinlab_cli::{report_render, run, Format, Report, RunConfig};

const ISING3: &str = r#"
[model]
kind = "ising"
box = [3]
beta = 0.3
boundary = { constant = 1 }

[sweep]
suite = "all"
count = 2
eps = [0.1, 1.0]
"#;

const PRODUCT: &str = r#"
[model]
kind = "product"
box = [3]
marginals = [[0.3, 0.7], [0.5, 0.5], [0.8, 0.2]]

[sweep]
suite = "theorem1"
count = 5
"#;

const STRONG: &str = r#"
[model]
kind = "ising"
dim = 2
box = [2, 2]
beta = 1.0
couplings = [ { a = [0, 0], b = [1, 1], j = 1.0 }, { a = [1, 0], b = [0, 1], j = 1.0 } ]

[sweep]
suite = "theorem2"
count = 1
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinlab"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn product_theorem1_passes_with_unit_constant() {
    let cfg: RunConfig = PRODUCT.parse().unwrap();
    let rep = run(&cfg).unwrap();
    assert_eq!(rep.status, Status::Pass);
    assert!(!rep.rows.is_empty() && rep.rows.iter().all(|r| r.pass));
    assert!((rep.constants.c.unwrap() - 1.0).abs() < 1e-12);
    assert!(rep.rows.iter().all(|r| r.name.starts_with("theorem1.")));
}

#[test]
fn full_pipeline_on_a_short_chain() {
    let cfg: RunConfig = ISING3.parse().unwrap();
    let rep = run(&cfg).unwrap();
    assert!(rep.rows.len() >= 12, "{} rows", rep.rows.len());
    assert_eq!(rep.status, Status::Pass, "{:?}", rep.rows.iter().find(|r| !r.pass));
    for prefix in ["lemmas.", "identities.", "theorem1.", "theorem2.", "corollaries.", "aux.", "theorem3."] {
        assert!(rep.rows.iter().any(|r| r.name.starts_with(prefix)), "no {prefix} rows");
    }
    assert!(rep.rows.iter().all(|r| !r.tag.is_empty()));
    assert!(rep.constants.mixing_c.is_some());
}

#[test]
fn rows_are_sorted_by_name_then_index() {
    let rep = run(&ISING3.parse().unwrap()).unwrap();
    for w in rep.rows.windows(2) {
        assert!((&w[0].name, w[0].seed_index) <= (&w[1].name, w[1].seed_index));
    }
}

#[test]
fn same_seed_gives_identical_json_apart_from_timings() {
    let cfg: RunConfig = ISING3.parse().unwrap();
    let render = || {
        let mut r = run(&cfg).unwrap();
        r.environment.timings.clear();
        report_render(&r, Format::Json).unwrap()
    };
    assert_eq!(render(), render());
}

#[test]
fn json_round_trip_is_stable() {
    let rep = run(&ISING3.parse().unwrap()).unwrap();
    let a = report_render(&rep, Format::Json).unwrap();
    let back: Report = serde_json::from_slice(&a).unwrap();
    let b = report_render(&back, Format::Json).unwrap();
    assert_eq!(a, b);
    assert_eq!(back, rep);
}

#[test]
fn csv_has_one_line_per_check() {
    let rep = run(&ISING3.parse().unwrap()).unwrap();
    let bytes = report_render(&rep, Format::Csv).unwrap();
    let mut rd = csv::Reader::from_reader(bytes.as_slice());
    assert_eq!(rd.headers().unwrap().len(), 8);
    assert_eq!(rd.records().count(), rep.rows.len());
}

#[test]
fn empty_report_renders_valid_documents() {
    let mut rep = Report::empty();
    rep.finish();
    let j = report_render(&rep, Format::Json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&j).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 0);
    assert_eq!(v["schema"], "v1");
    let c = render_csv(&rep.rows).unwrap();
    assert_eq!(csv::Reader::from_reader(c.as_slice()).records().count(), 0);
    let t = String::from_utf8(report_render(&rep, Format::Text).unwrap()).unwrap();
    assert!(t.starts_with("PASS: 0 checks"));
}

#[test]
fn zero_tolerance_is_rejected() {
    let mut cfg: RunConfig = PRODUCT.parse().unwrap();
    assert_eq!(cfg.set_tolerance(0.0).unwrap_err().exit_code(), 2);
    let text = PRODUCT.replace("[sweep]", "[tolerances]\ninequality = 0.0\n\n[sweep]");
    assert_eq!(text.parse::<RunConfig>().unwrap_err().exit_code(), 2);

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "p.toml", PRODUCT);
    let out = bin().args(["verify", "--tol", "0", "--config"]).arg(&path).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", "[model]\nkind = \"ising\"\nbox = [3]\nbogus = 1\n");
    let out = bin().args(["verify", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("bogus"), "{err}");
}

#[test]
fn strong_coupling_is_not_applicable() {
    let rep = run(&STRONG.parse().unwrap()).unwrap();
    assert_eq!(rep.status, Status::NotApplicable);
    assert!(rep.rows.is_empty());
    assert!(rep.constants.norm_a.unwrap() >= 1.0 && rep.constants.c.is_none());
    assert_eq!(rep.exit_code(), 1);

    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.toml", STRONG);
    let out = bin().args(["verify", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("NOT APPLICABLE"));
}

#[test]
fn binary_writes_reports_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", ISING3);
    let out_path = dir.path().join("r.json");
    let out = bin()
        .args(["verify", "--suite", "lemmas", "--seed", "7", "--format", "json", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: Report = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(rep.environment.seed, 7);
    assert!(rep.rows.iter().all(|r| r.name.starts_with("lemmas.") || r.name.starts_with("identities.")));
    assert!(rep.environment.timings.contains_key("lemmas"));
}

#[test]
fn w2_between_two_product_measures() {
    use spinlab::state_space::ConfigSpace;
    use spinlab::Distribution;
    let space = ConfigSpace::chain(2, 2).unwrap();
    let r = Distribution::product(space.clone(), &[vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
    let s = Distribution::product(space, &[vec![0.5, 0.5], vec![0.3, 0.7]]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "r.json", &serde_json::to_string(&r).unwrap());
    let b = write(dir.path(), "s.json", &serde_json::to_string(&s).unwrap());
    let out = bin().args(["w2", "--format", "json", "--tol", "1e-12"]).arg(&a).arg(&b).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // product measures: coupling site by site is optimal, W₂ = √(0.3² + 0.3²)
    let want = (0.09f64 + 0.09).sqrt();
    assert!((v["value"].as_f64().unwrap() - want).abs() < 1e-8);
    assert!((v["marginal_lower_bound"].as_f64().unwrap() - want).abs() < 1e-12);
}

#[test]
fn constants_and_phi_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", ISING3);
    let out = bin().args(["constants", "--format", "json", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // each neighbour flip shifts the local field by 2β: entries tanh(2β)/2,
    // and the path on three vertices has spectral radius √2
    let a = 0.5 * (0.6f64).tanh();
    for (k, i, want) in [(0, 1, a), (1, 0, a), (1, 2, a), (2, 1, a), (0, 2, 0.0), (1, 1, 0.0)] {
        assert!((v["coupling_matrix"][k][i].as_f64().unwrap() - want).abs() < 1e-12);
    }
    let norm = v["norm_a"].as_f64().unwrap();
    assert!((norm - a * 2f64.sqrt()).abs() < 1e-9);
    assert!((v["C"].as_f64().unwrap() - 1.0 / (1.0 - norm).powi(2)).abs() < 1e-9);

    let out = bin().args(["phi", "--format", "csv", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("r,phi\n1,"));

    let out = bin().args(["constants", "--format", "csv", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = bin().arg("verify").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["verify", "--format", "yaml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
