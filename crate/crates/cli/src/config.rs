//! Run configuration: a TOML document with `[model]`, `[sweep]`,
//! `[tolerances]` and `[mixing]` sections.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spinlab::models::{random_spec, BoundaryCondition, GibbsModel, PairPotential};
use spinlab::spec::JointSpec;
use spinlab::state_space::{Alphabet, ConfigSpace, Site, SiteSet};
use spinlab::{Distribution, LocalSpec};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Theorem1,
    Theorem2,
    Corollaries,
    Lemmas,
    Aux,
    Theorem3,
    All,
}

impl Suite {
    /// The concrete suites this selection expands to, in execution order.
    pub fn expand(self) -> Vec<Suite> {
        use Suite::*;
        match self {
            All => vec![Lemmas, Theorem1, Theorem2, Corollaries, Aux, Theorem3],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::Corollaries => "corollaries",
            Suite::Lemmas => "lemmas",
            Suite::Aux => "aux",
            Suite::Theorem3 => "theorem3",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ising,
    Potts,
    /// Independent sites; marginals given or drawn from `seed`.
    Product,
    /// A seeded full-support joint measure.
    Random,
}

/// An extra symmetric coupling between two lattice sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraCoupling {
    pub a: Vec<i64>,
    pub b: Vec<i64>,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub dim: usize,
    /// Side lengths of the box `Λ`.
    #[serde(rename = "box")]
    pub sides: Vec<usize>,
    #[serde(default = "two")]
    pub alphabet: usize,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub field: f64,
    /// Nearest-neighbour coupling.
    #[serde(default = "unit")]
    pub coupling: f64,
    #[serde(default)]
    pub couplings: Vec<ExtraCoupling>,
    #[serde(default = "one_u64")]
    pub range: u64,
    #[serde(default = "free")]
    pub boundary: BoundaryCondition,
    #[serde(default)]
    pub seed: u64,
    /// Mass floor of `random` models.
    #[serde(default = "half")]
    pub min_mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "all")]
    pub suite: Suite,
    /// Perturbation seeds per `ε`.
    #[serde(default = "four")]
    pub count: usize,
    #[serde(default = "eps_grid")]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            count: four(),
            eps: eps_grid(),
            seed: 0,
        }
    }
}

/// A row passes when its slack is at most its tolerance; rows that go
/// through the transport solver also allow `solver`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tiny")]
    pub inequality: f64,
    #[serde(default = "tiny")]
    pub identity: f64,
    /// Target certified gap of each `W₂²` solve.
    #[serde(default = "solver_tol")]
    pub solver: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            inequality: tiny(),
            identity: tiny(),
            solver: solver_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingConfig {
    /// Cube side; the smallest usable one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default = "budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            m: None,
            budget: budget(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub mixing: MixingConfig,
}

fn one() -> usize {
    1
}
fn one_u64() -> u64 {
    1
}
fn two() -> usize {
    2
}
fn four() -> usize {
    4
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn tiny() -> f64 {
    1e-9
}
fn solver_tol() -> f64 {
    1e-7
}
fn budget() -> usize {
    4096
}
fn free() -> BoundaryCondition {
    BoundaryCondition::Free
}
fn all() -> Suite {
    Suite::All
}
fn eps_grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

impl FromStr for RunConfig {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        // toml's messages carry the line, column and offending key
        let cfg: RunConfig = toml::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
            .map_err(|e: CliError| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: &str| Err(CliError::Config(format!("key `{key}`: {why}")));
        let m = &self.model;
        if m.sides.is_empty() || m.sides.contains(&0) {
            return bad("model.box", "side lengths must be positive");
        }
        if m.dim != m.sides.len() {
            return bad("model.dim", "must equal the number of box sides");
        }
        if m.alphabet < 2 {
            return bad("model.alphabet", "needs at least two symbols");
        }
        if !m.beta.is_finite() || m.beta < 0.0 {
            return bad("model.beta", "must be finite and non-negative");
        }
        if !(m.min_mass >= 0.0 && m.min_mass <= 1.0) {
            return bad("model.min_mass", "must lie in [0, 1]");
        }
        if self.sweep.count == 0 {
            return bad("sweep.count", "must be at least 1");
        }
        if self.sweep.eps.is_empty() || self.sweep.eps.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return bad("sweep.eps", "needs values in [0, 1]");
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.inequality", t.inequality),
            ("tolerances.identity", t.identity),
            ("tolerances.solver", t.solver),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, "tolerances must be positive");
            }
        }
        if self.mixing.m == Some(0) {
            return bad("mixing.m", "cube side must be at least 1");
        }
        if self.mixing.budget == 0 {
            return bad("mixing.budget", "must be at least 1");
        }
        Ok(())
    }

    /// Overrides every check tolerance.
    pub fn set_tolerance(&mut self, tol: f64) -> Result<(), CliError> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
        }
        self.tolerances.inequality = tol;
        self.tolerances.identity = tol;
        Ok(())
    }
}

/// A model ready for the suites.
pub enum BuiltModel {
    Gibbs(GibbsModel<f64>),
    Joint(JointSpec<f64>),
}

impl BuiltModel {
    pub fn spec(&self) -> &dyn LocalSpec<f64> {
        match self {
            BuiltModel::Gibbs(g) => g,
            BuiltModel::Joint(j) => j,
        }
    }

    /// Universe configuration carrying the frozen boundary.
    pub fn boundary(&self) -> usize {
        match self {
            BuiltModel::Gibbs(g) => g.boundary_id(),
            BuiltModel::Joint(_) => 0,
        }
    }

    pub fn lattice(&self) -> SiteSet {
        match self {
            BuiltModel::Gibbs(g) => g.lattice(),
            BuiltModel::Joint(j) => j.measure().space().sites().clone(),
        }
    }

    /// The measure on `X^Λ` under study.
    pub fn measure(&self) -> spinlab::Result<Distribution> {
        match self {
            BuiltModel::Gibbs(g) => g.joint(),
            BuiltModel::Joint(j) => Ok(j.measure().clone()),
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<BuiltModel, CliError> {
        let cfg = |e: spinlab::Error| CliError::Config(format!("[model]: {e}"));
        let lattice = SiteSet::lattice_box(&self.sides).map_err(cfg)?;
        let alphabet = Alphabet::new(self.alphabet).map_err(cfg)?;
        match self.kind {
            ModelKind::Ising | ModelKind::Potts => {
                let mut pot = match self.kind {
                    ModelKind::Ising => PairPotential::ising(self.beta, self.coupling, self.field),
                    _ => PairPotential {
                        field: self.field,
                        ..PairPotential::potts(self.beta, self.coupling)
                    },
                };
                pot.range = self.range;
                pot.extra_couplings = self
                    .couplings
                    .iter()
                    .map(|c| (Site::new(c.a.clone()), Site::new(c.b.clone()), c.j))
                    .collect();
                let model = GibbsModel::new(pot, lattice, alphabet, self.boundary.clone()).map_err(cfg)?;
                Ok(BuiltModel::Gibbs(model))
            }
            ModelKind::Product => {
                let space = ConfigSpace::new(alphabet, lattice).map_err(cfg)?;
                let marginals = match &self.marginals {
                    Some(m) => m.clone(),
                    None => seeded_marginals(self.seed, space.n(), self.alphabet),
                };
                let q = Distribution::product(space, &marginals).map_err(cfg)?;
                Ok(BuiltModel::Joint(JointSpec::new(q)))
            }
            ModelKind::Random => {
                let q = random_spec(self.seed, &lattice, alphabet, self.min_mass).map_err(cfg)?;
                Ok(BuiltModel::Joint(JointSpec::new(q)))
            }
        }
    }
}

/// Site marginals bounded away from zero, deterministic in `seed`.
fn seeded_marginals(seed: u64, n: usize, q: usize) -> Vec<Vec<f64>> {
    let space = ConfigSpace::chain(q, 1).expect("single site");
    (0..n)
        .map(|i| {
            let d = random_spec(seed.wrapping_add(i as u64), space.sites(), space.alphabet(), 0.2)
                .expect("single-site measure");
            d.into_weights()
        })
        .collect()
}
