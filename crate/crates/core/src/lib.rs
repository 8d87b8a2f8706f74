//! Exact entropy, transport and mixing computations for discrete spin
//! systems on finite product spaces.

pub mod dobrushin;
pub mod error;
pub mod linalg;
pub mod measures;
pub mod mixing;
pub mod models;
pub mod samplers;
pub mod scalar;
pub mod spec;
pub mod state_space;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Real;
pub use spec::LocalSpec;
pub use state_space::{
    cubes_intersecting, j_set, rho, Alphabet, ConfigId, ConfigSpace, Cube, CubeFamily, Site,
    SiteSet,
};

pub type Distribution = measures::Distribution<f64>;
pub type ConditionalSlice = measures::ConditionalSlice<f64>;
pub type AlphaConstant = measures::AlphaConstant<f64>;
pub type Coupling = transport::Coupling<f64>;
pub type W2Result = transport::W2Result<f64>;
pub type DisagreementVector = transport::DisagreementVector<f64>;
pub type JointSpec = spec::JointSpec<f64>;
pub type Kernel = samplers::Kernel<f64>;
pub type GibbsModel = models::GibbsModel<f64>;
pub type PairPotential = models::PairPotential<f64>;
pub type CouplingMatrixA = dobrushin::CouplingMatrixA<f64>;
pub type DobrushinReport = dobrushin::DobrushinReport<f64>;
pub type MixingProfile = mixing::MixingProfile<f64>;
pub type PhiNorm = mixing::PhiNorm<f64>;
pub type ThetaParams = mixing::ThetaParams<f64>;
