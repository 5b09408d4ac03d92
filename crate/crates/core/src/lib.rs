//! Numerical laboratory for nonautonomous linear difference equations
//! `x(k+1) = A(k) x(k)` on ℤ: μ-dichotomy fitting, dichotomy spectra,
//! optimal ratio maps and weak kinematic similarity.
//!
//! The numerical core is generic over the scalar ([`scalar::Real`]); the
//! aliases at the crate root fix it to `f64`.

// `!(x < y)` is used on purpose so that NaN fails every guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod dichotomy_fit;
pub mod growth;
pub mod kinematics;
pub mod linalg;
pub mod output;
pub mod lp;
pub mod pairs;
pub mod ratio_maps;
pub mod scalar;
pub mod serde_ext;
pub mod spectrum;
pub mod system;
pub mod window;

pub use window::Window;

pub type GrowthRate = growth::GrowthRate<f64>;
pub type LinearSystem = system::LinearSystem<f64>;
pub type EvolutionOperator = system::EvolutionOperator<f64>;
pub type ProjectorFamily = system::ProjectorFamily<f64>;
pub type WeightedSystem = system::WeightedSystem<f64>;
pub type Fitter = dichotomy_fit::Fitter<f64>;
pub type SpectrumEstimate = spectrum::SpectrumEstimate<f64>;
pub type RatioCurve = ratio_maps::RatioCurve<f64>;
pub type SimilarityMap = kinematics::SimilarityMap<f64>;
pub type ExampleEntry = corpus::ExampleEntry<f64>;
