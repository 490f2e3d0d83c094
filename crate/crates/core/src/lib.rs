//! Needlet polyspectra of isotropic Gaussian fields on the sphere: exact
//! variances, their high-frequency limits, and Monte Carlo checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cubature;
pub mod error;
pub mod fieldsim;
pub mod mcharness;
pub mod model;
pub mod polyspectra;
pub mod specfun;
pub mod wigner;

pub use asymptotics::{AsymptoticConstant, Route};
pub use cubature::{GaussLegendreRule, SphereRule};
pub use error::{Error, Result};
pub use fieldsim::{FieldOnGrid, HarmonicCoeffs, SynthesisPlan};
pub use mcharness::{ExperimentConfig, ExperimentReport, McSummary};
pub use model::{BandProfile, NeedletWindow, PowerSpectrum, Spectrum, Window};
pub use polyspectra::{ExcursionSample, PolyspectrumSample};
pub use wigner::TripleIndex;
