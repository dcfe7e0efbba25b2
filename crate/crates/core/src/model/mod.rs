//! System representations: finite MDPs, density-based continuous models and
//! box regions.

mod continuous;
mod discrete;
mod file;
mod region;

pub use continuous::{
    normal_cdf, standard_normal, AdmissibleControls, ContinuousModel, LinearDynamics, Noise,
    NoiseKind, TransitionDensity, TransitionSampler, GAUSSIAN_SUPPORT_SIGMAS,
};
pub use discrete::{
    restrict, validate, DiscreteModel, DiscreteModelBuilder, KernelRow, RawRow, Restriction,
    StateSet, ValidationReport, Violation, ROW_SUM_TOLERANCE,
};
pub use file::{continuous_to_json, discrete_to_json, load_model, parse_model, LoadedModel};
pub use region::{AxisBox, Region};
