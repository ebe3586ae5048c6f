//! Unknown-input observer and active fault compensation for fully actuated
//! systems.
//!
//! The pipeline: build a [`FasModel`], lift it to descriptor form with
//! [`augment`], synthesize observer gains with
//! [`observer::synthesize`], place poles with
//! [`controller::design_from_poles`], then close the loop with
//! [`sim::simulate`].

pub mod controller;
pub mod design;
pub mod error;
pub mod lmi;
pub mod matcore;
pub mod model;
pub mod observer;
pub mod plants;
pub mod sim;

pub use controller::{ControllerDesign, BlockDesign};
pub use design::DesignFile;
pub use error::{Error, Result};
pub use lmi::{LmiProblem, LmiSolution, MarginReport, SolveOptions};
pub use matcore::{Mat, Spectrum, Vector};
pub use model::{augment, DescriptorAug, FasDynamics, FasModel, FasSignature};
pub use num_complex::Complex64;
pub use observer::{DecayCertificate, ObserverDesign, SynthOptions};
pub use plants::{BallBeamParams, ElectromechParams, PlantSpec, Preset};
pub use sim::fault::FaultSignal;
pub use sim::metrics::MetricReport;
pub use sim::{ObserverInit, SimConfig, SimSummary, Trajectory};
