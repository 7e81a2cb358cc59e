//! Simulation and verification toolkit for the simplified Ericksen–Leslie
//! nematic liquid crystal system with variable fluid density on a periodic box.

pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod galerkin;
pub mod model;
pub mod scenario;
pub mod stepper;
pub mod transport;

pub use error::{Error, Result};
pub use fields::{DirectorField, Field, Grid, Spectrum, VectorField};
pub use model::{Params, SimState};
pub use scenario::{Scenario, ScenarioOptions};
