//! Monodomain and EMI cardiac excitation on P1 finite elements, integrated
//! in time by spectral deferred correction with algebraically adaptive
//! sweeps.

pub mod adaptivity;
pub mod assembly;
pub mod collocation;
pub mod config;
pub mod driver;
pub mod ionic;
pub mod mesh;
pub mod output;
pub mod sdc;
pub mod sparse;
