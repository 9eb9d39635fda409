//! Receding-horizon stabilization of an unstable 2D reaction-convection-
//! diffusion equation on the unit square, driven by Dirac point actuators
//! with an at-most-one-active-at-a-time (switching) constraint.
//!
//! The pipeline: a P1 finite-element discretization with natural boundary
//! conditions ([`mesh`], [`assembly`], [`actuators`]), Crank-Nicolson time
//! integration ([`dynamics`]), discrete Sobolev norms including the dual
//! norm the decay is measured in ([`norms`]), exact discrete-adjoint
//! gradients of the finite-horizon quadratic cost ([`ocp`]), a projected
//! proximal-gradient solver with Barzilai-Borwein steps and a nonmonotone
//! line search ([`optimizer`]), and the receding-horizon driver that stitches
//! window solutions into a stabilizing switching control ([`rhc`]).

pub mod actuators;
pub mod assembly;
mod band;
pub mod coeffs;
pub mod dynamics;
mod error;
mod linalg;
pub mod mesh;
pub mod norms;
pub mod ocp;
pub mod optimizer;
pub mod rhc;
pub mod time;

pub use error::{Error, Result};

pub use faer;

/// Forces all faer kernels onto the calling thread. Artifact generation
/// calls this to guarantee bit-reproducible outputs; it is process-global.
pub fn use_single_thread() {
    faer::set_global_parallelism(faer::Par::Seq);
}
