//! Differentiable co-design simulator for soft-rigid hybrid walkers.
//!
//! A soft continuum (MLS-MPM) is coupled with a stiff bar network (XPBD with
//! one projection per substep) through a shared background grid. Reverse-mode
//! adjoints of every forward kernel, replayed over 250-step checkpoints,
//! provide exact gradients of a locomotion objective with respect to the
//! soft-body density field, the skeletal bar densities, and the actuation
//! pulse sequence; an augmented-Lagrangian Adam loop drives all three at once.

pub mod actuation;
pub mod design;
pub mod error;
pub mod grad;
pub mod io;
pub mod math;
pub mod mpm;
pub mod objective;
pub mod optimizer;
pub mod problem;
pub mod scene;
pub mod stepper;
pub mod xpbd;

pub use error::{ConfigError, MarrowError, SimError};
