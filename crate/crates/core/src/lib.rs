//! Variational contact-implicit trajectory optimization for desk-scale
//! articulated models.
//!
//! The crate provides: an articulated-model description with kinematic-loop
//! constraints and affine actuators (`model`), a second-order variational
//! time stepper with complementarity-based rigid contact and Coulomb
//! friction (`stepper`), a self-contained augmented-Lagrangian NLP solver
//! (`nlp`), direct transcription of gait and jump planning problems
//! (`trajopt`), a closed-loop tracking simulator (`track`), and friction
//! identification plus locomotion metrics (`analysis`).
//!
//! All numerics are generic over the scalar type; the aliases below pin the
//! `f64` instantiation used by the CLI and the acceptance suite.

pub mod ad;
pub mod dynamics;
pub mod kinematics;
pub mod model;
pub mod real;
pub mod stepper;
pub mod surface;
pub mod trajectory;
pub mod units;

pub use real::Real;

/// Double-precision model description.
pub type Model = model::Model<f64>;
/// Double-precision contact surface.
pub type Surface = surface::Surface<f64>;
/// Double-precision trajectory.
pub type Trajectory = trajectory::Trajectory<f64>;
/// Double-precision step solution.
pub type StepSolution = stepper::StepSolution<f64>;
/// Double-precision stepper options.
pub type StepOptions = stepper::StepOptions<f64>;
