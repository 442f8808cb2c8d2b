//! GP-compensated robust feedback linearization for planar manipulators.
//!
//! The numerics are generic over the scalar type (`f32` or `f64`, see
//! [`Real`]); the aliases below fix it to `f64`, which is what the
//! experiment harness uses.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod gpr;
pub mod scalar;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::{lit, Real};

pub type Manipulator = dynamics::ManipulatorModel<f64>;
pub type Nominal = dynamics::NominalModel<f64>;
pub type State = dynamics::RobotState<f64>;
pub type Dataset = gpr::GpDataset<f64>;
pub type Gp = gpr::GpModel<f64>;
pub type KernelParams = gpr::SeKernelParams<f64>;
pub type Bounds = gpr::BoundParams<f64>;
pub type Gains = control::GainSpec<f64>;
pub type Controller = control::ControllerSpec<f64>;
pub type TickLog = control::ControlTickLog<f64>;
pub type Sinusoids = trajectory::SinusoidSpec<f64>;
pub type Desired = trajectory::DesiredState<f64>;
