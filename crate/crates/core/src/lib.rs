//! Trajectory, user scheduling and transmit power co-design for UAV-mounted
//! base stations serving ground users over line-of-sight links.

pub mod channel;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod export;
pub mod kinematics;
pub mod oracle;
pub mod planners;
pub mod scalar;
pub mod sca;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::{Scalar, Vec2};

pub type Vec2f = Vec2<f64>;
pub type Vec2f32 = Vec2<f32>;
pub type RateSurrogate = sca::SurrogateRate<f64>;
pub type RateSurrogateF32 = sca::SurrogateRate<f32>;
