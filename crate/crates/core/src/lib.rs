pub mod calibration;
pub mod camera;
pub mod cuboid;
pub mod disparity;
pub mod error;
pub mod imaging;
pub mod kinematics;
pub mod removal;
pub mod render;
pub mod sample;
pub mod se3;

pub use error::{Error, Result};
