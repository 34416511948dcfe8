//! Body outline and prescribed midline undulation.

mod midline;
mod shape;
mod wave;

pub use midline::{midline, MidlineState};
pub use shape::{half_width, BodyShape};
pub use wave::{deflection_angle, solve_wave_coeffs, Gait, WavePlan};
