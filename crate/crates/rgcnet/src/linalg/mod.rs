//! Dense matrix arithmetic, seeded randomness, and spectral-radius
//! estimation — the numeric substrate for every other module.

mod eigen;
mod matrix;
mod rng;

pub use eigen::{spectral_radius, SpectralRadius};
pub use matrix::Matrix;
pub use rng::Rng;
