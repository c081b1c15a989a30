//! Numerical laboratory for linear inviscid damping around monotone shear flows
//! in a periodic channel: singular resolvent solves, spectral evolution of each
//! Fourier mode, a direct time-stepping oracle, spectrum certification,
//! leading-order asymptotics and weighted-norm sweeps.

pub mod asymptotics;
pub mod collocation;
pub mod direct;
pub mod error;
pub mod evolution;
pub mod greens;
pub mod grid;
pub mod linalg;
pub mod mode;
pub mod norms;
pub mod plots;
pub mod profiles;
pub mod quadrature;
pub mod resolvent;
pub mod runner;
pub mod scan;
pub mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64;
