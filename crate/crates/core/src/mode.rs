//! Initial vorticity of a single Fourier mode as a function of y.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::grid::ChannelGrid;

/// omega_0^k(y), sampled on whatever grid a solver needs.
#[derive(Clone)]
pub struct ModeFunction {
    f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
    real: bool,
    label: String,
}

impl fmt::Debug for ModeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModeFunction({})", self.label)
    }
}

impl ModeFunction {
    pub fn new<F>(label: impl Into<String>, real: bool, f: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        ModeFunction { f: Arc::new(f), real, label: label.into() }
    }

    pub fn real<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(label, true, move |y| Complex64::new(f(y), 0.0))
    }

    pub fn zero() -> Self {
        Self::real("0", |_| 0.0)
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        (self.f)(y)
    }

    /// True when the values are known to be real.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sample(&self, grid: &ChannelGrid) -> Vec<Complex64> {
        grid.nodes.iter().map(|&y| self.eval(y)).collect()
    }

    pub fn sample_at(&self, ys: &[f64]) -> Vec<Complex64> {
        ys.iter().map(|&y| self.eval(y)).collect()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let f = self.f.clone();
        let real = self.real && s.im == 0.0;
        ModeFunction { f: Arc::new(move |y| f(y) * s), real, label: format!("({s})*{}", self.label) }
    }

    /// The data of mode -k for a real physical field: conj(omega_0^k).
    pub fn conjugate(&self) -> Self {
        let f = self.f.clone();
        ModeFunction { f: Arc::new(move |y| f(y).conj()), real: self.real, label: format!("conj({})", self.label) }
    }

    pub fn vanishes_at_boundary(&self) -> bool {
        self.eval(0.0).norm() < 1e-14 && self.eval(1.0).norm() < 1e-14
    }
}
