//! Monotone shear profiles and the Fourier convention shared by the crate.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SAMPLES: usize = 2001;

/// Profile descriptor as it appears in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSpec {
    Couette,
    SinePerturbed { a: f64 },
    TanhMonotone { s: f64 },
    /// b(y) = sum_n coeffs[n] y^n
    Polynomial { coeffs: Vec<f64> },
}

impl FromStr for ProfileSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |name: &str| -> Option<Result<f64>> {
            let rest = s.strip_prefix(name)?.trim();
            let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
            Some(inner.trim().parse::<f64>().map_err(|e| {
                Error::InvalidArgument(format!("bad parameter in {s:?}: {e}"))
            }))
        };
        if s == "couette" {
            return Ok(ProfileSpec::Couette);
        }
        if let Some(a) = arg("sine-perturbed") {
            return Ok(ProfileSpec::SinePerturbed { a: a? });
        }
        if let Some(v) = arg("tanh-monotone") {
            return Ok(ProfileSpec::TanhMonotone { s: v? });
        }
        Err(Error::InvalidArgument(format!("unknown profile {s:?}")))
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileSpec::Couette => write!(f, "couette"),
            ProfileSpec::SinePerturbed { a } => write!(f, "sine-perturbed({a})"),
            ProfileSpec::TanhMonotone { s } => write!(f, "tanh-monotone({s})"),
            ProfileSpec::Polynomial { coeffs } => write!(f, "polynomial{coeffs:?}"),
        }
    }
}

/// A certified monotone profile b on [0,1], extended linearly outside.
#[derive(Clone, Debug)]
pub struct ShearProfile {
    pub spec: ProfileSpec,
    pub name: String,
    pub theta: f64,
    pub sign_aleph: i32,
    pub min_db: f64,
    pub max_db: f64,
    derivs: Vec<Vec<f64>>,
}

impl ShearProfile {
    /// Derivative of order `order` (0..=4) on [0,1] without extension.
    fn raw(&self, order: usize, y: f64) -> f64 {
        match &self.spec {
            ProfileSpec::Couette => match order {
                0 => y,
                1 => 1.0,
                _ => 0.0,
            },
            ProfileSpec::SinePerturbed { a } => {
                let w = 2.0 * PI;
                let (s, c) = (w * y).sin_cos();
                match order {
                    0 => y + a * s / w,
                    1 => 1.0 + a * c,
                    2 => -w * a * s,
                    3 => -w * w * a * c,
                    _ => w * w * w * a * s,
                }
            }
            ProfileSpec::TanhMonotone { s } => {
                let t = (s * (y - 0.5)).tanh();
                let sech2 = 1.0 - t * t;
                match order {
                    0 => t / s,
                    1 => sech2,
                    2 => -2.0 * s * t * sech2,
                    3 => -2.0 * s * s * sech2 * (1.0 - 3.0 * t * t),
                    _ => 8.0 * s * s * s * t * sech2 * (2.0 - 3.0 * t * t),
                }
            }
            ProfileSpec::Polynomial { .. } => horner(&self.derivs[order.min(4)], y),
        }
    }

    pub fn b(&self, y: f64) -> f64 {
        if y < 0.0 {
            self.raw(0, 0.0) + self.raw(1, 0.0) * y
        } else if y > 1.0 {
            self.raw(0, 1.0) + self.raw(1, 1.0) * (y - 1.0)
        } else {
            self.raw(0, y)
        }
    }

    pub fn db(&self, y: f64) -> f64 {
        self.raw(1, y.clamp(0.0, 1.0))
    }

    pub fn d2b(&self, y: f64) -> f64 {
        if (0.0..=1.0).contains(&y) {
            self.raw(2, y)
        } else {
            0.0
        }
    }

    pub fn d3b(&self, y: f64) -> f64 {
        if (0.0..=1.0).contains(&y) {
            self.raw(3, y)
        } else {
            0.0
        }
    }

    pub fn d4b(&self, y: f64) -> f64 {
        if (0.0..=1.0).contains(&y) {
            self.raw(4, y)
        } else {
            0.0
        }
    }

    /// True when b'' vanishes identically.
    pub fn is_couette_like(&self) -> bool {
        match &self.spec {
            ProfileSpec::Couette => true,
            ProfileSpec::SinePerturbed { a } => *a == 0.0,
            ProfileSpec::Polynomial { coeffs } => coeffs.iter().skip(2).all(|c| *c == 0.0),
            ProfileSpec::TanhMonotone { .. } => false,
        }
    }

    /// Sampled sup of |b''| on [0,1].
    pub fn max_abs_d2b(&self) -> f64 {
        (0..SAMPLES)
            .map(|i| self.d2b(i as f64 / (SAMPLES - 1) as f64).abs())
            .fold(0.0, f64::max)
    }

    pub fn range(&self) -> (f64, f64) {
        let (b0, b1) = (self.b(0.0), self.b(1.0));
        (b0.min(b1), b0.max(b1))
    }
}

fn horner(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * y + v)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(n, v)| n as f64 * v)
        .collect()
}

/// Builds and certifies a profile from its descriptor.
pub fn make_profile(spec: &ProfileSpec) -> Result<ShearProfile> {
    let mut derivs = Vec::new();
    match spec {
        ProfileSpec::SinePerturbed { a } if !a.is_finite() => {
            return Err(Error::InvalidArgument("non-finite amplitude".into()))
        }
        ProfileSpec::TanhMonotone { s } if !(s.is_finite() && *s > 0.0) => {
            return Err(Error::InvalidArgument("tanh steepness must be positive".into()))
        }
        ProfileSpec::Polynomial { coeffs } => {
            if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument("empty or non-finite coefficients".into()));
            }
            let mut c = coeffs.clone();
            for _ in 0..5 {
                let next = poly_derivative(&c);
                derivs.push(c);
                c = next;
            }
        }
        _ => {}
    }
    let mut p = ShearProfile {
        spec: spec.clone(),
        name: spec.to_string(),
        theta: 0.0,
        sign_aleph: 1,
        min_db: 0.0,
        max_db: 0.0,
        derivs,
    };
    certify_profile(&mut p)?;
    Ok(p)
}

fn certify_profile(p: &mut ShearProfile) -> Result<()> {
    let ys: Vec<f64> = (0..SAMPLES).map(|i| i as f64 / (SAMPLES - 1) as f64).collect();
    let db: Vec<f64> = ys.iter().map(|&y| p.raw(1, y)).collect();
    let sign = db[0].signum();
    if db.iter().any(|v| !v.is_finite() || v.signum() != sign || *v == 0.0) {
        return Err(Error::NonMonotone("b' vanishes or changes sign on [0,1]".into()));
    }
    let min = db.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let max = db.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // largest theta with theta/100 <= |b'| <= 1/(100 theta), kept at or below 1/10
    let theta = (100.0 * min).min(1.0 / (100.0 * max)).min(0.1);
    if theta <= 0.0 || theta.is_nan() {
        return Err(Error::NonMonotone(format!("|b'| range [{min}, {max}] admits no theta")));
    }
    p.theta = theta;
    p.sign_aleph = sign as i32;
    p.min_db = min;
    p.max_db = max;
    check_regularity(p, &ys)
}

fn check_regularity(p: &ShearProfile, ys: &[f64]) -> Result<()> {
    let h = 1e-3;
    let fd = |order: usize, y: f64, h: f64| (p.raw(order, y + h) - p.raw(order, y - h)) / (2.0 * h);
    for order in 0..4 {
        let bound = ys.iter().map(|&y| p.raw(order + 1, y).abs()).fold(0.0, f64::max);
        for &y in ys.iter().step_by(20) {
            let y = y.clamp(h, 1.0 - h);
            let d = p.raw(order + 1, y);
            // a consistent derivative makes the defect shrink fourfold when h halves
            let e1 = (fd(order, y, h) - d).abs();
            let e2 = (fd(order, y, 0.5 * h) - d).abs();
            if !(e2 <= 0.35 * e1 + 1e-9 * (1.0 + bound)) {
                return Err(Error::RegularityFail(format!(
                    "derivative of order {} inconsistent at y={y:.4}: defects {e1:.3e}, {e2:.3e}",
                    order + 1
                )));
            }
        }
    }
    Ok(())
}

/// Solves b(y) = v for y in [0,1] by Newton steps safeguarded with bisection.
pub fn b_inverse(p: &ShearProfile, v: f64) -> Result<f64> {
    let (lo, hi) = p.range();
    let slack = 1e-14 * (1.0 + lo.abs().max(hi.abs()));
    if !(v >= lo - slack && v <= hi + slack) {
        return Err(Error::OutOfRange { value: v, lo, hi });
    }
    let s = p.sign_aleph as f64;
    let f = |y: f64| s * (p.b(y) - v);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    if f(a) >= 0.0 {
        return Ok(0.0);
    }
    if f(b) <= 0.0 {
        return Ok(1.0);
    }
    let mut y = (v - p.b(0.0)) / (p.b(1.0) - p.b(0.0));
    y = y.clamp(0.0, 1.0);
    for _ in 0..200 {
        let fy = f(y);
        if fy == 0.0 {
            return Ok(y);
        }
        if fy < 0.0 {
            a = y;
        } else {
            b = y;
        }
        let newton = y - fy / (s * p.db(y));
        y = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (b - a) < 1e-16 || f(y).abs() < 1e-15 {
            break;
        }
    }
    Ok(y)
}

/// omega(x) = c0 * sum_k omega_k e^{ikx}, omega_k = int_0^{2pi} omega e^{-ikx} dx.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierConvention {
    pub c0: f64,
}

impl Default for FourierConvention {
    fn default() -> Self {
        FourierConvention { c0: 1.0 / (2.0 * PI) }
    }
}

impl FourierConvention {
    pub const MODE_SUM: &'static str =
        "omega(x) = c0 * sum_k omega_k e^{ikx}, omega_k = int_0^{2pi} omega(x) e^{-ikx} dx";

    /// Trapezoid forward transform of samples at x_j = 2 pi j / n.
    pub fn forward(&self, samples: &[Complex64], ks: &[i64]) -> Vec<Complex64> {
        let n = samples.len();
        let dx = 2.0 * PI / n as f64;
        ks.iter()
            .map(|&k| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::cis(-(k as f64) * j as f64 * dx))
                    .sum::<Complex64>()
                    * dx
            })
            .collect()
    }

    /// Synthesizes the field at arbitrary x from mode amplitudes.
    pub fn inverse(&self, modes: &[(i64, Complex64)], x: &[f64]) -> Vec<Complex64> {
        x.iter()
            .map(|&xv| {
                modes
                    .iter()
                    .map(|(k, a)| a * Complex64::cis(*k as f64 * xv))
                    .sum::<Complex64>()
                    * self.c0
            })
            .collect()
    }
}
