//! Time stepping of a single mode in integrating-factor form, used as an
//! independent reference for the spectral evolution.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::{ModeTrajectory, TrajectorySource};
use crate::mode::ModeFunction;
use crate::profiles::ShearProfile;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const DEFAULT_N: usize = 1024;
pub const DEFAULT_DT: f64 = 0.01;

/// Fourth-order compact solver for psi'' - k^2 psi = omega, psi(0) = psi(1) = 0,
/// on n uniform intervals. The tridiagonal system is factored once.
#[derive(Clone, Debug)]
pub struct Numerov {
    pub n: usize,
    pub k: i64,
    h: f64,
    off: f64,
    // Thomas factors: modified diagonal inverses
    inv_piv: Vec<f64>,
}

impl Numerov {
    pub fn new(k: i64, n: usize) -> Self {
        let h = 1.0 / n as f64;
        let a = (k as f64 * h).powi(2) / 12.0;
        let off = 1.0 - a;
        let diag = -(2.0 + 10.0 * a);
        let m = n - 1;
        let mut inv_piv = vec![0.0; m];
        let mut piv = diag;
        inv_piv[0] = 1.0 / piv;
        for i in 1..m {
            piv = diag - off * off * inv_piv[i - 1];
            inv_piv[i] = 1.0 / piv;
        }
        Numerov { n, k, h, off, inv_piv }
    }

    /// psi at all n+1 grid points.
    pub fn solve(&self, omega: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(omega.len(), n + 1);
        let c = self.h * self.h / 12.0;
        let m = n - 1;
        let mut x: Vec<Complex64> = (1..n).map(|i| (omega[i - 1] + omega[i] * 10.0 + omega[i + 1]) * c).collect();
        x[0] *= self.inv_piv[0];
        for i in 1..m {
            let v = x[i] - x[i - 1] * self.off;
            x[i] = v * self.inv_piv[i];
        }
        for i in (0..m - 1).rev() {
            let v = x[i + 1] * (self.off * self.inv_piv[i]);
            x[i] -= v;
        }
        let mut out = Vec::with_capacity(n + 1);
        out.push(ZERO);
        out.extend(x);
        out.push(ZERO);
        out
    }
}

/// Fourth-order first derivative on a uniform grid including both ends.
pub fn uniform_derivative(f: &[Complex64]) -> Vec<Complex64> {
    let n = f.len();
    assert!(n >= 5);
    let h = 1.0 / (n - 1) as f64;
    let c = 1.0 / (12.0 * h);
    let mut d = vec![ZERO; n];
    d[0] = (f[0] * -25.0 + f[1] * 48.0 - f[2] * 36.0 + f[3] * 16.0 - f[4] * 3.0) * c;
    d[1] = (f[0] * -3.0 - f[1] * 10.0 + f[2] * 18.0 - f[3] * 6.0 + f[4]) * c;
    let e = n - 1;
    d[e] = -(f[e] * -25.0 + f[e - 1] * 48.0 - f[e - 2] * 36.0 + f[e - 3] * 16.0 - f[e - 4] * 3.0) * c;
    d[e - 1] = -(f[e] * -3.0 - f[e - 1] * 10.0 + f[e - 2] * 18.0 - f[e - 3] * 6.0 + f[e - 4]) * c;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * c;
    }
    d
}

/// Trapezoid integral over [0,1] of uniform samples.
pub fn uniform_integral(f: &[Complex64]) -> Complex64 {
    let n = f.len() - 1;
    let s: Complex64 = f[1..n].iter().sum::<Complex64>() + (f[0] + f[n]) * 0.5;
    s / n as f64
}

/// Largest admissible step for mode k.
pub fn dt_max(profile: &ShearProfile, k: i64) -> f64 {
    let ka = (k as f64).abs();
    let gnorm = (1.0 - 1.0 / (0.5 * ka).cosh()) / (ka * ka);
    let coupling = ka * profile.max_abs_d2b() * gnorm;
    if coupling == 0.0 {
        0.01
    } else {
        (0.2 / coupling).min(0.01)
    }
}

/// Sheared unknown f_k = e^{ikb t} omega_k on the uniform grid.
#[derive(Clone, Debug)]
pub struct DirectState {
    pub k: i64,
    pub t: f64,
    pub f_k: Vec<Complex64>,
    pub dt: f64,
}

/// Shared data for stepping one mode.
#[derive(Clone, Debug)]
pub struct DirectSolver {
    pub k: i64,
    pub y: Vec<f64>,
    b: Vec<f64>,
    d2b: Vec<f64>,
    numerov: Numerov,
    dt_max: f64,
}

impl DirectSolver {
    pub fn new(profile: &ShearProfile, k: i64, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be nonzero".into()));
        }
        if n < 8 {
            return Err(Error::InvalidArgument(format!("direct grid needs n >= 8, got {n}")));
        }
        let y: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let b = y.iter().map(|&v| profile.b(v)).collect();
        let d2b = y.iter().map(|&v| profile.d2b(v)).collect();
        Ok(DirectSolver { k, y, b, d2b, numerov: Numerov::new(k, n), dt_max: dt_max(profile, k) })
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_max
    }

    pub fn initial(&self, omega0: &ModeFunction, dt: f64) -> Result<DirectState> {
        self.check_dt(dt)?;
        Ok(DirectState { k: self.k, t: 0.0, f_k: omega0.sample_at(&self.y), dt })
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if !(dt.abs() > 0.0) || dt.abs() > self.dt_max * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, dt_max: self.dt_max });
        }
        Ok(())
    }

    fn phase(&self, t: f64) -> Vec<Complex64> {
        let kt = self.k as f64 * t;
        self.b.iter().map(|&b| Complex64::cis(kt * b)).collect()
    }

    pub fn omega(&self, t: f64, f: &[Complex64]) -> Vec<Complex64> {
        self.phase(t).iter().zip(f).map(|(p, v)| v * p.conj()).collect()
    }

    pub fn psi(&self, t: f64, f: &[Complex64]) -> Vec<Complex64> {
        self.numerov.solve(&self.omega(t, f))
    }

    fn rhs(&self, phase: &[Complex64], f: &[Complex64]) -> Vec<Complex64> {
        let om: Vec<Complex64> = phase.iter().zip(f).map(|(p, v)| v * p.conj()).collect();
        let psi = self.numerov.solve(&om);
        let ik = Complex64::new(0.0, self.k as f64);
        psi.iter()
            .zip(phase)
            .zip(&self.d2b)
            .map(|((p, e), &c)| ik * c * e * p)
            .collect()
    }

    fn rk4(&self, t: f64, f: &[Complex64], dt: f64) -> Vec<Complex64> {
        let (p0, ph, p1) = (self.phase(t), self.phase(t + 0.5 * dt), self.phase(t + dt));
        let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + y * s).collect()
        };
        let k1 = self.rhs(&p0, f);
        let k2 = self.rhs(&ph, &axpy(f, 0.5 * dt, &k1));
        let k3 = self.rhs(&ph, &axpy(f, 0.5 * dt, &k2));
        let k4 = self.rhs(&p1, &axpy(f, dt, &k3));
        (0..f.len())
            .map(|i| f[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
            .collect()
    }

    /// One classical fourth-order step of size state.dt.
    pub fn step(&self, state: &DirectState) -> Result<DirectState> {
        self.check_dt(state.dt)?;
        Ok(DirectState { k: state.k, t: state.t + state.dt, f_k: self.rk4(state.t, &state.f_k, state.dt), dt: state.dt })
    }

    /// Steps until t_end, shortening the last step to land exactly.
    pub fn advance(&self, state: &DirectState, t_end: f64) -> Result<DirectState> {
        self.check_dt(state.dt)?;
        let mut s = state.clone();
        let dir = state.dt.signum();
        while (t_end - s.t) * dir > 1e-12 * state.dt.abs() {
            let h = if (t_end - s.t) * dir < state.dt.abs() { t_end - s.t } else { state.dt };
            s.f_k = self.rk4(s.t, &s.f_k, h);
            s.t = if h == t_end - s.t { t_end } else { s.t + h };
        }
        Ok(s)
    }
}

/// Direct trajectory at the sample times on n uniform intervals.
pub fn evolve_direct_with(
    profile: &ShearProfile,
    k: i64,
    omega0: &ModeFunction,
    t_samples: &[f64],
    n: usize,
    dt: f64,
) -> Result<ModeTrajectory> {
    if t_samples.first().is_some_and(|&t| t < 0.0) || t_samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("t_samples must be increasing and start at t >= 0".into()));
    }
    let solver = DirectSolver::new(profile, k, n)?;
    let mut state = solver.initial(omega0, dt)?;
    let (mut psi_t, mut dpsi_dy_t, mut omega_t) = (Vec::new(), Vec::new(), Vec::new());
    for &t in t_samples {
        state = solver.advance(&state, t)?;
        let om = solver.omega(t, &state.f_k);
        let psi = solver.numerov.solve(&om);
        dpsi_dy_t.push(uniform_derivative(&psi));
        psi_t.push(psi);
        omega_t.push(om);
    }
    Ok(ModeTrajectory {
        k,
        times: t_samples.to_vec(),
        y: solver.y.clone(),
        psi_t,
        dpsi_dy_t,
        omega_t,
        source: TrajectorySource::Direct,
    })
}

pub fn evolve_direct(profile: &ShearProfile, k: i64, omega0: &ModeFunction, t_samples: &[f64]) -> Result<ModeTrajectory> {
    let dt = DEFAULT_DT.min(dt_max(profile, k));
    evolve_direct_with(profile, k, omega0, t_samples, DEFAULT_N, dt)
}

/// sup over t <= t_max and the points of `other` of |psi_other - psi_reference|,
/// relative to sup |psi_reference|; the reference must sit on a uniform y grid.
pub fn trajectory_difference(reference: &ModeTrajectory, other: &ModeTrajectory, t_max: f64) -> Result<f64> {
    if reference.k != other.k || reference.times != other.times {
        return Err(Error::InvalidArgument("trajectories need the same k and sample times".into()));
    }
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (i, &t) in reference.times.iter().enumerate() {
        if t > t_max {
            break;
        }
        let r = transfer(&reference.psi_t[i], &other.y, 8);
        diff = diff.max(crate::linalg::sup_diff(&r, &other.psi_t[i]));
        scale = scale.max(crate::linalg::sup_norm(&reference.psi_t[i]));
    }
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Sheared vorticity e^{ikb(y)t} omega_k at every sample of a trajectory.
pub fn sheared(profile: &ShearProfile, traj: &ModeTrajectory) -> Vec<Vec<Complex64>> {
    let k = traj.k as f64;
    traj.times
        .iter()
        .zip(&traj.omega_t)
        .map(|(&t, om)| traj.y.iter().zip(om).map(|(&y, w)| w * Complex64::cis(k * t * profile.b(y))).collect())
        .collect()
}

/// Barycentric interpolation from uniform samples using the `width` nearest points.
pub fn transfer(values: &[Complex64], targets: &[f64], width: usize) -> Vec<Complex64> {
    let n = values.len() - 1;
    let w = width.clamp(2, n + 1);
    targets
        .iter()
        .map(|&y| {
            let pos = y * n as f64;
            let near = pos.round();
            if (pos - near).abs() < 1e-9 {
                return values[near as usize];
            }
            let start = (pos.floor() as isize - (w as isize / 2 - 1)).clamp(0, (n + 1 - w) as isize) as usize;
            let xs: Vec<f64> = (start..start + w).map(|i| i as f64 / n as f64).collect();
            let mut num = ZERO;
            let mut den = 0.0;
            for (j, &xj) in xs.iter().enumerate() {
                let mut wj = 1.0;
                for (m, &xm) in xs.iter().enumerate() {
                    if m != j {
                        wj /= xj - xm;
                    }
                }
                let c = wj / (y - xj);
                num += values[start + j] * c;
                den += c;
            }
            num / den
        })
        .collect()
}
