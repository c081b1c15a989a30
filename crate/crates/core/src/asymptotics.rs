//! Leading-order large-time behaviour of a mode: the phi functions, the main
//! terms of psi_k and d_y psi_k, the scattering profile and decay fits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::direct::transfer;
use crate::error::{Error, Result};
use crate::evolution::{solve_sides, DensityLimit, ModeTrajectory};
use crate::grid::ChannelGrid;
use crate::mode::ModeFunction;
use crate::profiles::{FourierConvention, ShearProfile};
use crate::resolvent::{boundary_rhs, eps_limit, eps_schedule, Iota, LimitModel, Resolvent, SpectralPoint};
use crate::special::oscillatory_tail;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which diagonal value multiplies b''/|b'|^2 and how strongly the
/// omega_0(0), omega_0(1) boundary lines enter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MainTermConvention {
    /// psi^-(y,y) for k > 0 and psi^+(y,y) for k < 0; boundary lines with weight 1/2
    Corrected,
    /// phi1 - phi2 1_{k<0} with boundary lines of weight 1
    AsWritten,
}

impl MainTermConvention {
    pub fn boundary_weight(self) -> f64 {
        match self {
            MainTermConvention::Corrected => 0.5,
            MainTermConvention::AsWritten => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiOptions {
    pub y: Vec<f64>,
    pub resolvent_n: usize,
    pub q: usize,
    pub h_min: f64,
    /// route for phi1, phi2, phi5, phi6
    pub limit: DensityLimit,
    /// schedule for the y0-derivative jumps phi3, phi4
    pub eps0: f64,
    pub levels: usize,
}

impl Default for PhiOptions {
    fn default() -> Self {
        PhiOptions {
            y: (0..=32).map(|i| i as f64 / 32.0).collect(),
            resolvent_n: 256,
            q: 8,
            h_min: 1e-6,
            limit: DensityLimit::BoundaryValue,
            eps0: 4e-3,
            levels: 5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticProfile {
    pub k: i64,
    pub y: Vec<f64>,
    pub phi1: Vec<Complex64>,
    pub phi2: Vec<Complex64>,
    /// phi2 from conjugation of phi1 (real data only)
    pub phi2_conj: Option<Vec<Complex64>>,
    pub phi3: Vec<Complex64>,
    pub phi4: Vec<Complex64>,
    pub phi5: Vec<Complex64>,
    pub phi6: Vec<Complex64>,
    pub omega0: Vec<Complex64>,
    pub omega0_ends: (Complex64, Complex64),
    pub b: Vec<f64>,
    pub db: Vec<f64>,
    pub d2b: Vec<f64>,
    pub b_ends: (f64, f64),
    pub db_ends: (f64, f64),
    pub convention: MainTermConvention,
    /// (t, sup |computed - main|) filled by [`residuals`]
    pub residual_norms: Vec<(f64, f64)>,
}

fn diagonal(
    profile: &ShearProfile,
    k: i64,
    y: f64,
    omega0: &ModeFunction,
    opts: &PhiOptions,
) -> Result<(Complex64, Complex64, Complex64)> {
    if y <= 0.0 || y >= 1.0 {
        return Ok((ZERO, ZERO, ZERO));
    }
    let minus_explicit = |grid: &ChannelGrid, point: SpectralPoint| -> Result<Complex64> {
        let om = omega0.sample(grid);
        let mut r = Resolvent::new(profile, grid, point.with_iota(Iota::Minus))?;
        let rhs = r.apply_t(&om);
        let (psi, _) = r.solve_system(&rhs)?;
        Ok(r.psi_at(&om, &psi, &[y])[0])
    };
    match &opts.limit {
        DensityLimit::BoundaryValue => {
            let grid = ChannelGrid::graded(opts.resolvent_n, opts.q, y, opts.h_min);
            let point = SpectralPoint::boundary_value(k, y, Iota::Plus)?;
            let s = solve_sides(profile, point, omega0, &grid, &[y], &[])?;
            let minus = if omega0.is_real() { minus_explicit(&grid, point)? } else { s.minus[0] };
            Ok((s.plus[0], minus, s.minus[0]))
        }
        DensityLimit::Schedule { eps0, levels } => {
            let eps = eps_schedule(*eps0, *levels);
            let grid = ChannelGrid::graded(opts.resolvent_n, opts.q, y, opts.h_min.min(eps[eps.len() - 1] / 10.0));
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            let mut minus_side = Vec::new();
            for &e in &eps {
                let point = SpectralPoint::new(k, y, e, Iota::Plus)?;
                let s = solve_sides(profile, point, omega0, &grid, &[y], &[])?;
                let m = if omega0.is_real() { minus_explicit(&grid, point)? } else { s.minus[0] };
                plus.push(vec![s.plus[0]]);
                minus.push(vec![m]);
                minus_side.push(vec![s.minus[0]]);
            }
            let p = eps_limit(&eps, &plus, LimitModel::Auto)?.0[0];
            let m = eps_limit(&eps, &minus, LimitModel::Auto)?.0[0];
            let mc = eps_limit(&eps, &minus_side, LimitModel::Auto)?.0[0];
            Ok((p, m, mc))
        }
    }
}

/// Jump of d_{y0} psi across iota at y0 = end, as eps -> 0.
fn dy0_jump(profile: &ShearProfile, k: i64, end: f64, omega0: &ModeFunction, opts: &PhiOptions) -> Result<Vec<Complex64>> {
    let eps = eps_schedule(opts.eps0, opts.levels);
    let grid = ChannelGrid::graded(opts.resolvent_n, opts.q, end, opts.h_min.min(eps[eps.len() - 1] / 10.0));
    let om = omega0.sample(&grid);
    let side = |point: SpectralPoint| -> Result<Vec<Complex64>> {
        let mut r = Resolvent::new(profile, &grid, point)?;
        let rhs = r.apply_t(&om);
        let (psi, _) = r.solve_system(&rhs)?;
        let rhs_nodes = r.dy0_rhs(&om, &psi, None)?;
        let (u, _) = r.solve_system(&rhs_nodes)?;
        let rhs_targets = r.dy0_rhs(&om, &psi, Some(&opts.y))?;
        Ok(r.field_at(&u, &rhs_targets, &opts.y))
    };
    let mut fam = Vec::with_capacity(eps.len());
    for &e in &eps {
        let plus = side(SpectralPoint::new(k, end, e, Iota::Plus)?)?;
        let minus = if omega0.is_real() {
            plus.iter().map(|z| z.conj()).collect()
        } else {
            side(SpectralPoint::new(k, end, e, Iota::Minus)?)?
        };
        fam.push(minus.iter().zip(&plus).map(|(m, p)| m - p).collect::<Vec<_>>());
    }
    Ok(eps_limit(&eps, &fam, LimitModel::EpsLog)?.0)
}

/// Phi^{end +}(y, end) at the output points.
fn boundary_function(profile: &ShearProfile, k: i64, end: f64, opts: &PhiOptions) -> Result<Vec<Complex64>> {
    let pick = |y: f64| {
        let (a, b) = boundary_rhs(profile, k, y);
        Complex64::new(if end == 0.0 { a } else { b }, 0.0)
    };
    let at = |grid: &ChannelGrid, point: SpectralPoint| -> Result<Vec<Complex64>> {
        let mut r = Resolvent::new(profile, grid, point)?;
        let rhs: Vec<Complex64> = grid.nodes.iter().map(|&y| pick(y)).collect();
        let (u, _) = r.solve_system(&rhs)?;
        let rt: Vec<Complex64> = opts.y.iter().map(|&y| pick(y)).collect();
        Ok(r.field_at(&u, &rt, &opts.y))
    };
    match &opts.limit {
        DensityLimit::BoundaryValue => {
            let grid = ChannelGrid::graded(opts.resolvent_n, opts.q, end, opts.h_min);
            at(&grid, SpectralPoint::boundary_value(k, end, Iota::Plus)?)
        }
        DensityLimit::Schedule { eps0, levels } => {
            let eps = eps_schedule(*eps0, *levels);
            let grid = ChannelGrid::graded(opts.resolvent_n, opts.q, end, opts.h_min.min(eps[eps.len() - 1] / 10.0));
            let fam = eps
                .iter()
                .map(|&e| at(&grid, SpectralPoint::new(k, end, e, Iota::Plus)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(eps_limit(&eps, &fam, LimitModel::Auto)?.0)
        }
    }
}

/// All six phi functions at the output points of `opts`.
pub fn compute_phis(
    profile: &ShearProfile,
    k: i64,
    omega0: &ModeFunction,
    opts: &PhiOptions,
    convention: MainTermConvention,
) -> Result<AsymptoticProfile> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be nonzero".into()));
    }
    let diag: Vec<Result<_>> = opts.y.par_iter().map(|&y| diagonal(profile, k, y, omega0, opts)).collect();
    let (mut phi1, mut phi2, mut phi2c) = (Vec::new(), Vec::new(), Vec::new());
    for d in diag {
        let (p, m, mc) = d?;
        phi1.push(p);
        phi2.push(m - p);
        phi2c.push(mc - p);
    }
    let phi3 = dy0_jump(profile, k, 0.0, omega0, opts)?;
    let phi4 = dy0_jump(profile, k, 1.0, omega0, opts)?;
    let phi5 = boundary_function(profile, k, 0.0, opts)?;
    let phi6 = boundary_function(profile, k, 1.0, opts)?;
    Ok(AsymptoticProfile {
        k,
        y: opts.y.clone(),
        phi1,
        phi2,
        phi2_conj: omega0.is_real().then_some(phi2c),
        phi3,
        phi4,
        phi5,
        phi6,
        omega0: omega0.sample_at(&opts.y),
        omega0_ends: (omega0.eval(0.0), omega0.eval(1.0)),
        b: opts.y.iter().map(|&y| profile.b(y)).collect(),
        db: opts.y.iter().map(|&y| profile.db(y)).collect(),
        d2b: opts.y.iter().map(|&y| profile.d2b(y)).collect(),
        b_ends: (profile.b(0.0), profile.b(1.0)),
        db_ends: (profile.db(0.0), profile.db(1.0)),
        convention,
        residual_norms: Vec::new(),
    })
}

impl AsymptoticProfile {
    /// The diagonal value multiplying b''/|b'|^2.
    pub fn bracket(&self) -> Vec<Complex64> {
        self.phi1
            .iter()
            .zip(&self.phi2)
            .map(|(&p1, &p2)| match self.convention {
                MainTermConvention::Corrected if self.k > 0 => p1 + p2,
                MainTermConvention::Corrected => p1,
                MainTermConvention::AsWritten if self.k < 0 => p1 - p2,
                MainTermConvention::AsWritten => p1,
            })
            .collect()
    }

    pub fn with_convention(&self, convention: MainTermConvention) -> Self {
        AsymptoticProfile { convention, ..self.clone() }
    }

    /// t^2 e^{ikb(y)t} times the interior main term of psi_k.
    pub fn interior_amplitude(&self) -> Vec<Complex64> {
        let k2 = (self.k as f64).powi(2);
        self.bracket()
            .iter()
            .enumerate()
            .map(|(j, br)| (br * self.d2b[j] - self.omega0[j]) / (self.db[j].powi(2) * k2))
            .collect()
    }

    /// t^2 e^{ikb(end)t} times the boundary lines of psi_k at each end.
    pub fn boundary_amplitudes(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let k2 = (self.k as f64).powi(2);
        let w = self.convention.boundary_weight();
        let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let (w0, w1) = self.omega0_ends;
        let (d0, d1) = (self.db_ends.0.abs(), self.db_ends.1.abs());
        let a0 = (0..self.y.len()).map(|j| (self.phi3[j] / (two_pi_i * d0) + self.phi5[j] * w0 * w) / k2).collect();
        let a1 = (0..self.y.len()).map(|j| (-self.phi4[j] / (two_pi_i * d1) + self.phi6[j] * w1 * w) / k2).collect();
        (a0, a1)
    }
}

/// Main terms of psi_k(t, y) at the profile's points.
pub fn main_term_psi(ap: &AsymptoticProfile, t: f64, include_boundary: bool) -> Vec<Complex64> {
    let kt = ap.k as f64 * t;
    let inv = 1.0 / (t * t);
    let interior = ap.interior_amplitude();
    let mut out: Vec<Complex64> = interior.iter().zip(&ap.b).map(|(a, &b)| a * Complex64::cis(-kt * b) * inv).collect();
    if include_boundary {
        let (a0, a1) = ap.boundary_amplitudes();
        let (e0, e1) = (Complex64::cis(-kt * ap.b_ends.0) * inv, Complex64::cis(-kt * ap.b_ends.1) * inv);
        for j in 0..out.len() {
            out[j] += a0[j] * e0 + a1[j] * e1;
        }
    }
    out
}

/// Main terms of d_y psi_k(t, y).
pub fn main_term_dy_psi(ap: &AsymptoticProfile, t: f64) -> Vec<Complex64> {
    let kt = ap.k as f64 * t;
    let i = Complex64::i();
    ap.bracket()
        .iter()
        .enumerate()
        .map(|(j, br)| {
            let e = Complex64::cis(-kt * ap.b[j]) * i / kt;
            e * (ap.omega0[j] - br * ap.d2b[j]) / ap.db[j]
        })
        .collect()
}

/// Which field a residual is measured on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualField {
    Psi,
    PsiWithoutBoundary,
    DyPsi,
}

/// (t, sup over interior points of |computed - main|, same relative to sup |main|).
pub fn residuals(ap: &AsymptoticProfile, traj: &ModeTrajectory, field: ResidualField) -> Vec<(f64, f64, f64)> {
    let interior: Vec<usize> = (0..ap.y.len()).filter(|&j| ap.y[j] > 0.0 && ap.y[j] < 1.0).collect();
    let ys: Vec<f64> = interior.iter().map(|&j| ap.y[j]).collect();
    traj.times
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(i, &t)| {
            let (computed, main) = match field {
                ResidualField::Psi => (transfer(&traj.psi_t[i], &ys, 8), main_term_psi(ap, t, true)),
                ResidualField::PsiWithoutBoundary => (transfer(&traj.psi_t[i], &ys, 8), main_term_psi(ap, t, false)),
                ResidualField::DyPsi => (transfer(&traj.dpsi_dy_t[i], &ys, 8), main_term_dy_psi(ap, t)),
            };
            let mut diff: f64 = 0.0;
            let mut sup: f64 = 0.0;
            for (c, &j) in computed.iter().zip(&interior) {
                diff = diff.max((c - main[j]).norm());
                sup = sup.max(main[j].norm());
            }
            (t, diff, if sup > 0.0 { diff / sup } else { diff })
        })
        .collect()
}

/// Limit F_k of the sheared vorticity at the profile's points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScatterState {
    pub k: i64,
    pub y: Vec<f64>,
    pub f_limit: Vec<Complex64>,
    /// sup over y of the analytic tail beyond the last sample
    pub tail_estimate: f64,
    /// sup over y of the sampled part of the time integral
    pub integral_norm: f64,
}

/// F_k = omega_0 + int_0^inf ik b'' e^{ikbt} psi_k dt, trapezoid over the samples
/// plus the main-term tail.
pub fn scattering_profile(profile: &ShearProfile, ap: &AsymptoticProfile, traj: &ModeTrajectory) -> Result<ScatterState> {
    let n_t = traj.times.len();
    if n_t < 2 || traj.times[0] != 0.0 {
        return Err(Error::InvalidArgument("trajectory must start at t = 0 with at least two samples".into()));
    }
    let t_max = traj.times[n_t - 1];
    if t_max < 100.0 {
        return Err(Error::InvalidArgument(format!("trajectory ends at t = {t_max}, need t >= 100")));
    }
    let k = ap.k as f64;
    let ik = Complex64::new(0.0, k);
    let ys = &ap.y;
    let integrand = |i: usize| -> Vec<Complex64> {
        let psi = transfer(&traj.psi_t[i], ys, 8);
        let t = traj.times[i];
        (0..ys.len()).map(|j| ik * ap.d2b[j] * Complex64::cis(k * ap.b[j] * t) * psi[j]).collect()
    };
    let mut acc = vec![ZERO; ys.len()];
    let mut prev = integrand(0);
    for i in 1..n_t {
        let cur = integrand(i);
        let h = traj.times[i] - traj.times[i - 1];
        for j in 0..ys.len() {
            acc[j] += (prev[j] + cur[j]) * (0.5 * h);
        }
        prev = cur;
    }
    let interior = ap.interior_amplitude();
    let (a0, a1) = ap.boundary_amplitudes();
    let tail: Vec<Complex64> = (0..ys.len())
        .map(|j| {
            let c = ik * ap.d2b[j];
            let s0 = oscillatory_tail(k * (ap.b[j] - ap.b_ends.0), t_max);
            let s1 = oscillatory_tail(k * (ap.b[j] - ap.b_ends.1), t_max);
            c * (interior[j] / t_max + a0[j] * s0 + a1[j] * s1)
        })
        .collect();
    let tail_estimate = tail.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let integral_norm = acc.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if tail_estimate > 0.1 * integral_norm && tail_estimate > 0.0 {
        return Err(Error::TailTooLarge { tail: tail_estimate, integral: integral_norm });
    }
    let _ = profile;
    let f_limit = (0..ys.len()).map(|j| ap.omega0[j] + acc[j] + tail[j]).collect();
    Ok(ScatterState { k: ap.k, y: ys.clone(), f_limit, tail_estimate, integral_norm })
}

/// Psi(x, y) from the interior amplitudes of every mode (boundary-vanishing data).
pub fn assemble_psi_field(profiles: &[AsymptoticProfile], x: &[f64], conv: &FourierConvention) -> Vec<Vec<Complex64>> {
    let ny = profiles.first().map_or(0, |p| p.y.len());
    let amps: Vec<Vec<Complex64>> = profiles.iter().map(|p| p.interior_amplitude()).collect();
    x.iter()
        .map(|&xv| {
            (0..ny)
                .map(|j| {
                    profiles
                        .iter()
                        .zip(&amps)
                        .map(|(p, a)| a[j] * Complex64::cis(p.k as f64 * xv))
                        .sum::<Complex64>()
                        * conv.c0
                })
                .collect()
        })
        .collect()
}

/// Quantity whose power-law decay is fitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayQuantity {
    SupPsi,
    SupDyPsi,
    SupPhi,
    SupDyPhi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub quantity: DecayQuantity,
    pub t_window: [f64; 2],
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares slope of log v against log t over the window.
pub fn fit_power_law(quantity: DecayQuantity, times: &[f64], values: &[f64], window: [f64; 2]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t >= window[0] && t <= window[1] && v > 0.0)
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 samples in the window, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    if r2 < 0.95 {
        return Err(Error::PoorFit { r2 });
    }
    Ok(DecayFit { quantity, t_window: window, slope, intercept, r2 })
}

/// Decay fit of sup |psi_k| or sup |d_y psi_k| along a trajectory.
pub fn fit_decay(traj: &ModeTrajectory, quantity: DecayQuantity, window: [f64; 2]) -> Result<DecayFit> {
    let values = match quantity {
        DecayQuantity::SupPsi => traj.sup_psi(),
        DecayQuantity::SupDyPsi => traj.sup_dpsi_dy(),
        _ => {
            return Err(Error::InvalidArgument(
                "physical-field quantities are fitted from assembled fields".into(),
            ))
        }
    };
    fit_power_law(quantity, &traj.times, &values, window)
}
