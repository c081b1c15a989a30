//! Time evolution of a Fourier mode from the spectral representation
//! psi_k(t,y) = -(1/2 pi i) int e^{-ikb(y0)t} |b'(y0)| [psi^- - psi^+](y,y0) dy0.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{GreensKernel, KernelKind};
use crate::grid::ChannelGrid;
use crate::mode::ModeFunction;
use crate::profiles::ShearProfile;
use crate::quadrature::{GaussLegendre, PanelBasis};
use crate::resolvent::{eps_limit, eps_schedule, Iota, LimitModel, Resolvent, SpectralPoint};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
/// Above this |k| t the y0 panels use Filon weights.
pub const FILON_KT: f64 = 50.0;

/// How the eps -> 0 limit of psi^- - psi^+ is taken at each y0 node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DensityLimit {
    /// one solve per side with the log kernel at eps = 0
    BoundaryValue,
    /// solves at eps0 2^{-j}, j < levels, followed by extrapolation
    Schedule { eps0: f64, levels: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityOptions {
    /// uniform base panels of the y0 grid; their breakpoints are the output y
    pub base_panels: usize,
    pub q: usize,
    /// geometric refinement levels toward every base breakpoint
    pub end_levels: usize,
    pub end_ratio: f64,
    /// extra levels toward y0 = 0 and y0 = 1
    pub boundary_levels: usize,
    /// nodes of each resolvent grid
    pub resolvent_n: usize,
    pub h_min: f64,
    pub limit: DensityLimit,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            base_panels: 16,
            q: 8,
            end_levels: 4,
            end_ratio: 0.25,
            boundary_levels: 4,
            resolvent_n: 256,
            h_min: 1e-6,
            limit: DensityLimit::BoundaryValue,
        }
    }
}

impl DensityOptions {
    /// Breakpoints of the y0 quadrature.
    pub fn y0_breaks(&self) -> Vec<f64> {
        let h = 1.0 / self.base_panels as f64;
        let mut breaks = Vec::new();
        for i in 0..self.base_panels {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            breaks.push(a);
            let mut levels_a = self.end_levels;
            let mut levels_b = self.end_levels;
            if i == 0 {
                levels_a += self.boundary_levels;
            }
            if i + 1 == self.base_panels {
                levels_b += self.boundary_levels;
            }
            let half = 0.5 * h;
            for j in 1..=levels_a {
                breaks.push(a + half * self.end_ratio.powi(j as i32 - 1));
            }
            for j in 1..=levels_b {
                breaks.push(b - half * self.end_ratio.powi(j as i32 - 1));
            }
        }
        breaks.push(1.0);
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
        breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        breaks
    }

    pub fn y_out(&self) -> Vec<f64> {
        (0..=self.base_panels).map(|i| i as f64 / self.base_panels as f64).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeReport {
    pub y0: f64,
    pub cond: f64,
    pub residual: f64,
    pub order: Option<f64>,
    pub error_estimate: f64,
}

#[derive(Clone, Debug)]
pub struct SpectralDensity {
    pub k: i64,
    pub profile: ShearProfile,
    pub y_out: Vec<f64>,
    pub y0_grid: ChannelGrid,
    /// [node][y] = lim (psi^- - psi^+)(y, y0_node)
    pub density: Vec<Vec<Complex64>>,
    /// y-derivative of the density
    pub density_dy: Vec<Vec<Complex64>>,
    pub weight: Vec<f64>,
    pub eps_report: Vec<NodeReport>,
}

/// psi^+ and psi^- (and their y-derivatives) at the targets for one y0.
pub struct SidePair {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
    pub plus_dy: Vec<Complex64>,
    pub minus_dy: Vec<Complex64>,
    pub cond: f64,
    pub residual: f64,
}

/// Solves for both sides at one spectral point; real data use conjugation.
pub fn solve_sides(
    profile: &ShearProfile,
    point: SpectralPoint,
    omega0: &ModeFunction,
    grid: &ChannelGrid,
    targets: &[f64],
    dy_targets: &[f64],
) -> Result<SidePair> {
    let point = point.with_iota(Iota::Plus);
    let om = omega0.sample(grid);
    let mut r = Resolvent::new(profile, grid, point)?;
    let rhs = r.apply_t(&om);
    let (psi, residual) = r.solve_system(&rhs)?;
    let plus = r.psi_at(&om, &psi, targets);
    let plus_dy = r.dpsi_dy_at(&om, &psi, dy_targets);
    let cond = r.cond().unwrap_or(f64::NAN);
    if omega0.is_real() {
        let minus = plus.iter().map(|z| z.conj()).collect();
        let minus_dy = plus_dy.iter().map(|z| z.conj()).collect();
        return Ok(SidePair { plus, minus, plus_dy, minus_dy, cond, residual });
    }
    let mut rm = Resolvent::new(profile, grid, point.with_iota(Iota::Minus))?;
    let rhs_m = rm.apply_t(&om);
    let (psi_m, res_m) = rm.solve_system(&rhs_m)?;
    let minus = rm.psi_at(&om, &psi_m, targets);
    let minus_dy = rm.dpsi_dy_at(&om, &psi_m, dy_targets);
    let cond = cond.max(rm.cond().unwrap_or(f64::NAN));
    Ok(SidePair { plus, minus, plus_dy, minus_dy, cond, residual: residual.max(res_m) })
}

fn density_at_node(
    profile: &ShearProfile,
    k: i64,
    y0: f64,
    omega0: &ModeFunction,
    y_out: &[f64],
    opts: &DensityOptions,
) -> Result<(Vec<Complex64>, Vec<Complex64>, NodeReport)> {
    match &opts.limit {
        DensityLimit::BoundaryValue => {
            let grid = ChannelGrid::graded(opts.resolvent_n, opts.q, y0, opts.h_min);
            let point = SpectralPoint::boundary_value(k, y0, Iota::Plus)?;
            let s = solve_sides(profile, point, omega0, &grid, y_out, y_out)?;
            let d = s.minus.iter().zip(&s.plus).map(|(m, p)| m - p).collect();
            let dd = s.minus_dy.iter().zip(&s.plus_dy).map(|(m, p)| m - p).collect();
            Ok((d, dd, NodeReport { y0, cond: s.cond, residual: s.residual, order: None, error_estimate: 0.0 }))
        }
        DensityLimit::Schedule { eps0, levels } => {
            let eps = eps_schedule(*eps0, *levels);
            let floor = opts.h_min.min(eps[eps.len() - 1] / 10.0);
            let grid = ChannelGrid::graded(opts.resolvent_n, opts.q, y0, floor);
            let mut fam = Vec::new();
            let mut fam_dy = Vec::new();
            let (mut cond, mut residual) = (0.0f64, 0.0f64);
            for &e in &eps {
                let point = SpectralPoint::new(k, y0, e, Iota::Plus)?;
                let s = solve_sides(profile, point, omega0, &grid, y_out, y_out)?;
                cond = cond.max(s.cond);
                residual = residual.max(s.residual);
                fam.push(s.minus.iter().zip(&s.plus).map(|(m, p)| m - p).collect::<Vec<_>>());
                fam_dy.push(s.minus_dy.iter().zip(&s.plus_dy).map(|(m, p)| m - p).collect::<Vec<_>>());
            }
            let (d, rep) = eps_limit(&eps, &fam, LimitModel::Auto)?;
            let (dd, _) = eps_limit(&eps, &fam_dy, LimitModel::Auto)?;
            Ok((d, dd, NodeReport { y0, cond, residual, order: rep.order, error_estimate: rep.error_estimate }))
        }
    }
}

/// Tabulates the spectral density on the y0 quadrature grid.
pub fn build_density(
    profile: &ShearProfile,
    k: i64,
    omega0: &ModeFunction,
    opts: &DensityOptions,
) -> Result<SpectralDensity> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be nonzero".into()));
    }
    let y0_grid = ChannelGrid::from_breaks(opts.y0_breaks(), opts.q);
    let y_out = opts.y_out();
    let results: Vec<Result<_>> = y0_grid
        .nodes
        .par_iter()
        .map(|&y0| density_at_node(profile, k, y0, omega0, &y_out, opts))
        .collect();
    let mut density = Vec::with_capacity(results.len());
    let mut density_dy = Vec::with_capacity(results.len());
    let mut eps_report = Vec::with_capacity(results.len());
    for r in results {
        let (d, dd, rep) = r?;
        density.push(d);
        density_dy.push(dd);
        eps_report.push(rep);
    }
    let weight = y0_grid.nodes.iter().map(|&y0| profile.db(y0).abs()).collect();
    Ok(SpectralDensity { k, profile: profile.clone(), y_out, y0_grid, density, density_dy, weight, eps_report })
}

/// Fine-rule samples of the Lagrange basis for Filon moments.
struct FilonTable {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

fn filon_table(q: usize, m: usize) -> Arc<FilonTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<FilonTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("filon cache poisoned");
    map.entry((q, m))
        .or_insert_with(|| {
            let gl = GaussLegendre::cached(m);
            let pb = PanelBasis::cached(q);
            let basis = gl.nodes.iter().map(|&s| pb.eval_row(s)).collect();
            Arc::new(FilonTable { nodes: gl.nodes.clone(), weights: gl.weights.clone(), basis })
        })
        .clone()
}

impl SpectralDensity {
    /// Quadrature weights W_j(t) of int e^{-ikb(y0)t} g(y0) dy0 over the y0 nodes.
    pub fn oscillatory_weights(&self, t: f64) -> Vec<Complex64> {
        let g = &self.y0_grid;
        let p = &self.profile;
        let kt = self.k as f64 * t;
        let phase = |y0: f64| Complex64::cis(-kt * p.b(y0));
        if kt.abs() <= FILON_KT {
            return g.nodes.iter().zip(&g.weights).map(|(&y, &w)| phase(y) * w).collect();
        }
        let q = g.q;
        let mut out = vec![ZERO; g.n_total()];
        for panel in 0..g.n_panels() {
            let (a, b) = (g.breaks[panel], g.breaks[panel + 1]);
            let (c, hh) = (0.5 * (a + b), 0.5 * (b - a));
            let (bc, dbc) = (p.b(c), p.db(c));
            let omega = -kt * dbc * hh;
            let m = q + omega.abs().ceil() as usize + 20;
            let tab = filon_table(q, m);
            let osc: Vec<Complex64> = tab.nodes.iter().map(|&s| Complex64::cis(omega * s)).collect();
            let base = Complex64::cis(-kt * bc) * hh;
            for j in 0..q {
                let mu: Complex64 = (0..m).map(|r| osc[r] * (tab.weights[r] * tab.basis[r][j])).sum();
                let y0 = g.nodes[panel * q + j];
                // residual phase of the nonlinear part of b
                let rem = Complex64::cis(-kt * (p.b(y0) - bc - dbc * (y0 - c)));
                out[panel * q + j] = base * mu * rem;
            }
        }
        out
    }

    fn integrate(&self, table: &[Vec<Complex64>], t: f64) -> Vec<Complex64> {
        let w = self.oscillatory_weights(t);
        let ny = self.y_out.len();
        let mut acc = vec![ZERO; ny];
        for (j, row) in table.iter().enumerate() {
            let wj = w[j] * self.weight[j];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += wj * v;
            }
        }
        let pref = -1.0 / Complex64::new(0.0, 2.0 * PI);
        acc.into_iter().map(|v| v * pref).collect()
    }
}

/// psi_k(t, y) at the density's output points.
pub fn evolve_psi_k(density: &SpectralDensity, t: f64) -> Vec<Complex64> {
    density.integrate(&density.density, t)
}

/// d_y psi_k(t, y) at the density's output points.
pub fn evolve_dy_psi_k(density: &SpectralDensity, t: f64) -> Vec<Complex64> {
    density.integrate(&density.density_dy, t)
}

/// omega = psi'' - k^2 psi by panelwise spectral differentiation.
pub fn recover_omega_k(psi: &[Complex64], k: i64, grid: &ChannelGrid) -> Vec<Complex64> {
    let k2 = (k as f64).powi(2);
    grid.differentiate2(psi).into_iter().zip(psi).map(|(d, p)| d - p * k2).collect()
}

/// omega = psi'' - k^2 psi on a uniform grid including both walls, by banded
/// fourth-order differences.
pub fn recover_omega_k_uniform(psi: &[Complex64], k: i64) -> Vec<Complex64> {
    let n = psi.len();
    assert!(n >= 6, "need at least six points");
    let h = 1.0 / (n - 1) as f64;
    let k2 = (k as f64).powi(2);
    let c = 1.0 / (12.0 * h * h);
    let edge = |v: [Complex64; 6], first: bool| -> Complex64 {
        let w: [f64; 6] = if first {
            [45.0, -154.0, 214.0, -156.0, 61.0, -10.0]
        } else {
            [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]
        };
        v.iter().zip(w).map(|(a, b)| a * b).sum::<Complex64>() * c
    };
    let mut d2 = vec![ZERO; n];
    let fwd = |s: usize| [psi[s], psi[s + 1], psi[s + 2], psi[s + 3], psi[s + 4], psi[s + 5]];
    let bwd = |e: usize| [psi[e], psi[e - 1], psi[e - 2], psi[e - 3], psi[e - 4], psi[e - 5]];
    d2[0] = edge(fwd(0), true);
    d2[1] = edge(fwd(0), false);
    d2[n - 1] = edge(bwd(n - 1), true);
    d2[n - 2] = edge(bwd(n - 1), false);
    for i in 2..n - 2 {
        d2[i] = (-psi[i - 2] + psi[i - 1] * 16.0 - psi[i] * 30.0 + psi[i + 1] * 16.0 - psi[i + 2]) * c;
    }
    d2.into_iter().zip(psi).map(|(d, p)| d - p * k2).collect()
}

/// Where a trajectory came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectorySource {
    Spectral,
    Direct,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeTrajectory {
    pub k: i64,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub psi_t: Vec<Vec<Complex64>>,
    pub dpsi_dy_t: Vec<Vec<Complex64>>,
    pub omega_t: Vec<Vec<Complex64>>,
    pub source: TrajectorySource,
}

impl ModeTrajectory {
    /// CSV with columns t, y, Re psi, Im psi, Re d_y psi, Im d_y psi, Re omega, Im omega.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,y,re_psi,im_psi,re_dpsi_dy,im_dpsi_dy,re_omega,im_omega\n");
        for (i, t) in self.times.iter().enumerate() {
            for (j, y) in self.y.iter().enumerate() {
                let (p, d, w) = (self.psi_t[i][j], self.dpsi_dy_t[i][j], self.omega_t[i][j]);
                s.push_str(&format!(
                    "{t:.17e},{y:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    p.re, p.im, d.re, d.im, w.re, w.im
                ));
            }
        }
        s
    }

    /// The trajectory of mode -k for real physical data.
    pub fn conjugate(&self) -> ModeTrajectory {
        let conj = |v: &Vec<Vec<Complex64>>| v.iter().map(|r| r.iter().map(|z| z.conj()).collect()).collect();
        ModeTrajectory {
            k: -self.k,
            times: self.times.clone(),
            y: self.y.clone(),
            psi_t: conj(&self.psi_t),
            dpsi_dy_t: conj(&self.dpsi_dy_t),
            omega_t: conj(&self.omega_t),
            source: self.source,
        }
    }

    /// Keeps every `stride`-th output point (the last point is always kept).
    pub fn subsample_y(&self, stride: usize) -> ModeTrajectory {
        let stride = stride.max(1);
        let n = self.y.len();
        let mut idx: Vec<usize> = (0..n).step_by(stride).collect();
        if idx.last() != Some(&(n - 1)) {
            idx.push(n - 1);
        }
        let pick = |v: &Vec<Vec<Complex64>>| v.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
        ModeTrajectory {
            k: self.k,
            times: self.times.clone(),
            y: idx.iter().map(|&j| self.y[j]).collect(),
            psi_t: pick(&self.psi_t),
            dpsi_dy_t: pick(&self.dpsi_dy_t),
            omega_t: pick(&self.omega_t),
            source: self.source,
        }
    }

    pub fn sup_psi(&self) -> Vec<f64> {
        self.psi_t.iter().map(|r| crate::linalg::sup_norm(r)).collect()
    }

    pub fn sup_dpsi_dy(&self) -> Vec<f64> {
        self.dpsi_dy_t.iter().map(|r| crate::linalg::sup_norm(r)).collect()
    }
}

/// Spectral trajectory at the given sample times.
pub fn evolve_spectral(density: &SpectralDensity, times: &[f64]) -> ModeTrajectory {
    let psi_t: Vec<Vec<Complex64>> = times.iter().map(|&t| evolve_psi_k(density, t)).collect();
    let dpsi_dy_t = times.iter().map(|&t| evolve_dy_psi_k(density, t)).collect();
    let omega_t = psi_t.iter().map(|p| recover_omega_k_uniform(p, density.k)).collect();
    ModeTrajectory {
        k: density.k,
        times: times.to_vec(),
        y: density.y_out.clone(),
        psi_t,
        dpsi_dy_t,
        omega_t,
        source: TrajectorySource::Spectral,
    }
}

/// -int G_k(y, z) omega0(z) dz at arbitrary y (the elliptic solve evaluated off-grid).
pub fn stream_function_at(k: i64, omega0: &ModeFunction, ys: &[f64], grid: &ChannelGrid) -> Vec<Complex64> {
    let g = GreensKernel::new(k);
    let om = omega0.sample(grid);
    g.rows(grid, KernelKind::G, ys)
        .iter()
        .map(|r| -r.iter().zip(&om).map(|(w, v)| v * w).sum::<Complex64>())
        .collect()
}
