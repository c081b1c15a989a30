//! Singular operators T and S, Nystrom solves of the generalized eigenfunction
//! equation, its y0-derivative, the boundary functions, and the eps -> 0 limit.

use std::fmt;

use faer::prelude::SpSolverLstsq;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collocation;
use crate::error::{Error, Result};
use crate::greens::{GreensKernel, KernelKind};
use crate::grid::ChannelGrid;
use crate::linalg::{sup_diff, sup_norm, CMatrix, DenseLu};
use crate::profiles::ShearProfile;

pub const COND_LIMIT: f64 = 1e8;
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Iota {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Iota {
    pub fn sign(self) -> f64 {
        match self {
            Iota::Plus => 1.0,
            Iota::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Iota {
        match self {
            Iota::Plus => Iota::Minus,
            Iota::Minus => Iota::Plus,
        }
    }
}

impl fmt::Display for Iota {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if *self == Iota::Plus { "+" } else { "-" })
    }
}

/// (k, y0, eps, iota); eps = 0 denotes the one-sided boundary value and is only
/// produced by [`SpectralPoint::boundary_value`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub k: i64,
    pub y0: f64,
    pub eps: f64,
    pub iota: Iota,
}

impl SpectralPoint {
    pub fn new(k: i64, y0: f64, eps: f64, iota: Iota) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be nonzero".into()));
        }
        if !(0.0..=1.0).contains(&y0) {
            return Err(Error::InvalidArgument(format!("y0 = {y0} outside [0,1]")));
        }
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(Error::InvalidArgument(format!("eps = {eps} outside (0, 1/4]")));
        }
        Ok(SpectralPoint { k, y0, eps, iota })
    }

    /// The point whose denominator is b(z) - c for a complex phase speed c.
    /// y0 may fall outside [0,1] (on the linear extension of b) and eps is not capped.
    pub fn phase_speed(profile: &ShearProfile, k: i64, c: Complex64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be nonzero".into()));
        }
        let (lo, hi) = (profile.b(0.0), profile.b(1.0));
        let y0 = if (c.re - lo) * (c.re - hi) <= 0.0 {
            crate::profiles::b_inverse(profile, c.re)?
        } else if (c.re - lo).abs() < (c.re - hi).abs() {
            (c.re - lo) / profile.db(0.0)
        } else {
            1.0 + (c.re - hi) / profile.db(1.0)
        };
        let iota = if c.im > 0.0 { Iota::Minus } else { Iota::Plus };
        Ok(SpectralPoint { k, y0, eps: c.im.abs(), iota })
    }

    /// The limit eps -> 0 from the side selected by iota.
    pub fn boundary_value(k: i64, y0: f64, iota: Iota) -> Result<Self> {
        let mut p = Self::new(k, y0, 0.25, iota)?;
        p.eps = 0.0;
        Ok(p)
    }

    pub fn with_iota(self, iota: Iota) -> Self {
        SpectralPoint { iota, ..self }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        SpectralPoint { eps, ..self }
    }

    pub fn is_boundary_value(&self) -> bool {
        self.eps == 0.0
    }

    /// b(z) - b(y0) + i iota eps
    pub fn denominator(&self, p: &ShearProfile, z: f64) -> Complex64 {
        Complex64::new(p.b(z) - p.b(self.y0), self.iota.sign() * self.eps)
    }

    /// log of the denominator, continuous in z; for eps = 0 the branch is the
    /// limit from the iota side.
    pub fn log_denominator(&self, p: &ShearProfile, z: f64) -> Complex64 {
        let x = p.b(z) - p.b(self.y0);
        if self.eps == 0.0 {
            let im = if x < 0.0 { self.iota.sign() * std::f64::consts::PI } else { 0.0 };
            Complex64::new(x.abs().ln(), im)
        } else {
            Complex64::new(x, self.iota.sign() * self.eps).ln()
        }
    }
}

/// Quadrature form of T.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TForm {
    /// integration by parts against log(b - b(y0) + i iota eps)
    Log,
    /// the pole kernel 1/(b - b(y0) + i iota eps) directly
    Direct,
}

#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub point: SpectralPoint,
    pub psi: Vec<Complex64>,
    pub dpsi_dy: Vec<Complex64>,
    pub dpsi_dy0: Option<Vec<Complex64>>,
    pub residual: f64,
    pub cond: f64,
}

impl ResolventSolution {
    /// CSV dump with the documented column layout.
    pub fn to_csv(&self, grid: &ChannelGrid) -> String {
        let mut s = String::from("y,re_psi,im_psi,re_dpsi_dy,im_dpsi_dy,re_dpsi_dy0,im_dpsi_dy0\n");
        for (i, y) in grid.nodes.iter().enumerate() {
            let d0 = self.dpsi_dy0.as_ref().map(|v| v[i]).unwrap_or(ZERO);
            s.push_str(&format!(
                "{y:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.psi[i].re,
                self.psi[i].im,
                self.dpsi_dy[i].re,
                self.dpsi_dy[i].im,
                d0.re,
                d0.im
            ));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryFunctionPair {
    pub phi0: Vec<Complex64>,
    pub phi1: Vec<Complex64>,
    pub residual: f64,
}

fn check_grading(grid: &ChannelGrid, point: &SpectralPoint) -> Result<()> {
    let outside = (-point.y0).max(point.y0 - 1.0);
    let panel = grid.local_panel_len(point.y0.clamp(0.0, 1.0));
    let ok = if outside > 0.0 {
        panel <= 10.0 * outside.max(point.eps)
    } else if point.is_boundary_value() {
        grid.breaks.iter().any(|&b| b == point.y0) && panel <= 1e-4
    } else {
        panel <= point.eps / 10.0
    };
    if ok {
        Ok(())
    } else {
        Err(Error::GradingMissing { y0: point.y0, panel, eps: point.eps })
    }
}

/// sinh(|k| y) / sinh(|k|) without overflow.
pub fn sinh_ratio(k: f64, y: f64) -> f64 {
    if k < 30.0 {
        (k * y).sinh() / k.sinh()
    } else {
        (k * (y - 1.0)).exp() * (-(-2.0 * k * y).exp_m1()) / (-(-2.0 * k).exp_m1())
    }
}

/// An assembled discretization of T at one spectral point.
pub struct Resolvent<'a> {
    pub profile: &'a ShearProfile,
    pub grid: &'a ChannelGrid,
    pub point: SpectralPoint,
    pub form: TForm,
    kernel: GreensKernel,
    denom: Vec<Complex64>,
    log: Vec<Complex64>,
    db: Vec<f64>,
    d2b: Vec<f64>,
    t: CMatrix,
    lu: Option<(DenseLu, f64)>,
}

impl<'a> Resolvent<'a> {
    pub fn new(profile: &'a ShearProfile, grid: &'a ChannelGrid, point: SpectralPoint) -> Result<Self> {
        Self::with_form(profile, grid, point, TForm::Log)
    }

    pub fn with_form(
        profile: &'a ShearProfile,
        grid: &'a ChannelGrid,
        point: SpectralPoint,
        form: TForm,
    ) -> Result<Self> {
        check_grading(grid, &point)?;
        if form == TForm::Direct && point.is_boundary_value() {
            return Err(Error::InvalidArgument("pole form needs eps > 0".into()));
        }
        let kernel = GreensKernel::new(point.k);
        let denom = grid.nodes.iter().map(|&z| point.denominator(profile, z)).collect();
        let log = grid.nodes.iter().map(|&z| point.log_denominator(profile, z)).collect();
        let db = grid.nodes.iter().map(|&z| profile.db(z)).collect();
        let d2b = grid.nodes.iter().map(|&z| profile.d2b(z)).collect();
        let mut r = Resolvent {
            profile,
            grid,
            point,
            form,
            kernel,
            denom,
            log,
            db,
            d2b,
            t: CMatrix::zeros(0, 0),
            lu: None,
        };
        r.t = r.t_rows(&grid.nodes);
        Ok(r)
    }

    pub fn d2b_nodes(&self) -> &[f64] {
        &self.d2b
    }

    pub fn t_matrix(&self) -> &CMatrix {
        &self.t
    }

    /// Rows of T at arbitrary targets.
    pub fn t_rows(&self, targets: &[f64]) -> CMatrix {
        let n = self.grid.n_total();
        let rg = self.kernel.rows(self.grid, KernelKind::G, targets);
        let mut out = CMatrix::zeros(targets.len(), n);
        match self.form {
            TForm::Direct => {
                for (i, r) in rg.iter().enumerate() {
                    for m in 0..n {
                        *out.at_mut(i, m) = r[m] / self.denom[m];
                    }
                }
            }
            TForm::Log => {
                let rdz = self.kernel.rows(self.grid, KernelKind::Dz, targets);
                for i in 0..targets.len() {
                    let row = self.log_form_row(&rdz[i], &rg[i]);
                    out.data[i * n..(i + 1) * n].copy_from_slice(&row);
                }
            }
        }
        out
    }

    /// -(A diag(L) + B diag(L) D) diag(1/b') for kernel rows A (no derivative on
    /// f) and B (derivative on f).
    fn log_form_row(&self, a: &[f64], b: &[f64]) -> Vec<Complex64> {
        let g = self.grid;
        let q = g.q;
        let n = g.n_total();
        let mut row = vec![ZERO; n];
        for p in 0..g.n_panels() {
            let scale = 2.0 / g.panel_len(p);
            let tmp: Vec<Complex64> = (0..q).map(|j| b[p * q + j] * self.log[p * q + j] * scale).collect();
            for mm in 0..q {
                let m = p * q + mm;
                let mut acc = a[m] * self.log[m];
                for (j, t) in tmp.iter().enumerate() {
                    acc += t * g.basis.diff[j][mm];
                }
                row[m] = -acc / self.db[m];
            }
        }
        row
    }

    /// Rows of d_y T at arbitrary targets (targets must differ from y0 when
    /// eps = 0).
    pub fn dy_t_rows(&self, targets: &[f64]) -> CMatrix {
        let n = self.grid.n_total();
        let rdy = self.kernel.rows(self.grid, KernelKind::Dy, targets);
        let mut out = CMatrix::zeros(targets.len(), n);
        match self.form {
            TForm::Direct => {
                for (i, r) in rdy.iter().enumerate() {
                    for m in 0..n {
                        *out.at_mut(i, m) = r[m] / self.denom[m];
                    }
                }
            }
            TForm::Log => {
                let rp = self.kernel.rows(self.grid, KernelKind::Prime, targets);
                for (i, &y) in targets.iter().enumerate() {
                    let mut row = self.log_form_row(&rp[i], &rdy[i]);
                    // -(f/b')(y) L(y): interpolate f at y
                    let (off, w) = self.grid.interp_row(y);
                    let coef = self.point.log_denominator(self.profile, y) / self.profile.db(y);
                    for (j, wj) in w.iter().enumerate() {
                        row[off + j] -= coef * *wj;
                    }
                    out.data[i * n..(i + 1) * n].copy_from_slice(&row);
                }
            }
        }
        out
    }

    pub fn apply_t(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.t.matvec(f)
    }

    pub fn apply_s(&self, f: &[Complex64]) -> Vec<Complex64> {
        let bf: Vec<Complex64> = f.iter().zip(&self.d2b).map(|(v, c)| v * c).collect();
        self.t.matvec(&bf).into_iter().map(|v| -v).collect()
    }

    /// I - S = I + T diag(b'').
    pub fn system_matrix(&self) -> CMatrix {
        let n = self.grid.n_total();
        let mut a = CMatrix::identity(n);
        for i in 0..n {
            for m in 0..n {
                a.data[i * n + m] += self.t.data[i * n + m] * self.d2b[m];
            }
        }
        a
    }

    /// 1 / ||(I - S)^{-1}||_inf, zero when the discrete system is singular.
    pub fn sigma_min(&self) -> Result<f64> {
        let lu = DenseLu::new(&self.system_matrix())?;
        let inv = lu.inverse_norm_inf_estimate();
        Ok(if inv.is_finite() && inv > 0.0 { 1.0 / inv } else { 0.0 })
    }

    /// Factors I - S = I + T diag(b'').
    pub fn factor(&mut self) -> Result<f64> {
        if let Some((_, c)) = &self.lu {
            return Ok(*c);
        }
        let lu = DenseLu::new(&self.system_matrix())?;
        let cond = lu.cond_estimate();
        if !(cond <= COND_LIMIT) {
            return Err(Error::NearSingularResolvent(cond));
        }
        self.lu = Some((lu, cond));
        Ok(cond)
    }

    pub fn cond(&self) -> Option<f64> {
        self.lu.as_ref().map(|(_, c)| *c)
    }

    /// Solves (I - S) u = rhs at the nodes and returns (u, residual).
    pub fn solve_system(&mut self, rhs: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
        self.factor()?;
        let (lu, _) = self.lu.as_ref().expect("factored");
        let u = lu.solve(rhs);
        let su = self.apply_s(&u);
        let lhs: Vec<Complex64> = u.iter().zip(&su).map(|(a, b)| a - b).collect();
        let scale = sup_norm(rhs).max(f64::MIN_POSITIVE);
        Ok((u, sup_diff(&lhs, rhs) / scale))
    }

    /// g = omega0 - b'' psi at nodes.
    fn source(&self, omega0: &[Complex64], psi: &[Complex64]) -> Vec<Complex64> {
        omega0.iter().zip(psi).zip(&self.d2b).map(|((w, p), c)| w - p * c).collect()
    }

    /// psi at targets by Nystrom interpolation.
    pub fn psi_at(&self, omega0: &[Complex64], psi: &[Complex64], targets: &[f64]) -> Vec<Complex64> {
        self.t_rows(targets).matvec(&self.source(omega0, psi))
    }

    pub fn dpsi_dy_at(&self, omega0: &[Complex64], psi: &[Complex64], targets: &[f64]) -> Vec<Complex64> {
        self.dy_t_rows(targets).matvec(&self.source(omega0, psi))
    }

    /// Solution of (I - S) u = rhs evaluated at targets: u = S u + rhs.
    pub fn field_at(&self, u: &[Complex64], rhs_at_targets: &[Complex64], targets: &[f64]) -> Vec<Complex64> {
        let bu: Vec<Complex64> = u.iter().zip(&self.d2b).map(|(v, c)| v * c).collect();
        self.t_rows(targets)
            .matvec(&bu)
            .into_iter()
            .zip(rhs_at_targets)
            .map(|(s, r)| r - s)
            .collect()
    }

    pub fn solve_psi(&mut self, omega0: &[Complex64]) -> Result<ResolventSolution> {
        let rhs = self.apply_t(omega0);
        let (psi, residual) = self.solve_system(&rhs)?;
        let dpsi_dy = if self.point.is_boundary_value() {
            vec![ZERO; psi.len()]
        } else {
            self.dpsi_dy_at(omega0, &psi, &self.grid.nodes.clone())
        };
        Ok(ResolventSolution {
            point: self.point,
            psi,
            dpsi_dy,
            dpsi_dy0: None,
            residual,
            cond: self.cond().unwrap_or(f64::NAN),
        })
    }

    /// Right side of the y0-differentiated equation at the targets (the nodes
    /// when `targets` is None).
    pub fn dy0_rhs(&self, omega0: &[Complex64], psi: &[Complex64], targets: Option<&[f64]>) -> Result<Vec<Complex64>> {
        if self.point.is_boundary_value() {
            return Err(Error::InvalidArgument("y0-derivative needs eps > 0".into()));
        }
        let p = self.profile;
        let grid = self.grid;
        let k = self.kernel.abs_k();
        let g = self.source(omega0, psi);
        let u: Vec<Complex64> = g.iter().zip(&self.db).map(|(v, d)| v / d).collect();
        let du = grid.differentiate(&u);
        let d2u = grid.differentiate2(&u);
        let n = grid.n_total();
        let mut w_g = vec![ZERO; n];
        let mut w_dz = vec![ZERO; n];
        for m in 0..n {
            let (db, d2b) = (self.db[m], self.d2b[m]);
            let inv_db_prime = -d2b / (db * db);
            let v1 = u[m] / db * (k * k);
            let v2 = du[m] * (2.0 / db) + u[m] * inv_db_prime;
            let v3 = d2u[m] / db + du[m] * inv_db_prime;
            w_g[m] = (v1 + v3) * self.log[m];
            w_dz[m] = v2 * self.log[m];
        }
        let owned;
        let ys: &[f64] = match targets {
            Some(t) => t,
            None => {
                owned = grid.nodes.clone();
                &owned
            }
        };
        let rg = self.kernel.rows(grid, KernelKind::G, ys);
        let rdz = self.kernel.rows(grid, KernelKind::Dz, ys);
        let g0 = grid.interpolate(&g, 0.0);
        let g1 = grid.interpolate(&g, 1.0);
        let l0 = self.point.log_denominator(p, 0.0);
        let l1 = self.point.log_denominator(p, 1.0);
        let (db0, db1) = (p.db(0.0), p.db(1.0));
        let g_at: Vec<Complex64> = match targets {
            None => g.clone(),
            Some(t) => {
                let psi_t = self.psi_at(omega0, psi, t);
                t.iter()
                    .zip(psi_t)
                    .map(|(&y, ps)| grid.interpolate(omega0, y) - ps * p.d2b(y))
                    .collect()
            }
        };
        let scale = p.db(self.point.y0);
        Ok(ys
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let integral: Complex64 = (0..n).map(|m| w_g[m] * rg[i][m] + w_dz[m] * rdz[i][m]).sum();
                let boundary = -g1 * sinh_ratio(k, y) * l1 / (db1 * db1)
                    - g0 * sinh_ratio(k, 1.0 - y) * l0 / (db0 * db0);
                let dby = p.db(y);
                let local = g_at[i] / (dby * dby) * self.point.log_denominator(p, y);
                (boundary + local - integral) * scale
            })
            .collect())
    }
}

pub fn apply_t(profile: &ShearProfile, point: SpectralPoint, f: &[Complex64], grid: &ChannelGrid) -> Result<Vec<Complex64>> {
    Ok(Resolvent::new(profile, grid, point)?.apply_t(f))
}

pub fn apply_s(profile: &ShearProfile, point: SpectralPoint, f: &[Complex64], grid: &ChannelGrid) -> Result<Vec<Complex64>> {
    Ok(Resolvent::new(profile, grid, point)?.apply_s(f))
}

pub fn solve_psi(
    profile: &ShearProfile,
    point: SpectralPoint,
    omega0k: &[Complex64],
    grid: &ChannelGrid,
) -> Result<ResolventSolution> {
    Resolvent::new(profile, grid, point)?.solve_psi(omega0k)
}

/// Independent backend: collocation of the Rayleigh form
/// psi'' - (k^2 + b''/x) psi = -omega0/x.
pub fn solve_psi_ode(
    profile: &ShearProfile,
    point: SpectralPoint,
    omega0k: &[Complex64],
    grid: &ChannelGrid,
) -> Result<ResolventSolution> {
    check_grading(grid, &point)?;
    if point.is_boundary_value() {
        return Err(Error::InvalidArgument("collocation backend needs eps > 0".into()));
    }
    let k2 = (point.k as f64).powi(2);
    let mut coeff = Vec::with_capacity(grid.n_total());
    let mut rhs = Vec::with_capacity(grid.n_total());
    for (i, &y) in grid.nodes.iter().enumerate() {
        let x = point.denominator(profile, y);
        coeff.push(-(k2 + profile.d2b(y) / x));
        rhs.push(-omega0k[i] / x);
    }
    let sol = collocation::solve_second_order(grid, &coeff, &rhs)?;
    let dpsi_dy = grid.nodes.iter().map(|&y| sol.eval_dy(y)).collect();
    // defect of the integral form, measured with the Nystrom operator
    let r = Resolvent::new(profile, grid, point)?;
    let t_omega = r.apply_t(omega0k);
    let s_psi = r.apply_s(&sol.values);
    let lhs: Vec<Complex64> = sol.values.iter().zip(&s_psi).map(|(a, b)| a - b).collect();
    let residual = sup_diff(&lhs, &t_omega) / sup_norm(&t_omega).max(f64::MIN_POSITIVE);
    Ok(ResolventSolution {
        point,
        psi: sol.values,
        dpsi_dy,
        dpsi_dy0: None,
        residual,
        cond: f64::NAN,
    })
}

/// d psi / d y0 at the nodes; also stored into a copy of `sol`.
pub fn solve_dy0_psi(
    profile: &ShearProfile,
    sol: &ResolventSolution,
    omega0k: &[Complex64],
    grid: &ChannelGrid,
) -> Result<Vec<Complex64>> {
    let mut r = Resolvent::new(profile, grid, sol.point)?;
    let rhs = r.dy0_rhs(omega0k, &sol.psi, None)?;
    Ok(r.solve_system(&rhs)?.0)
}

/// Right sides sinh(k(1-y))/(|b'(0)|^2 sinh k) and sinh(ky)/(|b'(1)|^2 sinh k).
pub fn boundary_rhs(profile: &ShearProfile, k: i64, y: f64) -> (f64, f64) {
    let ka = k.unsigned_abs() as f64;
    let (d0, d1) = (profile.db(0.0), profile.db(1.0));
    (sinh_ratio(ka, 1.0 - y) / (d0 * d0), sinh_ratio(ka, y) / (d1 * d1))
}

pub fn solve_boundary_phi(profile: &ShearProfile, point: SpectralPoint, grid: &ChannelGrid) -> Result<BoundaryFunctionPair> {
    let mut r = Resolvent::new(profile, grid, point)?;
    let (r0, r1): (Vec<Complex64>, Vec<Complex64>) = grid
        .nodes
        .iter()
        .map(|&y| {
            let (a, b) = boundary_rhs(profile, point.k, y);
            (Complex64::new(a, 0.0), Complex64::new(b, 0.0))
        })
        .unzip();
    let (phi0, res0) = r.solve_system(&r0)?;
    let (phi1, res1) = r.solve_system(&r1)?;
    Ok(BoundaryFunctionPair { phi0, phi1, residual: res0.max(res1) })
}

/// Extrapolation model used by [`eps_limit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitModel {
    /// Richardson with the empirically estimated order
    Auto,
    /// least squares in {1, eps log eps, eps}
    EpsLog,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitReport {
    pub eps: Vec<f64>,
    pub differences: Vec<f64>,
    pub order: Option<f64>,
    pub exact: bool,
    pub error_estimate: f64,
}

/// eps_j = eps0 2^{-j}.
pub fn eps_schedule(eps0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|j| eps0 * 0.5f64.powi(j as i32)).collect()
}

/// Limit of a vector family v_j sampled at eps_j = eps0 2^{-j}.
pub fn eps_limit(eps: &[f64], family: &[Vec<Complex64>], model: LimitModel) -> Result<(Vec<Complex64>, LimitReport)> {
    let j = family.len();
    if j < 4 || eps.len() != j {
        return Err(Error::InvalidArgument("eps_limit needs at least four levels".into()));
    }
    let diffs: Vec<f64> = family.windows(2).map(|w| sup_diff(&w[1], &w[0])).collect();
    let scale = family.iter().map(|v| sup_norm(v)).fold(0.0, f64::max);
    let last = family[j - 1].clone();
    if diffs.iter().all(|&d| d <= 1e-14 * scale.max(1e-300)) {
        let report = LimitReport { eps: eps.to_vec(), differences: diffs, order: None, exact: true, error_estimate: 0.0 };
        return Ok((last, report));
    }
    let tail = &diffs[diffs.len() - 2..];
    let floor = 1e-12 * scale;
    if tail[1] > tail[0] * 1.05 && tail[1] > floor {
        return Err(Error::NoConvergence(format!(
            "successive differences {:.3e} -> {:.3e} do not decrease",
            tail[0], tail[1]
        )));
    }
    let ratio = (tail[0] / tail[1].max(floor.max(1e-300))).max(1.0 + 1e-9);
    let order = ratio.log2();
    let limit = match model {
        LimitModel::Auto => {
            let r = ratio;
            let (a, b) = (&family[j - 2], &family[j - 1]);
            a.iter().zip(b).map(|(x, y)| y + (y - x) / (r - 1.0)).collect::<Vec<_>>()
        }
        LimitModel::EpsLog => eps_log_fit(eps, family),
    };
    let error_estimate = match model {
        LimitModel::Auto => tail[1] / (ratio - 1.0),
        LimitModel::EpsLog => sup_diff(&limit, &last),
    };
    let report = LimitReport { eps: eps.to_vec(), differences: diffs, order: Some(order), exact: false, error_estimate };
    Ok((limit, report))
}

fn eps_log_fit(eps: &[f64], family: &[Vec<Complex64>]) -> Vec<Complex64> {
    // least squares in 1, e log e, e and, given five or more levels, e^2 log e;
    // columns are scaled to unit size before the QR solve
    let cols = if eps.len() >= 5 { 4 } else { 3 };
    let basis = |e: f64| [1.0, e * e.ln(), e, e * e * e.ln()];
    let mut scale = [0.0f64; 4];
    for &e in eps {
        for (s, b) in scale.iter_mut().zip(basis(e)) {
            *s = s.max(b.abs());
        }
    }
    let a = Mat::<f64>::from_fn(eps.len(), cols, |i, c| basis(eps[i])[c] / scale[c]);
    let ident = Mat::<f64>::from_fn(eps.len(), eps.len(), |i, j| if i == j { 1.0 } else { 0.0 });
    let pinv = a.qr().solve_lstsq(&ident);
    let w: Vec<f64> = (0..eps.len()).map(|i| pinv.read(0, i) / scale[0]).collect();
    let n = family[0].len();
    (0..n).map(|i| family.iter().zip(&w).map(|(v, &wk)| v[i] * wk).sum()).collect()
}
