//! The channel Green's function of (d_yy - k^2) with Dirichlet data and the
//! product-integration rows built from it.

use num_complex::Complex64;

use crate::collocation;
use crate::grid::ChannelGrid;

/// Beyond this |k| kernel values are formed from exponential differences.
const EXP_FORM_K: f64 = 30.0;
/// Separable factor products stay finite up to this |k|.
const SEPARABLE_K: f64 = 300.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    /// G_k
    G,
    /// d_y G_k
    Dy,
    /// d_z G_k
    Dz,
    /// G'_k, the off-diagonal part of d_y d_z G_k
    Prime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Hyp {
    Sinh,
    Cosh,
}

/// f(a) g(b) / sinh(k) for f, g in {sinh, cosh} with a, b, k >= 0.
fn hyp_ratio(f: Hyp, a: f64, g: Hyp, b: f64, k: f64) -> f64 {
    if k < EXP_FORM_K {
        let fa = if f == Hyp::Sinh { a.sinh() } else { a.cosh() };
        let gb = if g == Hyp::Sinh { b.sinh() } else { b.cosh() };
        return fa * gb / k.sinh();
    }
    let fac = |h: Hyp, x: f64| if h == Hyp::Sinh { -(-2.0 * x).exp_m1() } else { 1.0 + (-2.0 * x).exp() };
    (a + b - k).exp() * fac(f, a) * fac(g, b) / (2.0 * -(-2.0 * k).exp_m1())
}

#[derive(Clone, Copy, Debug)]
pub struct GreensKernel {
    pub k: i64,
    ka: f64,
}

impl GreensKernel {
    pub fn new(k: i64) -> Self {
        assert!(k != 0, "Fourier mode k must be nonzero");
        GreensKernel { k, ka: k.unsigned_abs() as f64 }
    }

    pub fn abs_k(&self) -> f64 {
        self.ka
    }

    /// Branch value; `left` selects the branch z < y.
    pub fn branch(&self, kind: KernelKind, y: f64, z: f64, left: bool) -> f64 {
        let k = self.ka;
        use Hyp::*;
        match (kind, left) {
            (KernelKind::G, true) => hyp_ratio(Sinh, k * z, Sinh, k * (1.0 - y), k) / k,
            (KernelKind::G, false) => hyp_ratio(Sinh, k * y, Sinh, k * (1.0 - z), k) / k,
            (KernelKind::Dy, true) => -hyp_ratio(Sinh, k * z, Cosh, k * (1.0 - y), k),
            (KernelKind::Dy, false) => hyp_ratio(Cosh, k * y, Sinh, k * (1.0 - z), k),
            (KernelKind::Dz, true) => hyp_ratio(Cosh, k * z, Sinh, k * (1.0 - y), k),
            (KernelKind::Dz, false) => -hyp_ratio(Sinh, k * y, Cosh, k * (1.0 - z), k),
            (KernelKind::Prime, true) => -k * hyp_ratio(Cosh, k * z, Cosh, k * (1.0 - y), k),
            (KernelKind::Prime, false) => -k * hyp_ratio(Cosh, k * y, Cosh, k * (1.0 - z), k),
        }
    }

    /// G_k(y, z).
    pub fn eval(&self, y: f64, z: f64) -> f64 {
        self.branch(KernelKind::G, y, z, z < y)
    }

    /// G'_k(y, z); the branch y <= z is used on the diagonal.
    pub fn eval_prime(&self, y: f64, z: f64) -> f64 {
        self.branch(KernelKind::Prime, y, z, z < y)
    }

    /// One-sided d_y G_k; on the diagonal the limit from y < z is returned.
    pub fn eval_dy(&self, y: f64, z: f64) -> f64 {
        self.branch(KernelKind::Dy, y, z, z < y)
    }

    /// One-sided d_z G_k; on the diagonal the limit from z > y is returned.
    pub fn eval_dz(&self, y: f64, z: f64) -> f64 {
        self.branch(KernelKind::Dz, y, z, z < y)
    }

    /// Factors of the separable branches at one point.
    fn factors(&self, x: f64) -> [f64; 4] {
        let k = self.ka;
        [(k * x).sinh(), (k * x).cosh(), (k * (1.0 - x)).sinh(), (k * (1.0 - x)).cosh()]
    }

    /// Product-integration rows: `out[r][m]` is the weight of node m in
    /// int_0^1 K(y_r, z) h(z) dz.
    pub fn rows(&self, grid: &ChannelGrid, kind: KernelKind, targets: &[f64]) -> Vec<Vec<f64>> {
        let node_f: Vec<[f64; 4]> = if self.ka <= SEPARABLE_K {
            grid.nodes.iter().map(|&z| self.factors(z)).collect()
        } else {
            Vec::new()
        };
        targets.iter().map(|&y| self.row_with(grid, kind, y, &node_f)).collect()
    }

    pub fn row(&self, grid: &ChannelGrid, kind: KernelKind, y: f64) -> Vec<f64> {
        self.rows(grid, kind, &[y]).pop().expect("one row")
    }

    /// Rows at the grid's own nodes.
    pub fn node_rows(&self, grid: &ChannelGrid, kind: KernelKind) -> Vec<Vec<f64>> {
        self.rows(grid, kind, &grid.nodes)
    }

    fn row_with(&self, grid: &ChannelGrid, kind: KernelKind, y: f64, node_f: &[[f64; 4]]) -> Vec<f64> {
        let k = self.ka;
        let q = grid.q;
        let loc = grid.locate(y);
        let value: Box<dyn Fn(usize, bool) -> f64> = if node_f.is_empty() {
            Box::new(move |m: usize, left: bool| self.branch(kind, y, grid.nodes[m], left))
        } else {
            let [sy, cy, s1y, c1y] = self.factors(y);
            let sk = k.sinh();
            Box::new(move |m: usize, left: bool| {
                let [sz, cz, s1z, c1z] = node_f[m];
                match (kind, left) {
                    (KernelKind::G, true) => sz * s1y / (k * sk),
                    (KernelKind::G, false) => sy * s1z / (k * sk),
                    (KernelKind::Dy, true) => -sz * c1y / sk,
                    (KernelKind::Dy, false) => cy * s1z / sk,
                    (KernelKind::Dz, true) => cz * s1y / sk,
                    (KernelKind::Dz, false) => -sy * c1z / sk,
                    (KernelKind::Prime, true) => -k * cz * c1y / sk,
                    (KernelKind::Prime, false) => -k * cy * c1z / sk,
                }
            })
        };
        let mut row = vec![0.0; grid.n_total()];
        let cum = if loc.s > -1.0 { Some(grid.basis.cum_row(loc.s)) } else { None };
        for p in 0..grid.n_panels() {
            for j in 0..q {
                let m = p * q + j;
                let w = grid.weights[m];
                row[m] = if p < loc.panel {
                    w * value(m, true)
                } else if p > loc.panel {
                    w * value(m, false)
                } else {
                    match &cum {
                        None => w * value(m, false),
                        Some(c) => {
                            let wl = 0.5 * grid.panel_len(p) * c[j];
                            wl * value(m, true) + (w - wl) * value(m, false)
                        }
                    }
                };
            }
        }
        row
    }
}

/// Dirichlet solution of (d_yy - k^2) psi = rhs as psi = -int G_k rhs.
pub fn elliptic_solve(k: i64, rhs: &[Complex64], grid: &ChannelGrid) -> Vec<Complex64> {
    let g = GreensKernel::new(k);
    let rows = g.node_rows(grid, KernelKind::G);
    rows.iter()
        .map(|r| -r.iter().zip(rhs).map(|(w, f)| f * w).sum::<Complex64>())
        .collect()
}

/// Same problem by banded spectral-element collocation.
pub fn elliptic_solve_banded(k: i64, rhs: &[Complex64], grid: &ChannelGrid) -> Vec<Complex64> {
    let k2 = (k as f64).powi(2);
    let coeff = vec![Complex64::new(-k2, 0.0); grid.n_total()];
    collocation::solve_second_order(grid, &coeff, rhs)
        .expect("Helmholtz collocation system is nonsingular")
        .values
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_form_value() {
        let g = GreensKernel::new(1);
        let expect = 0.5f64.sinh().powi(2) / 1.0f64.sinh();
        assert!((g.eval(0.5, 0.5) - expect).abs() < 1e-15);
        assert_eq!(g.eval(0.0, 0.3), 0.0);
        assert!((g.eval(0.3, 0.7) - g.eval(0.7, 0.3)).abs() < 1e-16);
    }

    #[test]
    fn exp_form_matches_direct_near_switch() {
        let k = 30.0f64;
        for (a, b) in [(0.4 * k, 0.3 * k), (0.05 * k, 0.9 * k)] {
            let direct = a.sinh() * b.cosh() / k.sinh();
            let exp_form = hyp_ratio(Hyp::Sinh, a, Hyp::Cosh, b, k);
            assert!((exp_form - direct).abs() < 1e-13 * direct.abs());
        }
        let big = GreensKernel::new(800);
        assert!((big.eval(0.5, 0.5) - 1.0 / 1600.0).abs() < 1e-15);
    }

    #[test]
    fn elliptic_eigenfunction() {
        let grid = ChannelGrid::uniform(16, 8);
        let rhs = grid.sample(|y| Complex64::new(-(PI * PI + 1.0) * (PI * y).sin(), 0.0));
        for psi in [elliptic_solve(1, &rhs, &grid), elliptic_solve_banded(1, &rhs, &grid)] {
            for (y, v) in grid.nodes.iter().zip(&psi) {
                assert!((v.re - (PI * y).sin()).abs() < 1e-12 && v.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rows_at_off_node_targets() {
        let grid = ChannelGrid::uniform(6, 8);
        let g = GreensKernel::new(3);
        // int_0^1 G(y,z) dz = (1 - cosh(k(y-1/2))/cosh(k/2)) / k^2
        for y in [0.0, 0.1234, 0.5, 2.0 / 6.0, 1.0] {
            let r = g.row(&grid, KernelKind::G, y);
            let v: f64 = r.iter().sum();
            let exact = (1.0 - (3.0 * (y - 0.5)).cosh() / 1.5f64.cosh()) / 9.0;
            assert!((v - exact).abs() < 1e-14, "y={y}");
        }
    }
}
