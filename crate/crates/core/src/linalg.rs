//! Dense complex LU (via faer), a banded LU, and inverse-norm estimates.

use faer::complex_native::c64;
use faer::prelude::SpSolver;
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

#[inline]
fn to_faer(z: Complex64) -> c64 {
    c64::new(z.re, z.im)
}

#[inline]
fn from_faer(z: c64) -> Complex64 {
    Complex64::new(z.re, z.im)
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// max row sum of moduli.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub fn sup_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Partial-pivoting LU of a square complex matrix.
pub struct DenseLu {
    n: usize,
    lu: faer::solvers::PartialPivLu<c64>,
    norm_inf: f64,
}

impl DenseLu {
    pub fn new(a: &CMatrix) -> Result<Self> {
        assert_eq!(a.rows, a.cols);
        let n = a.rows;
        if a.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NearSingularResolvent(f64::INFINITY));
        }
        let m = Mat::<c64>::from_fn(n, n, |i, j| to_faer(a.at(i, j)));
        Ok(DenseLu { n, lu: m.partial_piv_lu(), norm_inf: a.norm_inf() })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut rhs = Mat::<c64>::from_fn(self.n, 1, |i, _| to_faer(b[i]));
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| from_faer(rhs.read(i, 0))).collect()
    }

    /// Solves A^H x = b.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut rhs = Mat::<c64>::from_fn(self.n, 1, |i, _| to_faer(b[i]));
        self.lu.solve_conj_transpose_in_place(rhs.as_mut());
        (0..self.n).map(|i| from_faer(rhs.read(i, 0))).collect()
    }

    /// Exact ||A^{-1}||_inf from a full inverse.
    pub fn inverse_norm_inf(&self) -> f64 {
        let mut id = Mat::<c64>::zeros(self.n, self.n);
        for i in 0..self.n {
            id.write(i, i, c64::new(1.0, 0.0));
        }
        self.lu.solve_in_place(id.as_mut());
        (0..self.n)
            .map(|i| (0..self.n).map(|j| from_faer(id.read(i, j)).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Hager-Higham estimate of ||A^{-1}||_inf = ||A^{-H}||_1 (a lower bound,
    /// usually exact).
    pub fn inverse_norm_inf_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve_adjoint(&x);
            let new_est: f64 = y.iter().map(|z| z.norm()).sum();
            let xi: Vec<Complex64> = y
                .iter()
                .map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) })
                .collect();
            let z = self.solve(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let done = new_est <= est * (1.0 + 1e-12);
            est = est.max(new_est);
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| (a * b.conj()).re).sum();
            if done || zmax <= zx {
                break;
            }
            x = vec![Complex64::new(0.0, 0.0); n];
            x[jmax] = Complex64::new(1.0, 0.0);
        }
        // alternating-sign probe guards against the estimator stalling
        let probe: Vec<Complex64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                Complex64::new(s * (1.0 + i as f64 / (n - 1).max(1) as f64), 0.0)
            })
            .collect();
        let y = self.solve_adjoint(&probe);
        let alt = 2.0 * y.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt)
    }

    /// ||A||_inf * ||A^{-1}||_inf (estimated).
    pub fn cond_estimate(&self) -> f64 {
        self.norm_inf * self.inverse_norm_inf_estimate()
    }
}

/// Banded LU with partial pivoting (LAPACK gbtf2 layout).
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
    ipiv: Vec<usize>,
}

/// Banded matrix under assembly.
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, ldab, ab: vec![Complex64::new(0.0, 0.0); ldab * n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(i + self.ku >= j && j + self.kl >= i, "entry ({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn factor(self) -> Result<BandedLu> {
        let BandedMatrix { n, kl, ku, ldab, mut ab } = self;
        let idx = |i: usize, j: usize| (kl + ku + i - j) + j * ldab;
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = ab[idx(j, j)].norm();
            for i in j + 1..=j + km {
                let v = ab[idx(i, j)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = p;
            if best == 0.0 {
                return Err(Error::NearSingularResolvent(f64::INFINITY));
            }
            ju = ju.max((j + ku + p - j).min(n - 1));
            if p != j {
                for c in j..=ju {
                    ab.swap(idx(j, c), idx(p, c));
                }
            }
            let piv = ab[idx(j, j)];
            for i in j + 1..=j + km {
                let v = ab[idx(i, j)] / piv;
                ab[idx(i, j)] = v;
            }
            for c in j + 1..=ju {
                let ajc = ab[idx(j, c)];
                if ajc == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i in j + 1..=j + km {
                    let l = ab[idx(i, j)];
                    ab[idx(i, c)] -= l * ajc;
                }
            }
        }
        Ok(BandedLu { n, kl, ku, ldab, ab, ipiv })
    }
}

impl BandedLu {
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let idx = |i: usize, j: usize| (kl + ku + i - j) + j * ldab;
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let xj = x[j];
            for i in j + 1..=j + km {
                x[i] -= self.ab[idx(i, j)] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[idx(j, j)];
            let xj = x[j];
            for i in j.saturating_sub(kl + ku)..j {
                x[i] -= self.ab[idx(i, j)] * xj;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> CMatrix {
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let v = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5;
                *a.at_mut(i, j) = Complex64::new(v, 0.3 * ((i + 2 * j) % 5) as f64 / 5.0);
            }
            *a.at_mut(i, i) += Complex64::new(3.0, 0.0);
        }
        a
    }

    #[test]
    fn dense_lu_and_norms() {
        let a = test_matrix(40);
        let lu = DenseLu::new(&a).unwrap();
        let x: Vec<Complex64> = (0..40).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let b = a.matvec(&x);
        assert!(sup_diff(&lu.solve(&b), &x) < 1e-11);
        let exact = lu.inverse_norm_inf();
        let est = lu.inverse_norm_inf_estimate();
        assert!(est <= exact * (1.0 + 1e-10) && est >= 0.5 * exact, "{est} vs {exact}");
        // adjoint solve
        let mut ah = CMatrix::zeros(40, 40);
        for i in 0..40 {
            for j in 0..40 {
                *ah.at_mut(i, j) = a.at(j, i).conj();
            }
        }
        assert!(sup_diff(&lu.solve_adjoint(&ah.matvec(&x)), &x) < 1e-11);
    }

    #[test]
    fn banded_matches_dense() {
        let n = 30;
        let (kl, ku) = (3, 2);
        let mut dense = CMatrix::zeros(n, n);
        let mut band = BandedMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                // weak diagonal forces pivoting
                let v = Complex64::new(((i * 5 + j * 7) % 9) as f64 - 4.0, ((i + j) % 3) as f64);
                let v = if i == j { v * 0.01 } else { v };
                *dense.at_mut(i, j) = v;
                band.set(i, j, v);
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.5)).collect();
        let b = dense.matvec(&x);
        let lu = band.factor().unwrap();
        assert!(sup_diff(&lu.solve(&b), &x) < 1e-10);
    }
}
