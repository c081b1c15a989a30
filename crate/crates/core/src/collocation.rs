//! Spectral-element collocation for psi'' + c(y) psi = r(y), psi(0) = psi(1) = 0,
//! with one Legendre polynomial of degree q+1 per panel and C^1 matching.

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::ChannelGrid;
use crate::linalg::BandedMatrix;
use crate::quadrature::legendre_table;

#[derive(Clone, Debug)]
pub struct CollocationSolution {
    pub breaks: Vec<f64>,
    pub degree: usize,
    /// Legendre coefficients, panel-major.
    pub coeffs: Vec<Complex64>,
    /// Values at the grid nodes.
    pub values: Vec<Complex64>,
}

impl CollocationSolution {
    fn panel_of(&self, y: f64) -> (usize, f64) {
        let m = self.breaks.len() - 1;
        let p = match self.breaks.binary_search_by(|b| b.partial_cmp(&y).unwrap()) {
            Ok(i) => i.min(m - 1),
            Err(i) => i.saturating_sub(1).min(m - 1),
        };
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        (p, (2.0 * (y - a) / (b - a) - 1.0).clamp(-1.0, 1.0))
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        let (p, s) = self.panel_of(y);
        let (pv, _, _) = legendre_table(self.degree, s);
        let c = &self.coeffs[p * (self.degree + 1)..(p + 1) * (self.degree + 1)];
        c.iter().zip(&pv).map(|(a, b)| a * b).sum()
    }

    pub fn eval_dy(&self, y: f64) -> Complex64 {
        let (p, s) = self.panel_of(y);
        let (_, dv, _) = legendre_table(self.degree, s);
        let c = &self.coeffs[p * (self.degree + 1)..(p + 1) * (self.degree + 1)];
        let h = self.breaks[p + 1] - self.breaks[p];
        c.iter().zip(&dv).map(|(a, b)| a * b).sum::<Complex64>() * (2.0 / h)
    }
}

/// Collocates at the q Gauss nodes of each panel; `coeff` and `rhs` are nodal.
pub fn solve_second_order(
    grid: &ChannelGrid,
    coeff: &[Complex64],
    rhs: &[Complex64],
) -> Result<CollocationSolution> {
    let q = grid.q;
    let m = grid.n_panels();
    let nb = q + 2;
    let n = m * nb;
    let deg = q + 1;
    let mut a = BandedMatrix::zeros(n, q + 2, q + 2);
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    let (p_left, d_left, _) = legendre_table(deg, -1.0);
    let (p_right, d_right, _) = legendre_table(deg, 1.0);
    let node_tables: Vec<_> = grid.basis.nodes.iter().map(|&s| legendre_table(deg, s)).collect();
    let one = Complex64::new(1.0, 0.0);
    let mut row = 0;
    for j in 0..nb {
        a.set(row, j, one * p_left[j]);
    }
    row += 1;
    for p in 0..m {
        let h = grid.panel_len(p);
        let scale = 0.25 * h * h;
        for i in 0..q {
            let (pv, _, d2) = &node_tables[i];
            let node = p * q + i;
            for j in 0..nb {
                a.set(row, p * nb + j, d2[j] + coeff[node] * scale * pv[j]);
            }
            b[row] = rhs[node] * scale;
            row += 1;
        }
        if p + 1 < m {
            let h2 = grid.panel_len(p + 1);
            for j in 0..nb {
                a.set(row, p * nb + j, one * p_right[j]);
                a.set(row, (p + 1) * nb + j, -one * p_left[j]);
            }
            row += 1;
            let s = 0.5 * h.min(h2);
            for j in 0..nb {
                a.set(row, p * nb + j, one * (d_right[j] * 2.0 / h * s));
                a.set(row, (p + 1) * nb + j, -one * (d_left[j] * 2.0 / h2 * s));
            }
            row += 1;
        }
    }
    for j in 0..nb {
        a.set(row, (m - 1) * nb + j, one * p_right[j]);
    }
    debug_assert_eq!(row + 1, n);
    let coeffs = a.factor()?.solve(&b);
    let values = (0..m)
        .flat_map(|p| {
            let c = &coeffs[p * nb..(p + 1) * nb];
            node_tables
                .iter()
                .map(move |(pv, _, _)| c.iter().zip(pv).map(|(x, y)| x * y).sum::<Complex64>())
        })
        .collect();
    Ok(CollocationSolution { breaks: grid.breaks.clone(), degree: deg, coeffs, values })
}
