//! Panelized Gauss-Legendre grids on [0, 1].

use std::sync::Arc;

use num_complex::Complex64;

use crate::quadrature::PanelBasis;

/// Location of a point relative to the panels.
#[derive(Clone, Copy, Debug)]
pub struct Location {
    pub panel: usize,
    /// Reference coordinate in [-1, 1].
    pub s: f64,
}

#[derive(Clone, Debug)]
pub struct ChannelGrid {
    pub q: usize,
    pub breaks: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub graded_about: Option<f64>,
    pub h_floor: Option<f64>,
    pub basis: Arc<PanelBasis>,
}

impl ChannelGrid {
    pub fn from_breaks(mut breaks: Vec<f64>, q: usize) -> Self {
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        breaks.dedup();
        assert!(breaks.len() >= 2 && breaks[0] == 0.0 && *breaks.last().unwrap() == 1.0);
        let basis = PanelBasis::cached(q);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * q);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            for j in 0..q {
                nodes.push(c + h * basis.nodes[j]);
                weights.push(h * basis.weights[j]);
            }
        }
        ChannelGrid { q, breaks, nodes, weights, graded_about: None, h_floor: None, basis }
    }

    pub fn uniform(panels: usize, q: usize) -> Self {
        let breaks = (0..=panels).map(|i| i as f64 / panels as f64).collect();
        Self::from_breaks(breaks, q)
    }

    /// Grid with about `n_total` nodes whose panels halve toward y0 until the
    /// panel touching y0 is no longer than `floor`.
    pub fn graded(n_total: usize, q: usize, y0: f64, floor: f64) -> Self {
        assert!((0.0..=1.0).contains(&y0) && floor > 0.0);
        let target = (n_total / q).max(2);
        let build = |base: usize| graded_breaks(base, y0, floor);
        let mut best = build(1);
        for base in 1..=target {
            let b = build(base);
            if b.len() - 1 <= target {
                best = b;
            } else {
                break;
            }
        }
        // pad by splitting the widest panels
        while best.len() - 1 < target {
            let (i, _) = best
                .windows(2)
                .enumerate()
                .map(|(i, w)| (i, w[1] - w[0]))
                .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let mid = 0.5 * (best[i] + best[i + 1]);
            best.insert(i + 1, mid);
        }
        let mut g = Self::from_breaks(best, q);
        g.graded_about = Some(y0);
        g.h_floor = Some(floor);
        g
    }

    pub fn n_total(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn panel_len(&self, p: usize) -> f64 {
        self.breaks[p + 1] - self.breaks[p]
    }

    /// Panel containing y; a point on a breakpoint belongs to the panel on its right
    /// (the last panel for y = 1).
    pub fn locate(&self, y: f64) -> Location {
        let m = self.n_panels();
        let p = match self.breaks.binary_search_by(|b| b.partial_cmp(&y).expect("finite")) {
            Ok(i) => i.min(m - 1),
            Err(i) => i.saturating_sub(1).min(m - 1),
        };
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        let s = (2.0 * (y - a) / (b - a) - 1.0).clamp(-1.0, 1.0);
        Location { panel: p, s }
    }

    /// Length of the smallest panel adjacent to y.
    pub fn local_panel_len(&self, y: f64) -> f64 {
        let loc = self.locate(y);
        let mut h = self.panel_len(loc.panel);
        if loc.s == -1.0 && loc.panel > 0 {
            h = h.min(self.panel_len(loc.panel - 1));
        }
        h
    }

    pub fn integrate(&self, f: &[Complex64]) -> Complex64 {
        f.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Interpolation weights at y over the nodes of its panel.
    pub fn interp_row(&self, y: f64) -> (usize, Vec<f64>) {
        let loc = self.locate(y);
        (loc.panel * self.q, self.basis.eval_row(loc.s))
    }

    pub fn interpolate(&self, f: &[Complex64], y: f64) -> Complex64 {
        let (off, row) = self.interp_row(y);
        row.iter().enumerate().map(|(j, w)| f[off + j] * w).sum()
    }

    /// Derivative of the panelwise interpolant evaluated at y.
    pub fn derivative_at(&self, f: &[Complex64], y: f64) -> Complex64 {
        let loc = self.locate(y);
        let scale = 2.0 / self.panel_len(loc.panel);
        let row = self.basis.deriv_row(loc.s, 1);
        row.iter().enumerate().map(|(j, w)| f[loc.panel * self.q + j] * w).sum::<Complex64>() * scale
    }

    /// Panelwise spectral derivative of nodal values.
    pub fn differentiate(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.apply_blockwise(f, &self.basis.diff, 1)
    }

    pub fn differentiate2(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.apply_blockwise(f, &self.basis.diff2, 2)
    }

    fn apply_blockwise(&self, f: &[Complex64], op: &[Vec<f64>], power: i32) -> Vec<Complex64> {
        let q = self.q;
        let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
        for p in 0..self.n_panels() {
            let scale = (2.0 / self.panel_len(p)).powi(power);
            for i in 0..q {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..q {
                    acc += f[p * q + j] * op[i][j];
                }
                out[p * q + i] = acc * scale;
            }
        }
        out
    }

    pub fn sample<F: Fn(f64) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        self.nodes.iter().map(|&y| f(y)).collect()
    }
}

fn graded_breaks(base: usize, y0: f64, floor: f64) -> Vec<f64> {
    let mut breaks: Vec<f64> = (0..=base).map(|i| i as f64 / base as f64).collect();
    let h = 1.0 / base as f64;
    if y0 > 0.0 && y0 < 1.0 {
        let nearest = (y0 * base as f64).round() as usize;
        let nb = nearest as f64 * h;
        if (nb - y0).abs() < 0.25 * h && nearest > 0 && nearest < base {
            breaks[nearest] = y0;
        } else {
            breaks.push(y0);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = breaks.iter().position(|&b| b == y0).expect("y0 inserted");
    let mut extra = Vec::new();
    if idx > 0 {
        let mut d = y0 - breaks[idx - 1];
        while d > floor {
            d *= 0.5;
            extra.push(y0 - d);
        }
    }
    if idx + 1 < breaks.len() {
        let mut d = breaks[idx + 1] - y0;
        while d > floor {
            d *= 0.5;
            extra.push(y0 + d);
        }
    }
    breaks.extend(extra);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();
    breaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for g in [
            ChannelGrid::uniform(7, 8),
            ChannelGrid::graded(512, 8, 0.37, 1e-6),
            ChannelGrid::graded(256, 8, 0.0, 1e-6),
            ChannelGrid::graded(256, 8, 1.0, 1e-6),
        ] {
            let s: f64 = g.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
            assert!(g.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn graded_structure() {
        let g = ChannelGrid::graded(512, 8, 0.37, 1e-6);
        assert_eq!(g.n_total(), 512);
        assert!(g.breaks.contains(&0.37));
        assert!(g.local_panel_len(0.37) <= 1e-6);
        let i = g.breaks.iter().position(|&b| b == 0.37).unwrap();
        for j in 1..10 {
            let j = j + 1;
            let r = (g.breaks[i + j + 1] - g.breaks[i + j]) / (g.breaks[i + j] - g.breaks[i + j - 1]);
            assert!((r - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn locate_and_interpolate() {
        let g = ChannelGrid::uniform(4, 8);
        assert_eq!(g.locate(0.5).panel, 2);
        assert_eq!(g.locate(1.0).panel, 3);
        let f = g.sample(|y| Complex64::new(y.sin(), y * y));
        let v = g.interpolate(&f, 0.123);
        assert!((v - Complex64::new(0.123f64.sin(), 0.123 * 0.123)).norm() < 1e-12);
        let d = g.differentiate(&f);
        for (y, dv) in g.nodes.iter().zip(&d) {
            assert!((dv - Complex64::new(y.cos(), 2.0 * y)).norm() < 1e-10);
        }
    }
}
