//! Gauss-Legendre rules and the spectral operators of a single reference panel.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_pair(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_pair(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared cached rule.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("quadrature cache poisoned");
        map.entry(n).or_insert_with(|| Arc::new(GaussLegendre::new(n))).clone()
    }

    /// Integrates f over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * f(c + h * s))
            .sum::<f64>()
            * h
    }
}

/// P_n(x) and P_n'(x).
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = if (x * x - 1.0).abs() > 1e-300 {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    } else {
        let s = if x > 0.0 || n % 2 == 0 { 1.0 } else { -1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    };
    (p1, d)
}

/// P_0..=P_nmax at x together with first and second derivatives.
pub fn legendre_table(nmax: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; nmax + 2];
    let mut d = vec![0.0; nmax + 2];
    let mut d2 = vec![0.0; nmax + 2];
    p[0] = 1.0;
    if nmax + 1 >= 1 {
        p[1] = x;
        d[1] = 1.0;
    }
    for n in 1..=nmax {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * x * p[n] - nf * p[n - 1]) / (nf + 1.0);
        d[n + 1] = d[n - 1] + (2.0 * nf + 1.0) * p[n];
        d2[n + 1] = d2[n - 1] + (2.0 * nf + 1.0) * d[n];
    }
    p.truncate(nmax + 1);
    d.truncate(nmax + 1);
    d2.truncate(nmax + 1);
    (p, d, d2)
}

/// Interpolation, cumulative integration and differentiation on the reference
/// panel [-1, 1] for the q-point Gauss-Legendre nodes.
#[derive(Debug)]
pub struct PanelBasis {
    pub q: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// coefficient map: c_n = sum_j to_legendre[n][j] f_j
    to_legendre: Vec<Vec<f64>>,
    /// cum[i][j] = int_{-1}^{s_i} l_j
    pub cum: Vec<Vec<f64>>,
    /// diff[i][j] = l_j'(s_i)
    pub diff: Vec<Vec<f64>>,
    pub diff2: Vec<Vec<f64>>,
}

impl PanelBasis {
    pub fn new(q: usize) -> Self {
        let gl = GaussLegendre::new(q);
        let mut to_legendre = vec![vec![0.0; q]; q];
        for j in 0..q {
            let (p, _, _) = legendre_table(q, gl.nodes[j]);
            for n in 0..q {
                to_legendre[n][j] = (2 * n + 1) as f64 / 2.0 * gl.weights[j] * p[n];
            }
        }
        let mut basis = PanelBasis {
            q,
            nodes: gl.nodes.clone(),
            weights: gl.weights.clone(),
            to_legendre,
            cum: Vec::new(),
            diff: Vec::new(),
            diff2: Vec::new(),
        };
        basis.cum = gl.nodes.iter().map(|&s| basis.cum_row(s)).collect();
        basis.diff = gl.nodes.iter().map(|&s| basis.deriv_row(s, 1)).collect();
        basis.diff2 = gl.nodes.iter().map(|&s| basis.deriv_row(s, 2)).collect();
        basis
    }

    pub fn cached(q: usize) -> Arc<PanelBasis> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<PanelBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("basis cache poisoned");
        map.entry(q).or_insert_with(|| Arc::new(PanelBasis::new(q))).clone()
    }

    fn combine(&self, modal: &[f64]) -> Vec<f64> {
        (0..self.q)
            .map(|j| (0..self.q).map(|n| modal[n] * self.to_legendre[n][j]).sum())
            .collect()
    }

    /// l_j(s) for all j.
    pub fn eval_row(&self, s: f64) -> Vec<f64> {
        let (p, _, _) = legendre_table(self.q, s);
        self.combine(&p)
    }

    /// int_{-1}^{s} l_j for all j.
    pub fn cum_row(&self, s: f64) -> Vec<f64> {
        let (p, _, _) = legendre_table(self.q, s);
        let modal: Vec<f64> = (0..self.q)
            .map(|n| if n == 0 { s + 1.0 } else { (p[n + 1] - p[n - 1]) / (2 * n + 1) as f64 })
            .collect();
        self.combine(&modal)
    }

    /// d^order/ds^order l_j(s) for order 1 or 2.
    pub fn deriv_row(&self, s: f64, order: usize) -> Vec<f64> {
        let (_, d, d2) = legendre_table(self.q, s);
        self.combine(if order == 1 { &d } else { &d2 })
    }
}
