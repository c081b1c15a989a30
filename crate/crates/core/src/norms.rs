//! Weighted norms built on the log weight (log(b - b(y0) + i eps) - 1/theta)^{1+m}
//! and empirical sweeps of the operator bounds for T f = int G f / (b - b(y0) + i eps).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{GreensKernel, KernelKind};
use crate::grid::ChannelGrid;
use crate::linalg::sup_norm;
use crate::profiles::ShearProfile;
use crate::resolvent::{eps_schedule, sinh_ratio, Iota, SpectralPoint};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Nodal values with an optional exact derivative; without one the derivative
/// is taken panelwise on the grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFunction {
    pub values: Vec<Complex64>,
    pub derivative: Option<Vec<Complex64>>,
}

impl GridFunction {
    pub fn new(values: Vec<Complex64>) -> Self {
        GridFunction { values, derivative: None }
    }

    pub fn with_derivative(values: Vec<Complex64>, derivative: Vec<Complex64>) -> Self {
        GridFunction { values, derivative: Some(derivative) }
    }

    pub fn derivative(&self, grid: &ChannelGrid) -> Vec<Complex64> {
        self.derivative.clone().unwrap_or_else(|| grid.differentiate(&self.values))
    }

    pub fn scaled(&self, s: f64) -> Self {
        GridFunction {
            values: self.values.iter().map(|v| v * s).collect(),
            derivative: self.derivative.as_ref().map(|d| d.iter().map(|v| v * s).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    Y1m,
    Z1mUpper,
    X1mUpper,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Witness {
    /// f' = g log(...) + h
    Z { g: GridFunction, h: GridFunction },
    /// f = sum_j g_j log(...)^j
    X { g: Vec<GridFunction> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightedNormValue {
    pub kind: NormKind,
    pub m: u32,
    pub value: f64,
    /// the sup-norm part ||f||_inf
    pub sup_part: f64,
    pub witness: Option<Witness>,
}

/// The profile, spectral point and grid on which norms are evaluated.
pub struct NormContext<'a> {
    pub profile: &'a ShearProfile,
    pub point: SpectralPoint,
    pub grid: &'a ChannelGrid,
    log: Vec<Complex64>,
}

impl<'a> NormContext<'a> {
    pub fn new(profile: &'a ShearProfile, point: SpectralPoint, grid: &'a ChannelGrid) -> Result<Self> {
        if point.is_boundary_value() {
            return Err(Error::InvalidArgument("weighted norms need eps != 0".into()));
        }
        let log = grid.nodes.iter().map(|&y| point.log_denominator(profile, y)).collect();
        Ok(NormContext { profile, point, grid, log })
    }

    /// log(b - b(y0) + i eps) at the nodes.
    pub fn log(&self) -> &[Complex64] {
        &self.log
    }

    fn weight(&self, j: usize, power: u32) -> Complex64 {
        (self.log[j] - 1.0 / self.profile.theta).powi(power as i32)
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.values.len() != self.grid.n_total() {
            return Err(Error::InvalidArgument(format!(
                "function has {} values, grid has {} nodes",
                f.values.len(),
                self.grid.n_total()
            )));
        }
        Ok(())
    }
}

/// ||f||_inf + || f' / (|k| (log(...) - 1/theta)^{1+m}) ||_inf over the nodes.
pub fn y_norm(f: &GridFunction, m: u32, ctx: &NormContext) -> Result<WeightedNormValue> {
    ctx.check(f)?;
    let k = ctx.point.k.unsigned_abs() as f64;
    let df = f.derivative(ctx.grid);
    let sup_part = sup_norm(&f.values);
    let dpart = df
        .iter()
        .enumerate()
        .map(|(j, d)| (d / (ctx.weight(j, 1 + m) * k)).norm())
        .fold(0.0, f64::max);
    Ok(WeightedNormValue { kind: NormKind::Y1m, m, value: sup_part + dpart, sup_part, witness: None })
}

/// Upper bound for the Z^{1,m} norm at the decomposition f' = g log(...) + h.
pub fn z_norm_upper(f: &GridFunction, m: u32, ctx: &NormContext, g: GridFunction, h: GridFunction) -> Result<WeightedNormValue> {
    ctx.check(f)?;
    ctx.check(&g)?;
    ctx.check(&h)?;
    let df = f.derivative(ctx.grid);
    let scale = sup_norm(&df).max(1.0);
    let mismatch = (0..df.len())
        .map(|j| (df[j] - g.values[j] * ctx.log[j] - h.values[j]).norm())
        .fold(0.0, f64::max)
        / scale;
    if mismatch > 1e-8 {
        return Err(Error::WitnessMismatch(mismatch));
    }
    let k = ctx.point.k.unsigned_abs() as f64;
    let sup_part = sup_norm(&f.values);
    let value = sup_part + (y_norm(&g, m, ctx)?.value + y_norm(&h, m + 1, ctx)?.value) / k;
    Ok(WeightedNormValue { kind: NormKind::Z1mUpper, m, value, sup_part, witness: Some(Witness::Z { g, h }) })
}

/// Upper bound for the X^{1,m} norm at the decomposition f = sum_j g_j log(...)^j.
pub fn x_norm_upper(f: &GridFunction, m: u32, ctx: &NormContext, g: Vec<GridFunction>) -> Result<WeightedNormValue> {
    ctx.check(f)?;
    if g.len() > m as usize + 1 {
        return Err(Error::InvalidArgument(format!("at most {} witness terms for m = {m}", m + 1)));
    }
    let scale = sup_norm(&f.values).max(1.0);
    let mismatch = (0..f.values.len())
        .map(|i| {
            let s: Complex64 = g.iter().enumerate().map(|(j, gj)| gj.values[i] * ctx.log[i].powi(j as i32)).sum();
            (f.values[i] - s).norm()
        })
        .fold(0.0, f64::max)
        / scale;
    if mismatch > 1e-8 {
        return Err(Error::WitnessMismatch(mismatch));
    }
    let mut value = 0.0;
    for (j, gj) in g.iter().enumerate() {
        value += y_norm(gj, m - j as u32 + 1, ctx)?.value;
    }
    let sup_part = sup_norm(&f.values);
    Ok(WeightedNormValue { kind: NormKind::X1mUpper, m, value, sup_part, witness: Some(Witness::X { g }) })
}

/// Product-integration rows of the four kernels at the grid nodes.
pub struct KernelRows {
    g: Vec<Vec<f64>>,
    dy: Vec<Vec<f64>>,
    dz: Vec<Vec<f64>>,
    prime: Vec<Vec<f64>>,
}

impl KernelRows {
    pub fn new(k: i64, grid: &ChannelGrid) -> Self {
        let kern = GreensKernel::new(k);
        KernelRows {
            g: kern.node_rows(grid, KernelKind::G),
            dy: kern.node_rows(grid, KernelKind::Dy),
            dz: kern.node_rows(grid, KernelKind::Dz),
            prime: kern.node_rows(grid, KernelKind::Prime),
        }
    }
}

fn apply(rows: &[Vec<f64>], v: &[Complex64]) -> Vec<Complex64> {
    rows.iter().map(|r| r.iter().zip(v).map(|(w, x)| x * w).sum()).collect()
}

fn add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// T f and its derivative from the integrated-by-parts forms, with the
/// constructive witness (g, h) of (T f)' = g log + h.
pub struct TApplication {
    pub tf: GridFunction,
    pub g: GridFunction,
    pub h: GridFunction,
}

/// f given with exact values and derivative at the nodes.
pub fn apply_t_witnessed(ctx: &NormContext, rows: &KernelRows, f: &[Complex64], df: &[Complex64]) -> TApplication {
    let p = ctx.profile;
    let nodes = &ctx.grid.nodes;
    let u: Vec<Complex64> = nodes.iter().zip(f).map(|(&y, v)| v / p.db(y)).collect();
    let du: Vec<Complex64> = nodes
        .iter()
        .zip(f.iter().zip(df))
        .map(|(&y, (v, d))| (d - v * p.d2b(y) / p.db(y)) / p.db(y))
        .collect();
    let ul: Vec<Complex64> = u.iter().zip(ctx.log()).map(|(a, l)| a * l).collect();
    let dul: Vec<Complex64> = du.iter().zip(ctx.log()).map(|(a, l)| a * l).collect();
    let tf: Vec<Complex64> = add(&apply(&rows.dz, &ul), &apply(&rows.g, &dul)).iter().map(|v| -v).collect();
    let h: Vec<Complex64> = add(&apply(&rows.prime, &ul), &apply(&rows.dy, &dul)).iter().map(|v| -v).collect();
    let g: Vec<Complex64> = u.iter().map(|v| -v).collect();
    let dg: Vec<Complex64> = du.iter().map(|v| -v).collect();
    let dtf: Vec<Complex64> = (0..tf.len()).map(|j| g[j] * ctx.log()[j] + h[j]).collect();
    TApplication {
        tf: GridFunction::with_derivative(tf, dtf),
        g: GridFunction::with_derivative(g, dg),
        h: GridFunction::new(h),
    }
}

/// A random smooth complex function sum_j c_j e^{i pi j y}, optionally times y(1-y).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothSample {
    pub coeffs: Vec<Complex64>,
    pub vanishing: bool,
}

impl SmoothSample {
    pub fn random<R: Rng>(rng: &mut R, terms: usize, vanishing: bool) -> Self {
        let coeffs = (0..terms)
            .map(|j| {
                let s = 1.0 / (1.0 + j as f64).powi(2);
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * s
            })
            .collect();
        SmoothSample { coeffs, vanishing }
    }

    fn base(&self, y: f64, order: u32) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let w = Complex64::new(0.0, std::f64::consts::PI * j as f64);
                c * w.powi(order as i32) * (w * y).exp()
            })
            .sum()
    }

    /// d^order/dy^order of the sample, order <= 3.
    pub fn eval(&self, y: f64, order: u32) -> Complex64 {
        if !self.vanishing {
            return self.base(y, order);
        }
        let p = [y - y * y, 1.0 - 2.0 * y, -2.0];
        let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
        (0..=order.min(2) as usize)
            .map(|i| self.base(y, order - i as u32) * p[i] * binom[order as usize][i])
            .sum()
    }

    pub fn sample(&self, grid: &ChannelGrid, order: u32) -> Vec<Complex64> {
        grid.nodes.iter().map(|&y| self.eval(y, order)).collect()
    }
}

/// The three operator bounds that are swept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaTag {
    /// ||T f||_{Z^{1,m}} <= C |k|^-1 log<k>^{m+2} ||f||_{Y^{1,m}}
    #[serde(rename = "bX1")]
    BX1,
    /// ||T f||_{Y^1} <= C |k|^-1 log<k>^4 ||f||_{X^2}
    #[serde(rename = "X11")]
    X11,
    /// ||T f - g log/|b'|^2 + B||_{Y^1} <= C |k|^-1 log<k>^4 ||f||_{X^3}
    #[serde(rename = "bX17")]
    BX17,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LemmaSweep {
    pub ks: Vec<i64>,
    pub eps: Vec<f64>,
    pub samples: usize,
    pub y0_per_k: usize,
    pub m: u32,
    pub n: usize,
    pub q: usize,
    pub seed: u64,
    /// samples vanish at y = 0 and y = 1
    pub vanishing: bool,
}

impl Default for LemmaSweep {
    fn default() -> Self {
        LemmaSweep {
            ks: (1..=32).collect(),
            eps: eps_schedule(0.2, 8),
            samples: 50,
            y0_per_k: 2,
            m: 1,
            n: 128,
            q: 8,
            seed: 7,
            vanishing: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub tag: LemmaTag,
    pub max_ratio: f64,
    pub by_k: Vec<(i64, f64)>,
    /// eps in the order of the schedule (decreasing)
    pub by_eps: Vec<(f64, f64)>,
    /// ratio grows at every step of the eps schedule without slowing down
    pub blow_up: bool,
    pub evaluations: usize,
}

/// Increasing at every step with the last step factor at least the first one.
pub fn growth_without_saturation(series: &[(f64, f64)]) -> bool {
    if series.len() < 3 {
        return series.len() == 2 && series[1].1 > 1.5 * series[0].1;
    }
    let factors: Vec<f64> = series.windows(2).map(|w| w[1].1 / w[0].1).collect();
    factors.iter().all(|&f| f > 1.0) && factors[factors.len() - 1] >= factors[0]
}

fn log_bracket(k: i64) -> f64 {
    (1.0 + (k as f64).powi(2)).sqrt().ln()
}

/// ||g||_{Z^1} upper bound at the smooth witness (0, g').
fn z_norm_smooth(ctx: &NormContext, s: &SmoothSample) -> Result<f64> {
    let g = GridFunction::with_derivative(s.sample(ctx.grid, 0), s.sample(ctx.grid, 1));
    let n = ctx.grid.n_total();
    let h = GridFunction::with_derivative(s.sample(ctx.grid, 1), s.sample(ctx.grid, 2));
    Ok(z_norm_upper(&g, 1, ctx, GridFunction::with_derivative(vec![ZERO; n], vec![ZERO; n]), h)?.value)
}

/// Bound ratio for one sample; a vanishing numerator gives 0.
pub fn sample_ratio(tag: LemmaTag, ctx: &NormContext, rows: &KernelRows, s: &SmoothSample, m: u32) -> Result<f64> {
    let r = ratio_raw(tag, ctx, rows, s, m)?;
    Ok(if r.is_nan() { 0.0 } else { r })
}

fn ratio_raw(tag: LemmaTag, ctx: &NormContext, rows: &KernelRows, s: &SmoothSample, m: u32) -> Result<f64> {
    let k = ctx.point.k;
    let ka = k.unsigned_abs() as f64;
    let p = ctx.profile;
    let nodes = &ctx.grid.nodes;
    let log = ctx.log();
    let lk = log_bracket(k);
    match tag {
        LemmaTag::BX1 => {
            let (f, df) = (s.sample(ctx.grid, 0), s.sample(ctx.grid, 1));
            let fy = y_norm(&GridFunction::with_derivative(f.clone(), df.clone()), m, ctx)?.value;
            let t = apply_t_witnessed(ctx, rows, &f, &df);
            let z = z_norm_upper(&t.tf, m, ctx, t.g, t.h)?.value;
            Ok(z / (lk.powi(m as i32 + 2) / ka * fy))
        }
        LemmaTag::X11 => {
            // f = g (log - 1/theta), T f and (T f)' from the squared-log forms
            let vt = 1.0 / p.theta;
            let sq: Vec<Complex64> = log.iter().map(|l| (l - vt).powi(2)).collect();
            let g = s.sample(ctx.grid, 0);
            let dg = s.sample(ctx.grid, 1);
            let u: Vec<Complex64> = nodes.iter().zip(&g).map(|(&y, v)| v / (2.0 * p.db(y))).collect();
            let du: Vec<Complex64> = nodes
                .iter()
                .zip(g.iter().zip(&dg))
                .map(|(&y, (v, d))| (d - v * p.d2b(y) / p.db(y)) / (2.0 * p.db(y)))
                .collect();
            let us: Vec<Complex64> = u.iter().zip(&sq).map(|(a, b)| a * b).collect();
            let dus: Vec<Complex64> = du.iter().zip(&sq).map(|(a, b)| a * b).collect();
            let tf: Vec<Complex64> = add(&apply(&rows.dz, &us), &apply(&rows.g, &dus)).iter().map(|v| -v).collect();
            let rest = add(&apply(&rows.prime, &us), &apply(&rows.dy, &dus));
            let dtf: Vec<Complex64> = (0..tf.len()).map(|j| -us[j] - rest[j]).collect();
            let num = y_norm(&GridFunction::with_derivative(tf, dtf), 1, ctx)?.value;
            Ok(num / (lk.powi(4) / ka * z_norm_smooth(ctx, s)?))
        }
        LemmaTag::BX17 => {
            let (g, dg, d2g) = (s.sample(ctx.grid, 0), s.sample(ctx.grid, 1), s.sample(ctx.grid, 2));
            let (r, dr) = bx17_remainder(ctx, rows, &g, &dg, &d2g);
            let num = y_norm(&GridFunction::with_derivative(r, dr), 1, ctx)?.value;
            let x3 = ka * z_norm_smooth(ctx, s)?;
            Ok(num / (lk.powi(4) / ka * x3))
        }
    }
}

/// Remainder R = T g - g log/b'^2 + B and R' at the nodes, from
/// R = -int [k^2 G a0 + d_zG a1 + G a2] log with g given to second order.
pub fn bx17_remainder(
    ctx: &NormContext,
    rows: &KernelRows,
    g: &[Complex64],
    dg: &[Complex64],
    d2g: &[Complex64],
) -> (Vec<Complex64>, Vec<Complex64>) {
    let p = ctx.profile;
    let ka = ctx.point.k.unsigned_abs() as f64;
    let log = ctx.log();
    let n = g.len();
    let (mut a0, mut a1, mut a2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (j, &y) in ctx.grid.nodes.iter().enumerate() {
        let (b1, b2, b3) = (p.db(y), p.d2b(y), p.d3b(y));
        a0.push(g[j] / (b1 * b1) * (ka * ka) * log[j]);
        a1.push((dg[j] * 2.0 / (b1 * b1) - g[j] * 3.0 * b2 / b1.powi(3)) * log[j]);
        a2.push(
            (d2g[j] / (b1 * b1) - dg[j] * 3.0 * b2 / b1.powi(3) - g[j] * b3 / b1.powi(3)
                + g[j] * 3.0 * b2 * b2 / b1.powi(4))
                * log[j],
        );
    }
    let r: Vec<Complex64> =
        add(&add(&apply(&rows.g, &a0), &apply(&rows.dz, &a1)), &apply(&rows.g, &a2)).iter().map(|v| -v).collect();
    let dr_int = add(&add(&apply(&rows.dy, &a0), &apply(&rows.prime, &a1)), &apply(&rows.dy, &a2));
    let dr = (0..n).map(|j| -dr_int[j] - a1[j]).collect();
    (r, dr)
}

/// The boundary term B of the bX17 decomposition at y.
pub fn boundary_term(profile: &ShearProfile, point: &SpectralPoint, g0: Complex64, g1: Complex64, y: f64) -> Complex64 {
    let ka = point.k.unsigned_abs() as f64;
    let (d0, d1) = (profile.db(0.0), profile.db(1.0));
    g1 * sinh_ratio(ka, y) / (d1 * d1) * point.log_denominator(profile, 1.0)
        + g0 * sinh_ratio(ka, 1.0 - y) / (d0 * d0) * point.log_denominator(profile, 0.0)
}

/// Empirical max of the bound ratio over random samples and the (k, y0, eps) sweep.
pub fn lemma_ratio(profile: &ShearProfile, tag: LemmaTag, sweep: &LemmaSweep) -> Result<RatioReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(sweep.seed);
    let samples: Vec<SmoothSample> = (0..sweep.samples).map(|_| SmoothSample::random(&mut rng, 6, sweep.vanishing)).collect();
    let mut cases = Vec::new();
    for &k in &sweep.ks {
        for j in 0..sweep.y0_per_k {
            let y0: f64 = rng.gen_range(0.0..1.0);
            let iota = if j % 2 == 0 { Iota::Plus } else { Iota::Minus };
            for (ei, &e) in sweep.eps.iter().enumerate() {
                cases.push((k, y0, iota, ei, e));
            }
        }
    }
    let results = cases
        .par_iter()
        .map(|&(k, y0, iota, ei, e)| -> Result<(i64, usize, f64)> {
            let point = SpectralPoint::new(k, y0, e, iota)?;
            // panels away from y0 stay below about 2/|k| wide
            let n = sweep.n.max(sweep.q * (k.unsigned_abs() as usize / 2 + 16));
            let grid = ChannelGrid::graded(n, sweep.q, y0, e / 10.0);
            let ctx = NormContext::new(profile, point, &grid)?;
            let rows = KernelRows::new(k, &grid);
            let mut worst: f64 = 0.0;
            for s in &samples {
                worst = worst.max(sample_ratio(tag, &ctx, &rows, s, sweep.m)?);
            }
            Ok((k, ei, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_k: Vec<(i64, f64)> = sweep.ks.iter().map(|&k| (k, 0.0)).collect();
    let mut by_eps: Vec<(f64, f64)> = sweep.eps.iter().map(|&e| (e, 0.0)).collect();
    for &(k, ei, r) in &results {
        if let Some(entry) = by_k.iter_mut().find(|e| e.0 == k) {
            entry.1 = entry.1.max(r);
        }
        by_eps[ei].1 = by_eps[ei].1.max(r);
    }
    let max_ratio = by_eps.iter().map(|e| e.1).fold(0.0, f64::max);
    let blow_up = growth_without_saturation(&by_eps);
    Ok(RatioReport { tag, max_ratio, by_k, by_eps, blow_up, evaluations: results.len() * samples.len() })
}
