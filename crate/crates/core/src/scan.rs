//! Smallest-singular-value scans of the discretized I - S over complex phase
//! speeds: detection of discrete eigenvalues and the limiting-absorption constant.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ChannelGrid;
use crate::profiles::ShearProfile;
use crate::resolvent::{eps_schedule, Resolvent, SpectralPoint, TForm};

pub const FLAG_THRESHOLD: f64 = 1e-6;
/// at most this many local minima are refined per report
const MAX_REFINED: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// resolvent nodes per phase speed
    pub n: usize,
    pub q: usize,
    /// [re_lo, re_hi, im_lo, im_hi]
    pub c_rect: Option<[f64; 4]>,
    pub re_points: usize,
    pub im_points: usize,
    /// approach rows c = b(y0) + i eps for delta_hat (eps > 0; the sup-norm
    /// measure degenerates on the axis itself)
    pub eps0: f64,
    pub levels: usize,
    pub y0_samples: usize,
    pub h_min: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            n: 192,
            q: 8,
            c_rect: None,
            re_points: 32,
            im_points: 16,
            eps0: 0.02,
            levels: 4,
            y0_samples: 33,
            h_min: 1e-6,
        }
    }
}

impl ScanOptions {
    /// The scanned rectangle: [b(0), b(1)] widened by 10%, and Im c up to 0.55 of the
    /// range, which contains the semicircle holding every unstable eigenvalue.
    pub fn rect(&self, profile: &ShearProfile) -> [f64; 4] {
        self.c_rect.unwrap_or_else(|| {
            let (lo, hi) = profile.range();
            let w = hi - lo;
            [lo - 0.1 * w, hi + 0.1 * w, -0.55 * w, 0.55 * w]
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Flag {
    pub c: Complex64,
    pub sigma_min: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub k: i64,
    pub n: usize,
    pub c_re: Vec<f64>,
    pub c_im: Vec<f64>,
    /// [im index][re index]
    pub sigma_min: Vec<Vec<f64>>,
    pub delta_hat: f64,
    /// min over y0 of sigma_min(b(y0) + i eps) for each eps of the schedule
    pub delta_by_eps: Vec<(f64, f64)>,
    pub flags: Vec<Flag>,
}

/// sigma_min of the discretized I - S at phase speed c.
pub fn sigma_at(profile: &ShearProfile, k: i64, c: Complex64, n: usize, q: usize, h_min: f64) -> Result<f64> {
    if profile.is_couette_like() {
        return Ok(1.0);
    }
    let point = SpectralPoint::phase_speed(profile, k, c)?;
    let outside = (-point.y0).max(point.y0 - 1.0).max(0.0);
    let floor = if point.is_boundary_value() && outside == 0.0 {
        h_min
    } else {
        (outside.max(point.eps) / 10.0).clamp(h_min, 1.0 / n as f64)
    };
    let grid = ChannelGrid::graded(n, q, point.y0.clamp(0.0, 1.0), floor);
    let form = if point.is_boundary_value() { TForm::Log } else { TForm::Direct };
    Resolvent::with_form(profile, &grid, point, form)?.sigma_min()
}

fn nelder_mead<F: Fn(f64, f64) -> f64>(f: F, start: (f64, f64), step: (f64, f64), iters: usize) -> ((f64, f64), f64) {
    let mut s = [
        (start, f(start.0, start.1)),
        ((start.0 + step.0, start.1), f(start.0 + step.0, start.1)),
        ((start.0, start.1 + step.1), f(start.0, start.1 + step.1)),
    ];
    for _ in 0..iters {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if s[0].1 < 1e-14 {
            break;
        }
        let c = ((s[0].0 .0 + s[1].0 .0) / 2.0, (s[0].0 .1 + s[1].0 .1) / 2.0);
        let w = s[2].0;
        let at = |t: f64| (c.0 + t * (w.0 - c.0), c.1 + t * (w.1 - c.1));
        let r = at(-1.0);
        let fr = f(r.0, r.1);
        if fr < s[0].1 {
            let e = at(-2.0);
            let fe = f(e.0, e.1);
            s[2] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < s[1].1 {
            s[2] = (r, fr);
        } else {
            let ct = at(0.5);
            let fc = f(ct.0, ct.1);
            if fc < s[2].1 {
                s[2] = (ct, fc);
            } else {
                let b = s[0].0;
                for v in s.iter_mut().skip(1) {
                    let p = ((b.0 + v.0 .0) / 2.0, (b.1 + v.0 .1) / 2.0);
                    *v = (p, f(p.0, p.1));
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    s[0]
}

/// Dense sigma_min field, delta_hat and refined flags.
pub fn scan(profile: &ShearProfile, k: i64, opts: &ScanOptions) -> Result<SpectrumReport> {
    if opts.re_points < 32 || opts.im_points < 16 {
        return Err(Error::InvalidArgument("resolution must be at least 32x16".into()));
    }
    let rect = opts.rect(profile);
    let (lo, hi) = profile.range();
    if rect[0] >= lo || rect[1] <= hi || rect[2] >= 0.0 || rect[3] <= 0.0 {
        return Err(Error::InvalidArgument("c_rect must contain [b(0), b(1)] with margin".into()));
    }
    let lin = |a: f64, b: f64, m: usize, j: usize| a + (b - a) * (j as f64 + 0.5) / m as f64;
    let c_re: Vec<f64> = (0..opts.re_points).map(|j| lin(rect[0], rect[1], opts.re_points, j)).collect();
    let c_im: Vec<f64> = (0..opts.im_points).map(|j| lin(rect[2], rect[3], opts.im_points, j)).collect();
    let sig = |c: Complex64| sigma_at(profile, k, c, opts.n, opts.q, opts.h_min);
    let cells: Vec<(usize, usize)> = (0..c_im.len()).flat_map(|i| (0..c_re.len()).map(move |j| (i, j))).collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| sig(Complex64::new(c_re[j], c_im[i])))
        .collect::<Result<Vec<f64>>>()?;
    let sigma_min: Vec<Vec<f64>> = values.chunks(c_re.len()).map(|r| r.to_vec()).collect();

    // approach rows and the real axis
    let eps = eps_schedule(opts.eps0, opts.levels);
    let y0s: Vec<f64> = (0..opts.y0_samples).map(|j| j as f64 / (opts.y0_samples - 1) as f64).collect();
    let row_min = |e: f64| -> Result<f64> {
        let v = y0s
            .par_iter()
            .map(|&y0| sig(Complex64::new(profile.b(y0), e)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(v.into_iter().fold(f64::INFINITY, f64::min))
    };
    let delta_by_eps = eps.iter().map(|&e| Ok((e, row_min(e)?))).collect::<Result<Vec<_>>>()?;
    let delta_hat = delta_by_eps.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);

    // local minima of the field, refined
    let (dre, dim) = (c_re[1] - c_re[0], c_im[1] - c_im[0]);
    let mut sorted: Vec<f64> = sigma_min.iter().flatten().cloned().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let median = sorted[sorted.len() / 2];
    let mut candidates = Vec::new();
    for i in 0..c_im.len() {
        for j in 0..c_re.len() {
            let v = sigma_min[i][j];
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) != (0, 0) && a >= 0 && b >= 0 && (a as usize) < c_im.len() && (b as usize) < c_re.len() {
                        is_min &= v <= sigma_min[a as usize][b as usize];
                    }
                }
            }
            if is_min && v < 0.5 * median {
                candidates.push((v, Complex64::new(c_re[j], c_im[i])));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    candidates.truncate(MAX_REFINED);
    // the search stays in the open half plane it starts in
    let im_floor = 1e-3 * (hi - lo);
    let mut flags: Vec<Flag> = Vec::new();
    for (_, c) in candidates {
        let side = c.im.signum();
        let f = |x: f64, y: f64| {
            if y * side < im_floor {
                return f64::INFINITY;
            }
            sig(Complex64::new(x, y)).unwrap_or(f64::INFINITY)
        };
        let ((x, y), v) = nelder_mead(f, (c.re, c.im), (0.25 * dre, 0.25 * dim), 200);
        if v < FLAG_THRESHOLD {
            let c = Complex64::new(x, y);
            if !flags.iter().any(|g| (g.c - c).norm() < 1e-6) {
                flags.push(Flag { c, sigma_min: v });
            }
        }
    }
    Ok(SpectrumReport { k, n: opts.n, c_re, c_im, sigma_min, delta_hat, delta_by_eps, flags })
}

/// Proof that a profile's spectrum was checked at two resolutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub k: i64,
    pub resolutions: (usize, usize),
    pub delta_hat: (f64, f64),
}

/// Grants a token iff neither report has flags and delta_hat agrees within 20%.
pub fn certify(coarse: &SpectrumReport, fine: &SpectrumReport) -> Result<Certification> {
    if coarse.k != fine.k || coarse.n == fine.n {
        return Err(Error::InvalidArgument("certify needs two resolutions of the same k".into()));
    }
    let flagged: Vec<String> = coarse.flags.iter().chain(&fine.flags).map(|f| format!("{:.6}", f.c)).collect();
    if !flagged.is_empty() {
        return Err(Error::Rejected(format!("k = {}: discrete eigenvalues near {}", coarse.k, flagged.join(", "))));
    }
    let (a, b) = (coarse.delta_hat, fine.delta_hat);
    if (a - b).abs() > 0.2 * a.max(b) {
        return Err(Error::Rejected(format!("k = {}: delta_hat {a:.4} vs {b:.4} disagree", coarse.k)));
    }
    Ok(Certification { k: coarse.k, resolutions: (coarse.n, fine.n), delta_hat: (a, b) })
}

impl SpectrumReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Heatmap of log10 sigma_min with flags marked.
    pub fn to_svg(&self) -> String {
        let (cw, ch) = (12.0, 12.0);
        let (w, h) = (self.c_re.len() as f64 * cw, self.c_im.len() as f64 * ch);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}">"#, w + 20.0, h + 40.0);
        let _ = writeln!(s, r#"<text x="10" y="16" font-size="12">k = {}: log10 sigma_min</text>"#, self.k);
        let logs: Vec<f64> = self.sigma_min.iter().flatten().map(|v| v.max(1e-16).log10()).collect();
        let (lmin, lmax) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
        let span = (lmax - lmin).max(1e-12);
        let ni = self.c_im.len();
        for (i, row) in self.sigma_min.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let g = ((v.max(1e-16).log10() - lmin) / span * 255.0).round() as u8;
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="{cw}" height="{ch}" fill="rgb({g},{g},255)"/>"#,
                    10.0 + j as f64 * cw,
                    24.0 + (ni - 1 - i) as f64 * ch
                );
            }
        }
        let (re0, re1) = (self.c_re[0], self.c_re[self.c_re.len() - 1]);
        let (im0, im1) = (self.c_im[0], self.c_im[ni - 1]);
        for f in &self.flags {
            let x = 10.0 + (f.c.re - re0) / (re1 - re0) * (w - cw) + cw / 2.0;
            let y = 24.0 + (im1 - f.c.im) / (im1 - im0) * (h - ch) + ch / 2.0;
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="red" stroke-width="2"/>"#);
        }
        s.push_str("</svg>\n");
        s
    }
}
