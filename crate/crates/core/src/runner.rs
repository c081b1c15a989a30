//! Run configurations, task orchestration, artifacts and their manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{
    compute_phis, fit_decay, fit_power_law, residuals, scattering_profile, AsymptoticProfile, DecayFit,
    DecayQuantity, MainTermConvention, PhiOptions, ResidualField, ScatterState,
};
use crate::direct::{dt_max, evolve_direct_with, sheared, trajectory_difference, transfer, DEFAULT_DT, DEFAULT_N};
use crate::error::{Error, Result};
use crate::evolution::{build_density, evolve_spectral, DensityLimit, DensityOptions, ModeTrajectory};
use crate::mode::ModeFunction;
use crate::norms::{lemma_ratio, LemmaSweep, LemmaTag, RatioReport};
use crate::plots::{loglog_svg, Series};
use crate::profiles::{make_profile, FourierConvention, ProfileSpec, ShearProfile};
use crate::scan::{certify, scan, Certification, ScanOptions, SpectrumReport};

pub const SPEC_VERSION: &str = "1";
pub const CROSS_TOLERANCE: f64 = 1e-3;
pub const PSI_SLOPE: [f64; 2] = [-2.15, -1.85];
pub const DY_PSI_SLOPE: [f64; 2] = [-1.15, -0.85];
pub const REALITY_TOLERANCE: f64 = 1e-10;

/// Tasks in dependency order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Scan,
    EvolveSpectral,
    EvolveDirect,
    Asymptotics,
    Norms,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Scan => "scan",
            Task::EvolveSpectral => "evolve-spectral",
            Task::EvolveDirect => "evolve-direct",
            Task::Asymptotics => "asymptotics",
            Task::Norms => "norms",
        }
    }
}

/// Real initial vorticity profile, used for every mode of the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Omega0Form {
    /// sin(pi y) y (1 - y)
    SineBubble,
    /// sin(n pi y)
    Sine { n: u32 },
    /// sum_j coeffs[j] y^j
    Polynomial { coeffs: Vec<f64> },
    /// natural cubic spline through the samples
    Tabulated { y: Vec<f64>, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Omega0Spec {
    #[serde(flatten)]
    pub form: Omega0Form,
    /// declares omega0(0) = omega0(1) = 0, checked at validation
    #[serde(default)]
    pub boundary_vanishing: bool,
}

impl Omega0Spec {
    pub fn mode(&self) -> Result<ModeFunction> {
        let label = serde_json::to_string(&self.form)?;
        Ok(match &self.form {
            Omega0Form::SineBubble => ModeFunction::real(label, |y| (PI * y).sin() * y * (1.0 - y)),
            Omega0Form::Sine { n } => {
                let w = *n as f64 * PI;
                ModeFunction::real(label, move |y| (w * y).sin())
            }
            Omega0Form::Polynomial { coeffs } => {
                let c = coeffs.clone();
                ModeFunction::real(label, move |y| c.iter().rev().fold(0.0, |acc, a| acc * y + a))
            }
            Omega0Form::Tabulated { y, values } => {
                let s = CubicSpline::natural(y, values)?;
                ModeFunction::real(label, move |v| s.eval(v))
            }
        })
    }
}

struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    fn natural(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::ConfigInvalid("tabulated omega0 needs at least two (y, value) pairs".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) || x[0] > 0.0 || x[n - 1] < 1.0 {
            return Err(Error::ConfigInvalid("tabulated omega0 must have increasing y covering [0, 1]".into()));
        }
        // second derivatives from the tridiagonal system, natural ends
        let mut m = vec![0.0; n];
        if n > 2 {
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0 - a * c[i - 1];
                c[i] = h1 / 6.0 / b;
                d[i] = ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0 - a * d[i - 1]) / b;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Ok(CubicSpline { x: x.to_vec(), y: y.to_vec(), m })
    }

    fn eval(&self, v: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|a| a.partial_cmp(&v).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let (a, b) = ((self.x[i + 1] - v) / h, (v - self.x[i]) / h);
        a * self.y[i] + b * self.y[i + 1] + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_total: usize,
    pub panel_order: usize,
    pub h_min: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_total: 256, panel_order: 8, h_min: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsConfig {
    pub eps0: f64,
    pub levels: usize,
}

impl Default for EpsConfig {
    fn default() -> Self {
        EpsConfig { eps0: 0.02, levels: 4 }
    }
}

/// Sample times: an explicit list or `count` equispaced points on [start, stop].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSamples {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl TimeSamples {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeSamples::List(v) => v.clone(),
            TimeSamples::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*count).map(|i| start + (stop - start) * i as f64 / (*count - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// uniform base panels of the spectral y0 quadrature (output y = breakpoints)
    pub density_panels: usize,
    pub density_limit: DensityLimit,
    pub direct_n: usize,
    pub direct_dt: f64,
    /// direct trajectories are written at every `output_stride`-th grid point
    pub output_stride: usize,
    pub x_resolution: usize,
    pub decay_window: [f64; 2],
    /// spectral and direct trajectories are compared for t up to this time
    pub cross_check_until: f64,
    pub scan_re_points: usize,
    pub scan_im_points: usize,
    pub lemma: LemmaSweep,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            density_panels: 16,
            density_limit: DensityLimit::BoundaryValue,
            direct_n: DEFAULT_N,
            direct_dt: DEFAULT_DT,
            output_stride: 16,
            x_resolution: 32,
            decay_window: [20.0, 200.0],
            cross_check_until: 50.0,
            scan_re_points: 32,
            scan_im_points: 16,
            lemma: LemmaSweep::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec_version: String,
    pub profile: ProfileSpec,
    pub k_set: Vec<i64>,
    pub omega0: Omega0Spec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub eps_schedule: EpsConfig,
    pub t_samples: TimeSamples,
    pub outputs: PathBuf,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub options: RunOptions,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(invalid(format!("spec_version {:?}, expected {SPEC_VERSION:?}", self.spec_version)));
        }
        if self.k_set.is_empty() {
            return Err(invalid("k_set is empty"));
        }
        if self.k_set.contains(&0) {
            return Err(invalid("k_set contains 0"));
        }
        if self.k_set.iter().collect::<BTreeSet<_>>().len() != self.k_set.len() {
            return Err(invalid("k_set has repeated entries"));
        }
        let times = self.t_samples.times();
        if times.is_empty() {
            return Err(invalid("t_samples is empty"));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("t_samples must be finite, non-negative and strictly increasing"));
        }
        let e = &self.eps_schedule;
        if !(e.eps0 > 0.0 && e.eps0 <= 0.25) || e.levels == 0 {
            return Err(invalid("eps_schedule needs 0 < eps0 <= 0.25 and levels >= 1"));
        }
        let g = &self.grid;
        if !(2..=16).contains(&g.panel_order) || g.n_total < 2 * g.panel_order || !(g.h_min > 0.0) {
            return Err(invalid("grid needs 2 <= panel_order <= 16, n_total >= 2 panel_order, h_min > 0"));
        }
        if self.tasks.is_empty() {
            return Err(invalid("no tasks"));
        }
        let o = &self.options;
        if o.density_panels == 0 || o.direct_n < 8 || !(o.direct_dt > 0.0) || o.x_resolution == 0 {
            return Err(invalid("options out of range"));
        }
        make_profile(&self.profile).map_err(|e| invalid(format!("profile: {e}")))?;
        let omega = self.omega0.mode()?;
        if self.omega0.boundary_vanishing && !omega.vanishes_at_boundary() {
            return Err(invalid("omega0 is declared boundary_vanishing but does not vanish at y = 0, 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskOutcome {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskStatus {
    pub task: Task,
    pub outcome: TaskOutcome,
    pub messages: Vec<String>,
    /// wall-clock seconds, kept out of the JSON so reports are reproducible
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub spec_version: String,
    pub profile: String,
    pub k_set: Vec<i64>,
    pub tasks: Vec<TaskStatus>,
    pub checks: Vec<Check>,
    /// every file written before report.json
    pub manifest: Vec<ManifestEntry>,
}

impl RunReport {
    pub fn numerical_failure(&self) -> bool {
        self.tasks.iter().any(|t| t.outcome == TaskOutcome::Failed)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 success, 3 a failed check, 4 a task that failed numerically.
    pub fn exit_code(&self) -> i32 {
        if self.numerical_failure() {
            4
        } else if !self.all_checks_pass() {
            3
        } else {
            0
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "profile {} k_set {:?}", self.profile, self.k_set);
        for t in &self.tasks {
            let _ = writeln!(s, "task {:<16} {:?}", t.task.name(), t.outcome);
            for m in &t.messages {
                let _ = writeln!(s, "    {m}");
            }
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {:<28} {:>12.4e}  ({}){}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold,
                if c.detail.is_empty() { String::new() } else { format!("  {}", c.detail) }
            );
        }
        s
    }
}

/// Exit status for an error that aborted a command.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_) | Error::Io(_) | Error::Json(_) | Error::InvalidArgument(_) => 2,
        _ => 4,
    }
}

/// Bounds the global worker pool by ARTIFACT_THREADS when set.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ARTIFACT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| invalid(format!("ARTIFACT_THREADS={v:?} is not a count")))?;
        if n == 0 {
            return Err(invalid("ARTIFACT_THREADS must be positive"));
        }
        // a pool that already exists (repeated calls in one process) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Single writer for the output directory; records every file it writes.
struct Artifacts {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Artifacts {
    fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        // files of an earlier run in the same directory
        let old = dir.join("manifest.json");
        if let Ok(text) = fs::read_to_string(&old) {
            if let Ok(entries) = serde_json::from_str::<Vec<ManifestEntry>>(&text) {
                for e in entries {
                    if !e.path.contains("..") && !e.path.starts_with('/') {
                        let _ = fs::remove_file(dir.join(&e.path));
                    }
                }
            }
            fs::remove_file(&old)?;
        }
        Ok(Artifacts { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), data)?;
        self.entries.push(ManifestEntry { path: name.to_string(), bytes: data.len() as u64, sha256: sha256_hex(data) });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

/// Real physical fields on a uniform x grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhysicalField {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// phi(t, x, y) = c0 sum_k e^{ik(b(y)t + x)} psi_k(t, y), indexed [t][x][y]
    pub phi: Vec<Vec<Vec<f64>>>,
    /// sheared vorticity f(t, x, y) = c0 sum_k e^{ik(b(y)t + x)} omega_k(t, y)
    pub f: Vec<Vec<Vec<f64>>>,
    /// largest discarded imaginary part of either field
    pub max_imag: f64,
}

impl PhysicalField {
    pub fn sup_phi(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))).collect()
    }

    pub fn sup_f(&self) -> Vec<f64> {
        self.f.iter().map(|p| p.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))).collect()
    }
}

/// Adds the conjugate trajectory of -k for every k whose partner is missing.
pub fn complete_real_pairs(trajs: &[ModeTrajectory]) -> Vec<ModeTrajectory> {
    let ks: BTreeSet<i64> = trajs.iter().map(|t| t.k).collect();
    let mut out = trajs.to_vec();
    for t in trajs {
        if !ks.contains(&-t.k) {
            out.push(t.conjugate());
        }
    }
    out.sort_by_key(|t| t.k);
    out
}

pub fn assemble_physical(
    profile: &ShearProfile,
    trajs: &[ModeTrajectory],
    x_resolution: usize,
    conv: &FourierConvention,
) -> Result<PhysicalField> {
    let first = trajs.first().ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
    if trajs.iter().any(|t| t.times != first.times || t.y != first.y) {
        return Err(Error::InvalidArgument("trajectories must share sample times and y points".into()));
    }
    let x: Vec<f64> = (0..x_resolution).map(|j| 2.0 * PI * j as f64 / x_resolution as f64).collect();
    let y = first.y.clone();
    let b: Vec<f64> = y.iter().map(|&v| profile.b(v)).collect();
    let mut max_imag: f64 = 0.0;
    let (mut phi, mut f) = (Vec::new(), Vec::new());
    for (i, &t) in first.times.iter().enumerate() {
        let mut phi_t = vec![vec![0.0; y.len()]; x.len()];
        let mut f_t = vec![vec![0.0; y.len()]; x.len()];
        for (xi, &xv) in x.iter().enumerate() {
            for j in 0..y.len() {
                let (mut sp, mut sf) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                for tr in trajs {
                    let e = Complex64::cis(tr.k as f64 * (b[j] * t + xv));
                    sp += e * tr.psi_t[i][j];
                    sf += e * tr.omega_t[i][j];
                }
                let (sp, sf) = (sp * conv.c0, sf * conv.c0);
                max_imag = max_imag.max(sp.im.abs()).max(sf.im.abs());
                phi_t[xi][j] = sp.re;
                f_t[xi][j] = sf.re;
            }
        }
        phi.push(phi_t);
        f.push(f_t);
    }
    Ok(PhysicalField { times: first.times.clone(), x, y, phi, f, max_imag })
}

#[derive(Serialize)]
struct ScanArtifact<'a> {
    coarse: &'a SpectrumReport,
    fine: &'a SpectrumReport,
    certification: Option<Certification>,
    rejection: Option<String>,
}

#[derive(Serialize)]
struct AsymptoticsArtifact<'a> {
    profile: &'a AsymptoticProfile,
    trajectory: &'static str,
    fits: Vec<DecayFit>,
    fit_errors: Vec<String>,
    /// (t, sup |computed - main|, relative) for each residual field
    residuals: BTreeMap<&'static str, Vec<(f64, f64, f64)>>,
    scattering: Option<ScatterState>,
    scattering_error_at_end: Option<f64>,
}

/// Per-k state shared between tasks.
#[derive(Default)]
struct State {
    rejected: BTreeSet<i64>,
    spectral: BTreeMap<i64, ModeTrajectory>,
    direct: BTreeMap<i64, ModeTrajectory>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    profile: ShearProfile,
    omega0: ModeFunction,
    times: Vec<f64>,
    out: Artifacts,
    checks: Vec<Check>,
    state: State,
}

fn window_count(times: &[f64], w: [f64; 2]) -> usize {
    times.iter().filter(|&&t| t >= w[0] && t <= w[1]).count()
}

fn slope_check(name: String, fit: Result<DecayFit>, band: [f64; 2]) -> (Check, Option<DecayFit>) {
    match fit {
        Ok(f) => (
            Check {
                name,
                passed: f.slope >= band[0] && f.slope <= band[1] && f.r2 >= 0.95,
                value: f.slope,
                threshold: format!("slope in [{}, {}], r2 >= 0.95", band[0], band[1]),
                detail: format!("r2 = {:.4}", f.r2),
            },
            Some(f),
        ),
        Err(e) => (
            Check { name, passed: false, value: f64::NAN, threshold: format!("slope in [{}, {}]", band[0], band[1]), detail: e.to_string() },
            None,
        ),
    }
}

impl Ctx<'_> {
    fn scan(&mut self, k: i64) -> Result<String> {
        let g = &self.cfg.grid;
        let opts = ScanOptions {
            n: g.n_total,
            q: g.panel_order,
            eps0: self.cfg.eps_schedule.eps0,
            levels: self.cfg.eps_schedule.levels,
            h_min: g.h_min,
            re_points: self.cfg.options.scan_re_points,
            im_points: self.cfg.options.scan_im_points,
            ..Default::default()
        };
        let coarse = scan(&self.profile, k, &opts)?;
        let fine = scan(&self.profile, k, &ScanOptions { n: 2 * g.n_total, ..opts })?;
        let cert = certify(&coarse, &fine);
        let (certification, rejection) = match cert {
            Ok(c) => (Some(c), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let passed = certification.is_some();
        if !passed {
            self.state.rejected.insert(k);
        }
        self.checks.push(Check {
            name: format!("scan.certified.k{k}"),
            passed,
            value: fine.delta_hat,
            threshold: "no eigenvalue flags, delta_hat(n) ~ delta_hat(2n) within 20%".into(),
            detail: rejection.clone().unwrap_or_default(),
        });
        self.out.write_json(&format!("scan_k{k}.json"), &ScanArtifact { coarse: &coarse, fine: &fine, certification, rejection })?;
        self.out.write(&format!("scan_k{k}.svg"), fine.to_svg().as_bytes())?;
        Ok(format!("k={k}: delta_hat {:.4} (n={}) {:.4} (n={}), {} flags", coarse.delta_hat, coarse.n, fine.delta_hat, fine.n, fine.flags.len()))
    }

    fn evolve_spectral(&mut self, k: i64) -> Result<String> {
        if self.state.rejected.contains(&k) {
            return Ok(format!("k={k}: skipped, spectrum not certified"));
        }
        let g = &self.cfg.grid;
        let o = &self.cfg.options;
        let opts = DensityOptions {
            base_panels: o.density_panels,
            q: g.panel_order,
            resolvent_n: g.n_total,
            h_min: g.h_min,
            limit: o.density_limit.clone(),
            ..Default::default()
        };
        let density = build_density(&self.profile, k, &self.omega0, &opts)?;
        let worst = density.eps_report.iter().map(|r| r.cond).fold(0.0, f64::max);
        let traj = evolve_spectral(&density, &self.times);
        self.out.write(&format!("traj_spectral_k{k}.csv"), traj.to_csv().as_bytes())?;
        self.state.spectral.insert(k, traj);
        Ok(format!("k={k}: {} y0 nodes, worst condition estimate {worst:.3e}", density.y0_grid.n_total()))
    }

    fn direct_trajectory(&self, k: i64) -> Result<ModeTrajectory> {
        let o = &self.cfg.options;
        let dt = o.direct_dt.min(dt_max(&self.profile, k));
        evolve_direct_with(&self.profile, k, &self.omega0, &self.times, o.direct_n, dt)
    }

    fn evolve_direct(&mut self, k: i64) -> Result<String> {
        let traj = self.direct_trajectory(k)?;
        let coarse = traj.subsample_y(self.cfg.options.output_stride);
        self.out.write(&format!("traj_direct_k{k}.csv"), coarse.to_csv().as_bytes())?;
        self.state.direct.insert(k, traj);
        Ok(format!("k={k}: {} samples", self.times.len()))
    }

    fn cross_check(&mut self) -> Result<()> {
        let until = self.cfg.options.cross_check_until;
        for (k, spec) in &self.state.spectral {
            if let Some(direct) = self.state.direct.get(k) {
                let d = trajectory_difference(direct, spec, until)?;
                self.checks.push(Check {
                    name: format!("cross.k{k}"),
                    passed: d <= CROSS_TOLERANCE,
                    value: d,
                    threshold: format!("sup relative difference <= {CROSS_TOLERANCE:e} for t <= {until}"),
                    detail: String::new(),
                });
            }
        }
        Ok(())
    }

    fn asymptotics(&mut self, k: i64) -> Result<String> {
        let computed;
        let (traj, source) = if let Some(t) = self.state.direct.get(&k) {
            (t, "direct")
        } else if let Some(t) = self.state.spectral.get(&k) {
            (t, "spectral")
        } else {
            computed = self.direct_trajectory(k)?;
            (&computed, "direct")
        };
        let g = &self.cfg.grid;
        let opts = PhiOptions { resolvent_n: g.n_total, q: g.panel_order, h_min: g.h_min, ..Default::default() };
        let mut ap = compute_phis(&self.profile, k, &self.omega0, &opts, MainTermConvention::Corrected)?;
        let window = self.cfg.options.decay_window;
        let mut fits = Vec::new();
        let mut fit_errors = Vec::new();
        if window_count(&self.times, window) >= 10 {
            for (q, band, tag) in [(DecayQuantity::SupPsi, PSI_SLOPE, "psi"), (DecayQuantity::SupDyPsi, DY_PSI_SLOPE, "dpsi")] {
                let (check, fit) = slope_check(format!("decay.{tag}.k{k}"), fit_decay(traj, q, window), band);
                if fit.is_none() {
                    fit_errors.push(check.detail.clone());
                }
                fits.extend(fit);
                self.checks.push(check);
            }
        } else {
            fit_errors.push(format!("fewer than 10 samples in the decay window {window:?}"));
        }
        let mut res = BTreeMap::new();
        for (f, name) in [
            (ResidualField::Psi, "psi"),
            (ResidualField::PsiWithoutBoundary, "psi-without-boundary"),
            (ResidualField::DyPsi, "dy-psi"),
        ] {
            res.insert(name, residuals(&ap, traj, f));
        }
        ap.residual_norms = res["psi"].iter().map(|r| (r.0, r.1)).collect();
        let psi_res = &res["psi"];
        let t_end = *self.times.last().unwrap();
        if let Some(a) = psi_res.iter().find(|r| r.0 >= 50.0) {
            let b = psi_res.last().unwrap();
            if b.0 >= 2.0 * a.0 {
                let ratio = (b.0 * b.0 * b.1) / (a.0 * a.0 * a.1);
                self.checks.push(Check {
                    name: format!("residual.k{k}"),
                    passed: ratio < 0.8,
                    value: ratio,
                    threshold: format!("t^2 residual at t={} below 0.8x its value at t={}", b.0, a.0),
                    detail: String::new(),
                });
            }
        }
        let (mut scattering, mut scattering_err) = (None, None);
        if self.times[0] == 0.0 && t_end >= 100.0 {
            match scattering_profile(&self.profile, &ap, traj) {
                Ok(sc) => {
                    let f_end = sheared(&self.profile, traj).pop().unwrap();
                    let f_at = transfer(&f_end, &sc.y, 8);
                    let err = f_at.iter().zip(&sc.f_limit).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    self.checks.push(Check {
                        name: format!("scattering.k{k}"),
                        passed: err <= 2.0 * sc.tail_estimate,
                        value: err,
                        threshold: format!("<= 2 x tail estimate = {:.3e}", 2.0 * sc.tail_estimate),
                        detail: String::new(),
                    });
                    scattering_err = Some(err);
                    scattering = Some(sc);
                }
                Err(e) => self.checks.push(Check {
                    name: format!("scattering.k{k}"),
                    passed: false,
                    value: f64::NAN,
                    threshold: "<= 2 x tail estimate".into(),
                    detail: e.to_string(),
                }),
            }
        }
        let series = vec![
            Series { label: "sup |psi_k|", points: traj.times.iter().cloned().zip(traj.sup_psi()).collect() },
            Series { label: "sup |d_y psi_k|", points: traj.times.iter().cloned().zip(traj.sup_dpsi_dy()).collect() },
        ];
        self.out.write(&format!("decay_k{k}.svg"), loglog_svg(&format!("k = {k} ({source})"), &series, &[-2.0, -1.0]).as_bytes())?;
        let msg = format!("k={k}: {} fits, trajectory {source}", fits.len());
        self.out.write_json(
            &format!("asymptotics_k{k}.json"),
            &AsymptoticsArtifact {
                profile: &ap,
                trajectory: source,
                fits,
                fit_errors,
                residuals: res,
                scattering,
                scattering_error_at_end: scattering_err,
            },
        )?;
        Ok(msg)
    }

    fn norms(&mut self) -> Result<String> {
        let mut msgs = Vec::new();
        for tag in [LemmaTag::BX1, LemmaTag::X11, LemmaTag::BX17] {
            let r: RatioReport = lemma_ratio(&self.profile, tag, &self.cfg.options.lemma)?;
            let name = serde_json::to_value(tag)?.as_str().unwrap_or("tag").to_string();
            self.checks.push(Check {
                name: format!("norms.{name}"),
                passed: r.max_ratio.is_finite() && !r.blow_up,
                value: r.max_ratio,
                threshold: "finite, no non-saturating growth as eps decreases".into(),
                detail: String::new(),
            });
            msgs.push(format!("{name}: max ratio {:.3}", r.max_ratio));
            self.out.write_json(&format!("norms_{name}.json"), &r)?;
        }
        Ok(msgs.join(", "))
    }

    fn physical(&mut self) -> Result<()> {
        let stride = self.cfg.options.output_stride;
        let trajs: Vec<ModeTrajectory> = if !self.state.direct.is_empty() {
            self.state.direct.values().map(|t| t.subsample_y(stride)).collect()
        } else if !self.state.spectral.is_empty() {
            self.state.spectral.values().cloned().collect()
        } else {
            return Ok(());
        };
        let trajs = complete_real_pairs(&trajs);
        let field = assemble_physical(&self.profile, &trajs, self.cfg.options.x_resolution, &FourierConvention::default())?;
        let (sp, sf) = (field.sup_phi(), field.sup_f());
        let scale = sp.iter().chain(&sf).fold(1.0f64, |a, &v| a.max(v));
        self.checks.push(Check {
            name: "physical.real".into(),
            passed: field.max_imag <= REALITY_TOLERANCE * scale,
            value: field.max_imag,
            threshold: format!("imaginary part <= {REALITY_TOLERANCE:e} x {scale:.3e}"),
            detail: String::new(),
        });
        let window = self.cfg.options.decay_window;
        if window_count(&field.times, window) >= 10 {
            let fit = fit_power_law(DecayQuantity::SupPhi, &field.times, &sp, window);
            let (check, _) = slope_check("decay.phi".into(), fit, PSI_SLOPE);
            self.checks.push(check);
        }
        let mut csv = String::from("t,sup_phi,sup_f\n");
        for (i, t) in field.times.iter().enumerate() {
            let _ = writeln!(csv, "{t:.17e},{:.17e},{:.17e}", sp[i], sf[i]);
        }
        self.out.write("physical_sup.csv", csv.as_bytes())?;
        let last = field.times.len() - 1;
        let mut csv = String::from("t,x,y,phi,f\n");
        for (xi, x) in field.x.iter().enumerate() {
            for (j, y) in field.y.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{:.17e},{x:.17e},{y:.17e},{:.17e},{:.17e}",
                    field.times[last], field.phi[last][xi][j], field.f[last][xi][j]
                );
            }
        }
        self.out.write("physical_final.csv", csv.as_bytes())?;
        let series = vec![
            Series { label: "sup |phi|", points: field.times.iter().cloned().zip(sp).collect() },
            Series { label: "sup |f|", points: field.times.iter().cloned().zip(sf).collect() },
        ];
        self.out.write("physical_decay.svg", loglog_svg("physical fields", &series, &[-2.0]).as_bytes())?;
        Ok(())
    }
}

/// Executes the configured tasks in dependency order and writes all artifacts.
/// Configuration and I/O problems are returned as errors; numerical failures
/// of a task are recorded in the report.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let profile = make_profile(&config.profile)?;
    let omega0 = config.omega0.mode()?;
    let out = Artifacts::open(&config.outputs)?;
    let tasks: BTreeSet<Task> = config.tasks.iter().copied().collect();
    let mut ctx = Ctx { cfg: config, profile, omega0, times: config.t_samples.times(), out, checks: Vec::new(), state: State::default() };
    let mut statuses = Vec::new();
    for &task in &tasks {
        let start = Instant::now();
        let mut messages = Vec::new();
        let mut failed = false;
        let per_k: Vec<i64> = config.k_set.clone();
        let result: Result<()> = (|| {
            match task {
                Task::Norms => messages.push(ctx.norms()?),
                _ => {
                    for &k in &per_k {
                        let r = match task {
                            Task::Scan => ctx.scan(k),
                            Task::EvolveSpectral => ctx.evolve_spectral(k),
                            Task::EvolveDirect => ctx.evolve_direct(k),
                            Task::Asymptotics => ctx.asymptotics(k),
                            Task::Norms => unreachable!(),
                        };
                        match r {
                            Ok(m) => messages.push(m),
                            Err(e @ (Error::Io(_) | Error::Json(_))) => return Err(e),
                            Err(e) => {
                                failed = true;
                                messages.push(format!("k={k}: {e}"));
                            }
                        }
                    }
                }
            }
            Ok(())
        })();
        match result {
            Ok(()) => {}
            Err(e @ (Error::Io(_) | Error::Json(_))) => return Err(e),
            Err(e) => {
                failed = true;
                messages.push(e.to_string());
            }
        }
        if task == Task::EvolveDirect || (task == Task::EvolveSpectral && !tasks.contains(&Task::EvolveDirect)) {
            ctx.cross_check()?;
        }
        statuses.push(TaskStatus {
            task,
            outcome: if failed { TaskOutcome::Failed } else { TaskOutcome::Ok },
            messages,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    if let Err(e) = ctx.physical() {
        statuses.push(TaskStatus {
            task: Task::EvolveDirect,
            outcome: TaskOutcome::Failed,
            messages: vec![format!("physical assembly: {e}")],
            seconds: 0.0,
        });
    }
    let Ctx { mut out, checks, .. } = ctx;
    let report = RunReport {
        spec_version: SPEC_VERSION.into(),
        profile: config.profile.to_string(),
        k_set: config.k_set.clone(),
        tasks: statuses,
        checks,
        manifest: out.entries.clone(),
    };
    out.write_json("report.json", &report)?;
    let mut timings = String::new();
    for t in &report.tasks {
        let _ = writeln!(timings, "{} {:.3}", t.task.name(), t.seconds);
    }
    out.write("timings.txt", timings.as_bytes())?;
    let manifest = out.entries.clone();
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out.dir.join("manifest.json"), text)?;
    Ok(report)
}

/// A reloaded run directory with any integrity problems found.
pub struct DirectoryReport {
    pub report: RunReport,
    pub problems: Vec<String>,
}

/// Reloads report.json and verifies every manifest entry (and that no other file is present).
pub fn inspect(dir: &Path) -> Result<DirectoryReport> {
    let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| invalid(format!("{}: {e}", dir.join(name).display())));
    let report: RunReport = serde_json::from_str(&read("report.json")?)?;
    let manifest: Vec<ManifestEntry> = serde_json::from_str(&read("manifest.json")?)?;
    let mut problems = Vec::new();
    let listed: BTreeSet<&str> = manifest.iter().map(|e| e.path.as_str()).collect();
    for e in &manifest {
        match fs::read(dir.join(&e.path)) {
            Ok(data) if sha256_hex(&data) == e.sha256 && data.len() as u64 == e.bytes => {}
            Ok(_) => problems.push(format!("{}: content differs from manifest", e.path)),
            Err(err) => problems.push(format!("{}: {err}", e.path)),
        }
    }
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name != "manifest.json" && !listed.contains(name.as_str()) {
            problems.push(format!("{name}: not in manifest"));
        }
    }
    Ok(DirectoryReport { report, problems })
}
