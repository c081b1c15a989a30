//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! `cargo test --test acceptance -- 3 7` runs only the listed criteria.
//! With ACCEPTANCE_STRICT=1 any FAIL makes the process exit with status 1.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shear_damping::asymptotics::{
    assemble_psi_field, compute_phis, fit_decay, residuals, scattering_profile, AsymptoticProfile, DecayQuantity,
    MainTermConvention, PhiOptions, ResidualField,
};
use shear_damping::direct::{evolve_direct, sheared, transfer, trajectory_difference};
use shear_damping::evolution::{build_density, evolve_psi_k, evolve_spectral, DensityOptions, ModeTrajectory};
use shear_damping::greens::{elliptic_solve, GreensKernel, KernelKind};
use shear_damping::grid::ChannelGrid;
use shear_damping::linalg::{sup_diff, sup_norm};
use shear_damping::mode::ModeFunction;
use shear_damping::norms::{lemma_ratio, LemmaSweep, LemmaTag};
use shear_damping::profiles::{make_profile, FourierConvention, ProfileSpec, ShearProfile};
use shear_damping::resolvent::{solve_psi, solve_psi_ode, Iota, SpectralPoint};
use shear_damping::runner::{assemble_physical, complete_real_pairs};
use shear_damping::scan::{scan, ScanOptions};
use shear_damping::{Complex64, Result};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn couette() -> ShearProfile {
    make_profile(&ProfileSpec::Couette).unwrap()
}

fn sine() -> ShearProfile {
    make_profile(&ProfileSpec::SinePerturbed { a: 0.1 }).unwrap()
}

fn bubble() -> ModeFunction {
    ModeFunction::real("sin(pi y) y (1-y)", |y| (std::f64::consts::PI * y).sin() * y * (1.0 - y))
}

/// omega0(0) = 1, omega0(1) = 2
fn wall_data() -> ModeFunction {
    ModeFunction::real("1 + y^2", |y| 1.0 + y * y)
}

fn samples(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt).round() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}

/// Closed forms of G, d_y G and d_y d_z G off the diagonal, scaled to avoid overflow.
fn greens_oracle(k: f64, y: f64, z: f64) -> (f64, f64, f64) {
    let (lo, hi) = if y < z { (y, z) } else { (z, y) };
    // sinh(a) sinh(b) / sinh(k) etc. with a + b <= k
    let e = (k * lo + k * (1.0 - hi) - k).exp() / (1.0 - (-2.0 * k).exp());
    let s = |x: f64| 1.0 - (-2.0 * k * x).exp();
    let c = |x: f64| 1.0 + (-2.0 * k * x).exp();
    let g = e * s(lo) * s(1.0 - hi) / (2.0 * k);
    let dy = if y < z { e * c(lo) * s(1.0 - hi) / 2.0 } else { -e * s(lo) * c(1.0 - hi) / 2.0 };
    let dyz = -k * e * c(lo) * c(1.0 - hi) / 2.0;
    (g, dy, dyz)
}

fn criterion_1() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 4];
    for ka in 1..=32i64 {
        for k in [ka, -ka] {
            let g = GreensKernel::new(k);
            let kf = ka as f64;
            for _ in 0..100 {
                let (y, z): (f64, f64) = (rng.gen(), rng.gen());
                let scale = 1.0 + kf;
                worst[0] = worst[0].max((g.eval(y, z) - g.eval(z, y)).abs());
                worst[1] = worst[1].max(g.eval(0.0, z).abs()).max(g.eval(1.0, z).abs());
                let jump = g.branch(KernelKind::Dy, z, z, true) - g.branch(KernelKind::Dy, z, z, false);
                worst[2] = worst[2].max((jump + 1.0).abs());
                if (y - z).abs() > 1e-12 {
                    let (go, dyo, dyzo) = greens_oracle(kf, y, z);
                    let e = ((g.eval(y, z) - go).abs())
                        .max((g.eval_dy(y, z) - dyo).abs() / scale)
                        .max((g.eval_prime(y, z) - dyzo).abs() / scale);
                    worst[3] = worst[3].max(e);
                }
            }
        }
    }
    outcome(
        worst.iter().all(|&w| w <= 1e-10),
        format!(
            "symmetry {:.1e}, Dirichlet {:.1e}, jump {:.1e}, closed forms incl. G' {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_2() -> Result<Outcome> {
    let p = couette();
    let om = ModeFunction::real("sin(pi y)", |y| (std::f64::consts::PI * y).sin());
    let mut worst: f64 = 0.0;
    for &eps in &[1e-1, 1e-2] {
        for &(k, y0, iota) in &[(1, 0.37, Iota::Plus), (3, 0.5, Iota::Minus), (-2, 0.81, Iota::Plus)] {
            let point = SpectralPoint::new(k, y0, eps, iota)?;
            let grid = ChannelGrid::graded(512, 8, y0, eps / 10.0);
            let sol = solve_psi(&p, point, &om.sample(&grid), &grid)?;
            let g = GreensKernel::new(k);
            let probe: Vec<usize> = (0..grid.n_total()).step_by(37).collect();
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for &i in &probe {
                let y = grid.nodes[i];
                let f = |z: f64| om.eval(z) * g.eval(y, z) / point.denominator(&p, z);
                let exact = common::adaptive_split(&f, &[y, y0], 1e-13);
                diff = diff.max((sol.psi[i] - exact).norm());
                scale = scale.max(exact.norm());
            }
            worst = worst.max(diff / scale);
        }
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.2e} (n = 512, eps = 0.1, 0.01)"))
}

fn criterion_3() -> Result<Outcome> {
    let p = sine();
    let om = bubble();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_abs, mut worst_rel) = (0.0f64, 0.0f64);
    for case in 0..20 {
        let k: i64 = rng.gen_range(1..=16) * if case % 2 == 0 { 1 } else { -1 };
        let y0: f64 = rng.gen_range(0.02..0.98);
        let iota = if rng.gen::<bool>() { Iota::Plus } else { Iota::Minus };
        let point = SpectralPoint::new(k, y0, 1e-2, iota)?;
        let grid = ChannelGrid::graded(512, 8, y0, 1e-3);
        let data = om.sample(&grid);
        let a = solve_psi(&p, point, &data, &grid)?;
        let b = solve_psi_ode(&p, point, &data, &grid)?;
        let d = sup_diff(&a.psi, &b.psi);
        worst_abs = worst_abs.max(d);
        worst_rel = worst_rel.max(d / sup_norm(&a.psi));
    }
    outcome(
        worst_abs <= 1e-6,
        format!("sup difference {worst_abs:.2e} (relative {worst_rel:.2e}) over 20 random (k, y0), n = 512"),
    )
}

fn rel_var(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn criterion_4() -> Result<Outcome> {
    let p = sine();
    let base = ScanOptions::default();
    let mut worst_eps: f64 = 0.0;
    let mut worst_n: f64 = 0.0;
    let mut min_delta = f64::INFINITY;
    let mut flags = 0;
    for k in 1..=8 {
        let coarse = scan(&p, k, &ScanOptions { n: 256, ..base.clone() })?;
        let fine = scan(&p, k, &ScanOptions { n: 512, ..base.clone() })?;
        for r in [&coarse, &fine] {
            min_delta = min_delta.min(r.delta_hat);
            flags += r.flags.len();
            for w in r.delta_by_eps.windows(2) {
                worst_eps = worst_eps.max(rel_var(w[0].1, w[1].1));
            }
        }
        worst_n = worst_n.max(rel_var(coarse.delta_hat, fine.delta_hat));
    }
    let c = scan(&couette(), 1, &ScanOptions { n: 256, ..base })?;
    outcome(
        min_delta > 0.0 && worst_eps <= 0.1 && worst_n <= 0.1 && c.delta_hat == 1.0 && flags == 0,
        format!(
            "min delta_hat {min_delta:.4}, eps-halving variation {worst_eps:.3}, n 256/512 variation {worst_n:.4}, \
             couette delta_hat {}, {flags} flags",
            c.delta_hat
        ),
    )
}

fn criterion_5() -> Result<Outcome> {
    let p = sine();
    let om = bubble();
    let fine = ChannelGrid::uniform(64, 8);
    let mut worst: f64 = 0.0;
    for k in 1..=3 {
        let density = build_density(&p, k, &om, &DensityOptions::default())?;
        let psi0 = evolve_psi_k(&density, 0.0);
        let reference = elliptic_solve(k, &om.sample(&fine), &fine);
        let at_out: Vec<Complex64> = density.y_out.iter().map(|&y| fine.interpolate(&reference, y)).collect();
        worst = worst.max(sup_diff(&psi0, &at_out) / sup_norm(&at_out));
    }
    outcome(worst <= 1e-3, format!("max relative sup difference {worst:.2e} for k = 1, 2, 3"))
}

fn criterion_6() -> Result<Outcome> {
    let p = sine();
    let om = bubble();
    let times = samples(50.0, 0.5);
    let density = build_density(&p, 1, &om, &DensityOptions::default())?;
    let spectral = evolve_spectral(&density, &times);
    let direct = evolve_direct(&p, 1, &om, &times)?;
    let d = trajectory_difference(&direct, &spectral, 50.0)?;
    outcome(d <= 1e-3, format!("sup relative difference {d:.2e} over t <= 50"))
}

struct LongRun {
    traj: ModeTrajectory,
    ap: AsymptoticProfile,
}

fn long_run(p: &ShearProfile, k: i64, om: &ModeFunction) -> Result<LongRun> {
    let traj = evolve_direct(p, k, om, &samples(200.0, 0.5))?;
    let ap = compute_phis(p, k, om, &PhiOptions::default(), MainTermConvention::Corrected)?;
    Ok(LongRun { traj, ap })
}

fn criterion_7(run: &LongRun) -> Result<Outcome> {
    let psi = fit_decay(&run.traj, DecayQuantity::SupPsi, [20.0, 200.0]);
    let dpsi = fit_decay(&run.traj, DecayQuantity::SupDyPsi, [20.0, 200.0]);
    match (psi, dpsi) {
        (Ok(a), Ok(b)) => outcome(
            (-2.15..=-1.85).contains(&a.slope) && (-1.15..=-0.85).contains(&b.slope),
            format!(
                "sup|psi| slope {:.3} (r2 {:.4}), sup|d_y psi| slope {:.3} (r2 {:.4})",
                a.slope, a.r2, b.slope, b.r2
            ),
        ),
        (a, b) => outcome(false, format!("fit failed: {:?} / {:?}", a.err(), b.err())),
    }
}

/// t^2 residual at the last sample over its value at the first sample with t >= 50.
fn t2_ratio(series: &[(f64, f64, f64)]) -> f64 {
    let a = series.iter().find(|r| r.0 >= 50.0).unwrap();
    let b = series.last().unwrap();
    (b.0 * b.0 * b.1) / (a.0 * a.0 * a.1)
}

fn criterion_8(run: &LongRun) -> Result<Outcome> {
    let with = t2_ratio(&residuals(&run.ap, &run.traj, ResidualField::Psi));
    let without = t2_ratio(&residuals(&run.ap, &run.traj, ResidualField::PsiWithoutBoundary));
    outcome(
        with < 0.8 && without >= 0.8,
        format!("t^2 residual ratio t=200 / t=50: with boundary lines {with:.3}, without {without:.3}"),
    )
}

fn criterion_9() -> Result<Outcome> {
    let p = sine();
    let om = bubble();
    let times = samples(200.0, 0.5);
    let conv = FourierConvention::default();
    let mut trajs = Vec::new();
    let mut profiles = Vec::new();
    let mut worst_scatter: f64 = 0.0;
    let mut scatter_ok = true;
    for k in 1..=4 {
        let traj = evolve_direct(&p, k, &om, &times)?;
        let ap = compute_phis(&p, k, &om, &PhiOptions::default(), MainTermConvention::Corrected)?;
        let sc = scattering_profile(&p, &ap, &traj)?;
        let f_end = transfer(&sheared(&p, &traj).pop().unwrap(), &sc.y, 8);
        let err = sup_diff(&f_end, &sc.f_limit);
        scatter_ok &= err <= 2.0 * sc.tail_estimate;
        worst_scatter = worst_scatter.max(err / (2.0 * sc.tail_estimate));
        let minus = compute_phis(&p, -k, &om.conjugate(), &PhiOptions::default(), MainTermConvention::Corrected)?;
        trajs.push(traj.subsample_y(32));
        profiles.push(ap);
        profiles.push(minus);
    }
    let field = assemble_physical(&p, &complete_real_pairs(&trajs), 16, &conv)?;
    let psi = assemble_psi_field(&profiles, &field.x, &conv);
    let last = field.times.len() - 1;
    let t = field.times[last];
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (xi, row) in psi.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            diff = diff.max((t * t * field.phi[last][xi][j] - v.re).abs());
            scale = scale.max(v.norm());
        }
    }
    let rel = diff / scale;
    outcome(
        scatter_ok && rel <= 0.1,
        format!(
            "max |f_k(200) - F_k| / (2 tail) = {worst_scatter:.3}; |t^2 phi - Psi| / |Psi| = {rel:.3e} at t = {t}"
        ),
    )
}

fn criterion_10() -> Result<Outcome> {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, p) in [("couette", couette()), ("sine", sine())] {
        for tag in [LemmaTag::BX1, LemmaTag::X11, LemmaTag::BX17] {
            let r = lemma_ratio(&p, tag, &LemmaSweep::default())?;
            ok &= r.max_ratio.is_finite() && !r.blow_up;
            parts.push(format!("{name} {tag:?} {:.1}{}", r.max_ratio, if r.blow_up { " (blow-up)" } else { "" }));
        }
    }
    let r = lemma_ratio(&sine(), LemmaTag::BX17, &LemmaSweep { vanishing: true, ..Default::default() })?;
    ok &= r.max_ratio.is_finite();
    parts.push(format!("sine BX17 vanishing {:.1}", r.max_ratio));
    outcome(ok, format!("max ratios: {}", parts.join(", ")))
}

fn criterion_11() -> Result<Outcome> {
    let p = sine();
    let om = bubble();
    let mut worst_conj: f64 = 0.0;
    for &(k, y0) in &[(1, 0.3), (2, 0.55), (-3, 0.8)] {
        let point = SpectralPoint::new(k, y0, 0.01, Iota::Plus)?;
        let grid = ChannelGrid::graded(256, 8, y0, 1e-3);
        let data = om.sample(&grid);
        let plus = solve_psi(&p, point, &data, &grid)?;
        let minus = solve_psi(&p, point.with_iota(Iota::Minus), &data, &grid)?;
        let conj: Vec<Complex64> = plus.psi.iter().map(|v| v.conj()).collect();
        worst_conj = worst_conj.max(sup_diff(&minus.psi, &conj) / sup_norm(&plus.psi));
    }
    // both signs of k evolved independently
    let times = samples(20.0, 1.0);
    let mut trajs = Vec::new();
    for k in [1, 2] {
        trajs.push(evolve_direct(&p, k, &om, &times)?.subsample_y(16));
        trajs.push(evolve_direct(&p, -k, &om.conjugate(), &times)?.subsample_y(16));
    }
    trajs.sort_by_key(|t| t.k);
    let field = assemble_physical(&p, &trajs, 16, &FourierConvention::default())?;
    let scale = field.sup_phi().iter().chain(&field.sup_f()).fold(0.0f64, |a, &b| a.max(b));
    let imag = field.max_imag / scale;
    outcome(
        worst_conj <= 1e-10 && imag <= 1e-10,
        format!("psi^- vs conj psi^+ {worst_conj:.1e}; relative imaginary part of physical fields {imag:.1e}"),
    )
}

const TITLES: [&str; 11] = [
    "Green's function identities",
    "Couette closed form",
    "backend equivalence",
    "limiting absorption constant",
    "spectral completeness at t = 0",
    "spectral vs direct trajectories",
    "decay exponents",
    "boundary effect",
    "scattering and asymptotic profile",
    "norm sweeps",
    "conjugation and reality",
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |i: usize| selected.is_empty() || selected.contains(&i);
    let mut long: Option<std::result::Result<LongRun, String>> = None;
    let mut failures = 0;
    for i in 1..=11 {
        if !wanted(i) {
            continue;
        }
        let start = Instant::now();
        let result = match i {
            1 => criterion_1(),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 | 8 => {
                let run = long.get_or_insert_with(|| long_run(&sine(), 1, &wall_data()).map_err(|e| e.to_string()));
                match run {
                    Ok(r) if i == 7 => criterion_7(r),
                    Ok(r) => criterion_8(r),
                    Err(e) => outcome(false, format!("error: {e}")),
                }
            }
            9 => criterion_9(),
            10 => criterion_10(),
            _ => criterion_11(),
        };
        let secs = start.elapsed().as_secs_f64();
        let (passed, detail) = match result {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!("{} {:>2} {}: {} [{secs:.1} s]", if passed { "PASS" } else { "FAIL" }, i, TITLES[i - 1], detail);
    }
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
