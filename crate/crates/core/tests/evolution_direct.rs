mod common;

use common::{adaptive_split, c};
use shear_damping::direct::*;
use shear_damping::evolution::*;
use shear_damping::greens::{elliptic_solve, GreensKernel};
use shear_damping::grid::ChannelGrid;
use shear_damping::linalg::{sup_diff, sup_norm};
use shear_damping::mode::ModeFunction;
use shear_damping::profiles::{make_profile, ProfileSpec, ShearProfile};
use shear_damping::{Complex64, Error};
use std::f64::consts::PI;

fn couette() -> ShearProfile {
    make_profile(&ProfileSpec::Couette).unwrap()
}

fn sine() -> ShearProfile {
    make_profile(&ProfileSpec::SinePerturbed { a: 0.1 }).unwrap()
}

fn sin_pi() -> ModeFunction {
    ModeFunction::real("sin(pi y)", |y| (PI * y).sin())
}

fn bubble() -> ModeFunction {
    ModeFunction::real("bubble", |y| (PI * y).sin() * y * (1.0 - y))
}

/// -int G(y,z) e^{-ikzt} sin(pi z) dz, the free-transport stream function.
fn couette_psi(k: i64, t: f64, y: f64, dy: bool) -> Complex64 {
    let g = GreensKernel::new(k);
    let f = |z: f64| {
        let kern = if dy { g.eval_dy(y, z) } else { g.eval(y, z) };
        Complex64::cis(-(k as f64) * z * t) * (PI * z).sin() * kern
    };
    -adaptive_split(&f, &[y], 1e-13)
}

#[test]
fn couette_density_is_the_plemelj_jump() {
    let opts = DensityOptions { base_panels: 8, ..Default::default() };
    let om = sin_pi();
    let d = build_density(&couette(), 1, &om, &opts).unwrap();
    let g = GreensKernel::new(1);
    let mut worst: f64 = 0.0;
    for (n, &y0) in d.y0_grid.nodes.iter().enumerate() {
        for (j, &y) in d.y_out.iter().enumerate() {
            let expect = c(0.0, 2.0 * PI) * g.eval(y, y0) * om.eval(y0);
            worst = worst.max((d.density[n][j] - expect).norm());
        }
    }
    assert!(worst < 1e-4, "{worst}");
    assert_eq!(d.density.len(), d.weight.len());
}

#[test]
fn couette_spectral_evolution_matches_free_transport() {
    let opts = DensityOptions { base_panels: 8, ..Default::default() };
    let d = build_density(&couette(), 1, &sin_pi(), &opts).unwrap();
    for t in [0.0, 5.0, 40.0] {
        let psi = evolve_psi_k(&d, t);
        let dpsi = evolve_dy_psi_k(&d, t);
        let exact: Vec<Complex64> = d.y_out.iter().map(|&y| couette_psi(1, t, y, false)).collect();
        let exact_dy: Vec<Complex64> = d.y_out.iter().map(|&y| couette_psi(1, t, y, true)).collect();
        assert!(sup_diff(&psi, &exact) <= 1e-4 * sup_norm(&exact), "t = {t}");
        assert!(sup_diff(&dpsi, &exact_dy) <= 1e-4 * sup_norm(&exact_dy), "t = {t}");
    }
}

#[test]
fn zero_data_gives_zero_density() {
    let opts = DensityOptions { base_panels: 4, ..Default::default() };
    let d = build_density(&sine(), 2, &ModeFunction::zero(), &opts).unwrap();
    assert!(d.density.iter().all(|row| sup_norm(row) == 0.0));
    assert_eq!(sup_norm(&evolve_psi_k(&d, 3.0)), 0.0);
    assert_eq!(sup_norm(&evolve_dy_psi_k(&d, 3.0)), 0.0);
}

#[test]
fn sine_density_refinement_and_boundary_decay() {
    let p = sine();
    let om = bubble();
    let coarse = build_density(&p, 1, &om, &DensityOptions::default()).unwrap();
    let fine = build_density(&p, 1, &om, &DensityOptions { base_panels: 32, ..Default::default() }).unwrap();
    // the fine output points contain the coarse ones
    for t in [0.0, 50.0, 200.0, 400.0] {
        let a = evolve_psi_k(&coarse, t);
        let b: Vec<Complex64> = evolve_psi_k(&fine, t).into_iter().step_by(2).collect();
        let rel = sup_diff(&a, &b) / sup_norm(&b);
        assert!(rel <= 1e-4, "t = {t}: {rel}");
    }
    // |density(., y0)| ~ y0^{1/2} toward the walls for boundary-vanishing data
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (n, &y0) in coarse.y0_grid.nodes.iter().enumerate() {
        let dist = y0.min(1.0 - y0);
        if dist < 0.02 {
            xs.push(dist.ln());
            ys.push(sup_norm(&coarse.density[n]).ln());
        }
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope >= 0.45, "fitted exponent {slope}");
}

#[test]
fn omega_recovery() {
    let grid = ChannelGrid::uniform(32, 8);
    let psi = grid.sample(|y| c((PI * y).sin(), 0.0));
    let om = recover_omega_k(&psi, 1, &grid);
    let exact = grid.sample(|y| c(-(PI * PI + 1.0) * (PI * y).sin(), 0.0));
    assert!(sup_diff(&om, &exact) < 1e-8);
    let rhs = grid.sample(|y| c(y.exp() * (1.0 - y), y * y));
    let back = recover_omega_k(&elliptic_solve(3, &rhs, &grid), 3, &grid);
    assert!(sup_diff(&back, &rhs) < 1e-8);
    let u: Vec<Complex64> = (0..=256).map(|i| c((PI * i as f64 / 256.0).sin(), 0.0)).collect();
    let om = recover_omega_k_uniform(&u, 1);
    assert!(om.iter().enumerate().all(|(i, v)| (v.re + (PI * PI + 1.0) * (PI * i as f64 / 256.0).sin()).abs() < 1e-6));
}

#[test]
fn couette_direct_is_free_transport() {
    let p = couette();
    let om = sin_pi();
    let times = [0.0, 10.0, 40.0, 100.0];
    let traj = evolve_direct_with(&p, 1, &om, &times, 512, 0.01).unwrap();
    for (i, &t) in times.iter().enumerate() {
        for (j, &y) in traj.y.iter().enumerate() {
            let f = traj.omega_t[i][j] * Complex64::cis(t * y);
            assert!((f.norm() - (PI * y).sin().abs()).abs() < 1e-9);
        }
        if t > 0.0 && t < 100.0 {
            let probe: Vec<usize> = (0..traj.y.len()).step_by(31).collect();
            for &j in &probe {
                let exact = couette_psi(1, t, traj.y[j], false);
                assert!((traj.psi_t[i][j] - exact).norm() < 1e-6, "t = {t}, y = {}", traj.y[j]);
            }
        }
    }
    // the single sample t = 0 is the initial data with its elliptic solve
    let first = evolve_direct_with(&p, 2, &om, &[0.0], 256, 0.01).unwrap();
    let exact_psi: Vec<Complex64> = first.y.iter().map(|&y| c(-(PI * y).sin() / (PI * PI + 4.0), 0.0)).collect();
    assert!(sup_diff(&first.psi_t[0], &exact_psi) < 1e-8);
    assert!(sup_diff(&first.omega_t[0], &om.sample_at(&first.y)) == 0.0);
}

#[test]
fn direct_zero_data_linearity_and_step_bound() {
    let p = sine();
    let times = [0.0, 2.0, 5.0];
    let zero = evolve_direct_with(&p, 1, &ModeFunction::zero(), &times, 128, 0.01).unwrap();
    assert!(zero.psi_t.iter().all(|v| sup_norm(v) == 0.0));
    let a = evolve_direct_with(&p, 1, &bubble(), &times, 128, 0.01).unwrap();
    let b = evolve_direct_with(&p, 1, &bubble().scaled(c(0.0, 3.0)), &times, 128, 0.01).unwrap();
    let a3: Vec<Complex64> = a.psi_t[2].iter().map(|v| v * c(0.0, 3.0)).collect();
    assert!(sup_diff(&a3, &b.psi_t[2]) <= 1e-14 * sup_norm(&a3));
    let dt = dt_max(&p, 1);
    assert!(dt > 0.0 && dt <= 0.01);
    assert!(matches!(
        evolve_direct_with(&p, 1, &bubble(), &times, 128, 2.0 * dt),
        Err(Error::StepTooLarge { .. })
    ));
    assert!(evolve_direct_with(&p, 1, &bubble(), &[1.0, 0.5], 128, dt).is_err());
}

#[test]
fn direct_is_fourth_order_in_time() {
    let p = make_profile(&ProfileSpec::SinePerturbed { a: 0.1 }).unwrap();
    // the phase e^{ikbt} sets the truncation error; k = 1 sits at roundoff for dt <= dt_max
    let solver = DirectSolver::new(&p, 10, 128).unwrap();
    let om = sin_pi();
    let dt0 = solver.dt_max();
    let at = |dt: f64| solver.advance(&solver.initial(&om, dt).unwrap(), 10.0).unwrap().f_k;
    let (a, b, d) = (at(dt0), at(dt0 / 2.0), at(dt0 / 4.0));
    let ratio = sup_diff(&a, &b) / sup_diff(&b, &d);
    assert!((ratio - 16.0).abs() <= 0.3 * 16.0, "ratio {ratio}");
}

#[test]
fn direct_is_reversible() {
    let p = sine();
    let solver = DirectSolver::new(&p, 2, 256).unwrap();
    let om = bubble();
    let start = solver.initial(&om, 0.01).unwrap();
    let there = solver.advance(&start, 10.0).unwrap();
    let back = solver.advance(&DirectState { dt: -0.01, ..there }, 0.0).unwrap();
    assert!(back.t == 0.0);
    assert!(sup_diff(&back.f_k, &start.f_k) < 1e-6);
}

#[test]
fn trajectory_helpers() {
    let p = sine();
    let om = bubble();
    let traj = evolve_direct_with(&p, 1, &om, &[0.0, 1.0, 2.0], 64, 0.01).unwrap();
    let conj = traj.conjugate();
    assert_eq!(conj.k, -1);
    assert_eq!(conj.psi_t[1][7], traj.psi_t[1][7].conj());
    let sub = traj.subsample_y(16);
    assert_eq!(sub.y, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(trajectory_difference(&traj, &sub, 2.0).unwrap(), 0.0);
    let csv = traj.to_csv();
    assert!(csv.lines().count() > 3 * 65);
    let f = sheared(&p, &traj);
    assert_eq!(f[0], om.sample_at(&traj.y));
}
