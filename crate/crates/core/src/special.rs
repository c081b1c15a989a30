//! Exponential integral and the oscillatory power-law tail built from it.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// E1(z) for z off the negative real axis.
pub fn exp_integral_e1(z: Complex64) -> Complex64 {
    if z.norm() < 2.0 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for n in 1..200 {
            term *= -z / n as f64;
            let add = term / n as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() - sum;
    }
    // modified Lentz on e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...)))
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// int_T^inf e^{iat} t^{-2} dt for T > 0.
pub fn oscillatory_tail(a: f64, t: f64) -> Complex64 {
    if a == 0.0 {
        return Complex64::new(1.0 / t, 0.0);
    }
    let i = Complex64::i();
    (i * a * t).exp() / t + i * a * exp_integral_e1(-i * a * t)
}
