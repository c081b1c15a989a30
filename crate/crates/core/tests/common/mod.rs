#![allow(dead_code)]

use shear_damping::Complex64;

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x) + f(c + x);
        kron += s * WK[i];
        if i % 2 == 1 {
            gauss += s * WG[i / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive Gauss-Kronrod (7/15) integration of a complex integrand.
pub fn adaptive<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64) -> Complex64 {
    fn rec<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, tol: f64, whole: Complex64, err: f64, depth: u32) -> Complex64 {
        if err <= tol || depth > 60 || (b - a) < 1e-15 {
            return whole;
        }
        let m = 0.5 * (a + b);
        let (l, el) = gk15(f, a, m);
        let (r, er) = gk15(f, m, b);
        rec(f, a, m, 0.5 * tol, l, el, depth + 1) + rec(f, m, b, 0.5 * tol, r, er, depth + 1)
    }
    let (w, e) = gk15(f, a, b);
    rec(f, a, b, tol, w, e, 0)
}

/// Integrates over [0,1] splitting at the given interior points.
pub fn adaptive_split<F: Fn(f64) -> Complex64>(f: &F, cuts: &[f64], tol: f64) -> Complex64 {
    let mut pts = vec![0.0, 1.0];
    pts.extend(cuts.iter().copied().filter(|c| *c > 0.0 && *c < 1.0));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts.windows(2).map(|w| adaptive(f, w[0], w[1], tol)).sum()
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
