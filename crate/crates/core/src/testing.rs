//! Test-only oracles: adaptive Gauss-Kronrod quadrature and tolerance helpers.

extern crate std;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    let (val, err) = whole;
    if depth == 0 || err <= tol.max(1e-15 * val.abs()).max(1e-300) || b - a <= 1e-13 * (a.abs() + b.abs()) {
        return val;
    }
    let m = 0.5 * (a + b);
    let left = gk15(f, a, m);
    let right = gk15(f, m, b);
    adapt(f, a, m, left, 0.5 * tol, depth - 1) + adapt(f, m, b, right, 0.5 * tol, depth - 1)
}

/// Adaptive 15-point Gauss-Kronrod quadrature to roughly `1e-13` relative
/// accuracy. Integrable endpoint singularities are handled by bisection.
pub fn quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let whole = gk15(&f, a, b);
    let tol = 1e-14 * whole.0.abs().max(1e-300);
    adapt(&f, a, b, whole, tol, 60)
}

/// `int_0^r1 g(r) dr` for `g` with an integrable singularity `r^(-alpha)` at
/// the origin, via `r = w^p`, `p = 1/(1 - alpha)`, which makes the transformed
/// integrand bounded.
pub fn quad_origin_singular<F: Fn(f64) -> f64>(g: F, r1: f64, alpha: f64) -> f64 {
    let p = 1.0 / (1.0 - alpha);
    quad(|w| if w > 0.0 { g(w.powf(p)) * p * w.powf(p - 1.0) } else { 0.0 }, 0.0, r1.powf(1.0 / p))
}

#[track_caller]
pub fn assert_rel(got: f64, want: f64, tol: f64) {
    let err = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
    assert!(err <= tol, "got {got:e}, want {want:e}, rel err {err:e} > {tol:e}");
}
