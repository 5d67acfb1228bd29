//! Adaptive Gauss–Kronrod quadrature for the few integrands that have no
//! closed-form antiderivative here (log-weighted pieces, fractional powers of
//! piece sums). Power-weight integrals never go through this module; they use
//! exact antiderivatives at the call site.

/// Relative tolerance used by all adaptive integration in this crate.
pub const REL_TOL: f64 = 1e-10;
/// Maximum bisection depth of the adaptive scheme.
pub const MAX_DEPTH: u32 = 40;

// 15-point Kronrod abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights. Classic QUADPACK qk15 constants.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Gauss–Kronrod 15(7) panel on [a, b]: returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut result_gauss = WG[3] * fc;
    let mut result_kronrod = WGK[7] * fc;
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = h * x;
        let fsum = f(c - dx) + f(c + dx);
        result_kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            result_gauss += WG[j / 2] * fsum;
        }
    }
    let integral = result_kronrod * h;
    let err = ((result_kronrod - result_gauss) * h).abs();
    (integral, err)
}

fn adaptive_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (i, e) = gk15(f, a, b);
    if depth >= MAX_DEPTH || e <= tol * i.abs().max(1e-300) {
        return i;
    }
    let c = 0.5 * (a + b);
    if c <= a || c >= b {
        return i;
    }
    adaptive_rec(f, a, c, tol, depth + 1) + adaptive_rec(f, c, b, tol, depth + 1)
}

/// Adaptive integral of a smooth-on-(a,b] integrand.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    adaptive_rec(&f, a, b, REL_TOL, 0)
}

/// Adaptive integral allowing an integrable singularity at the left endpoint 0:
/// the panel (0, b] is split geometrically toward 0 and summed from the small
/// end so the (convergent) tail cannot be swallowed by rounding.
pub fn integrate_singular_at_zero<F: Fn(f64) -> f64>(f: F, b: f64) -> f64 {
    if !(b > 0.0) {
        return 0.0;
    }
    let mut panels: Vec<f64> = Vec::new();
    let mut hi = b;
    let mut acc_abs = 0.0f64;
    for _ in 0..1080 {
        let lo = hi * 0.5;
        let v = adaptive_rec(&f, lo, hi, REL_TOL, 0);
        panels.push(v);
        acc_abs += v.abs();
        hi = lo;
        if hi < 1e-300 || (panels.len() > 8 && v.abs() <= REL_TOL * acc_abs) {
            break;
        }
    }
    panels.iter().rev().sum()
}
