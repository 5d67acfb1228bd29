//! Grid builders: graded dyadic grids toward 0 for singular profiles, and
//! logarithmic t-grids for K-functional curves.

/// Right endpoints of a graded grid with `n` pieces on (0, 1): the interior
/// cuts are geometric between 2^{-depth} and 1, so resolution is densest at 0
/// where near-extremal profiles of the Hardy operators concentrate.
///
/// Depth grows with `n` (depth = n/8, at least 16, at most 640). The growth
/// is what lets genuinely unbounded constants keep growing under refinement;
/// the cap keeps squares of near-extremal profile heads (values up to
/// t^{-1/2} at the smallest cut) inside f64 range at the largest grids the
/// refinement studies use, where uncapped depth would overflow the domain
/// norms. Past the cap, refinement still adds resolution at every scale.
pub fn graded_cuts(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    let depth = (n as f64 / 8.0).clamp(16.0, 640.0);
    let mut cuts = Vec::with_capacity(n);
    for i in 1..n {
        let e = -depth * (n - i) as f64 / (n - 1) as f64;
        cuts.push(e.exp2());
    }
    cuts.push(1.0);
    cuts
}

/// Logarithmic grid with `per_decade` points per decade spanning [lo, hi].
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && per_decade >= 1);
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    (0..count)
        .map(|i| lo * 10f64.powf(decades * i as f64 / (count - 1) as f64))
        .collect()
}

/// Subdivide each piece of a cut sequence into `factor` geometric subpieces.
/// The piece touching 0 is subdivided geometrically below its right endpoint.
pub fn refine_cuts(cuts: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1);
    let mut out = Vec::with_capacity(cuts.len() * factor);
    let mut lo = 0.0f64;
    for &hi in cuts {
        if lo == 0.0 {
            for k in (1..factor).rev() {
                out.push(hi * 0.5f64.powi(k as i32));
            }
        } else {
            let ratio = hi / lo;
            for k in 1..factor {
                out.push(lo * ratio.powf(k as f64 / factor as f64));
            }
        }
        out.push(hi);
        lo = hi;
    }
    out.dedup();
    out
}
