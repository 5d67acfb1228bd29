//! K-functionals for couples of Lorentz spaces over (0,1): the exact
//! integral formula for (L^1, L^inf), a definition-based infimum restricted
//! to the truncation family, and closed-form Holmstedt evaluation.
//!
//! Truncation splittings f = (f - lambda)_+ + min(f, lambda) realize the
//! infimum for (L^1, L^inf) and come within a bounded factor of it for the
//! other admissible couples, so `k_definition` is always a valid upper bound
//! for the K-functional and `k_exact` is the reference value on (L^1, L^inf).

use crate::error::{Error, Result};
use crate::grids::log_grid;
use crate::norms::{self, NormSpec};
use crate::stepfn::{format_float, power_antiderivative_diff, StepFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Golden-ratio conjugate used by the section search over truncation levels.
const INV_GOLD: f64 = 0.618_033_988_749_894_9;

/// The search interval stops shrinking at this fraction of its initial width.
const LEVEL_REL_TOL: f64 = 1e-8;

/// Section-search budget that comfortably exhausts `LEVEL_REL_TOL`.
pub const DEFAULT_SEARCH_DEPTH: u32 = 64;

fn lorentz_exponents(spec: &NormSpec) -> Option<(f64, f64)> {
    match spec {
        NormSpec::Lebesgue { p } => Some((*p, *p)),
        NormSpec::Lorentz { p, q } => Some((*p, *q)),
        _ => None,
    }
}

/// An ordered couple (X0, X1) accepted by the K-functional routines. X0 must
/// be a Lebesgue or Lorentz space with finite exponents, X1 either the same
/// kind with strictly larger primary exponent or the sup norm, matching the
/// hypotheses under which the closed-form approximation is two-sided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    left: NormSpec,
    right: NormSpec,
}

impl PairSpec {
    pub fn new(left: NormSpec, right: NormSpec) -> Result<PairSpec> {
        left.validate()?;
        right.validate()?;
        let (p0, q0) = lorentz_exponents(&left).ok_or_else(|| {
            Error::InadmissiblePair(format!(
                "left space must be Lebesgue or Lorentz, got {left}"
            ))
        })?;
        if !p0.is_finite() || !q0.is_finite() {
            return Err(Error::InadmissiblePair(format!(
                "left space needs finite exponents, got {left}"
            )));
        }
        let diagonal = p0 == 1.0 && q0 == 1.0;
        if !diagonal && p0 <= 1.0 {
            return Err(Error::InadmissiblePair(format!(
                "left space needs p = q = 1 or p > 1, got {left}"
            )));
        }
        let (p1, q1) = lorentz_exponents(&right).ok_or_else(|| {
            Error::InadmissiblePair(format!(
                "right space must be Lebesgue or Lorentz, got {right}"
            ))
        })?;
        if p1.is_finite() {
            if !q1.is_finite() {
                return Err(Error::InadmissiblePair(format!(
                    "right space needs a finite secondary exponent, got {right}"
                )));
            }
            if p0 >= p1 {
                return Err(Error::InadmissiblePair(format!(
                    "couple needs strictly ordered primary exponents, got ({left}, {right})"
                )));
            }
        }
        Ok(PairSpec { left, right })
    }

    pub fn left(&self) -> &NormSpec {
        &self.left
    }

    pub fn right(&self) -> &NormSpec {
        &self.right
    }

    /// Primary and secondary exponent of the left space.
    pub fn left_exponents(&self) -> (f64, f64) {
        lorentz_exponents(&self.left).expect("validated on construction")
    }

    /// Exponents of the right space, or None when it is the sup norm.
    pub fn right_exponents(&self) -> Option<(f64, f64)> {
        let (p1, q1) = lorentz_exponents(&self.right).expect("validated on construction");
        p1.is_finite().then_some((p1, q1))
    }

    /// True for the couple whose K-functional has an exact formula here.
    pub fn is_l1_linf(&self) -> bool {
        self.left_exponents() == (1.0, 1.0) && self.right_exponents().is_none()
    }
}

impl std::fmt::Display for PairSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.left, self.right)
    }
}

/// K(t, f; L^1, L^inf): the integral of f* over (0, min(t, 1)). Defined for
/// all t; non-positive t gives 0.
pub fn k_exact(f: &StepFunction, t: f64) -> f64 {
    f.rearrange().partial_integral(t)
}

/// Upper bound for K(t, f; X0, X1) over the truncation family, minimized in
/// the level by golden-section search (`depth` probes, early stop once the
/// bracket is below `LEVEL_REL_TOL` of the data range). Both interval
/// endpoints are always probed, so the bound never exceeds min(|f|_X0, t
/// |f|_X1).
pub fn k_definition(f: &StepFunction, t: f64, pair: &PairSpec, depth: u32) -> Result<f64> {
    check_t(t)?;
    if depth == 0 {
        return Err(Error::InvalidParams(
            "truncation search needs depth >= 1".into(),
        ));
    }
    k_definition_rearranged(&f.rearrange(), t, pair, depth)
}

fn k_definition_rearranged(
    fstar: &StepFunction,
    t: f64,
    pair: &PairSpec,
    depth: u32,
) -> Result<f64> {
    if fstar.is_zero() {
        return Ok(0.0);
    }
    let objective = |lambda: f64| -> Result<f64> {
        let head = norms::norm_of_rearranged(pair.left(), &fstar.excess_over(lambda))?;
        let tail = norms::norm_of_rearranged(pair.right(), &fstar.min_with(lambda))?;
        Ok(head + t * tail)
    };
    let top = fstar.max_value();
    let mut lo = 0.0;
    let mut hi = top;
    let best = objective(lo)?.min(objective(hi)?);
    let mut x1 = hi - INV_GOLD * (hi - lo);
    let mut x2 = lo + INV_GOLD * (hi - lo);
    let mut f1 = objective(x1)?;
    let mut f2 = objective(x2)?;
    for _ in 0..depth {
        if hi - lo <= LEVEL_REL_TOL * top {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_GOLD * (hi - lo);
            f1 = objective(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_GOLD * (hi - lo);
            f2 = objective(x2)?;
        }
    }
    Ok(best.min(f1).min(f2))
}

/// Closed-form evaluation of the couple's K-functional: the head integral of
/// the left quasinorm up to a t-dependent cut plus t times the tail of the
/// right quasinorm beyond it. Piecewise exact, no quadrature. For
/// (L^1, L^inf) this is the exact formula; for other couples it matches the
/// K-functional up to constants depending only on the exponents.
pub fn k_holmstedt(f: &StepFunction, t: f64, pair: &PairSpec) -> Result<f64> {
    check_t(t)?;
    Ok(k_holmstedt_rearranged(&f.rearrange(), t, pair))
}

fn k_holmstedt_rearranged(fstar: &StepFunction, t: f64, pair: &PairSpec) -> f64 {
    let (p0, q0) = pair.left_exponents();
    match pair.right_exponents() {
        None => {
            let cut = if p0 == 1.0 { t } else { t.powf(p0) };
            window_norm(fstar, p0, q0, 0.0, cut.min(1.0))
        }
        Some((p1, q1)) => {
            let alpha = 1.0 / (1.0 / p0 - 1.0 / p1);
            let cut = if alpha == 1.0 { t } else { t.powf(alpha) };
            let cut = cut.min(1.0);
            let head = window_norm(fstar, p0, q0, 0.0, cut);
            let tail = window_norm(fstar, p1, q1, cut, 1.0);
            head + t * tail
        }
    }
}

/// Lorentz quasinorm of f* restricted to the window (lo, hi).
fn window_norm(fstar: &StepFunction, p: f64, q: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let a = q / p - 1.0;
    let mut acc = 0.0;
    for (l, h, v) in fstar.pieces() {
        let l = l.max(lo);
        let h = h.min(hi);
        if h <= l || v <= 0.0 {
            continue;
        }
        let vq = if q == 1.0 { v } else { v.powf(q) };
        acc += vq * power_antiderivative_diff(a, l, h);
    }
    if q == 1.0 {
        acc
    } else {
        acc.powf(1.0 / q)
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!(
            "K-functional needs finite t > 0, got {t}"
        )));
    }
    Ok(())
}

/// One couple's K-functional sampled on a t grid by every applicable method.
/// `exact` is present only for (L^1, L^inf).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KFunctionalCurve {
    pub pair: PairSpec,
    pub ts: Vec<f64>,
    pub exact: Option<Vec<f64>>,
    pub definition: Vec<f64>,
    pub holmstedt: Vec<f64>,
}

/// Default evaluation grid: 64 points per decade across [1e-6, 1e2].
pub fn default_t_grid() -> Vec<f64> {
    log_grid(1e-6, 1e2, 64)
}

/// Sample the K-functional of f for one couple over a t grid, in parallel
/// over grid points.
pub fn k_curve(
    f: &StepFunction,
    pair: &PairSpec,
    ts: &[f64],
    depth: u32,
) -> Result<KFunctionalCurve> {
    if ts.is_empty() {
        return Err(Error::InvalidParams("t grid must be non-empty".into()));
    }
    for &t in ts {
        check_t(t)?;
    }
    if depth == 0 {
        return Err(Error::InvalidParams(
            "truncation search needs depth >= 1".into(),
        ));
    }
    let fstar = f.rearrange();
    let rows: Vec<(f64, f64)> = ts
        .par_iter()
        .map(|&t| {
            let d = k_definition_rearranged(&fstar, t, pair, depth)?;
            let h = k_holmstedt_rearranged(&fstar, t, pair);
            Ok((d, h))
        })
        .collect::<Result<_>>()?;
    let exact = pair
        .is_l1_linf()
        .then(|| ts.iter().map(|&t| fstar.partial_integral(t)).collect());
    Ok(KFunctionalCurve {
        pair: pair.clone(),
        ts: ts.to_vec(),
        exact,
        definition: rows.iter().map(|r| r.0).collect(),
        holmstedt: rows.iter().map(|r| r.1).collect(),
    })
}

/// Render a curve as CSV with header `t,k_exact,k_definition,k_holmstedt`.
/// The exact column is blank for couples without an exact formula.
pub fn curve_to_csv(curve: &KFunctionalCurve) -> String {
    let mut out = String::from("t,k_exact,k_definition,k_holmstedt\n");
    for (i, &t) in curve.ts.iter().enumerate() {
        let exact = curve
            .exact
            .as_ref()
            .map_or_else(String::new, |v| format_float(v[i]));
        out.push_str(&format_float(t));
        out.push(',');
        out.push_str(&exact);
        out.push(',');
        out.push_str(&format_float(curve.definition[i]));
        out.push(',');
        out.push_str(&format_float(curve.holmstedt[i]));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy_ops::dilate;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l1_linf() -> PairSpec {
        PairSpec::new(NormSpec::lebesgue(1.0), NormSpec::lebesgue(f64::INFINITY)).unwrap()
    }

    fn l21_l42() -> PairSpec {
        PairSpec::new(NormSpec::lorentz(2.0, 1.0), NormSpec::lorentz(4.0, 2.0)).unwrap()
    }

    fn random_decreasing(rng: &mut ChaCha8Rng, pieces: usize) -> StepFunction {
        let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(1e-4..1.0)).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.push(1.0);
        let mut values: Vec<f64> = (0..cuts.len()).map(|_| rng.gen_range(0.0..8.0)).collect();
        values.sort_by(f64::total_cmp);
        values.reverse();
        StepFunction::new(cuts, values).unwrap()
    }

    #[test]
    fn exact_formula_on_indicator() {
        let f = StepFunction::indicator(1.0).unwrap();
        assert_eq!(k_exact(&f, 0.3), 0.3);
        assert_eq!(k_exact(&f, 2.0), 1.0);
        assert_eq!(k_exact(&f, 0.0), 0.0);
    }

    #[test]
    fn definition_matches_two_level_oracle() {
        let f = StepFunction::new(vec![0.5, 1.0], vec![3.0, 1.0]).unwrap();
        assert_eq!(k_exact(&f, 0.5), 1.5);
        let d = k_definition(&f, 0.5, &l1_linf(), 64).unwrap();
        assert_relative_eq!(d, 1.5, max_relative = 1e-7);
    }

    #[test]
    fn definition_tracks_exact_on_l1_linf() {
        let pair = l1_linf();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..12 {
            let f = random_decreasing(&mut rng, 9);
            for t in [0.01, 0.1, 0.35, 1.0, 3.0] {
                let ex = k_exact(&f, t);
                let d = k_definition(&f, t, &pair, 64).unwrap();
                assert!(d >= ex - 1e-6 * ex.max(1.0), "lower break: {d} vs {ex}");
                assert_relative_eq!(d, ex, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn holmstedt_reduces_to_exact_on_l1_linf() {
        let pair = l1_linf();
        let f = StepFunction::new(vec![0.25, 0.5, 1.0], vec![4.0, 2.0, 0.5]).unwrap();
        for t in [0.05, 0.3, 0.9, 2.0, 50.0] {
            assert_eq!(k_holmstedt(&f, t, &pair).unwrap(), k_exact(&f, t));
        }
    }

    #[test]
    fn holmstedt_indicator_against_hand_value() {
        let pair =
            PairSpec::new(NormSpec::lorentz(2.0, 2.0), NormSpec::lebesgue(f64::INFINITY)).unwrap();
        let f = StepFunction::indicator(1.0).unwrap();
        let k = k_holmstedt(&f, 1.0, &pair).unwrap();
        assert_relative_eq!(k, 1.0, max_relative = 1e-12);
        // below the plateau the cut is t^2 and the head integral is t^2
        let k_small = k_holmstedt(&f, 0.5, &pair).unwrap();
        assert_relative_eq!(k_small, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn two_term_holmstedt_on_indicator() {
        // cut = t^4 for the (2,1)/(4,2) couple; for chi_(0,a) with cut < a the
        // head is 2 cut^(1/2) and the tail is (2(a^(1/2) - cut^(1/2)))^(1/2).
        let pair = l21_l42();
        let f = StepFunction::indicator(0.5).unwrap();
        let t = 0.6f64;
        let cut = t.powi(4);
        let expect = 2.0 * cut.sqrt() + t * (2.0 * (0.5f64.sqrt() - cut.sqrt())).sqrt();
        assert_relative_eq!(k_holmstedt(&f, t, &pair).unwrap(), expect, max_relative = 1e-12);
        // once the cut passes 1 only the head remains, which is the full norm
        let k_big = k_holmstedt(&f, 40.0, &pair).unwrap();
        assert_relative_eq!(k_big, 2.0 * 0.5f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn zero_function_gives_zero_everywhere() {
        let z = StepFunction::constant(0.0);
        for pair in [l1_linf(), l21_l42()] {
            assert_eq!(k_exact(&z, 0.5), 0.0);
            assert_eq!(k_definition(&z, 0.5, &pair, 32).unwrap(), 0.0);
            assert_eq!(k_holmstedt(&z, 0.5, &pair).unwrap(), 0.0);
        }
    }

    #[test]
    fn homogeneity_under_power_of_two_scaling() {
        let pair = l21_l42();
        let f = StepFunction::new(vec![0.2, 0.7, 1.0], vec![5.0, 2.0, 1.0]).unwrap();
        let g = f.scale(4.0);
        for t in [0.2, 1.0, 6.0] {
            assert_eq!(k_exact(&g, t), 4.0 * k_exact(&f, t));
            let (df, dg) = (
                k_definition(&f, t, &pair, 64).unwrap(),
                k_definition(&g, t, &pair, 64).unwrap(),
            );
            assert_relative_eq!(dg, 4.0 * df, max_relative = 1e-12);
            let (hf, hg) = (
                k_holmstedt(&f, t, &pair).unwrap(),
                k_holmstedt(&g, t, &pair).unwrap(),
            );
            assert_relative_eq!(hg, 4.0 * hf, max_relative = 1e-12);
        }
    }

    #[test]
    fn curve_monotone_and_concave() {
        let pair = l21_l42();
        let f = StepFunction::new(vec![0.1, 0.4, 1.0], vec![3.0, 1.5, 0.25]).unwrap();
        let ts: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64).collect();
        let curve = k_curve(&f, &pair, &ts, 64).unwrap();
        let k = &curve.definition;
        let scale = k.iter().copied().fold(0.0, f64::max);
        for w in k.windows(2) {
            assert!(w[1] >= w[0] - 1e-12 * scale, "not monotone: {w:?}");
        }
        for w in k.windows(3) {
            let second = w[2] - 2.0 * w[1] + w[0];
            assert!(second <= 1e-9 * scale, "not concave: {w:?}");
        }
    }

    #[test]
    fn dilation_transfers_bounded_by_max_one_s() {
        let pair = l21_l42();
        let f = StepFunction::new(vec![0.3, 1.0], vec![2.0, 0.5]).unwrap();
        for s in [0.5, 2.0] {
            let g = dilate(&f, s).unwrap();
            for t in [0.1, 1.0, 5.0] {
                let lhs = k_definition(&g, t, &pair, 64).unwrap();
                let rhs = k_definition(&f, t, &pair, 64).unwrap();
                assert!(
                    lhs <= s.max(1.0) * rhs * (1.0 + 1e-9),
                    "s={s} t={t}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn rejects_inadmissible_couples() {
        // equal primary exponents
        assert!(PairSpec::new(NormSpec::lorentz(2.0, 1.0), NormSpec::lorentz(2.0, 2.0)).is_err());
        // reversed order
        assert!(PairSpec::new(NormSpec::lorentz(4.0, 1.0), NormSpec::lorentz(2.0, 2.0)).is_err());
        // weak secondary exponent on either side
        assert!(PairSpec::new(
            NormSpec::lorentz(2.0, f64::INFINITY),
            NormSpec::lebesgue(f64::INFINITY)
        )
        .is_err());
        assert!(
            PairSpec::new(NormSpec::lorentz(2.0, 1.0), NormSpec::lorentz(4.0, f64::INFINITY))
                .is_err()
        );
        // left space outside the Lorentz scale
        assert!(PairSpec::new(
            NormSpec::lorentz_zygmund(2.0, 2.0, 1.0),
            NormSpec::lebesgue(f64::INFINITY)
        )
        .is_err());
        // L^1 against a finite exponent is fine, as is a plain Lebesgue couple
        assert!(PairSpec::new(NormSpec::lebesgue(1.0), NormSpec::lorentz(3.0, 1.0)).is_ok());
        assert!(PairSpec::new(NormSpec::lebesgue(2.0), NormSpec::lebesgue(4.0)).is_ok());
    }

    #[test]
    fn curve_csv_schema_and_blank_exact_column() {
        let f = StepFunction::indicator(0.5).unwrap();
        let ts = [0.5, 1.0];
        let general = k_curve(&f, &l21_l42(), &ts, 32).unwrap();
        let text = curve_to_csv(&general);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,k_exact,k_definition,k_holmstedt"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("0.5,,"), "exact column not blank: {row}");
        let exact_curve = k_curve(&f, &l1_linf(), &ts, 32).unwrap();
        let text = curve_to_csv(&exact_curve);
        let row = text.lines().nth(1).unwrap();
        assert!(row.starts_with("0.5,0.5,"), "exact column missing: {row}");
        assert_eq!(exact_curve.exact.as_ref().unwrap()[1], 0.5);
    }

    #[test]
    fn default_grid_covers_eight_decades() {
        let ts = default_t_grid();
        assert!(ts.first().copied().unwrap() <= 1e-6 * (1.0 + 1e-12));
        assert!(ts.last().copied().unwrap() >= 1e2 * (1.0 - 1e-12));
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn round_trips_through_json() {
        let pair = l21_l42();
        let text = serde_json::to_string(&pair).unwrap();
        let back: PairSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, pair);
    }
}
