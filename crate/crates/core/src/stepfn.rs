//! Nonnegative piecewise-constant functions on (0,1) and the exact operations
//! every other module is built on: non-increasing rearrangement, the maximal
//! function f**, weighted power integration, and rearrangement with respect to
//! a finite measure.

use crate::error::{Error, Result};
use crate::evalfn::{EvalPiece, EvaluableFunction, PowerTerm};
use serde::{Deserialize, Serialize};

/// Piecewise-constant f ≥ 0 on (0,1): value `values[i]` on [t_{i-1}, t_i) with
/// 0 = t_0 < t_1 < … < t_N = 1. Pieces are closed-left, open-right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    /// Right endpoints t_1 < … < t_N = 1.
    cuts: Vec<f64>,
    /// Value on [t_{i-1}, t_i).
    values: Vec<f64>,
}

/// Distribution function data: measure({f > ρ}) at each distinct value ρ.
/// Thresholds decrease; measures are non-decreasing along the list.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionProfile {
    pub thresholds: Vec<f64>,
    pub measures: Vec<f64>,
}

impl StepFunction {
    pub fn new(cuts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() || cuts.len() != values.len() {
            return Err(Error::InvalidStepFunction(format!(
                "{} cuts vs {} values",
                cuts.len(),
                values.len()
            )));
        }
        let mut prev = 0.0;
        for &c in &cuts {
            if !(c > prev) || !c.is_finite() {
                return Err(Error::InvalidStepFunction(format!(
                    "breakpoints must be strictly increasing from 0, got {c} after {prev}"
                )));
            }
            prev = c;
        }
        if *cuts.last().unwrap() != 1.0 {
            return Err(Error::InvalidStepFunction(format!(
                "last breakpoint must be 1.0, got {}",
                cuts.last().unwrap()
            )));
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidStepFunction(format!(
                    "values must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(StepFunction { cuts, values })
    }

    pub fn constant(c: f64) -> Self {
        StepFunction::new(vec![1.0], vec![c]).expect("constant is always valid")
    }

    /// Indicator of (0, a), as χ_{(0,a)} with an explicit zero tail.
    pub fn indicator(a: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidStepFunction(format!(
                "indicator endpoint must lie in (0,1], got {a}"
            )));
        }
        if a == 1.0 {
            Ok(StepFunction::constant(1.0))
        } else {
            StepFunction::new(vec![a, 1.0], vec![1.0, 0.0])
        }
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_pieces(&self) -> usize {
        self.values.len()
    }

    /// Iterate pieces as (lo, hi, value).
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let lows = std::iter::once(0.0).chain(self.cuts.iter().copied());
        lows.zip(self.cuts.iter().copied())
            .zip(self.values.iter().copied())
            .map(|((lo, hi), v)| (lo, hi, v))
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.pieces().map(|(lo, hi, _)| hi - lo).collect()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if !(0.0..1.0).contains(&t) {
            return 0.0;
        }
        // first cut strictly greater than t
        let i = self.cuts.partition_point(|&c| c <= t);
        self.values[i.min(self.values.len() - 1)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    /// Non-increasing rearrangement f*. Stable sort of pieces by value
    /// (descending), ties kept in original order; cuts rebuilt by running sum
    /// of piece lengths. Returns the input unchanged when already sorted.
    pub fn rearrange(&self) -> StepFunction {
        if self.is_non_increasing() {
            return self.clone();
        }
        let lengths = self.lengths();
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        let mut cuts = Vec::with_capacity(order.len());
        let mut values = Vec::with_capacity(order.len());
        let mut acc = 0.0;
        for &i in &order {
            acc += lengths[i];
            cuts.push(acc);
            values.push(self.values[i]);
        }
        *cuts.last_mut().unwrap() = 1.0;
        StepFunction { cuts, values }
    }

    /// Lebesgue measure of {f > rho}. Qualifying piece lengths are summed in
    /// sorted order so equimeasurable functions produce bitwise-equal results.
    pub fn measure_above(&self, rho: f64) -> f64 {
        let mut lens: Vec<f64> = self
            .pieces()
            .filter(|&(_, _, v)| v > rho)
            .map(|(lo, hi, _)| hi - lo)
            .collect();
        lens.sort_by(f64::total_cmp);
        lens.iter().sum()
    }

    /// Distribution profile at every distinct value level.
    pub fn distribution(&self) -> DistributionProfile {
        let mut thresholds: Vec<f64> = self.values.clone();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let measures = thresholds.iter().map(|&r| self.measure_above(r)).collect();
        DistributionProfile {
            thresholds,
            measures,
        }
    }

    /// Exact ∫_lo^hi f(s) s^a ds via closed-form antiderivatives.
    ///
    /// Divergence contract: if lo = 0, a ≤ −1, and the integrand is not
    /// identically zero near 0, the integral diverges.
    pub fn integrate_power(&self, a: f64, lo: f64, hi: f64) -> Result<f64> {
        if !(lo >= 0.0 && hi <= 1.0 && lo < hi) {
            if lo >= hi {
                return Ok(0.0);
            }
            return Err(Error::InvalidParams(format!(
                "integration bounds ({lo}, {hi}) outside (0, 1]"
            )));
        }
        let mut acc = 0.0;
        for (plo, phi, v) in self.pieces() {
            let l = plo.max(lo);
            let h = phi.min(hi);
            if l >= h || v == 0.0 {
                continue;
            }
            if l == 0.0 && a <= -1.0 {
                return Err(Error::DivergentIntegral(format!(
                    "weight exponent {a} <= -1 with nonzero value at 0"
                )));
            }
            acc += v * power_antiderivative_diff(a, l, h);
        }
        Ok(acc)
    }

    /// Exact ∫_0^t f(s) ds.
    pub fn partial_integral(&self, t: f64) -> f64 {
        let t = t.min(1.0);
        if t <= 0.0 {
            return 0.0;
        }
        self.pieces()
            .take_while(|&(lo, _, _)| lo < t)
            .map(|(lo, hi, v)| v * (hi.min(t) - lo))
            .sum()
    }

    pub fn integral(&self) -> f64 {
        self.partial_integral(1.0)
    }

    /// Maximal function f**(t) = (1/t) ∫_0^t f*(s) ds as an exact piecewise
    /// c1 + c2/t form on the pieces of f*.
    pub fn maximal(&self) -> EvaluableFunction {
        let fstar = self.rearrange();
        let mut pieces = Vec::with_capacity(fstar.num_pieces());
        let mut acc = 0.0; // ∫_0^{lo} f*
        for (lo, hi, v) in fstar.pieces() {
            // on [lo, hi): f**(t) = (acc + v (t - lo))/t = v + (acc - v·lo)/t
            let c2 = acc - v * lo;
            let mut terms = vec![PowerTerm::power(v, 0.0)];
            if c2 != 0.0 {
                terms.push(PowerTerm::power(c2, -1.0));
            }
            pieces.push(EvalPiece::new(lo, hi, terms));
            acc += v * (hi - lo);
        }
        EvaluableFunction::piecewise(pieces, true)
    }

    /// Pointwise power f^alpha (values powered, grid kept).
    pub fn pow(&self, alpha: f64) -> StepFunction {
        StepFunction {
            cuts: self.cuts.clone(),
            values: self.values.iter().map(|v| v.powf(alpha)).collect(),
        }
    }

    pub fn scale(&self, lambda: f64) -> StepFunction {
        assert!(lambda >= 0.0 && lambda.is_finite());
        StepFunction {
            cuts: self.cuts.clone(),
            values: self.values.iter().map(|v| v * lambda).collect(),
        }
    }

    /// Truncation from above: min(f, lambda).
    pub fn min_with(&self, lambda: f64) -> StepFunction {
        StepFunction {
            cuts: self.cuts.clone(),
            values: self.values.iter().map(|v| v.min(lambda)).collect(),
        }
    }

    /// Excess over a level: (f − lambda)_+.
    pub fn excess_over(&self, lambda: f64) -> StepFunction {
        StepFunction {
            cuts: self.cuts.clone(),
            values: self.values.iter().map(|v| (v - lambda).max(0.0)).collect(),
        }
    }

    /// Pointwise sum on the merged grid.
    pub fn add(&self, other: &StepFunction) -> StepFunction {
        let (cuts, values) = merge_map(self, other, |a, b| a + b);
        StepFunction { cuts, values }
    }

    /// Substitute t ↦ t^exponent into f* with exponent ≥ 1, i.e. the profile
    /// f*(t^exponent): breakpoints map to t_i^{1/exponent} exactly.
    pub fn compose_power_of_rearranged(&self, exponent: f64) -> StepFunction {
        assert!(exponent >= 1.0);
        let fstar = self.rearrange();
        let mut cuts: Vec<f64> = fstar.cuts.iter().map(|c| c.powf(1.0 / exponent)).collect();
        *cuts.last_mut().unwrap() = 1.0;
        // powf of an increasing sequence stays increasing, no revalidation needed
        StepFunction {
            cuts,
            values: fstar.values.clone(),
        }
    }

    /// Rearrangement of samples u with respect to per-sample weights of a
    /// finite measure, rescaled to (0,1). Stable by original index on ties.
    pub fn rearrange_wrt_measure(u: &[f64], weights: &[f64]) -> Result<StepFunction> {
        if u.len() != weights.len() || u.is_empty() {
            return Err(Error::InvalidParams(
                "samples and weights must be equal-length and nonempty".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        let mut order: Vec<usize> = (0..u.len()).collect();
        order.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()));
        let mut cuts = Vec::new();
        let mut values = Vec::new();
        let mut acc = 0.0;
        for &i in &order {
            if weights[i] == 0.0 {
                continue;
            }
            acc += weights[i] / total;
            cuts.push(acc);
            values.push(u[i].abs());
        }
        *cuts.last_mut().unwrap() = 1.0;
        StepFunction::new(cuts, values)
    }

    /// Values as an evaluable function (exact embedding).
    pub fn to_evaluable(&self) -> EvaluableFunction {
        let pieces = self
            .pieces()
            .map(|(lo, hi, v)| EvalPiece::new(lo, hi, vec![PowerTerm::power(v, 0.0)]))
            .collect();
        EvaluableFunction::piecewise(pieces, self.is_non_increasing())
    }

    /// Read from CSV with header `t_right,value`.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<StepFunction> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        {
            let headers = rdr.headers()?;
            if headers.len() < 2 || &headers[0] != "t_right" || &headers[1] != "value" {
                return Err(Error::Parse(format!(
                    "expected header `t_right,value`, got `{}`",
                    headers.iter().collect::<Vec<_>>().join(",")
                )));
            }
        }
        let mut cuts = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let t: f64 = rec
                .get(0)
                .ok_or_else(|| Error::Parse("missing t_right".into()))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad t_right: {e}")))?;
            let v: f64 = rec
                .get(1)
                .ok_or_else(|| Error::Parse("missing value".into()))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad value: {e}")))?;
            cuts.push(t);
            values.push(v);
        }
        StepFunction::new(cuts, values)
    }

    /// Write as CSV with header `t_right,value`.
    pub fn to_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["t_right", "value"])?;
        for (c, v) in self.cuts.iter().zip(&self.values) {
            wtr.write_record([format_float(*c), format_float(*v)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Render without losing precision and without locale surprises.
pub(crate) fn format_float(x: f64) -> String {
    let mut s = format!("{x}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// ∫_l^h s^a ds in closed form.
pub fn power_antiderivative_diff(a: f64, l: f64, h: f64) -> f64 {
    debug_assert!(l >= 0.0 && h >= l);
    if h == l {
        return 0.0;
    }
    if a == -1.0 {
        (h / l).ln()
    } else {
        let b = a + 1.0;
        (h.powf(b) - l.powf(b)) / b
    }
}

/// Merge two step functions onto the union grid and combine values pointwise.
fn merge_map<F: Fn(f64, f64) -> f64>(
    f: &StepFunction,
    g: &StepFunction,
    op: F,
) -> (Vec<f64>, Vec<f64>) {
    let mut cuts = Vec::with_capacity(f.cuts.len() + g.cuts.len());
    let mut values = Vec::with_capacity(f.cuts.len() + g.cuts.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < f.cuts.len() || j < g.cuts.len() {
        let cf = f.cuts.get(i).copied().unwrap_or(f64::INFINITY);
        let cg = g.cuts.get(j).copied().unwrap_or(f64::INFINITY);
        let c = cf.min(cg);
        values.push(op(f.values[i.min(f.values.len() - 1)], g.values[j.min(g.values.len() - 1)]));
        cuts.push(c);
        if cf == c {
            i += 1;
        }
        if cg == c {
            j += 1;
        }
    }
    (cuts, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thirds(values: [f64; 3]) -> StepFunction {
        StepFunction::new(vec![1.0 / 3.0, 2.0 / 3.0, 1.0], values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(StepFunction::new(vec![0.5, 0.5, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(StepFunction::new(vec![0.5, 0.9], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![1.0], vec![-1.0]).is_err());
        assert!(StepFunction::new(vec![], vec![]).is_err());
    }

    #[test]
    fn rearrange_sorts_equal_pieces() {
        let f = thirds([1.0, 3.0, 2.0]);
        let r = f.rearrange();
        assert_eq!(r.values(), &[3.0, 2.0, 1.0]);
        for (got, want) in r.cuts().iter().zip([1.0 / 3.0, 2.0 / 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn rearrange_is_identity_on_sorted_input() {
        let f = StepFunction::new(vec![0.2, 1.0], vec![5.0, 1.0]).unwrap();
        let r = f.rearrange();
        assert_eq!(r, f);
        let rr = r.rearrange();
        assert_eq!(rr, r);
    }

    #[test]
    fn rearrange_preserves_distribution() {
        let f = StepFunction::new(vec![0.1, 0.45, 0.55, 0.8, 1.0], vec![2.0, 7.0, 2.0, 0.0, 5.0])
            .unwrap();
        let r = f.rearrange();
        assert_eq!(f.distribution(), r.distribution());
    }

    #[test]
    fn eval_uses_left_closed_pieces() {
        let f = StepFunction::new(vec![0.5, 1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(f.eval(0.0), 2.0);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(0.999), 1.0);
        assert_eq!(f.eval(1.0), 0.0);
    }

    #[test]
    fn maximal_of_indicator() {
        let f = StepFunction::indicator(0.5).unwrap();
        let m = f.maximal();
        assert!((m.eval(0.25) - 1.0).abs() < 1e-15);
        assert!((m.eval(0.5) - 1.0).abs() < 1e-15);
        // f**(1) is the left limit value at the endpoint of the last piece
        assert!((m.eval(0.999_999_9) - 0.500_000_05).abs() < 1e-7);
    }

    #[test]
    fn maximal_of_constant_is_constant() {
        let f = StepFunction::constant(4.2);
        let m = f.maximal();
        for t in [0.01, 0.3, 0.99] {
            assert!((m.eval(t) - 4.2).abs() < 1e-15);
        }
    }

    #[test]
    fn maximal_hand_value() {
        let f = thirds([3.0, 2.0, 1.0]);
        let m = f.maximal();
        // f**(2/3) = (3/2)·(5/3) = 5/2
        assert!((m.eval(2.0 / 3.0) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn integrate_power_examples() {
        let one = StepFunction::constant(1.0);
        let v = one.integrate_power(-2.0 / 3.0, 0.0, 1.0).unwrap();
        assert!((v - 3.0).abs() < 1e-12);

        let err = one.integrate_power(-1.0, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::DivergentIntegral(_)));

        let f = StepFunction::new(vec![0.5, 1.0], vec![2.0, 1.0]).unwrap();
        let v = f.integrate_power(0.0, 0.0, 1.0).unwrap();
        assert!((v - 1.5).abs() < 1e-15);
    }

    #[test]
    fn integrate_power_skips_leading_zero_pieces() {
        let f = StepFunction::new(vec![0.5, 1.0], vec![0.0, 1.0]).unwrap();
        let v = f.integrate_power(-1.0, 0.0, 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn rearrange_wrt_measure_examples() {
        let f = StepFunction::rearrange_wrt_measure(&[4.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(f.values(), &[4.0, 1.0]);
        assert_eq!(f.cuts(), &[0.5, 1.0]);

        let f = StepFunction::rearrange_wrt_measure(&[1.0, 2.0], &[0.25, 0.75]).unwrap();
        assert_eq!(f.values(), &[2.0, 1.0]);
        assert_eq!(f.cuts(), &[0.75, 1.0]);

        let f = StepFunction::rearrange_wrt_measure(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(f.values().iter().all(|&v| v == 3.0));

        let e = StepFunction::rearrange_wrt_measure(&[1.0], &[0.0]).unwrap_err();
        assert_eq!(e, Error::EmptyMeasure);
    }

    #[test]
    fn add_merges_grids() {
        let f = StepFunction::new(vec![0.5, 1.0], vec![1.0, 0.0]).unwrap();
        let g = StepFunction::new(vec![0.25, 1.0], vec![2.0, 1.0]).unwrap();
        let s = f.add(&g);
        assert_eq!(s.cuts(), &[0.25, 0.5, 1.0]);
        assert_eq!(s.values(), &[3.0, 2.0, 1.0]);
        assert!((s.integral() - (f.integral() + g.integral())).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let f = StepFunction::new(vec![0.125, 0.5, 1.0], vec![3.0, 1.5, 0.0]).unwrap();
        let mut buf = Vec::new();
        f.to_csv(&mut buf).unwrap();
        let g = StepFunction::from_csv(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let data = "t,v\n1.0,2.0\n";
        assert!(StepFunction::from_csv(data.as_bytes()).is_err());
    }

    #[test]
    fn hardy_littlewood_smoke() {
        let f = StepFunction::new(vec![0.3, 0.7, 1.0], vec![1.0, 5.0, 2.0]).unwrap();
        let g = StepFunction::new(vec![0.2, 0.6, 1.0], vec![4.0, 0.5, 3.0]).unwrap();
        let lhs: f64 = {
            let prod = merge_map(&f, &g, |a, b| a * b);
            StepFunction::new(prod.0, prod.1).unwrap().integral()
        };
        let rhs: f64 = {
            let prod = merge_map(&f.rearrange(), &g.rearrange(), |a, b| a * b);
            StepFunction::new(prod.0, prod.1).unwrap().integral()
        };
        assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn compose_power_substitution() {
        // f* = χ_{(0,a)}: f*(t^{n/d}) is the indicator of (0, a^{d/n})
        let f = StepFunction::indicator(0.25).unwrap();
        let z = f.compose_power_of_rearranged(3.0);
        assert_eq!(z.values(), &[1.0, 0.0]);
        assert!((z.cuts()[0] - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-15);
    }
}
