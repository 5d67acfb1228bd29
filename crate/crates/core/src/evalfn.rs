//! Closed-form function values on (0,1).
//!
//! Operator outputs and maximal functions are not step functions, but they
//! are always finite sums of `coef * t^e * ln(1/t)^k` on each piece, possibly
//! wrapped in pointwise powers and products. This module keeps that structure
//! so integrals can be evaluated exactly where the form allows and by
//! adaptive quadrature elsewhere.

use crate::error::{Error, Result};
use crate::quad;
use crate::stepfn::{power_antiderivative_diff, StepFunction};

/// One summand `coef * t^exponent * ln(1/t)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
    pub log_power: u32,
}

impl PowerTerm {
    pub fn power(coef: f64, exponent: f64) -> Self {
        PowerTerm {
            coef,
            exponent,
            log_power: 0,
        }
    }

    pub fn power_log(coef: f64, exponent: f64, log_power: u32) -> Self {
        PowerTerm {
            coef,
            exponent,
            log_power,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let mut v = self.coef;
        if self.exponent != 0.0 {
            v *= t.powf(self.exponent);
        }
        if self.log_power > 0 {
            v *= (1.0 / t).ln().powi(self.log_power as i32);
        }
        v
    }
}

/// Closed form on [lo, hi).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPiece {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<PowerTerm>,
}

impl EvalPiece {
    pub fn new(lo: f64, hi: f64, terms: Vec<PowerTerm>) -> Self {
        debug_assert!(lo >= 0.0 && hi > lo);
        EvalPiece { lo, hi, terms }
    }

    fn eval_signed(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }
}

/// A nonnegative function on (0,1) with evaluable closed form.
#[derive(Debug, Clone, PartialEq)]
pub enum EvaluableFunction {
    /// Contiguous pieces covering (0,1).
    Piecewise {
        pieces: Vec<EvalPiece>,
        non_increasing: bool,
    },
    /// inner(t)^alpha.
    Power {
        inner: Box<EvaluableFunction>,
        alpha: f64,
    },
    /// Product of factors raised to positive weights.
    Product {
        factors: Vec<(EvaluableFunction, f64)>,
    },
}

impl EvaluableFunction {
    pub fn piecewise(pieces: Vec<EvalPiece>, non_increasing: bool) -> Self {
        assert!(!pieces.is_empty(), "piecewise function needs pieces");
        debug_assert!(pieces[0].lo == 0.0, "pieces must start at 0");
        debug_assert!(pieces.last().unwrap().hi == 1.0, "pieces must end at 1");
        debug_assert!(
            pieces.windows(2).all(|w| w[0].hi == w[1].lo),
            "pieces must be contiguous"
        );
        EvaluableFunction::Piecewise {
            pieces,
            non_increasing,
        }
    }

    pub fn power(inner: EvaluableFunction, alpha: f64) -> Self {
        EvaluableFunction::Power {
            inner: Box::new(inner),
            alpha,
        }
    }

    pub fn product(factors: Vec<(EvaluableFunction, f64)>) -> Self {
        assert!(!factors.is_empty());
        assert!(factors.iter().all(|&(_, w)| w > 0.0));
        EvaluableFunction::Product { factors }
    }

    /// Value at t in (0,1), clamped at 0 to absorb endpoint roundoff of
    /// closed forms like A - B t^alpha.
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_signed(t).max(0.0)
    }

    /// Unclamped value; derivatives of operator outputs may be negative.
    pub fn eval_signed(&self, t: f64) -> f64 {
        match self {
            EvaluableFunction::Piecewise { pieces, .. } => {
                let i = pieces.partition_point(|p| p.hi <= t);
                pieces[i.min(pieces.len() - 1)].eval_signed(t)
            }
            EvaluableFunction::Power { inner, alpha } => inner.eval(t).powf(*alpha),
            EvaluableFunction::Product { factors } => factors
                .iter()
                .map(|(g, w)| g.eval(t).powf(*w))
                .product(),
        }
    }

    /// Direct access to the pieces of a plain piecewise form.
    pub fn as_pieces(&self) -> Option<&[EvalPiece]> {
        match self {
            EvaluableFunction::Piecewise { pieces, .. } => Some(pieces),
            _ => None,
        }
    }

    pub fn non_increasing(&self) -> bool {
        match self {
            EvaluableFunction::Piecewise { non_increasing, .. } => *non_increasing,
            EvaluableFunction::Power { inner, alpha } => inner.non_increasing() && *alpha > 0.0,
            EvaluableFunction::Product { factors } => {
                factors.iter().all(|(g, _)| g.non_increasing())
            }
        }
    }

    /// Sorted interior and terminal breakpoints, ending at 1.0.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut cuts = match self {
            EvaluableFunction::Piecewise { pieces, .. } => {
                pieces.iter().map(|p| p.hi).collect::<Vec<_>>()
            }
            EvaluableFunction::Power { inner, .. } => inner.breakpoints(),
            EvaluableFunction::Product { factors } => {
                let mut all: Vec<f64> = factors.iter().flat_map(|(g, _)| g.breakpoints()).collect();
                all.sort_by(f64::total_cmp);
                all.dedup();
                all
            }
        };
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts
    }

    /// Leading behavior near 0: g(t) ~ coef * t^e * ln(1/t)^l.
    /// None means g vanishes identically near 0.
    pub fn leading_behavior(&self) -> Option<(f64, f64, f64)> {
        match self {
            EvaluableFunction::Piecewise { pieces, .. } => pieces[0]
                .terms
                .iter()
                .filter(|term| term.coef != 0.0)
                .map(|term| (term.coef, term.exponent, term.log_power as f64))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(b.2.total_cmp(&a.2))),
            EvaluableFunction::Power { inner, alpha } => inner
                .leading_behavior()
                .map(|(c, e, l)| (c.powf(*alpha), e * alpha, l * alpha)),
            EvaluableFunction::Product { factors } => {
                let mut coef = 1.0;
                let mut e = 0.0;
                let mut l = 0.0;
                for (g, w) in factors {
                    let (c, ge, gl) = g.leading_behavior()?;
                    coef *= c.powf(*w);
                    e += ge * w;
                    l += gl * w;
                }
                Some((coef, e, l))
            }
        }
    }

    /// Integral of g(t)^q * t^a * ln(e/t)^log_b over (0,1).
    pub fn weighted_integral(&self, q: f64, a: f64, log_b: f64) -> Result<f64> {
        self.weighted_integral_range(q, a, log_b, 0.0, 1.0)
    }

    /// Integral of g(t)^q * t^a * ln(e/t)^log_b over (lo, hi).
    pub fn weighted_integral_range(
        &self,
        q: f64,
        a: f64,
        log_b: f64,
        lo: f64,
        hi: f64,
    ) -> Result<f64> {
        assert!(q > 0.0 && q.is_finite(), "finite positive power required");
        if lo >= hi {
            return Ok(0.0);
        }
        if lo == 0.0 {
            if let Some((c, e, l)) = self.leading_behavior() {
                if c > 0.0 {
                    // boundary decided with slop: composed exponents carry
                    // cancellation residue of order 1e-16
                    let e_tot = q * e + a;
                    let l_tot = q * l + log_b;
                    if e_tot < -1.0 - 1e-12 || ((e_tot + 1.0).abs() <= 1e-12 && l_tot >= -1.0 - 1e-12)
                    {
                        return Err(Error::DivergentIntegral(format!(
                            "integrand behaves like t^{e_tot} ln^{l_tot} near 0"
                        )));
                    }
                }
            }
        }
        if let EvaluableFunction::Piecewise { pieces, .. } = self {
            let mut acc = 0.0;
            for p in pieces {
                let plo = p.lo.max(lo);
                let phi = p.hi.min(hi);
                if plo >= phi {
                    continue;
                }
                acc += piece_weighted_integral(p, q, a, log_b, plo, phi);
            }
            return Ok(acc);
        }
        // opaque wrappers: quadrature segment by segment on the union grid
        let mut acc = 0.0;
        let mut prev = lo;
        let integrand = |t: f64| self.eval(t).powf(q) * t.powf(a) * (std::f64::consts::E / t).ln().powf(log_b);
        for c in self.breakpoints() {
            let c = c.min(hi);
            if c <= prev {
                continue;
            }
            acc += if prev == 0.0 {
                quad::integrate_singular_at_zero(&integrand, c)
            } else {
                quad::integrate(&integrand, prev, c)
            };
            prev = c;
            if prev >= hi {
                break;
            }
        }
        Ok(acc)
    }

    /// Essential sup of g(t) * t^a * ln(e/t)^log_b over (0,1).
    /// Infinite when the weighted function blows up at 0.
    pub fn weighted_sup(&self, a: f64, log_b: f64) -> f64 {
        if let Some((c, e, l)) = self.leading_behavior() {
            if c > 0.0 {
                let e_tot = e + a;
                let l_tot = l + log_b;
                if e_tot < -1e-12 || (e_tot.abs() <= 1e-12 && l_tot > 1e-12) {
                    return f64::INFINITY;
                }
            }
        }
        let h = |t: f64| self.eval(t) * t.powf(a) * (std::f64::consts::E / t).ln().powf(log_b);
        let mut best: f64 = 0.0;
        if let Some((c, e, l)) = self.leading_behavior() {
            if c > 0.0 && (e + a).abs() <= 1e-12 && (l + log_b).abs() <= 1e-12 {
                best = c;
            }
        }
        let mut prev = 0.0;
        for cut in self.breakpoints() {
            best = best.max(segment_sup(&h, prev, cut));
            prev = cut;
        }
        best
    }

    /// Sample onto a step grid; cuts must be increasing and end at 1.0.
    /// Values are taken at geometric midpoints.
    pub fn sample_to_step(&self, cuts: &[f64]) -> Result<StepFunction> {
        let mut values = Vec::with_capacity(cuts.len());
        let mut lo = 0.0;
        for &hi in cuts {
            let t = if lo == 0.0 { hi * 0.5 } else { (lo * hi).sqrt() };
            values.push(self.eval(t));
            lo = hi;
        }
        StepFunction::new(cuts.to_vec(), values)
    }
}

/// Integral of |piece value|^q * t^a * ln(e/t)^log_b over [lo, hi], exact
/// where the closed form allows, adaptive quadrature otherwise.
fn piece_weighted_integral(p: &EvalPiece, q: f64, a: f64, log_b: f64, lo: f64, hi: f64) -> f64 {
    if log_b == 0.0 {
        // single term: |c|^q t^{qe} ln^{qk}
        if p.terms.len() == 1 {
            let term = p.terms[0];
            if term.coef == 0.0 {
                return 0.0;
            }
            let k = term.log_power;
            if k == 0 {
                return term.coef.abs().powf(q)
                    * power_antiderivative_diff(q * term.exponent + a, lo, hi);
            }
            if q.fract() == 0.0 {
                return term.coef.abs().powf(q)
                    * int_power_log(q * term.exponent + a, k * q as u32, lo, hi);
            }
        }
        // two log-free terms, small integer power: binomial expansion
        if p.terms.len() == 2
            && p.terms.iter().all(|t| t.log_power == 0)
            && q.fract() == 0.0
            && (1.0..=20.0).contains(&q)
        {
            let n = q as u32;
            let (t1, t2) = (p.terms[0], p.terms[1]);
            let mut acc = 0.0;
            for i in 0..=n {
                let c = binomial(n, i) * t1.coef.powi(i as i32) * t2.coef.powi((n - i) as i32);
                let e = t1.exponent * i as f64 + t2.exponent * (n - i) as f64 + a;
                acc += c * power_antiderivative_diff(e, lo, hi);
            }
            return acc;
        }
        // q = 1 is linear in the terms
        if q == 1.0 {
            return p
                .terms
                .iter()
                .map(|t| t.coef * int_power_log(t.exponent + a, t.log_power, lo, hi))
                .sum();
        }
    }
    let integrand = |t: f64| {
        p.eval_signed(t).abs().powf(q) * t.powf(a) * (std::f64::consts::E / t).ln().powf(log_b)
    };
    if lo == 0.0 {
        quad::integrate_singular_at_zero(&integrand, hi)
    } else {
        quad::integrate(&integrand, lo, hi)
    }
}

/// Exact integral of t^b * ln(1/t)^k on [lo, hi] within (0,1], by parts.
pub fn int_power_log(b: f64, k: u32, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if k == 0 {
        return power_antiderivative_diff(b, lo, hi);
    }
    let l = |t: f64| {
        if t <= 0.0 {
            f64::INFINITY
        } else {
            -t.ln()
        }
    };
    if b == -1.0 {
        let kk = k as i32 + 1;
        return (l(lo).powi(kk) - l(hi).powi(kk)) / kk as f64;
    }
    let bp = b + 1.0;
    let boundary = |t: f64| {
        if t == 0.0 {
            if bp > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            t.powf(bp) * l(t).powi(k as i32)
        }
    };
    (boundary(hi) - boundary(lo)) / bp + (k as f64 / bp) * int_power_log(b, k - 1, lo, hi)
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Max of h over [lo, hi): geometric pre-sampling, then golden-section
/// refinement in the best bracket.
fn segment_sup<F: Fn(f64) -> f64>(h: &F, lo: f64, hi: f64) -> f64 {
    const SAMPLES: usize = 17;
    let lo_eff = if lo == 0.0 { hi * 1e-12 } else { lo };
    let ratio = (hi / lo_eff).powf(1.0 / (SAMPLES - 1) as f64);
    let mut pts = Vec::with_capacity(SAMPLES);
    let mut x = lo_eff;
    for _ in 0..SAMPLES {
        pts.push(x.min(hi));
        x *= ratio;
    }
    let vals: Vec<f64> = pts.iter().map(|&t| h(t)).collect();
    let best = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let a = pts[best.saturating_sub(1)];
    let b = pts[(best + 1).min(SAMPLES - 1)];
    golden_max(h, a, b).max(vals[best])
}

fn golden_max<F: Fn(f64) -> f64>(h: &F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    if b <= a {
        return h(a);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = h(c);
    let mut fd = h(d);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = h(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = h(d);
        }
    }
    fc.max(fd)
}
