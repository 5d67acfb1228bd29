//! Executable predictions for trace embeddings: the closed-form optimal
//! target table, extremal radial families built from iterated integrals,
//! end-to-end ratio checks of the inequality in radial settings, and the
//! slice-trace diagnostic suite for the slow regime.
//!
//! All end-to-end checks run on one-dimensional surrogates: the radial
//! profile of the candidate extremal carries the quantitative content, and
//! full n-dimensional Sobolev norms are out of scope. Comparison constants
//! that the theory leaves existential are tested as such (positive, stable
//! under refinement), never pinned to specific values.

use crate::error::{Error, Result};
use crate::evalfn::EvaluableFunction;
use crate::frostman::{DiscreteMeasure, MeasureKind};
use crate::grids::graded_cuts;
use crate::hardy_ops::{self, binomial, factorial};
use crate::norms::{self, NormSpec};
use crate::params::{unit_ball_volume, SobolevParams};
use crate::stepfn::{power_antiderivative_diff, StepFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which part of the theory produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionSource {
    /// Classical Sobolev domain, general (d, p) table.
    Classical,
    /// p = 1 endpoint in the fast regime d >= n - m.
    EndpointFast,
    /// Slow-regime endpoint domain Lorentz((n-d)/m, 1).
    EndpointSlow,
    /// Improvement available for radial power measures.
    RadialImprovement,
    /// Sharpness side for the plane-slice measure.
    SliceSharpness,
}

impl std::fmt::Display for PredictionSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PredictionSource::Classical => "classical",
            PredictionSource::EndpointFast => "endpoint-fast",
            PredictionSource::EndpointSlow => "endpoint-slow",
            PredictionSource::RadialImprovement => "radial-improvement",
            PredictionSource::SliceSharpness => "slice-sharpness",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetPrediction {
    pub params: SobolevParams,
    pub domain: NormSpec,
    pub predicted: NormSpec,
    pub source: PredictionSource,
}

/// Optimal rearrangement-invariant target for the Lebesgue domain L^p.
///
/// Admissible set: either d in [n-m, n] with p in [1, inf], or
/// d in (0, n-m) with p in ((n-d)/m, inf]. Below the fast regime and at or
/// under the threshold (n-d)/m the trace functional need not even be
/// defined, so those pairs are rejected rather than given a target.
pub fn classical_target(n: u32, m: u32, d: f64, p: f64) -> Result<TargetPrediction> {
    let params = SobolevParams::new(n, m, d)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidParams(format!("p must lie in [1, inf], got {p}")));
    }
    let nf = n as f64;
    let mf = m as f64;
    let fast = d >= nf - mf;
    if !fast {
        let threshold = (nf - d) / mf;
        if p <= threshold + 1e-12 {
            return Err(Error::InadmissibleRegime(format!(
                "below the fast regime traces exist only for p > (n-d)/m = {threshold}; \
                 at p = {p} the trace functional need not even be defined"
            )));
        }
    }
    let domain = NormSpec::lebesgue(p);
    let critical = nf / mf;
    let (predicted, source) = if (p - critical).abs() < 1e-12 {
        (NormSpec::lorentz_zygmund(f64::INFINITY, p, -1.0), PredictionSource::Classical)
    } else if p > critical {
        (NormSpec::lebesgue(f64::INFINITY), PredictionSource::Classical)
    } else if p == 1.0 {
        (NormSpec::lorentz(d / (nf - mf), 1.0), PredictionSource::EndpointFast)
    } else {
        (NormSpec::lorentz(d * p / (nf - mf * p), p), PredictionSource::Classical)
    };
    predicted.validate()?;
    Ok(TargetPrediction { params, domain, predicted, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowEndpointTargets {
    pub domain: NormSpec,
    /// Prediction for the plane-slice measure: the weaker Lebesgue target is
    /// already optimal there.
    pub slice_prediction: TargetPrediction,
    /// Prediction for the radial power measure: the finer Lorentz target
    /// survives.
    pub radial_prediction: TargetPrediction,
}

/// The two optimal targets at the slow-regime endpoint domain
/// Lorentz((n-d)/m, 1), which differ by measure.
pub fn slow_endpoint_targets(n: u32, m: u32, d: u32) -> Result<SlowEndpointTargets> {
    let params = SobolevParams::new(n, m, d as f64)?;
    if d == 0 || d as f64 >= (n - m) as f64 {
        return Err(Error::InadmissibleRegime(format!(
            "slow-regime endpoint needs integer d in (0, n-m), got d = {d} with n - m = {}",
            n - m
        )));
    }
    let q = (n - d) as f64 / m as f64;
    let domain = NormSpec::lorentz(q, 1.0);
    domain.validate()?;
    let slice = NormSpec::lebesgue(q);
    let radial = NormSpec::lorentz(q, 1.0);
    Ok(SlowEndpointTargets {
        domain: domain.clone(),
        slice_prediction: TargetPrediction {
            params,
            domain: domain.clone(),
            predicted: slice,
            source: PredictionSource::SliceSharpness,
        },
        radial_prediction: TargetPrediction {
            params,
            domain,
            predicted: radial,
            source: PredictionSource::RadialImprovement,
        },
    })
}

/// Radial extremal family: from a nonnegative profile f on (0,1]
/// (representing s -> f(V s) with V = omega_n R^n), build the m-times
/// iterated integral
///
///   g(t) = (1/(m-1)!) INT_t^V f(r/V as profile) r^(-m+m/n) (r-t)^(m-1) dr,
///
/// the substitution profile g(t^(n/d)), and the reduction-side profile
/// INT_(t^(n/d))^1 f(s) s^(-1+m/n) ds. The sampled step versions live on a
/// graded grid; the exact evaluators back the pointwise ratio checks.
#[derive(Debug, Clone)]
pub struct ExtremalFamily {
    pub params: SobolevParams,
    pub radius: f64,
    /// omega_n R^n, the volume scale of the supporting ball.
    pub volume: f64,
    pub source: StepFunction,
    /// Sampled s -> g(V s) on (0,1], non-increasing.
    pub g: StepFunction,
    /// Sampled t -> g(t^(n/d)) on (0,1], non-increasing.
    pub substitution: StepFunction,
    /// Sampled reduction-side profile on the same grid.
    pub reduction: StepFunction,
    reduction_exact: EvaluableFunction,
    grid_size: usize,
}

pub fn necessity_family(
    f: &StepFunction,
    params: &SobolevParams,
    radius: f64,
) -> Result<ExtremalFamily> {
    necessity_family_with_grid(f, params, radius, 1024)
}

pub fn necessity_family_with_grid(
    f: &StepFunction,
    params: &SobolevParams,
    radius: f64,
    grid_size: usize,
) -> Result<ExtremalFamily> {
    if !(radius > 0.0) || radius > 0.5 {
        return Err(Error::InvalidParams(format!(
            "radius must lie in (0, 0.5] so the ball fits the unit box, got {radius}"
        )));
    }
    if grid_size < 8 {
        return Err(Error::InvalidParams("sampling grid must have at least 8 cells".into()));
    }
    let volume = unit_ball_volume(params.n) * radius.powi(params.n as i32);
    if !iterated_profile_value(f, params, volume, 0.0).is_finite() {
        return Err(Error::DivergentIntegral(
            "iterated integral of the source profile diverges".into(),
        ));
    }
    let kappa = params.n_over_d();
    let cuts = graded_cuts(grid_size);
    let g = sample_profile(&cuts, |s| iterated_profile_value(f, params, volume, volume * s));
    let substitution =
        sample_profile(&cuts, |t| iterated_profile_value(f, params, volume, t.powf(kappa)));
    let reduction_exact = hardy_ops::apply_t(params, f);
    let reduction = sample_profile(&cuts, |t| reduction_exact.eval(t));
    Ok(ExtremalFamily {
        params: *params,
        radius,
        volume,
        source: f.clone(),
        g,
        substitution,
        reduction,
        reduction_exact,
        grid_size,
    })
}

impl ExtremalFamily {
    /// Exact g(t) on the raw domain (0, V).
    pub fn iterated_profile(&self, t: f64) -> f64 {
        iterated_profile_value(&self.source, &self.params, self.volume, t)
    }

    /// Exact g(t^(n/d)) for t in (0,1).
    pub fn substitution_profile(&self, t: f64) -> f64 {
        self.iterated_profile(t.powf(self.params.n_over_d()))
    }

    /// Exact reduction-side profile at t.
    pub fn reduction_profile(&self, t: f64) -> f64 {
        self.reduction_exact.eval(t)
    }

    /// Minimum of g(t^(n/d)) / reduction-profile over a graded grid kept
    /// inside the comparison window t^(n/d) < V/2, skipping points where
    /// both sides vanish. Zero when the family is trivial.
    pub fn min_pointwise_ratio(&self, grid_size: usize) -> f64 {
        let t_max = (self.volume / 2.0).powf(self.params.d / self.params.n as f64);
        let mut min_ratio = f64::INFINITY;
        for &c in &graded_cuts(grid_size.max(8)) {
            let t = t_max * c;
            let denom = self.reduction_exact.eval(t);
            if denom <= f64::MIN_POSITIVE {
                continue;
            }
            min_ratio = min_ratio.min(self.substitution_profile(t) / denom);
        }
        if min_ratio.is_finite() {
            min_ratio
        } else {
            0.0
        }
    }

    /// Same family resampled on a doubled grid.
    pub fn refined(&self) -> Result<ExtremalFamily> {
        necessity_family_with_grid(&self.source, &self.params, self.radius, self.grid_size * 2)
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }
}

/// Exact iterated-integral profile: binomial expansion of the kernel
/// (r - t)^(m-1) gives pure power integrals piece by piece, so no quadrature
/// is involved. Finite for every step profile since the weight exponent
/// stays above -1 after substitution.
fn iterated_profile_value(
    source: &StepFunction,
    params: &SobolevParams,
    volume: f64,
    t: f64,
) -> f64 {
    if t >= volume || volume <= 0.0 {
        return 0.0;
    }
    let a = (t / volume).max(0.0);
    let m = params.m;
    let mf = m as f64;
    let beta = params.m_over_n();
    let mut acc = 0.0;
    for (lo, hi, v) in source.pieces() {
        if hi <= a || v == 0.0 {
            continue;
        }
        let lo = lo.max(a);
        for k in 0..m {
            let sign = if (m - 1 - k) % 2 == 0 { 1.0 } else { -1.0 };
            let coeff = binomial(m - 1, k) * sign * a.powi((m - 1 - k) as i32);
            if coeff == 0.0 {
                // at t = 0 only the top kernel term survives; the others
                // would pair a zero coefficient with a divergent integral
                continue;
            }
            let e = k as f64 - mf + beta;
            acc += v * coeff * power_antiderivative_diff(e, lo, hi);
        }
    }
    acc * volume.powf(beta) / factorial(m - 1)
}

fn sample_profile<F: Fn(f64) -> f64>(cuts: &[f64], eval: F) -> StepFunction {
    let mut values = Vec::with_capacity(cuts.len());
    let mut lo = 0.0;
    for &hi in cuts {
        let mid = if lo == 0.0 { hi * 0.5 } else { (lo * hi).sqrt() };
        values.push(eval(mid).max(0.0));
        lo = hi;
    }
    StepFunction::new(cuts.to_vec(), values).expect("graded cuts and finite samples")
}

/// Per-family left/right ratios of the trace inequality surrogate and their
/// stability under one grid refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub refined_max_ratio: f64,
    /// |refined - base| / refined, zero for an all-zero corpus.
    pub relative_change: f64,
}

/// End-to-end check of the trace inequality in radial settings: for each
/// family, left = Y-norm of the substitution profile g(t^(n/d)) and
/// right = X-norm of the generating profile. The measure only gates the
/// regime: anything non-radial has no one-dimensional surrogate here.
pub fn verify_inequality(
    params: &SobolevParams,
    x: &NormSpec,
    y: &NormSpec,
    measure: &DiscreteMeasure,
    corpus: &[ExtremalFamily],
) -> Result<RatioReport> {
    match &measure.kind {
        MeasureKind::RadialDensity { .. } | MeasureKind::LebesgueBox { .. } => {}
        other => {
            return Err(Error::RegimeMismatch(format!(
                "radial surrogates need a radial density or Lebesgue measure, got {other:?}; \
                 for the pure one-dimensional statement use the best-constant search"
            )))
        }
    }
    if measure.ambient() != params.n {
        return Err(Error::BadDimension(format!(
            "measure lives in dimension {}, parameters say {}",
            measure.ambient(),
            params.n
        )));
    }
    x.validate()?;
    y.validate()?;
    let one_ratio = |family: &ExtremalFamily, refined: bool| -> Result<f64> {
        if family.params != *params {
            return Err(Error::InvalidParams(
                "corpus member was built for different parameters".into(),
            ));
        }
        let subst = if refined {
            let fam = family.refined()?;
            fam.substitution
        } else {
            family.substitution.clone()
        };
        let left = norms::norm_of_rearranged(y, &subst)?;
        let right = norms::norm(x, &family.source)?;
        Ok(if right == 0.0 { 0.0 } else { left / right })
    };
    let ratios: Vec<f64> = corpus
        .par_iter()
        .map(|fam| one_ratio(fam, false))
        .collect::<Result<_>>()?;
    let refined: Vec<f64> = corpus
        .par_iter()
        .map(|fam| one_ratio(fam, true))
        .collect::<Result<_>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0f64, f64::max);
    let refined_max_ratio = refined.iter().copied().fold(0.0f64, f64::max);
    let relative_change = if refined_max_ratio == 0.0 {
        0.0
    } else {
        (refined_max_ratio - max_ratio).abs() / refined_max_ratio
    };
    Ok(RatioReport { ratios, max_ratio, refined_max_ratio, relative_change })
}

/// Per-member diagnostics of the slice-trace suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceTraceRow {
    /// L^(n-d) norm of Hf on (0,1).
    pub lnd_norm: f64,
    /// max over the grid of |(Hf)^(i)(t)| t^(i + 1/(n-d)) for i = 0..=m.
    pub derivative_sups: Vec<f64>,
    /// Trace-side value: Z-norm of Hf raised to the m-th power (the m-power
    /// convexified reading of the trace profile (Hf)^m; the literal Z-norm
    /// when m = 1).
    pub z_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceTraceReport {
    pub kappa: f64,
    pub alpha: f64,
    pub radius: f64,
    pub z: NormSpec,
    /// Fixed corpus order.
    pub rows: Vec<SliceTraceRow>,
    pub lnd_sup: f64,
    pub derivative_sup: f64,
    pub z_sup: f64,
}

/// Artifact default for the slice-trace exponent: any value above n works.
pub fn default_kappa(params: &SobolevParams) -> f64 {
    params.n as f64 + 1.0
}

/// Artifact default for the interpolation exponent: the admissible interval
/// is (0, 1/(2m(n-d))) and nothing in the theory prefers a point of it.
pub fn default_alpha(params: &SobolevParams) -> f64 {
    1.0 / (4.0 * params.m as f64 * (params.n as f64 - params.d))
}

/// Slice-trace diagnostic suite: uniform boundedness of ||Hf||_(L^(n-d))
/// over the corpus, the weighted derivative bounds, and the candidate
/// target norm Z applied to the trace side. A Z whose sup grows along an
/// enriched corpus cannot serve as a uniform trace target.
pub fn lemma_h_suite(
    params: &SobolevParams,
    radius: f64,
    kappa: f64,
    alpha: f64,
    corpus: &[StepFunction],
    z: &NormSpec,
) -> Result<SliceTraceReport> {
    let nf = params.n as f64;
    let mf = params.m as f64;
    if params.d.fract() != 0.0 || params.d >= nf - mf {
        return Err(Error::InadmissibleRegime(format!(
            "slice-trace constructions need integer d < n - m, got d = {} with n - m = {}",
            params.d,
            nf - mf
        )));
    }
    if !(kappa > nf) {
        return Err(Error::InvalidParams(format!("kappa must exceed n = {nf}, got {kappa}")));
    }
    let alpha_cap = 1.0 / (2.0 * mf * (nf - params.d));
    if !(alpha > 0.0) || alpha >= alpha_cap {
        return Err(Error::InvalidParams(format!(
            "alpha must lie in (0, {alpha_cap}), got {alpha}"
        )));
    }
    for f in corpus {
        hardy_ops::check_in_lambda(params, f)?;
    }
    let rows: Vec<SliceTraceRow> = corpus
        .par_iter()
        .map(|f| -> Result<SliceTraceRow> {
            let report = hardy_ops::h_operator_report(params, radius, f)?;
            let hf = hardy_ops::h_derivative(params, radius, f, 0)?;
            let z_norm = norms::norm_evaluable(z, &hf)?;
            Ok(SliceTraceRow {
                lnd_norm: report.lnd_norm,
                derivative_sups: report.weighted_derivative_sups,
                z_value: z_norm.powi(params.m as i32),
            })
        })
        .collect::<Result<_>>()?;
    let lnd_sup = rows.iter().map(|r| r.lnd_norm).fold(0.0f64, f64::max);
    let derivative_sup = rows
        .iter()
        .flat_map(|r| r.derivative_sups.iter().copied())
        .fold(0.0f64, f64::max);
    let z_sup = rows.iter().map(|r| r.z_value).fold(0.0f64, f64::max);
    Ok(SliceTraceReport {
        kappa,
        alpha,
        radius,
        z: z.clone(),
        rows,
        lnd_sup,
        derivative_sup,
        z_sup,
    })
}

/// Unit-ball corpus of truncated power profiles f_e(t) = min(t, e)^(-1/(n-d))
/// normalized in L^(n-d); sharper truncations enrich the corpus toward the
/// profile that separates candidate targets.
pub fn lambda_corpus(
    params: &SobolevParams,
    truncations: &[f64],
    grid_size: usize,
) -> Result<Vec<StepFunction>> {
    let q = params.n as f64 - params.d;
    if q <= 0.0 {
        return Err(Error::InadmissibleRegime(format!(
            "corpus profiles need d < n, got d = {}",
            params.d
        )));
    }
    let cuts = graded_cuts(grid_size.max(8));
    truncations
        .iter()
        .map(|&e| {
            if !(e > 0.0) || e >= 1.0 {
                return Err(Error::InvalidParams(format!(
                    "truncation must lie in (0,1), got {e}"
                )));
            }
            let f = sample_profile(&cuts, |t| t.max(e).powf(-1.0 / q));
            let norm_q = f.pow(q).integral().powf(1.0 / q);
            Ok(f.scale(1.0 / norm_q))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentDiagnostic {
    pub truncations: Vec<f64>,
    pub z_values: Vec<f64>,
    pub lnd_norms: Vec<f64>,
    /// Per-member surrogate for the embedding constant L^(n-d) -> Z:
    /// z_value^(1/m) / lnd_norm. Bounded when the embedding holds (and
    /// identically one when Z is Lebesgue(n-d) itself), growing without
    /// bound along the enrichment when it fails.
    pub embedding_ratios: Vec<f64>,
    /// True when the embedding-ratio sequence keeps growing along the
    /// enrichment (non-decreasing, total growth beyond grid noise): Z then
    /// rejects the uniform trace bound.
    pub rejects_target: bool,
}

/// Run the slice-trace suite on a canonical enrichment sequence and read off
/// whether the candidate Z survives.
pub fn enrichment_diagnostic(
    params: &SobolevParams,
    radius: f64,
    kappa: f64,
    alpha: f64,
    z: &NormSpec,
    levels: usize,
) -> Result<EnrichmentDiagnostic> {
    if levels < 2 {
        return Err(Error::InvalidParams("enrichment needs at least two levels".into()));
    }
    let truncations: Vec<f64> = (0..levels).map(|k| 0.25f64.powi(k as i32 + 2)).collect();
    let corpus = lambda_corpus(params, &truncations, 1024)?;
    let report = lemma_h_suite(params, radius, kappa, alpha, &corpus, z)?;
    let z_values: Vec<f64> = report.rows.iter().map(|r| r.z_value).collect();
    let lnd_norms: Vec<f64> = report.rows.iter().map(|r| r.lnd_norm).collect();
    let inv_m = 1.0 / params.m as f64;
    let embedding_ratios: Vec<f64> = z_values
        .iter()
        .zip(&lnd_norms)
        .map(|(&z, &l)| if l > 0.0 { z.powf(inv_m) / l } else { 0.0 })
        .collect();
    let first = embedding_ratios.first().copied().unwrap_or(0.0);
    let last = embedding_ratios.last().copied().unwrap_or(0.0);
    let monotone = embedding_ratios
        .windows(2)
        .all(|w| w[1] >= w[0] * (1.0 - 1e-6));
    let rejects_target = first > 0.0 && monotone && last >= 1.10 * first;
    Ok(EnrichmentDiagnostic {
        truncations,
        z_values,
        lnd_norms,
        embedding_ratios,
        rejects_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn classical_targets_match_the_table() {
        let t = classical_target(3, 1, 2.0, 2.0).unwrap();
        assert_eq!(t.predicted, NormSpec::lorentz(4.0, 2.0));
        assert_eq!(t.source, PredictionSource::Classical);
        assert_eq!(t.domain, NormSpec::lebesgue(2.0));

        let t = classical_target(3, 1, 2.0, 3.0).unwrap();
        assert_eq!(t.predicted, NormSpec::lorentz_zygmund(f64::INFINITY, 3.0, -1.0));

        let t = classical_target(3, 1, 2.0, 4.0).unwrap();
        assert_eq!(t.predicted, NormSpec::lebesgue(f64::INFINITY));

        let t = classical_target(3, 1, 2.0, f64::INFINITY).unwrap();
        assert_eq!(t.predicted, NormSpec::lebesgue(f64::INFINITY));

        // p = 1 endpoint agrees with the p -> 1 limit of the general formula
        let t = classical_target(3, 2, 2.0, 1.0).unwrap();
        assert_eq!(t.predicted, NormSpec::lorentz(2.0, 1.0));
        assert_eq!(t.source, PredictionSource::EndpointFast);
        let t = classical_target(3, 1, 2.0, 1.0).unwrap();
        assert_eq!(t.predicted, NormSpec::lorentz(1.0, 1.0));
        assert_eq!(t.source, PredictionSource::EndpointFast);
    }

    #[test]
    fn classical_target_rejects_the_slow_boundary() {
        let err = classical_target(3, 1, 1.0, 2.0).unwrap_err();
        match err {
            Error::InadmissibleRegime(msg) => {
                assert!(msg.contains("(n-d)/m"), "message should cite the threshold: {msg}")
            }
            other => panic!("expected InadmissibleRegime, got {other:?}"),
        }
        assert!(classical_target(3, 1, 1.0, 2.5).is_ok());
        assert!(classical_target(3, 1, 1.0, 1.0).is_err());
    }

    #[test]
    fn slow_endpoint_pair_at_the_documented_parameters() {
        let pair = slow_endpoint_targets(3, 1, 1).unwrap();
        assert_eq!(pair.domain, NormSpec::lorentz(2.0, 1.0));
        assert_eq!(pair.slice_prediction.predicted, NormSpec::lebesgue(2.0));
        assert_eq!(pair.radial_prediction.predicted, NormSpec::lorentz(2.0, 1.0));
        assert_eq!(pair.slice_prediction.source, PredictionSource::SliceSharpness);
        assert_eq!(pair.radial_prediction.source, PredictionSource::RadialImprovement);

        let pair = slow_endpoint_targets(4, 1, 2).unwrap();
        assert_eq!(pair.slice_prediction.predicted, NormSpec::lebesgue(2.0));
        assert_eq!(pair.radial_prediction.predicted, NormSpec::lorentz(2.0, 1.0));

        assert!(matches!(
            slow_endpoint_targets(3, 1, 2),
            Err(Error::InadmissibleRegime(_))
        ));
    }

    #[test]
    fn iterated_profile_of_constant_source_matches_closed_form() {
        // m = 1, n = 3: g(t) = 3 (V^(1/3) - t^(1/3)) for constant source 1
        let params = SobolevParams::new(3, 1, 2.0).unwrap();
        let f = StepFunction::constant(1.0);
        let family = necessity_family(&f, &params, 0.4).unwrap();
        let v = family.volume;
        for t in [1e-6, 1e-3, 0.01, 0.5 * v, 0.9 * v] {
            let expected = 3.0 * (v.powf(1.0 / 3.0) - t.powf(1.0 / 3.0));
            assert_relative_eq!(family.iterated_profile(t), expected, max_relative = 1e-10);
        }
        assert_eq!(family.iterated_profile(v), 0.0);
        assert_eq!(family.iterated_profile(1.5 * v), 0.0);
        assert!(family.g.is_non_increasing());
        assert!(family.substitution.is_non_increasing());
    }

    #[test]
    fn iterated_profile_of_zero_source_vanishes() {
        let params = SobolevParams::new(3, 1, 1.0).unwrap();
        let f = StepFunction::constant(0.0);
        let family = necessity_family(&f, &params, 0.3).unwrap();
        assert!(family.g.is_zero());
        assert!(family.substitution.is_zero());
        assert_eq!(family.min_pointwise_ratio(64), 0.0);
    }

    #[test]
    fn indicator_source_gives_two_piece_profile() {
        // f = indicator of (0, a): for m = 1 the profile integrates
        // r^(-1+1/n) only below a V, so it has a kink there and vanishes
        // beyond, while staying strictly positive before
        let params = SobolevParams::new(3, 1, 2.0).unwrap();
        let a = 0.25;
        let f = StepFunction::indicator(a).unwrap();
        let family = necessity_family(&f, &params, 0.4).unwrap();
        let v = family.volume;
        let third: f64 = 1.0 / 3.0;
        for t in [1e-4, 0.1 * a * v, 0.9 * a * v] {
            let expected = 3.0 * ((a * v).powf(third) - t.powf(third));
            assert_relative_eq!(family.iterated_profile(t), expected, max_relative = 1e-10);
        }
        assert_eq!(family.iterated_profile(a * v), 0.0);
        assert_eq!(family.iterated_profile(0.5 * (a * v + v)), 0.0);
    }

    #[test]
    fn second_order_iterated_profile_matches_fubini_form() {
        // m = 2: the kernel collapses to (r - t), checked against direct
        // two-piece integration of a constant source
        let params = SobolevParams::new(4, 2, 1.0).unwrap();
        let f = StepFunction::constant(2.0);
        let family = necessity_family(&f, &params, 0.25).unwrap();
        let v = family.volume;
        let beta = 0.5; // m/n
        let t = 0.3 * v;
        // INT_t^V 2 r^(beta-2) (r - t) dr, done with exact antiderivatives
        let i1 = (v.powf(beta) - t.powf(beta)) / beta;
        let i2 = (v.powf(beta - 1.0) - t.powf(beta - 1.0)) / (beta - 1.0);
        let expected = 2.0 * (i1 - t * i2);
        assert_relative_eq!(family.iterated_profile(t), expected, max_relative = 1e-10);
    }

    #[test]
    fn min_ratio_is_positive_and_stable_for_generic_sources() {
        let params = SobolevParams::new(3, 1, 2.0).unwrap();
        let f = StepFunction::new(vec![0.2, 0.7, 1.0], vec![2.0, 1.0, 0.25]).unwrap();
        let family = necessity_family(&f, &params, 0.4).unwrap();
        let base = family.min_pointwise_ratio(256);
        assert!(base > 0.0, "ratio should be positive, got {base}");
        let fine = family.min_pointwise_ratio(512);
        assert!(
            (fine - base).abs() <= 0.10 * base.max(fine),
            "refinement moved the ratio too much: {base} vs {fine}"
        );
    }

    #[test]
    fn verify_inequality_reports_stable_finite_ratio() {
        let params = SobolevParams::new(3, 1, 2.0).unwrap();
        let measure = DiscreteMeasure::mu1(3, 2.0, 0.5).unwrap();
        let corpus: Vec<ExtremalFamily> = [
            StepFunction::constant(1.0),
            StepFunction::new(vec![0.3, 1.0], vec![2.0, 0.5]).unwrap(),
        ]
        .iter()
        .map(|f| necessity_family_with_grid(f, &params, 0.4, 512).unwrap())
        .collect();
        let report = verify_inequality(
            &params,
            &NormSpec::lebesgue(2.0),
            &NormSpec::lorentz(4.0, 2.0),
            &measure,
            &corpus,
        )
        .unwrap();
        assert!(report.max_ratio.is_finite() && report.max_ratio > 0.0);
        assert!(report.relative_change < 0.05, "unstable: {report:?}");
        // weaker targets can only shrink the left side, up to the embedding
        // constant between the two norms on (0,1)
        let weaker = verify_inequality(
            &params,
            &NormSpec::lebesgue(2.0),
            &NormSpec::lebesgue(1.0),
            &measure,
            &corpus,
        )
        .unwrap();
        assert!(weaker.max_ratio <= 2.0 * report.max_ratio);

        let zero_corpus =
            vec![necessity_family_with_grid(&StepFunction::constant(0.0), &params, 0.4, 512)
                .unwrap()];
        let zero = verify_inequality(
            &params,
            &NormSpec::lebesgue(2.0),
            &NormSpec::lorentz(4.0, 2.0),
            &measure,
            &zero_corpus,
        )
        .unwrap();
        assert_eq!(zero.max_ratio, 0.0);
    }

    #[test]
    fn verify_inequality_rejects_non_radial_measures() {
        let params = SobolevParams::new(3, 1, 1.0).unwrap();
        let measure = DiscreteMeasure::hyperplane(3, 1).unwrap();
        let corpus = vec![];
        let err = verify_inequality(
            &params,
            &NormSpec::lebesgue(2.0),
            &NormSpec::lebesgue(2.0),
            &measure,
            &corpus,
        )
        .unwrap_err();
        assert!(matches!(err, Error::RegimeMismatch(_)));
    }

    #[test]
    fn slice_trace_suite_bounds_and_separates_targets() {
        let params = SobolevParams::new(4, 1, 1.0).unwrap();
        let kappa = default_kappa(&params);
        let alpha = default_alpha(&params);
        let q = 3.0; // n - d
        let corpus = lambda_corpus(&params, &[0.25, 0.05, 0.01, 0.002], 512).unwrap();
        let bounded = lemma_h_suite(
            &params,
            0.5,
            kappa,
            alpha,
            &corpus,
            &NormSpec::lebesgue(q),
        )
        .unwrap();
        assert!(bounded.lnd_sup.is_finite());
        assert!(bounded.derivative_sup.is_finite());
        // the Lebesgue(n-d) values stay in a band while Lorentz(n-d, 1)
        // grows along the same enrichment
        let z_first = bounded.rows.first().unwrap().z_value;
        let z_last = bounded.rows.last().unwrap().z_value;
        assert!(z_last <= 2.0 * z_first, "Lebesgue side should stay banded: {bounded:?}");

        let diag = enrichment_diagnostic(
            &params,
            0.5,
            kappa,
            alpha,
            &NormSpec::lorentz(q, 1.0),
            5,
        )
        .unwrap();
        assert!(diag.rejects_target, "Lorentz(n-d,1) should be rejected: {diag:?}");
        let keep = enrichment_diagnostic(
            &params,
            0.5,
            kappa,
            alpha,
            &NormSpec::lebesgue(q),
            5,
        )
        .unwrap();
        assert!(!keep.rejects_target, "Lebesgue(n-d) should survive: {keep:?}");
    }

    #[test]
    fn slice_trace_suite_validates_parameters() {
        let fast = SobolevParams::new(3, 1, 2.0).unwrap();
        assert!(matches!(
            lemma_h_suite(&fast, 0.5, 4.0, 0.05, &[], &NormSpec::lebesgue(1.0)),
            Err(Error::InadmissibleRegime(_))
        ));
        let params = SobolevParams::new(4, 1, 1.0).unwrap();
        assert!(lemma_h_suite(&params, 0.5, 3.0, 0.05, &[], &NormSpec::lebesgue(3.0)).is_err());
        assert!(lemma_h_suite(&params, 0.5, 5.0, 0.9, &[], &NormSpec::lebesgue(3.0)).is_err());
        let too_big = StepFunction::constant(4.0);
        assert!(matches!(
            lemma_h_suite(&params, 0.5, 5.0, 0.05, &[too_big], &NormSpec::lebesgue(3.0)),
            Err(Error::NotInLambda(_))
        ));
    }

    #[test]
    fn lambda_corpus_members_are_admissible() {
        let params = SobolevParams::new(4, 1, 1.0).unwrap();
        let corpus = lambda_corpus(&params, &[0.1, 0.01], 256).unwrap();
        for f in &corpus {
            hardy_ops::check_in_lambda(&params, f).unwrap();
            let q = 3.0;
            assert_relative_eq!(f.pow(q).integral().powf(1.0 / q), 1.0, max_relative = 1e-9);
        }
    }
}
