//! Shared generators and the randomized norm-axiom battery used by the
//! integration suites. Everything is seeded for reproducibility.
#![allow(dead_code)]

use hardy_reduce_core::norms::{self, NormSpec};
use hardy_reduce_core::params::SobolevParams;
use hardy_reduce_core::stepfn::StepFunction;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random step function with up to `max_pieces` pieces and values in
/// [0, max_value]; roughly one piece in seven is exactly zero.
pub fn random_step<R: Rng>(rng: &mut R, max_pieces: usize, max_value: f64) -> StepFunction {
    let pieces = rng.gen_range(1..=max_pieces.max(1));
    let mut cuts: Vec<f64> = (0..pieces - 1)
        .map(|_| rng.gen_range(0.005..0.995))
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    cuts.push(1.0);
    let values = cuts
        .iter()
        .map(|_| {
            if rng.gen_bool(1.0 / 7.0) {
                0.0
            } else {
                rng.gen_range(0.0..max_value)
            }
        })
        .collect();
    StepFunction::new(cuts, values).expect("generator output is valid")
}

pub fn random_non_increasing<R: Rng>(
    rng: &mut R,
    max_pieces: usize,
    max_value: f64,
) -> StepFunction {
    random_step(rng, max_pieces, max_value).rearrange()
}

/// Rebuild `f` with its pieces in a random order: same multiset of
/// (length, value) pairs, hence the same rearrangement.
pub fn equimeasurable_shuffle<R: Rng>(f: &StepFunction, rng: &mut R) -> StepFunction {
    let mut segments: Vec<(f64, f64)> = f.pieces().map(|(lo, hi, v)| (hi - lo, v)).collect();
    segments.shuffle(rng);
    let mut cuts = Vec::with_capacity(segments.len());
    let mut acc = 0.0;
    for &(len, _) in &segments {
        acc += len;
        cuts.push(acc);
    }
    *cuts.last_mut().unwrap() = 1.0;
    let values = segments.iter().map(|&(_, v)| v).collect();
    StepFunction::new(cuts, values).expect("shuffled segments are valid")
}

/// One representative of every norm-spec variant, each passing validate().
/// The `heavy` flag marks ascent-backed norms whose evaluation dominates
/// runtime; batch sizing uses it.
pub struct PoolEntry {
    pub spec: NormSpec,
    pub heavy: bool,
}

pub fn spec_pool() -> Vec<PoolEntry> {
    let params = SobolevParams::new(3, 1, 2.0).unwrap();
    let light = |spec: NormSpec| PoolEntry { spec, heavy: false };
    let heavy = |spec: NormSpec| PoolEntry { spec, heavy: true };
    let pool = vec![
        light(NormSpec::lebesgue(1.0)),
        light(NormSpec::lebesgue(2.0)),
        light(NormSpec::lebesgue(f64::INFINITY)),
        light(NormSpec::lorentz(4.0, 2.0)),
        light(NormSpec::lorentz(2.0, 1.0)),
        light(NormSpec::lorentz_maximal(2.0, 3.0)),
        light(NormSpec::lorentz_zygmund(f64::INFINITY, 2.0, -1.0)),
        light(NormSpec::lorentz_zygmund(3.0, 2.0, 0.5)),
        light(NormSpec::PowerTransform {
            base: Box::new(NormSpec::lebesgue(2.0)),
            alpha: 2.0,
        }),
        light(NormSpec::MaximalTransform {
            base: Box::new(NormSpec::lebesgue(2.0)),
            alpha: 1.5,
        }),
        heavy(NormSpec::associate(NormSpec::lorentz(4.0, 2.0))),
        heavy(NormSpec::OptimalTarget {
            base: Box::new(NormSpec::lebesgue(2.0)),
            params,
        }),
        light(NormSpec::Substitution {
            base: Box::new(NormSpec::lorentz(4.0, 2.0)),
            n: 3,
            d: 2.0,
        }),
    ];
    for entry in &pool {
        entry.spec.validate().expect("pool member must be admissible");
    }
    pool
}

fn check(ok: bool, label: &str, detail: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(format!("{label}: {detail}"))
    }
}

/// One randomized round of the function-norm axioms:
/// definiteness, homogeneity and the (quasi-)triangle inequality; lattice
/// monotonicity; monotone convergence along truncations; finiteness on
/// indicators; the local integral bound with the constant coming from the
/// fundamental function at full length; and equality on equimeasurable
/// inputs.
///
/// `invariance_tol` is the relative tolerance for the equimeasurability
/// check. Closed-form norms reproduce shuffled inputs to near machine
/// precision; ascent-backed ones re-run a search whose grid follows the
/// input cuts, so their two evaluations agree only to search accuracy.
pub fn check_norm_axioms<R: Rng>(
    spec: &NormSpec,
    rng: &mut R,
    invariance_tol: f64,
) -> Result<(), String> {
    let f = random_step(rng, 24, 5.0);
    let g = random_step(rng, 24, 5.0);
    let nf = norms::norm(spec, &f).map_err(|e| format!("norm(f): {e}"))?;
    let ng = norms::norm(spec, &g).map_err(|e| format!("norm(g): {e}"))?;

    // definiteness
    if f.is_zero() {
        check(nf == 0.0, "definiteness", format!("zero f, norm {nf}"))?;
    } else {
        check(nf > 0.0, "definiteness", format!("nonzero f, norm {nf}"))?;
    }

    // homogeneity
    let lambda = rng.gen_range(0.2..5.0);
    let n_scaled = norms::norm(spec, &f.scale(lambda)).map_err(|e| e.to_string())?;
    check(
        (n_scaled - lambda * nf).abs() <= 1e-8 * (1.0 + lambda * nf),
        "homogeneity",
        format!("lambda {lambda}: {n_scaled} vs {}", lambda * nf),
    )?;

    // triangle, with the variant's documented constant
    let c = spec.triangle_constant();
    let n_sum = norms::norm(spec, &f.add(&g)).map_err(|e| e.to_string())?;
    check(
        n_sum <= c * (nf + ng) * (1.0 + 1e-9) + 1e-12,
        "triangle",
        format!("{n_sum} > {c} * ({nf} + {ng})"),
    )?;

    // lattice monotonicity: f <= f + g pointwise
    check(
        nf <= n_sum * (1.0 + 1e-9) + 1e-12,
        "monotonicity",
        format!("norm(f) = {nf} > norm(f + g) = {n_sum}"),
    )?;

    // monotone convergence along upward truncations
    let top = f.max_value();
    if top > 0.0 {
        let mut previous = 0.0;
        for k in 1..=4 {
            let level = top * k as f64 / 4.0;
            let nk = norms::norm(spec, &f.min_with(level)).map_err(|e| e.to_string())?;
            check(
                nk >= previous * (1.0 - 1e-9),
                "monotone convergence",
                format!("truncation at {level} dropped the norm: {previous} -> {nk}"),
            )?;
            previous = nk;
        }
        check(
            (previous - nf).abs() <= 1e-8 * (1.0 + nf),
            "monotone convergence",
            format!("limit {previous} missed norm {nf}"),
        )?;
    }

    // indicators: finiteness, and the integral bound with the constant
    // 1 / ||chi_(0,1)|| from quasi-concavity of the fundamental function
    let a = rng.gen_range(0.05..1.0);
    let chi = StepFunction::indicator(a).map_err(|e| e.to_string())?;
    let n_chi = norms::norm(spec, &chi).map_err(|e| e.to_string())?;
    check(
        n_chi.is_finite() && n_chi > 0.0,
        "indicator finiteness",
        format!("||chi_(0,{a})|| = {n_chi}"),
    )?;
    let n_one = norms::norm(spec, &StepFunction::constant(1.0)).map_err(|e| e.to_string())?;
    check(
        a * n_one <= n_chi * (1.0 + 1e-6),
        "integral bound",
        format!("a {a}: {} > {n_chi}", a * n_one),
    )?;

    // rearrangement invariance
    let shuffled = equimeasurable_shuffle(&f, rng);
    let n_shuffled = norms::norm(spec, &shuffled).map_err(|e| e.to_string())?;
    check(
        (n_shuffled - nf).abs() <= invariance_tol * (1.0 + nf),
        "rearrangement invariance",
        format!("{nf} vs {n_shuffled}"),
    )?;
    Ok(())
}
