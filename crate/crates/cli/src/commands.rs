//! One handler per subcommand. Handlers return `Outcome::Divergent` when
//! the run succeeded but the primary quantity flags divergence; main turns
//! that into exit code 3 under `--strict`.

use crate::config::{Echo, FileConfig};
use crate::report::{provenance, write_json, write_text, Provenance};
use crate::{
    BestConstantArgs, FrostmanArgs, HardyArgs, KFunctionalArgs, NormArgs, RearrangeArgs,
    TargetArgs, VerifyEmbeddingArgs,
};
use anyhow::{bail, Context};
use hardy_reduce_core::best_constant::{self, Verdict};
use hardy_reduce_core::embed_verify::{
    self, classical_target, necessity_family_with_grid, ExtremalFamily, SlowEndpointTargets,
    TargetPrediction,
};
use hardy_reduce_core::frostman::DiscreteMeasure;
use hardy_reduce_core::grids::{graded_cuts, log_grid};
use hardy_reduce_core::hardy_ops::{self, OperatorId};
use hardy_reduce_core::kfunc::{curve_to_csv, k_curve, PairSpec};
use hardy_reduce_core::norms::{self, NormSpec};
use hardy_reduce_core::params::{Regime, SobolevParams};
use hardy_reduce_core::stepfn::StepFunction;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs::File;
use std::path::{Path, PathBuf};

pub enum Outcome {
    Clean,
    Divergent(String),
}

fn read_step(path: &Path) -> anyhow::Result<StepFunction> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(StepFunction::from_csv(file)?)
}

fn step_csv(f: &StepFunction) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    f.to_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

pub fn rearrange(args: RearrangeArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let input: PathBuf = cfg.require(args.input, "input")?;
    let output: Option<PathBuf> = cfg.merge(args.output, "output")?;
    let mut echo = Echo::default();
    echo.put("input", input.display());
    echo.put_opt("output", output.as_ref().map(|p| p.display().to_string()));
    provenance("rearrange", None, echo);
    let star = read_step(&input)?.rearrange();
    write_text(output.as_deref(), &step_csv(&star)?)?;
    Ok(Outcome::Clean)
}

#[derive(Serialize)]
struct NormReport {
    provenance: Provenance,
    spec: String,
    value: f64,
}

pub fn norm(args: NormArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let spec_text: String = cfg.require(args.spec, "spec")?;
    let input: PathBuf = cfg.require(args.input, "input")?;
    let out: Option<PathBuf> = cfg.merge(args.out, "out")?;
    let spec = NormSpec::parse(&spec_text)?;
    let mut echo = Echo::default();
    echo.put("spec", &spec);
    echo.put("input", input.display());
    let p = provenance("norm", None, echo);
    let value = norms::norm(&spec, &read_step(&input)?)?;
    match out {
        Some(path) => write_json(
            Some(&path),
            &NormReport { provenance: p, spec: spec.to_string(), value },
        )?,
        None => println!("{value}"),
    }
    if value.is_finite() {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Divergent(format!("norm `{spec}` is {value}")))
    }
}

pub fn hardy(args: HardyArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let op_text: String = cfg.require(args.op, "op")?;
    let n: u32 = cfg.require(args.n, "n")?;
    let m: u32 = cfg.require(args.m, "m")?;
    let d: f64 = cfg.require(args.d, "d")?;
    let input: PathBuf = cfg.require(args.input, "input")?;
    let grid: usize = cfg.merge(args.grid, "grid")?.unwrap_or(1024);
    let output: Option<PathBuf> = cfg.merge(args.output, "output")?;
    let op = OperatorId::parse(&op_text)?;
    let params = SobolevParams::new(n, m, d)?;
    let mut echo = Echo::default();
    echo.put("op", op);
    echo.put("n", n);
    echo.put("m", m);
    echo.put("d", d);
    echo.put("grid", grid);
    echo.put("input", input.display());
    provenance("hardy", None, echo);
    let image = hardy_ops::apply(&op, &params, &read_step(&input)?)?;
    let sampled = image.sample_to_step(&graded_cuts(grid))?;
    write_text(output.as_deref(), &step_csv(&sampled)?)?;
    if sampled.max_value().is_finite() {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Divergent(format!("operator {op} image is unbounded on the grid")))
    }
}

pub fn kfunctional(args: KFunctionalArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let left: String = cfg.require(args.left, "left")?;
    let right: String = cfg.require(args.right, "right")?;
    let input: PathBuf = cfg.require(args.input, "input")?;
    let depth: u32 = cfg.merge(args.depth, "depth")?.unwrap_or(48);
    let t_lo: f64 = cfg.merge(args.t_lo, "t-lo")?.unwrap_or(1e-6);
    let t_hi: f64 = cfg.merge(args.t_hi, "t-hi")?.unwrap_or(1e2);
    let per_decade: usize = cfg.merge(args.per_decade, "per-decade")?.unwrap_or(64);
    let output: Option<PathBuf> = cfg.merge(args.output, "output")?;
    let pair = PairSpec::new(NormSpec::parse(&left)?, NormSpec::parse(&right)?)?;
    let mut echo = Echo::default();
    echo.put("left", pair.left());
    echo.put("right", pair.right());
    echo.put("depth", depth);
    echo.put("t-lo", t_lo);
    echo.put("t-hi", t_hi);
    echo.put("per-decade", per_decade);
    echo.put("input", input.display());
    provenance("kfunctional", None, echo);
    let ts = log_grid(t_lo, t_hi, per_decade);
    let curve = k_curve(&read_step(&input)?, &pair, &ts, depth)?;
    write_text(output.as_deref(), &curve_to_csv(&curve))?;
    let finite = curve.definition.iter().chain(&curve.holmstedt).all(|v| v.is_finite());
    if finite {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Divergent("K-functional curve has non-finite entries".into()))
    }
}

#[derive(Serialize)]
struct EstimateReport {
    provenance: Provenance,
    estimate: best_constant::BestConstantEstimate,
}

#[derive(Serialize)]
struct StudyReport {
    provenance: Provenance,
    study: best_constant::RefinementStudy,
}

pub fn best_constant_cmd(args: BestConstantArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let op = OperatorId::parse(&cfg.require(args.op, "op")?)?;
    let n: u32 = cfg.require(args.n, "n")?;
    let m: u32 = cfg.require(args.m, "m")?;
    let d: f64 = cfg.require(args.d, "d")?;
    let domain = NormSpec::parse(&cfg.require(args.domain, "domain")?)?;
    let target = NormSpec::parse(&cfg.require(args.target, "target")?)?;
    let grid: usize = cfg.merge(args.grid, "grid")?.unwrap_or(4096);
    let budget: usize = cfg.merge(args.budget, "budget")?.unwrap_or(500);
    let seed: u64 = cfg.require(args.seed, "seed")?;
    let grids_text: Option<String> = cfg.merge(args.grids, "grids")?;
    let out: Option<PathBuf> = cfg.merge(args.out, "out")?;
    let params = SobolevParams::new(n, m, d)?;

    let mut echo = Echo::default();
    echo.put("op", op);
    echo.put("n", n);
    echo.put("m", m);
    echo.put("d", d);
    echo.put("domain", &domain);
    echo.put("target", &target);
    echo.put("budget", budget);
    match &grids_text {
        Some(g) => echo.put("grids", g),
        None => echo.put("grid", grid),
    }

    if let Some(text) = grids_text {
        let grids: Vec<usize> = text
            .split(',')
            .map(|s| s.trim().parse().context("bad grid list entry"))
            .collect::<anyhow::Result<_>>()?;
        let p = provenance("best-constant", Some(seed), echo);
        let study =
            best_constant::refinement_study(&op, &params, &domain, &target, &grids, budget, seed)?;
        let verdict = study.verdict;
        write_json(out.as_deref(), &StudyReport { provenance: p, study })?;
        return if verdict == Verdict::Diverging {
            Ok(Outcome::Divergent("refinement schedule keeps growing".into()))
        } else {
            Ok(Outcome::Clean)
        };
    }
    let p = provenance("best-constant", Some(seed), echo);
    let estimate = best_constant::estimate(&op, &params, &domain, &target, grid, budget, seed)?;
    let constant = estimate.constant;
    write_json(out.as_deref(), &EstimateReport { provenance: p, estimate })?;
    if constant.is_finite() {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Divergent(format!("estimated constant is {constant}")))
    }
}

#[derive(Serialize)]
struct FrostmanCliReport {
    provenance: Provenance,
    report: hardy_reduce_core::frostman::FrostmanReport,
}

pub fn frostman(args: FrostmanArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let measure_text: Option<String> = cfg.merge(args.measure, "measure")?;
    let input: Option<PathBuf> = cfg.merge(args.input, "input")?;
    let d: f64 = cfg.require(args.d, "d")?;
    let centers: usize = cfg.merge(args.centers, "centers")?.unwrap_or(64);
    let radii: usize = cfg.merge(args.radii, "radii")?.unwrap_or(48);
    let out: Option<PathBuf> = cfg.merge(args.out, "out")?;

    let mut echo = Echo::default();
    echo.put("d", d);
    echo.put("centers", centers);
    echo.put("radii", radii);
    let mu = match (measure_text, input) {
        (Some(text), None) => {
            let n: u32 = cfg.require(args.n, "n")?;
            echo.put("measure", &text);
            echo.put("n", n);
            DiscreteMeasure::parse(&text, n)?
        }
        (None, Some(path)) => {
            echo.put("input", path.display());
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            DiscreteMeasure::point_cloud_from_csv(file)?
        }
        _ => bail!("provide exactly one of `measure` (builder) or `input` (point CSV)"),
    };
    let p = provenance("frostman", None, echo);
    let report = hardy_reduce_core::frostman::frostman_norm(&mu, d, centers, radii)?;
    let upper = report.upper_norm;
    write_json(out.as_deref(), &FrostmanCliReport { provenance: p, report })?;
    if upper.is_finite() {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Divergent(format!("growth norm estimate is {upper}")))
    }
}

#[derive(Serialize)]
struct TargetReport {
    provenance: Provenance,
    prediction: TargetPrediction,
}

pub fn target(args: TargetArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let n: u32 = cfg.require(args.n, "n")?;
    let m: u32 = cfg.require(args.m, "m")?;
    let d: f64 = cfg.require(args.d, "d")?;
    let p_exp: f64 = cfg.require(args.p, "p")?;
    let out: Option<PathBuf> = cfg.merge(args.out, "out")?;
    let mut echo = Echo::default();
    echo.put("n", n);
    echo.put("m", m);
    echo.put("d", d);
    echo.put("p", p_exp);
    let p = provenance("target", None, echo);
    let prediction = classical_target(n, m, d, p_exp)?;
    println!("{}", prediction.predicted);
    eprintln!("source: {}", prediction.source);
    if out.is_some() {
        write_json(out.as_deref(), &TargetReport { provenance: p, prediction })?;
    }
    Ok(Outcome::Clean)
}

fn random_non_increasing<R: Rng>(rng: &mut R, max_pieces: usize, max_value: f64) -> StepFunction {
    let pieces = rng.gen_range(1..=max_pieces.max(1));
    let mut cuts: Vec<f64> = (0..pieces - 1).map(|_| rng.gen_range(0.01..0.99)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    cuts.push(1.0);
    let values = cuts.iter().map(|_| rng.gen_range(0.0..max_value)).collect();
    StepFunction::new(cuts, values).expect("generator output is valid").rearrange()
}

#[derive(Serialize)]
struct NecessityMember {
    pieces: usize,
    min_ratio: f64,
    refined_min_ratio: f64,
    relative_change: f64,
}

#[derive(Serialize)]
struct EmbeddingReport {
    provenance: Provenance,
    regime: Regime,
    domain: String,
    target: String,
    measure: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<TargetPrediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slow_endpoint: Option<SlowEndpointTargets>,
    necessity: Vec<NecessityMember>,
    inequality: embed_verify::RatioReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    enrichment: Option<embed_verify::EnrichmentDiagnostic>,
}

pub fn verify_embedding(args: VerifyEmbeddingArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let n: u32 = cfg.require(args.n, "n")?;
    let m: u32 = cfg.require(args.m, "m")?;
    let d: f64 = cfg.require(args.d, "d")?;
    let seed: u64 = cfg.require(args.seed, "seed")?;
    let radius: f64 = cfg.merge(args.radius, "radius")?.unwrap_or(0.4);
    let grid: usize = cfg.merge(args.grid, "grid")?.unwrap_or(1024);
    let corpus_size: usize = cfg.merge(args.corpus, "corpus")?.unwrap_or(20);
    let p_exp: Option<f64> = cfg.merge(args.p, "p")?;
    let out: Option<PathBuf> = cfg.merge(args.out, "out")?;
    let params = SobolevParams::new(n, m, d)?;
    let slow = params.regime() == Regime::Slow;

    // regime-dependent defaults: the fast regime checks the classical
    // domain/target pair, the slow regime the endpoint pair
    let endpoint_q = (n as f64 - d) / m as f64;
    let default_x = if slow {
        format!("lorentz:p={endpoint_q},q=1")
    } else {
        format!("lebesgue:p={}", p_exp.unwrap_or(2.0))
    };
    let x_text: String = cfg.merge(args.x, "x")?.unwrap_or(default_x);
    let x = NormSpec::parse(&x_text)?;
    let prediction = if slow {
        None
    } else {
        Some(classical_target(n, m, d, p_exp.unwrap_or(2.0))?)
    };
    let default_y = match &prediction {
        Some(t) => t.predicted.to_string(),
        None => format!("lorentz:p={endpoint_q},q=1"),
    };
    let y_text: String = cfg.merge(args.y, "y")?.unwrap_or(default_y);
    let y = NormSpec::parse(&y_text)?;
    let measure_text: String = cfg
        .merge(args.measure, "measure")?
        .unwrap_or_else(|| format!("mu1:d={d}"));
    let measure = DiscreteMeasure::parse(&measure_text, n)?;

    let mut echo = Echo::default();
    echo.put("n", n);
    echo.put("m", m);
    echo.put("d", d);
    echo.put("radius", radius);
    echo.put("grid", grid);
    echo.put("corpus", corpus_size);
    echo.put("x", &x);
    echo.put("y", &y);
    echo.put("measure", &measure_text);
    echo.put_opt("p", p_exp);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources: Vec<StepFunction> =
        (0..corpus_size).map(|_| random_non_increasing(&mut rng, 16, 4.0)).collect();
    let families: Vec<ExtremalFamily> = sources
        .iter()
        .map(|f| necessity_family_with_grid(f, &params, radius, grid))
        .collect::<hardy_reduce_core::error::Result<_>>()?;

    let necessity: Vec<NecessityMember> = families
        .iter()
        .map(|fam| {
            let base = fam.min_pointwise_ratio(256);
            let refined = fam.min_pointwise_ratio(512);
            let change = if refined == 0.0 { 0.0 } else { (refined - base).abs() / refined };
            NecessityMember {
                pieces: fam.source.num_pieces(),
                min_ratio: base,
                refined_min_ratio: refined,
                relative_change: change,
            }
        })
        .collect();

    let inequality = embed_verify::verify_inequality(&params, &x, &y, &measure, &families)?;

    let (slow_endpoint, enrichment) = if slow && d.fract() == 0.0 {
        let kappa: f64 =
            cfg.merge(args.kappa, "kappa")?.unwrap_or_else(|| embed_verify::default_kappa(&params));
        let alpha: f64 =
            cfg.merge(args.alpha, "alpha")?.unwrap_or_else(|| embed_verify::default_alpha(&params));
        let levels: usize = cfg.merge(args.levels, "levels")?.unwrap_or(4);
        let z_text: String = cfg
            .merge(args.z, "z")?
            .unwrap_or_else(|| format!("lebesgue:p={}", n as f64 - d));
        let z = NormSpec::parse(&z_text)?;
        echo.put("kappa", kappa);
        echo.put("alpha", alpha);
        echo.put("levels", levels);
        echo.put("z", &z);
        let pair = embed_verify::slow_endpoint_targets(n, m, d as u32)?;
        let diag =
            embed_verify::enrichment_diagnostic(&params, radius.min(0.5), kappa, alpha, &z, levels)?;
        (Some(pair), Some(diag))
    } else {
        (None, None)
    };

    let p = provenance("verify-embedding", Some(seed), echo);
    let report = EmbeddingReport {
        provenance: p,
        regime: params.regime(),
        domain: x.to_string(),
        target: y.to_string(),
        measure: measure_text,
        prediction,
        slow_endpoint,
        necessity,
        inequality,
        enrichment,
    };

    let mut flags: Vec<String> = Vec::new();
    if !report.inequality.max_ratio.is_finite() {
        flags.push("inequality ratio is non-finite".into());
    }
    if report.inequality.relative_change > 0.10 {
        flags.push(format!(
            "inequality ratio unstable under refinement ({:.3})",
            report.inequality.relative_change
        ));
    }
    for member in &report.necessity {
        if !(member.min_ratio > 0.0) || member.relative_change > 0.10 {
            flags.push("pointwise lower-bound ratio degenerate or unstable".into());
            break;
        }
    }
    if let Some(diag) = &report.enrichment {
        if diag.rejects_target {
            flags.push("candidate trace target rejected under corpus enrichment".into());
        }
    }
    write_json(out.as_deref(), &report)?;
    if flags.is_empty() {
        Ok(Outcome::Clean)
    } else {
        Ok(Outcome::Divergent(flags.join("; ")))
    }
}
