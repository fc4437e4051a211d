use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use game_core::eval::{
    adjusted_rand_index, generate_crossed_groups, kmeans, normalized_mutual_information,
    per_group_grassmann, per_group_subspace_error, default_ranks, relative_frobenius_error,
    rmse_on, ScoreNormalization, SyntheticSpec, DEFAULT_KMEANS_ITERS,
};
use game_core::io::{self, MatrixFile};
use game_core::linalg::GrassmannMetric;
use game_core::observation::{mask_block_rows, sample_uniform_mask, split_holdout};
use game_core::solver::{
    solve_game, solve_global_svt, step_size_from_accuracy, SolverConfig, SvtConfig,
};
use game_core::{DenseMatrix, GameError, GroupStructure, LabelVector, ObservationMask};

use crate::args::*;
use crate::manifest::Manifest;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        CliError::Input(format!("cannot create output directory {}: {e}", dir.display()))
    })
}

fn load_matrix(path: &Path) -> Result<MatrixFile> {
    Ok(io::read_matrix(path)?)
}

/// The observed set: an explicit mask file wins, then a mask implied by the
/// matrix file, then every cell.
fn load_mask(file: &MatrixFile, mask: Option<&Path>) -> Result<ObservationMask> {
    let (n, m) = file.matrix.shape();
    Ok(match (mask, &file.observed) {
        (Some(p), _) => io::read_mask(p, n, m)?,
        (None, Some(obs)) => obs.clone(),
        (None, None) => ObservationMask::full(n, m),
    })
}

fn load_groups(path: Option<&Path>, n: usize, allow_uncovered: bool) -> Result<GroupStructure> {
    let Some(path) = path else {
        return Err(CliError::Input(
            "no groups file given: every row must be covered by a category (pass --groups, or --baseline svt)"
                .into(),
        ));
    };
    match io::read_groups(path, n, allow_uncovered) {
        Err(GameError::Io { source, .. }) if source.kind() == ErrorKind::NotFound => {
            Err(CliError::Input(format!(
                "groups file {} not found: every row must be covered by a category",
                path.display()
            )))
        }
        other => Ok(other?),
    }
}

fn observed_std(x: &DenseMatrix, mask: &ObservationMask) -> f64 {
    let n = mask.len();
    if n < 2 {
        return 0.0;
    }
    let vals: Vec<f64> = mask.cells().iter().map(|&(i, j)| x.get(i, j)).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

fn calibrate_levels(
    x: &DenseMatrix,
    mask: &ObservationMask,
    groups: &GroupStructure,
    c: &Calibration,
) -> Result<(f64, Vec<f64>)> {
    let sigma = c.sigma.unwrap_or_else(|| observed_std(x, mask));
    let levels = groups.lambda_heuristic(mask, x.cols(), sigma, c.r, c.scale)?;
    Ok((sigma, levels))
}

fn category_map(groups: &GroupStructure, values: &[f64]) -> Map<String, Value> {
    groups.ids().zip(values).map(|(id, v)| (id.to_string(), json!(v))).collect()
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn complete(a: &CompleteArgs, manifest: &mut Manifest) -> Result<()> {
    let file = load_matrix(&a.matrix)?;
    let mask = load_mask(&file, a.mask.as_deref())?;
    let x = file.matrix.clone();
    let (n, m) = x.shape();

    // The baseline penalizes the whole matrix as one category.
    let groups = match a.baseline {
        Baseline::Game => load_groups(a.groups.as_deref(), n, a.allow_uncovered)?,
        Baseline::Svt => GroupStructure::single(n, "all")?,
    };

    let mut config = SolverConfig {
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        accelerate: !a.no_accelerate,
        restart: !a.no_restart,
        trunc_rank: a.trunc_rank,
        spikiness_alpha: a.spikiness,
        keep_factors: a.factors,
        seed: a.seed,
        ..Default::default()
    };
    let mut sigma = None;
    match (a.lambda, &a.weights) {
        (Some(lambda), weights) => {
            config.lambda = lambda;
            if let Some(w) = weights {
                config.alphas = Some(game_core::groups::normalize_weights(w)?);
            }
        }
        (None, Some(_)) => {
            return Err(CliError::Input("--weights needs an explicit --lambda".into()));
        }
        (None, None) => {
            let (s, levels) = calibrate_levels(&x, &mask, &groups, &a.calibration)?;
            sigma = Some(s);
            config = config.with_category_lambdas(&levels)?;
        }
    }
    let alphas = config.resolve_alphas(&groups)?;
    config.gamma = match (a.gamma, a.epsilon) {
        (Some(g), _) => g,
        (None, Some(eps)) => step_size_from_accuracy(&groups, config.lambda, &alphas, m, eps)?,
        (None, None) => 1.0,
    };

    let result = match a.baseline {
        Baseline::Game => solve_game(&x, &mask, &groups, &config)?,
        Baseline::Svt => {
            if a.trunc_rank.is_some() || a.spikiness.is_some() || a.factors {
                return Err(CliError::Input(
                    "--trunc-rank, --spikiness and --factors apply to the group-aware solver only".into(),
                ));
            }
            let svt = SvtConfig {
                lambda: config.lambda,
                gamma: config.gamma,
                max_iters: config.max_iters,
                rel_tol: config.rel_tol,
                stop_window: config.stop_window,
                accelerate: config.accelerate,
                restart: config.restart,
                warm_start: None,
            };
            solve_global_svt(&x, &mask, &svt)?
        }
    };

    create_dir(&a.out)?;
    let completed = a.out.join("completed.csv");
    io::write_matrix(&completed, &result.w_hat)?;
    manifest.output(&completed);

    let mut trace = json!({
        "objective": result.objective_trace,
        "iterations": result.iters_run,
        "converged": result.converged,
        "lambda": config.lambda,
        "category_lambdas": category_map(&groups, &config.category_lambdas(&groups)?),
    });
    if let Some(factors) = &result.per_category_svd {
        let dir = a.out.join("factors");
        create_dir(&dir)?;
        let mut sv = Map::new();
        for f in factors {
            sv.insert(f.id.clone(), json!(f.svd.singular_values()));
            let path = dir.join(format!("{}_v.csv", file_stem(&f.id)));
            io::write_matrix(&path, f.svd.v())?;
            manifest.output(&path);
        }
        trace["singular_values"] = Value::Object(sv);
    }
    let trace_path = a.out.join("trace.json");
    io::write_json(&trace_path, &trace)?;
    manifest.output(&trace_path);

    manifest.config(json!({
        "baseline": a.baseline,
        "rows": n,
        "cols": m,
        "observed": mask.len(),
        "categories": groups.ids().collect::<Vec<_>>(),
        "lambda": config.lambda,
        "alphas": alphas,
        "lambda_source": if a.lambda.is_some() { "flag" } else { "calibration" },
        "sigma": sigma,
        "R": a.calibration.r,
        "scale": a.calibration.scale,
        "gamma": config.gamma,
        "epsilon": a.epsilon,
        "max_iters": config.max_iters,
        "rel_tol": config.rel_tol,
        "stop_window": config.stop_window,
        "accelerate": config.accelerate,
        "restart": config.restart,
        "trunc_rank": config.trunc_rank,
        "spikiness_alpha": config.spikiness_alpha,
        "factors": a.factors,
    }));
    manifest.inputs(json!({
        "matrix": a.matrix,
        "mask": a.mask,
        "groups": a.groups,
    }));
    manifest.seed(a.seed);
    eprintln!(
        "{} iterations, final objective {}, converged: {}",
        result.iters_run,
        io::format_value(result.final_objective()),
        result.converged
    );
    Ok(())
}

pub fn synth(a: &SynthArgs, manifest: &mut Manifest) -> Result<()> {
    let spec = SyntheticSpec {
        n: a.n,
        m: a.m,
        num_groups: a.num_groups,
        num_subclusters: a.num_subclusters,
        group_rank: a.group_rank,
        subcluster_rank: a.subcluster_rank,
        beta: a.beta,
        noise_sigma: a.noise,
        scores: match a.scores {
            Scores::UnitNorm => ScoreNormalization::UnitNorm,
            Scores::Standardized => ScoreNormalization::Standardized,
        },
        seed: a.seed,
    };
    let data = generate_crossed_groups(&spec)?;
    create_dir(&a.out)?;
    let files: [(&str, &DenseMatrix); 4] = [
        ("X.csv", &data.x),
        ("signal.csv", &data.components.signal),
        ("group_component.csv", &data.components.group_component),
        ("subcluster_component.csv", &data.components.subcluster_component),
    ];
    for (name, m) in files {
        let p = a.out.join(name);
        io::write_matrix(&p, m)?;
        manifest.output(&p);
    }
    let p = a.out.join("groups.csv");
    io::write_groups(&p, &data.groups)?;
    manifest.output(&p);
    for (name, labels) in [("group_labels.csv", &data.group_labels), ("hidden_labels.csv", &data.hidden)] {
        let p = a.out.join(name);
        io::write_labels(&p, labels)?;
        manifest.output(&p);
    }
    manifest.config(serde_json::to_value(&spec).expect("spec serializes"));
    manifest.seed(a.seed);
    Ok(())
}

fn parse_rows(spec: &str) -> Result<Vec<usize>> {
    let bad = || CliError::Input(format!("cannot parse row list `{spec}` (expected e.g. 0-49,60)"));
    let mut rows = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().map_err(|_| bad())?;
                let hi: usize = hi.trim().parse().map_err(|_| bad())?;
                if hi < lo {
                    return Err(bad());
                }
                rows.extend(lo..=hi);
            }
            None => rows.push(part.parse().map_err(|_| bad())?),
        }
    }
    if rows.is_empty() {
        return Err(bad());
    }
    rows.sort_unstable();
    rows.dedup();
    Ok(rows)
}

pub fn mask(a: &MaskArgs, manifest: &mut Manifest) -> Result<()> {
    let (base, (n, m)) = match (&a.matrix, a.rows, a.cols) {
        (Some(p), _, _) => {
            let file = load_matrix(p)?;
            let shape = file.matrix.shape();
            (file.observed.unwrap_or_else(|| ObservationMask::full(shape.0, shape.1)), shape)
        }
        (None, Some(r), Some(c)) => (ObservationMask::full(r, c), (r, c)),
        _ => return Err(CliError::Input("pass --matrix or both --rows and --cols".into())),
    };
    // Independent streams for the three random stages.
    let uniform = sample_uniform_mask(n, m, a.keep_prob, a.seed)?;
    let mut observed = base.intersection(&uniform)?;
    let block_rows = a.block_rows.as_deref().map(parse_rows).transpose()?;
    if let (Some(rows), Some(p)) = (&block_rows, a.block_drop) {
        observed = mask_block_rows(&observed, rows, p, game_core::rng::derive_seed(a.seed, 1))?;
    }
    create_dir(&a.out)?;
    let (train, test) = match a.holdout {
        Some(frac) => {
            let (tr, te) = split_holdout(&observed, frac, game_core::rng::derive_seed(a.seed, 2))?;
            (tr, Some(te))
        }
        None => (observed, None),
    };
    let p = a.out.join("mask.csv");
    io::write_mask(&p, &train)?;
    manifest.output(&p);
    if let Some(te) = &test {
        let p = a.out.join("test_mask.csv");
        io::write_mask(&p, te)?;
        manifest.output(&p);
    }
    manifest.config(json!({
        "rows": n,
        "cols": m,
        "keep_prob": a.keep_prob,
        "block_rows": block_rows,
        "block_drop": a.block_drop,
        "holdout": a.holdout,
        "train_cells": train.len(),
        "test_cells": test.as_ref().map(ObservationMask::len),
    }));
    manifest.inputs(json!({ "matrix": a.matrix }));
    manifest.seed(a.seed);
    Ok(())
}

pub fn calibrate(a: &CalibrateArgs, manifest: &mut Manifest) -> Result<()> {
    let file = load_matrix(&a.matrix)?;
    let mask = load_mask(&file, a.mask.as_deref())?;
    let groups = load_groups(Some(&a.groups), file.matrix.rows(), a.allow_uncovered)?;
    let (sigma, levels) = calibrate_levels(&file.matrix, &mask, &groups, &a.calibration)?;
    let map = Value::Object(category_map(&groups, &levels));
    create_dir(&a.out)?;
    let p = a.out.join("lambdas.json");
    io::write_json(&p, &map)?;
    manifest.output(&p);
    println!("{}", serde_json::to_string_pretty(&map).expect("map serializes"));
    manifest.config(json!({
        "sigma": sigma,
        "R": a.calibration.r,
        "scale": a.calibration.scale,
        "observed": mask.len(),
        "kappa_range": groups.kappa_range(),
    }));
    manifest.inputs(json!({ "matrix": a.matrix, "mask": a.mask, "groups": a.groups }));
    Ok(())
}

pub fn eval(a: &EvalArgs, manifest: &mut Manifest) -> Result<()> {
    // Requirements of the requested metrics are checked before anything is read.
    let mut metrics = a.metrics.clone();
    metrics.dedup();
    for metric in &metrics {
        let missing = match metric {
            Metric::Rmse if a.test_mask.is_none() => Some("--test-mask"),
            Metric::Subspace | Metric::Grassmann if a.groups.is_none() => Some("--groups"),
            Metric::Ari | Metric::Nmi if a.labels.is_none() => Some("--labels"),
            _ => None,
        };
        if let Some(flag) = missing {
            return Err(CliError::Input(format!(
                "metric `{}` needs {flag}",
                metric_name(*metric)
            )));
        }
    }

    let truth = load_matrix(&a.truth)?.matrix;
    let estimate = load_matrix(&a.estimate)?.matrix;
    estimate.ensure_shape(truth.rows(), truth.cols(), "estimate")?;
    let groups = match &a.groups {
        Some(p) => Some(load_groups(Some(p), truth.rows(), a.allow_uncovered)?),
        None => None,
    };
    let ranks = match (&groups, &a.ranks) {
        (Some(g), Some(r)) if r.len() != g.len() => {
            return Err(CliError::Input(format!(
                "--ranks lists {} values for {} categories",
                r.len(),
                g.len()
            )))
        }
        (Some(_), Some(r)) => Some(r.clone()),
        (Some(g), None) => Some(default_ranks(g, &truth)?),
        (None, _) => None,
    };
    let mut labels_cache: Option<(LabelVector, LabelVector)> = None;
    let mut labels = |a: &EvalArgs| -> Result<(LabelVector, LabelVector)> {
        if let Some(l) = &labels_cache {
            return Ok(l.clone());
        }
        let reference = io::read_labels(a.labels.as_ref().expect("checked above"))?;
        let predicted = match &a.predicted {
            Some(p) => io::read_labels(p)?,
            None => kmeans(&estimate, reference.num_classes(), a.restarts, DEFAULT_KMEANS_ITERS, a.seed)?,
        };
        labels_cache = Some((reference.clone(), predicted.clone()));
        Ok((reference, predicted))
    };

    let mut out = Map::new();
    for metric in &metrics {
        let value = match metric {
            Metric::Rmse => {
                let test = io::read_mask(a.test_mask.as_ref().expect("checked above"), truth.rows(), truth.cols())?;
                json!(rmse_on(&test, &truth, &estimate)?)
            }
            Metric::Frobenius => json!(relative_frobenius_error(&truth, &estimate)?),
            Metric::Subspace => {
                let g = groups.as_ref().expect("checked above");
                let errs = per_group_subspace_error(g, &truth, &estimate, ranks.as_ref().expect("set with groups"))?;
                Value::Object(category_map(g, &errs))
            }
            Metric::Grassmann => {
                let g = groups.as_ref().expect("checked above");
                let kind = match a.grassmann_metric {
                    GrassmannKind::Geodesic => GrassmannMetric::Geodesic,
                    GrassmannKind::Chordal => GrassmannMetric::Chordal,
                };
                let d = per_group_grassmann(g, &truth, &estimate, ranks.as_ref().expect("set with groups"), kind)?;
                Value::Object(category_map(g, &d))
            }
            Metric::Ari => {
                let (r, p) = labels(a)?;
                json!(adjusted_rand_index(&p, &r)?)
            }
            Metric::Nmi => {
                let (r, p) = labels(a)?;
                json!(normalized_mutual_information(&p, &r)?)
            }
        };
        out.insert(metric_name(*metric).to_string(), value);
    }

    let report = Value::Object(out);
    create_dir(&a.out)?;
    let p = a.out.join("metrics.json");
    io::write_json(&p, &report)?;
    manifest.output(&p);
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    manifest.config(json!({
        "metrics": metrics,
        "ranks": ranks,
        "grassmann": a.grassmann_metric,
        "restarts": a.restarts,
    }));
    manifest.inputs(json!({
        "truth": a.truth,
        "estimate": a.estimate,
        "test_mask": a.test_mask,
        "groups": a.groups,
        "labels": a.labels,
        "predicted": a.predicted,
    }));
    manifest.seed(a.seed);
    Ok(())
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Rmse => "rmse",
        Metric::Frobenius => "frobenius",
        Metric::Subspace => "subspace",
        Metric::Grassmann => "grassmann",
        Metric::Ari => "ari",
        Metric::Nmi => "nmi",
    }
}

/// Recorded arguments with the output directory optionally swapped.
pub fn replay_args(a: &ReplayArgs) -> Result<Vec<String>> {
    let text = fs::read_to_string(&a.manifest).map_err(|e| {
        CliError::Input(format!("cannot read manifest {}: {e}", a.manifest.display()))
    })?;
    let recorded: Manifest = serde_json::from_str(&text).map_err(|e| {
        CliError::Input(format!("cannot parse manifest {}: {e}", a.manifest.display()))
    })?;
    let mut args = recorded.args;
    if let Some(out) = &a.out {
        let out = out.display().to_string();
        let mut i = 0;
        while i < args.len() {
            if args[i] == "--out" && i + 1 < args.len() {
                args[i + 1] = out.clone();
                i += 1;
            } else if args[i].starts_with("--out=") {
                args[i] = format!("--out={out}");
            }
            i += 1;
        }
    }
    Ok(args)
}

pub fn out_dir(cmd: &Command) -> Option<PathBuf> {
    Some(match cmd {
        Command::Complete(a) => a.out.clone(),
        Command::Synth(a) => a.out.clone(),
        Command::Mask(a) => a.out.clone(),
        Command::Calibrate(a) => a.out.clone(),
        Command::Eval(a) => a.out.clone(),
        Command::Replay(_) => return None,
    })
}
