//! Stage implementations shared by `run` and the stage-wise commands.
//!
//! Preprocessing is cheap and fully determined by (input, config, seed), so
//! stage commands recompute it instead of caching intermediate datasets;
//! only genuinely expensive or summary results become artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context as AnyhowContext;

use chaidlr_core::chaid::{extract_profile, grow_tree, write_profile_csv};
use chaidlr_core::cluster::{cluster_variables, select_representatives, ClusterAssignment};
use chaidlr_core::data::{load_csv, write_csv, ColumnId, Dataset};
use chaidlr_core::logit::{reduce_to_k, stepwise, vif, LogisticModel, VifReport};
use chaidlr_core::metrics::evaluate;
use chaidlr_core::preprocess::{
    apply_imputation, drop_missing_target, filter_and_impute, stratified_split, MedianMap,
};
use chaidlr_core::scan::{materialize_terms, scan_all, InteractionTerm};
use chaidlr_core::synth::{generate, run_benchmark, BenchConfig};

use crate::artifacts::{
    self, profile_path, read_json, write_json, write_meta, ModelArtifact, ScanArtifact,
    SweepEntry,
};
use crate::config::PipelineConfig;
use crate::UsageError;

pub struct Context {
    pub config: PipelineConfig,
    pub workers: usize,
}

impl Context {
    pub fn new(config: PipelineConfig, workers: Option<usize>) -> Self {
        let workers = workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        Context { config, workers }
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output_dir
    }

    fn ensure_out_dir(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(self.out_dir())
            .with_context(|| format!("creating {}", self.out_dir().display()))?;
        Ok(())
    }
}

/// Deterministically preprocessed state every data stage starts from.
pub struct Prepared {
    pub train: Dataset,
    pub valid: Dataset,
    pub medians: MedianMap,
    pub clusters: ClusterAssignment,
    pub representatives: Vec<ColumnId>,
}

pub fn prepare(ctx: &Context) -> anyhow::Result<Prepared> {
    let input = ctx
        .config
        .input
        .clone()
        .ok_or(UsageError::NoInputConfigured)?;
    if !input.exists() {
        return Err(UsageError::MissingInput(input).into());
    }
    ctx.config.validate()?;

    let ds = load_csv(&input, &ctx.config.target)?;
    let ds = drop_missing_target(&ds)?;
    let (train, valid) =
        stratified_split(&ds, ctx.config.split.train_fraction, ctx.config.split.seed)?;
    let (train, medians) = filter_and_impute(&train, ctx.config.missing_threshold)?;
    let (valid, dropped) = apply_imputation(&valid, &medians)?;
    for name in &dropped {
        eprintln!("warning: validation column {name:?} not seen in training; dropped");
    }
    let clusters = cluster_variables(&train, ctx.config.clustering.max_second_eigenvalue)?;
    for name in &clusters.excluded_constant {
        eprintln!("warning: constant column {name:?} excluded from clustering");
    }
    let representatives = select_representatives(&clusters);
    println!(
        "preprocess: {} train / {} validation rows; {} clusters keep {} of {} predictors (variance explained {:.1}%)",
        train.n_rows,
        valid.n_rows,
        clusters.clusters.len(),
        representatives.len(),
        train.predictor_ids().len(),
        100.0 * clusters.variance_explained
    );
    Ok(Prepared {
        train,
        valid,
        medians,
        clusters,
        representatives,
    })
}

pub fn stage_scan(ctx: &Context, prepared: &Prepared) -> anyhow::Result<ScanArtifact> {
    ctx.ensure_out_dir()?;
    let started = Instant::now();
    write_json(&ctx.out_dir().join(artifacts::MEDIANS), &prepared.medians)?;
    write_json(&ctx.out_dir().join(artifacts::CLUSTERS), &prepared.clusters)?;

    let (terms, report) = scan_all(
        &prepared.train,
        &prepared.representatives,
        &ctx.config.chaid,
        ctx.workers,
    )?;
    println!(
        "scan: {} pairs, {} detected, {:.2}s",
        report.pairs_total, report.pairs_detected, report.duration_secs
    );
    let artifact = ScanArtifact { report, terms };
    write_json(&ctx.out_dir().join(artifacts::SCAN), &artifact)?;
    write_meta(ctx.out_dir(), "scan", started.elapsed().as_secs_f64(), ctx.workers)?;
    Ok(artifact)
}

fn model_vif(
    ds: &Dataset,
    model: &LogisticModel,
    threshold: f64,
) -> anyhow::Result<Option<VifReport>> {
    if model.columns.len() < 2 {
        return Ok(None);
    }
    let ids: Vec<ColumnId> = model
        .columns
        .iter()
        .map(|name| Ok(ds.column_by_name(name)?.id))
        .collect::<chaidlr_core::Result<_>>()?;
    Ok(Some(vif(ds, &ids, threshold)?))
}

pub fn stage_fit(
    ctx: &Context,
    prepared: &Prepared,
    scan: &ScanArtifact,
) -> anyhow::Result<(ModelArtifact, ModelArtifact)> {
    ctx.ensure_out_dir()?;
    let started = Instant::now();
    let (train_h, terms) = materialize_terms(&prepared.train, &scan.terms)?;
    let mut hybrid_candidates = prepared.representatives.clone();
    hybrid_candidates.extend(terms.iter().filter_map(|t| t.derived));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers.max(1))
        .build()
        .context("building worker pool")?;
    let (hybrid_trace, hybrid_model) =
        pool.install(|| stepwise(&train_h, &hybrid_candidates, &ctx.config.stepwise))?;
    let (pure_trace, pure_model) = pool.install(|| {
        stepwise(
            &prepared.train,
            &prepared.representatives,
            &ctx.config.stepwise,
        )
    })?;

    let hybrid = ModelArtifact {
        vif: model_vif(&train_h, &hybrid_model, ctx.config.vif_threshold)?,
        model: hybrid_model,
        trace: hybrid_trace,
    };
    let pure = ModelArtifact {
        vif: model_vif(&prepared.train, &pure_model, ctx.config.vif_threshold)?,
        model: pure_model,
        trace: pure_trace,
    };
    let n_interactions = hybrid
        .model
        .columns
        .iter()
        .filter(|c| scan.terms.iter().any(|t| &t.name == *c))
        .count();
    println!(
        "fit: hybrid {} variables ({} interaction terms), pure {} variables",
        hybrid.model.columns.len(),
        n_interactions,
        pure.model.columns.len()
    );
    if let Some(report) = &hybrid.vif {
        if report.any_flagged() {
            eprintln!("warning: hybrid model has VIF values at or above {}", report.threshold);
        }
    }
    write_json(&ctx.out_dir().join(artifacts::MODEL_HYBRID), &hybrid)?;
    write_json(&ctx.out_dir().join(artifacts::MODEL_PURE), &pure)?;
    write_meta(ctx.out_dir(), "fit", started.elapsed().as_secs_f64(), ctx.workers)?;
    Ok((hybrid, pure))
}

fn write_csv_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn stage_evaluate(
    ctx: &Context,
    prepared: &Prepared,
    scan: &ScanArtifact,
    hybrid: &ModelArtifact,
    pure: &ModelArtifact,
) -> anyhow::Result<()> {
    ctx.ensure_out_dir()?;
    let started = Instant::now();
    let (train_h, _) = materialize_terms(&prepared.train, &scan.terms)?;
    let (valid_h, _) = materialize_terms(&prepared.valid, &scan.terms)?;
    let fit_cfg = &ctx.config.stepwise.fit;

    let mut comparison: Vec<Vec<String>> = Vec::new();
    let mut ks_rows: Vec<Vec<String>> = Vec::new();
    let mut entries: Vec<SweepEntry> = Vec::new();
    let mut skipped: Vec<usize> = Vec::new();
    let mut best_by_ks: Option<(usize, f64)> = None;
    for &k in &ctx.config.sweep {
        if k > hybrid.model.columns.len() || k > pure.model.columns.len() {
            skipped.push(k);
            continue;
        }
        let hybrid_k = reduce_to_k(&train_h, &hybrid.model, k, fit_cfg)?;
        let pure_k = reduce_to_k(&prepared.train, &pure.model, k, fit_cfg)?;
        let (h_train, h_valid) = evaluate(&hybrid_k, &train_h, &valid_h)?;
        let (p_train, p_valid) = evaluate(&pure_k, &prepared.train, &prepared.valid)?;
        comparison.push(vec![
            k.to_string(),
            h_train.accuracy.to_string(),
            h_valid.accuracy.to_string(),
            h_train.auc.to_string(),
            h_valid.auc.to_string(),
            p_train.accuracy.to_string(),
            p_valid.accuracy.to_string(),
            p_train.auc.to_string(),
            p_valid.auc.to_string(),
        ]);
        ks_rows.push(vec![
            k.to_string(),
            h_train.ks.to_string(),
            h_valid.ks.to_string(),
            p_train.ks.to_string(),
            p_valid.ks.to_string(),
        ]);
        // smallest model that still reaches KS 0.4 on validation
        if h_valid.ks >= 0.4 && best_by_ks.is_none_or(|(bk, _)| k < bk) {
            best_by_ks = Some((k, h_valid.ks));
        }
        entries.push(SweepEntry {
            n_variables: k,
            hybrid_train: h_train,
            hybrid_valid: h_valid,
            pure_train: p_train,
            pure_valid: p_valid,
        });
    }
    if !skipped.is_empty() {
        eprintln!(
            "notice: sweep sizes {skipped:?} exceed a fitted model's variable count; skipped"
        );
    }

    write_csv_rows(
        &ctx.out_dir().join(artifacts::COMPARISON),
        &[
            "n_variables",
            "hybrid_accuracy_train",
            "hybrid_accuracy_valid",
            "hybrid_auc_train",
            "hybrid_auc_valid",
            "pure_accuracy_train",
            "pure_accuracy_valid",
            "pure_auc_train",
            "pure_auc_valid",
        ],
        &comparison,
    )?;
    write_csv_rows(
        &ctx.out_dir().join(artifacts::KS_CURVE),
        &[
            "n_variables",
            "hybrid_ks_train",
            "hybrid_ks_valid",
            "pure_ks_train",
            "pure_ks_valid",
        ],
        &ks_rows,
    )?;
    write_json(&ctx.out_dir().join(artifacts::EVALUATION), &entries)?;
    match best_by_ks {
        Some((k, ks)) => println!(
            "evaluate: {} sweep rows; smallest hybrid model with validation KS >= 0.4: {k} variables (KS {ks:.3})",
            comparison.len()
        ),
        None => println!(
            "evaluate: {} sweep rows; no swept hybrid model reached validation KS 0.4",
            comparison.len()
        ),
    }
    write_meta(ctx.out_dir(), "evaluate", started.elapsed().as_secs_f64(), ctx.workers)?;
    Ok(())
}

pub fn stage_profile(
    ctx: &Context,
    prepared: &Prepared,
    scan: &ScanArtifact,
    hybrid: &ModelArtifact,
) -> anyhow::Result<Vec<PathBuf>> {
    ctx.ensure_out_dir()?;
    let started = Instant::now();
    let selected: Vec<&InteractionTerm> = scan
        .terms
        .iter()
        .filter(|t| hybrid.model.columns.contains(&t.name))
        .collect();
    if selected.is_empty() {
        println!("profile: the final hybrid model has no interaction terms; nothing to write");
        write_meta(ctx.out_dir(), "profile", started.elapsed().as_secs_f64(), ctx.workers)?;
        return Ok(Vec::new());
    }
    let mut written = Vec::with_capacity(selected.len());
    for term in selected {
        let tree = grow_tree(&prepared.train, &[term.i, term.j], &ctx.config.chaid)?;
        let profile = extract_profile(&tree);
        let path = profile_path(ctx.out_dir(), &term.name);
        write_profile_csv(&profile, &path)?;
        written.push(path);
    }
    println!("profile: wrote {} segment tables", written.len());
    write_meta(ctx.out_dir(), "profile", started.elapsed().as_secs_f64(), ctx.workers)?;
    Ok(written)
}

pub fn cmd_run(ctx: &Context) -> anyhow::Result<()> {
    let prepared = prepare(ctx)?;
    let scan = stage_scan(ctx, &prepared)?;
    let (hybrid, pure) = stage_fit(ctx, &prepared, &scan)?;
    stage_evaluate(ctx, &prepared, &scan, &hybrid, &pure)?;
    stage_profile(ctx, &prepared, &scan, &hybrid)?;
    Ok(())
}

pub fn cmd_scan(ctx: &Context) -> anyhow::Result<()> {
    let prepared = prepare(ctx)?;
    stage_scan(ctx, &prepared)?;
    Ok(())
}

pub fn cmd_fit(ctx: &Context) -> anyhow::Result<()> {
    let prepared = prepare(ctx)?;
    let scan: ScanArtifact = read_json(&ctx.out_dir().join(artifacts::SCAN), "scan")?;
    stage_fit(ctx, &prepared, &scan)?;
    Ok(())
}

pub fn cmd_evaluate(ctx: &Context) -> anyhow::Result<()> {
    let prepared = prepare(ctx)?;
    let scan: ScanArtifact = read_json(&ctx.out_dir().join(artifacts::SCAN), "scan")?;
    let hybrid: ModelArtifact = read_json(&ctx.out_dir().join(artifacts::MODEL_HYBRID), "fit")?;
    let pure: ModelArtifact = read_json(&ctx.out_dir().join(artifacts::MODEL_PURE), "fit")?;
    stage_evaluate(ctx, &prepared, &scan, &hybrid, &pure)
}

pub fn cmd_profile(ctx: &Context) -> anyhow::Result<()> {
    let prepared = prepare(ctx)?;
    let scan: ScanArtifact = read_json(&ctx.out_dir().join(artifacts::SCAN), "scan")?;
    let hybrid: ModelArtifact = read_json(&ctx.out_dir().join(artifacts::MODEL_HYBRID), "fit")?;
    stage_profile(ctx, &prepared, &scan, &hybrid)?;
    Ok(())
}

pub fn cmd_synth(ctx: &Context) -> anyhow::Result<PathBuf> {
    let spec = ctx
        .config
        .synth
        .clone()
        .ok_or(UsageError::MissingSynthSpec { command: "synth" })?;
    ctx.ensure_out_dir()?;
    let ds = generate(&spec)?;
    let path = ctx.out_dir().join("synth.csv");
    write_csv(&ds, &path)?;
    let y = ds.target_as_binary()?;
    let rate = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
    println!(
        "synth: wrote {} ({} rows, {} predictors, response rate {rate:.3})",
        path.display(),
        ds.n_rows,
        spec.n_predictors
    );
    Ok(path)
}

pub fn cmd_bench(ctx: &Context) -> anyhow::Result<()> {
    let spec = ctx
        .config
        .synth
        .clone()
        .ok_or(UsageError::MissingSynthSpec { command: "bench" })?;
    ctx.ensure_out_dir()?;
    let bench_cfg = BenchConfig {
        chaid: ctx.config.chaid.clone(),
        stepwise: ctx.config.stepwise,
        train_fraction: ctx.config.split.train_fraction,
        max_missing_fraction: ctx.config.missing_threshold,
        split_seed: ctx.config.split.seed,
        workers: ctx.workers,
    };
    let report = run_benchmark(&spec, &bench_cfg)?;
    write_json(&ctx.out_dir().join(artifacts::BENCH), &report)?;
    println!(
        "bench: {} pairs scanned, {} detected",
        report.pairs_total, report.pairs_detected
    );
    println!(
        "  hybrid  {:>8.2}s  valid AUC {:.4}  KS {:.4}  ({} variables)",
        report.hybrid_secs,
        report.hybrid_valid.auc,
        report.hybrid_valid.ks,
        report.hybrid_columns.len()
    );
    println!(
        "  oracle  {:>8.2}s  valid AUC {:.4}  KS {:.4}  ({} variables)",
        report.oracle_secs,
        report.oracle_valid.auc,
        report.oracle_valid.ks,
        report.oracle_columns.len()
    );
    println!("  speedup {:.2}x with {} worker(s)", report.speedup, report.workers);
    Ok(())
}
