//! Subcommand implementations, plus the library entry points they share with
//! the tests.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use seqcf_core::baselines::{baseline_educated, baseline_random};
use seqcf_core::dataset::{
    k_core_filter, leave_one_out_split, load_categories, load_interactions, Delimiter,
    SplitDataset,
};
use seqcf_core::metrics::{aggregate_report, with_seed_means};
use seqcf_core::model::{
    load_model, save_model, train_markov, train_popularity, BlackBoxScorer, ReferenceModel,
};
use seqcf_core::oracle::oracle_optimal;
use seqcf_core::synth::{generate, SynthConfig};
use seqcf_core::vcreduce::{equivalence_verdict, Graph};
use seqcf_core::{explain, Error, ExplanationRecord, ItemId, Method, SeedSpec, SettingSpec};

use crate::config::{resolve_setting, ExplainConfig, ResolvedSetting};
use crate::output::{
    emit, provenance, read_jsonl, read_report_csv, render_report, write_file, write_jsonl,
};
use crate::targets::sample_users;
use crate::{
    DelimiterArg, EvaluateArgs, ExplainArgs, OracleArgs, PreprocessArgs, ReduceVcArgs,
    ReportArgs, ScorerArg, SynthArgs, TrainArgs,
};

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn load_split(path: &Path) -> Result<SplitDataset> {
    SplitDataset::load(path).with_context(|| format!("loading split {}", path.display()))
}

fn load_scorer(path: &Path, split: Option<&SplitDataset>) -> Result<ReferenceModel> {
    let model = load_model(path).with_context(|| format!("loading model {}", path.display()))?;
    if let Some(split) = split {
        if model.num_items() != split.catalog.num_items() {
            bail!(
                "model covers {} items but the split catalog has {}",
                model.num_items(),
                split.catalog.num_items()
            );
        }
    }
    Ok(model)
}

fn comment_header(run_config: &Value) -> Result<String> {
    Ok(format!("# run_config: {}\n", serde_json::to_string(run_config)?))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        num_users: a.users,
        num_items: a.items,
        num_categories: a.categories,
        min_len: a.min_len,
        max_len: a.max_len,
        seed: a.seed,
        ..Default::default()
    };
    let corpus = generate(&config)?;
    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let header = comment_header(&provenance("synth", serde_json::to_value(&config)?))?;
    let inter = a.out_dir.join("interactions.tsv");
    let cats = a.out_dir.join("categories.tsv");
    write_file(&inter, format!("{header}{}", corpus.interactions_tsv()).as_bytes())?;
    write_file(&cats, format!("{header}{}", corpus.categories_tsv()).as_bytes())?;
    println!(
        "wrote {} interactions for {} users to {}",
        corpus.log.len(),
        corpus.log.num_users(),
        inter.display()
    );
    println!("wrote {} category rows to {}", corpus.category_rows.len(), cats.display());
    Ok(())
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<()> {
    let delimiter = match a.delimiter {
        DelimiterArg::Auto => Delimiter::Auto,
        DelimiterArg::Tab => Delimiter::Tab,
        DelimiterArg::Comma => Delimiter::Comma,
        DelimiterArg::DoubleColon => Delimiter::DoubleColon,
    };
    let log = load_interactions(&a.input, delimiter)?;
    let filtered = k_core_filter(&log, a.k_core)?;
    let mut split = leave_one_out_split(&filtered, a.max_len)?;
    if let Some(path) = &a.categories {
        split.categories = load_categories(path, &split.catalog)?;
    }
    let run_config = provenance(
        "preprocess",
        json!({
            "input": path_str(&a.input),
            "categories": a.categories.as_deref().map(path_str),
            "k_core": a.k_core,
            "max_len": a.max_len,
        }),
    );
    let mut doc = serde_json::to_value(&split)?;
    doc["run_config"] = run_config;
    write_file(&a.out, serde_json::to_string(&doc)?.as_bytes())?;
    println!(
        "rows={} malformed={} after_k_core={} users={} items={} categories={}",
        log.len(),
        log.malformed,
        filtered.len(),
        split.train.len(),
        split.catalog.num_items(),
        split.categories.num_categories()
    );
    Ok(())
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let split = load_split(&a.split)?;
    let n = split.catalog.num_items();
    let mask_seen = !a.no_mask_seen;
    let model = match a.scorer {
        ScorerArg::Markov => {
            let mut m = train_markov(split.train.values(), n, a.alpha, a.beta)?;
            m.set_mask_seen(mask_seen);
            ReferenceModel::Markov(m)
        }
        ScorerArg::Popularity => {
            let mut m = train_popularity(split.train.values(), n)?;
            m.set_mask_seen(mask_seen);
            ReferenceModel::Popularity(m)
        }
    };
    let run_config = provenance(
        "train",
        json!({
            "split": path_str(&a.split),
            "scorer": model.kind(),
            "alpha": a.alpha,
            "beta": a.beta,
            "mask_seen": mask_seen,
        }),
    );
    save_model(&model, &a.out, Some(run_config))?;
    println!("trained {} scorer over {} items", model.kind(), n);
    Ok(())
}

fn resolve_config(config: Option<&Path>, flags: &crate::config::ExplainFlags) -> Result<ExplainConfig> {
    let base = match config {
        Some(p) => ExplainConfig::from_file(p)?,
        None => ExplainConfig::default(),
    };
    flags.apply(base)
}

/// Runs the configured method for each user, in parallel on the current
/// rayon pool. Records come back in the order of `users`.
pub fn explain_users(
    cfg: &ExplainConfig,
    setting: &SettingSpec,
    split: &SplitDataset,
    model: &dyn BlackBoxScorer,
    users: &[u64],
) -> Result<Vec<ExplanationRecord>> {
    if cfg.method == Method::Educated && !setting.targeted {
        bail!(
            "N.A.: the educated baseline is undefined for untargeted setting {}",
            setting.kind()
        );
    }
    let cats = setting.categorized.then_some(&split.categories);
    let seed = SeedSpec::new(cfg.seed);
    users
        .par_iter()
        .map(|u| {
            let source = split
                .train
                .get(u)
                .ok_or_else(|| anyhow::anyhow!("user {u} not in split"))?;
            let rec = match cfg.method {
                Method::Gece => explain(source, setting, cats, model, cfg.k, &cfg.ga, seed),
                Method::Random => {
                    baseline_random(source, setting, cats, model, cfg.k, cfg.budget, seed)
                }
                Method::Educated => {
                    baseline_educated(source, setting, cats, model, cfg.k, cfg.budget, seed)
                }
            };
            rec.with_context(|| format!("user {u}"))
        })
        .collect()
}

fn run_header(command: &str, model: &Path, split: &Path, cfg: &ExplainConfig, resolved: &ResolvedSetting, users: usize) -> Result<Value> {
    Ok(provenance(
        command,
        json!({
            "model": path_str(model),
            "split": path_str(split),
            "run": serde_json::to_value(cfg)?,
            "setting": serde_json::to_value(&resolved.spec)?,
            "target": resolved.target_label,
            "users": users,
        }),
    ))
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    let cfg = resolve_config(a.config.as_deref(), &a.flags)?;
    cfg.ga.validate()?;
    let split = load_split(&a.split)?;
    let model = load_scorer(&a.model, Some(&split))?;
    let resolved = resolve_setting(&cfg, &split)?;
    let all: Vec<u64> = split.users().collect();
    let users = sample_users(&all, cfg.sample_users, cfg.seed);
    let records = thread_pool(a.threads)?
        .install(|| explain_users(&cfg, &resolved.spec, &split, &model, &users))?;
    let header = run_header("explain", &a.model, &a.split, &cfg, &resolved, users.len())?;
    write_jsonl(&a.out, &header, &records)?;
    let found = records.iter().filter(|r| r.counterfactual.is_some()).count();
    println!(
        "{} {}: {found}/{} users with a counterfactual, written to {}",
        cfg.method.tag(),
        resolved.spec.kind(),
        records.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleStatus {
    Found,
    /// No valid candidate within the distance limit.
    NotFound,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub user: u64,
    pub setting: SettingSpec,
    pub k: usize,
    pub max_distance: usize,
    pub source: Vec<ItemId>,
    pub counterfactual: Option<Vec<ItemId>>,
    /// Optimal Hamming distance.
    pub distance: Option<usize>,
    pub status: OracleStatus,
}

pub fn oracle_users(
    cfg: &ExplainConfig,
    setting: &SettingSpec,
    split: &SplitDataset,
    model: &dyn BlackBoxScorer,
    users: &[u64],
    max_distance: usize,
) -> Result<Vec<OracleRecord>> {
    let cats = setting.categorized.then_some(&split.categories);
    users
        .iter()
        .map(|u| {
            let source = &split.train[u];
            let mut rec = OracleRecord {
                user: *u,
                setting: setting.clone(),
                k: cfg.k,
                max_distance,
                source: source.items().to_vec(),
                counterfactual: None,
                distance: None,
                status: OracleStatus::NotFound,
            };
            match oracle_optimal(source, setting, cats, model, cfg.k, max_distance) {
                Ok(Some((cf, d))) => {
                    rec.counterfactual = Some(cf.items().to_vec());
                    rec.distance = Some(d);
                    rec.status = OracleStatus::Found;
                }
                Ok(None) => {}
                Err(Error::BudgetExceeded { .. }) => rec.status = OracleStatus::BudgetExceeded,
                Err(e) => return Err(e).with_context(|| format!("user {u}")),
            }
            Ok(rec)
        })
        .collect()
}

pub fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let cfg = resolve_config(a.config.as_deref(), &a.flags)?;
    let split = load_split(&a.split)?;
    let model = load_scorer(&a.model, Some(&split))?;
    let resolved = resolve_setting(&cfg, &split)?;
    let all: Vec<u64> = split.users().collect();
    let users = sample_users(&all, cfg.sample_users, cfg.seed);
    let records = thread_pool(a.threads)?.install(|| {
        oracle_users(&cfg, &resolved.spec, &split, &model, &users, a.max_distance)
    })?;
    let mut header = run_header("oracle", &a.model, &a.split, &cfg, &resolved, users.len())?;
    header["config"]["max_distance"] = json!(a.max_distance);
    write_jsonl(&a.out, &header, &records)?;
    let count = |s| records.iter().filter(|r| r.status == s).count();
    println!(
        "found={} not_found={} budget_exceeded={}",
        count(OracleStatus::Found),
        count(OracleStatus::NotFound),
        count(OracleStatus::BudgetExceeded)
    );
    Ok(())
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let (source_header, records): (_, Vec<ExplanationRecord>) = read_jsonl(&a.records)?;
    let first = match records.first() {
        Some(r) => r,
        None => bail!("{} holds no explanation records", a.records.display()),
    };
    let model = load_scorer(&a.model, None)?;
    let k_list = a.k_list.clone().unwrap_or_else(|| first.setting.k_eval.clone());
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        source_header
            .as_ref()
            .and_then(|h| h["config"]["split"].as_str())
            .and_then(|s| Path::new(s).file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unknown".into())
    });
    let model_name = a.model_name.clone().unwrap_or_else(|| model.kind().to_string());
    let rows = aggregate_report(
        &records,
        &model,
        &k_list,
        first.setting.threshold,
        &dataset,
        &model_name,
    )?;
    let run_config = provenance(
        "evaluate",
        json!({
            "records": path_str(&a.records),
            "model": path_str(&a.model),
            "k_list": k_list,
            "dataset": dataset,
            "model_name": model_name,
            "source": source_header,
        }),
    );
    emit(a.out.as_deref(), &render_report(&rows, &run_config, a.format)?)
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for p in &a.inputs {
        rows.extend(read_report_csv(p)?);
    }
    let merged = with_seed_means(&rows);
    let run_config = provenance(
        "report",
        json!({ "inputs": a.inputs.iter().map(|p| path_str(p)).collect::<Vec<_>>() }),
    );
    emit(a.out.as_deref(), &render_report(&merged, &run_config, a.format)?)
}

pub fn cmd_reduce_vc(a: &ReduceVcArgs) -> Result<()> {
    let graph = Graph::load(&a.graph)?;
    let ks = a
        .k
        .clone()
        .unwrap_or_else(|| (0..=graph.num_vertices()).collect());
    for k in ks {
        let v = equivalence_verdict(&graph, k)?;
        println!(
            "k={k} vcs={} cover={} equivalent={}{}",
            v.has_counterfactual,
            v.has_cover,
            v.holds(),
            if v.degenerate { " degenerate" } else { "" }
        );
    }
    Ok(())
}
