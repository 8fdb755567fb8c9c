//! Explain/oracle run configuration. Precedence: flags, then the JSON config
//! file, then built-in defaults.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use seqcf_core::baselines::DEFAULT_BUDGET;
use seqcf_core::dataset::SplitDataset;
use seqcf_core::objective::{LossKind, RankRule, DEFAULT_THRESHOLD};
use seqcf_core::{GaConfig, ItemId, Method, SettingKind, SettingSpec};

use crate::targets::{category_popularity, pick_from_stratum, Stratum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub method: Method,
    pub setting: SettingKind,
    /// External item label.
    pub target_item: Option<String>,
    /// Category label.
    pub target_category: Option<String>,
    pub target_stratum: Option<Stratum>,
    pub k: usize,
    pub seed: u64,
    pub sample_users: usize,
    pub threshold: f64,
    pub k_eval: Vec<usize>,
    pub rank_rule: RankRule,
    /// Edit budget of the baselines.
    pub budget: usize,
    pub ga: GaConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            method: Method::Gece,
            setting: SettingKind::UnUn,
            target_item: None,
            target_category: None,
            target_stratum: None,
            k: 1,
            seed: 0,
            sample_users: 200,
            threshold: DEFAULT_THRESHOLD,
            k_eval: vec![1, 5, 10],
            rank_rule: RankRule::default(),
            budget: DEFAULT_BUDGET,
            ga: GaConfig::default(),
        }
    }
}

impl ExplainConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Command-line overrides; `None` keeps the value from the file or defaults.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ExplainFlags {
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// un_un, targ_un, un_cat or targ_cat
    #[arg(long, value_parser = parse_setting)]
    pub setting: Option<SettingKind>,
    /// Target item label (targ_un).
    #[arg(long)]
    pub target_item: Option<String>,
    /// Target category label (targ_cat).
    #[arg(long)]
    pub target_category: Option<String>,
    /// Draw the target from a popularity stratum when none is named.
    #[arg(long, value_enum)]
    pub target_stratum: Option<Stratum>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sample_users: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Comma-separated cut-offs recorded per explanation.
    #[arg(long, value_delimiter = ',')]
    pub k_eval: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_rank_rule)]
    pub rank_rule: Option<RankRule>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    #[arg(long)]
    pub population_size: Option<usize>,
    #[arg(long)]
    pub mutation_prob: Option<f64>,
    #[arg(long)]
    pub crossover_prob: Option<f64>,
    /// Weight of the normalized edit distance in the fitness.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Relative weights of replace, add and delete, comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub mutation_weights: Option<Vec<f64>>,
    /// admissible or surrogate
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossKind>,
}

impl ExplainFlags {
    pub fn apply(&self, mut cfg: ExplainConfig) -> Result<ExplainConfig> {
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($field).+ = v.clone(); })*
            };
        }
        set!(
            method => method,
            setting => setting,
            k => k,
            seed => seed,
            sample_users => sample_users,
            threshold => threshold,
            k_eval => k_eval,
            rank_rule => rank_rule,
            budget => budget,
            generations => ga.generations,
            population_size => ga.population_size,
            mutation_prob => ga.mutation_prob,
            crossover_prob => ga.crossover_prob,
            lambda => ga.lambda,
            max_len => ga.max_len,
            loss => ga.loss,
        );
        if self.target_item.is_some() {
            cfg.target_item = self.target_item.clone();
        }
        if self.target_category.is_some() {
            cfg.target_category = self.target_category.clone();
        }
        if self.target_stratum.is_some() {
            cfg.target_stratum = self.target_stratum;
        }
        if let Some(w) = &self.mutation_weights {
            cfg.ga.mutation_weights = w
                .as_slice()
                .try_into()
                .map_err(|_| anyhow!("--mutation-weights takes exactly 3 values"))?;
        }
        Ok(cfg)
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: seqcf_core::Error| e.to_string())
}

fn parse_setting(s: &str) -> Result<SettingKind, String> {
    s.parse().map_err(|e: seqcf_core::Error| e.to_string())
}

fn parse_rank_rule(s: &str) -> Result<RankRule, String> {
    match s {
        "top1_change" => Ok(RankRule::Top1Change),
        "topk_absence" => Ok(RankRule::TopkAbsence),
        other => Err(format!("unknown rank rule {other:?}")),
    }
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    match s {
        "admissible" => Ok(LossKind::Admissible),
        "surrogate" => Ok(LossKind::Surrogate),
        other => Err(format!("unknown loss {other:?}")),
    }
}

/// Setting with its target resolved against the split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedSetting {
    pub spec: SettingSpec,
    /// Label of the target item or category, if any.
    pub target_label: Option<String>,
}

pub fn resolve_setting(cfg: &ExplainConfig, split: &SplitDataset) -> Result<ResolvedSetting> {
    let popularity = split.train_popularity();
    let (spec, target_label) = match cfg.setting {
        SettingKind::UnUn => (SettingSpec::untargeted_uncategorized(), None),
        SettingKind::UnCat => {
            require_categories(split)?;
            (SettingSpec::untargeted_categorized(), None)
        }
        SettingKind::TargUn => {
            let item = match (&cfg.target_item, cfg.target_stratum) {
                (Some(label), _) => split
                    .catalog
                    .lookup(label)
                    .ok_or_else(|| anyhow!("unknown target item {label:?}"))?,
                (None, Some(stratum)) => pick_from_stratum(&popularity, stratum, cfg.seed)
                    .map(|i| ItemId(i as u32))
                    .ok_or_else(|| anyhow!("empty {stratum} stratum"))?,
                (None, None) => bail!("targ_un needs --target-item or --target-stratum"),
            };
            (
                SettingSpec::targeted_item(item),
                Some(split.catalog.label(item)),
            )
        }
        SettingKind::TargCat => {
            require_categories(split)?;
            let cats = &split.categories;
            let c = match (&cfg.target_category, cfg.target_stratum) {
                (Some(label), _) => cats
                    .category_id(label)
                    .ok_or_else(|| anyhow!("unknown target category {label:?}"))?,
                (None, Some(stratum)) => {
                    let pop = category_popularity(&popularity, cats);
                    pick_from_stratum(&pop, stratum, cfg.seed)
                        .ok_or_else(|| anyhow!("empty {stratum} stratum"))? as u32
                }
                (None, None) => bail!("targ_cat needs --target-category or --target-stratum"),
            };
            (
                SettingSpec::targeted_category(c),
                Some(cats.labels()[c as usize].clone()),
            )
        }
    };
    let spec = spec
        .with_threshold(cfg.threshold)
        .with_k_eval(cfg.k_eval.clone())
        .with_rank_rule(cfg.rank_rule);
    spec.validate()?;
    Ok(ResolvedSetting { spec, target_label })
}

fn require_categories(split: &SplitDataset) -> Result<()> {
    if split.categories.num_categories() == 0 {
        bail!("categorized setting needs a split built with --categories");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let file: ExplainConfig =
            serde_json::from_str(r#"{"k": 5, "seed": 3, "ga": {"generations": 7}}"#).unwrap();
        assert_eq!(file.k, 5);
        assert_eq!(file.ga.generations, 7);
        assert_eq!(file.ga.population_size, 8192);
        assert_eq!(file.sample_users, 200);

        let flags = ExplainFlags {
            seed: Some(9),
            population_size: Some(64),
            mutation_weights: Some(vec![1.0, 0.0, 0.0]),
            ..Default::default()
        };
        let cfg = flags.apply(file).unwrap();
        assert_eq!((cfg.k, cfg.seed), (5, 9));
        assert_eq!((cfg.ga.generations, cfg.ga.population_size), (7, 64));
        assert_eq!(cfg.ga.mutation_weights, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(serde_json::from_str::<ExplainConfig>(r#"{"generations": 3}"#).is_err());
    }

    #[test]
    fn documented_defaults() {
        let cfg = ExplainConfig::default();
        assert_eq!(cfg.ga.generations, 30);
        assert_eq!(cfg.ga.population_size, 8192);
        assert_eq!(cfg.ga.mutation_prob, 0.5);
        assert_eq!(cfg.ga.crossover_prob, 0.7);
        assert_eq!(cfg.threshold, 0.5);
        assert_eq!(cfg.sample_users, 200);
    }
}
