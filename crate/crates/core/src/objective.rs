//! Counterfactual regimes: validity predicates, objective losses and the
//! epsilon-valid certificate verifier.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlackBoxScorer, ScoreVector};
use crate::types::{CategoryMap, ItemId, UserSequence};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingKind {
    UnUn,
    TargUn,
    UnCat,
    TargCat,
}

impl SettingKind {
    pub const ALL: [SettingKind; 4] = [
        SettingKind::UnUn,
        SettingKind::TargUn,
        SettingKind::UnCat,
        SettingKind::TargCat,
    ];

    pub fn targeted(self) -> bool {
        matches!(self, SettingKind::TargUn | SettingKind::TargCat)
    }

    pub fn categorized(self) -> bool {
        matches!(self, SettingKind::UnCat | SettingKind::TargCat)
    }

    pub fn tag(self) -> &'static str {
        match self {
            SettingKind::UnUn => "un_un",
            SettingKind::TargUn => "targ_un",
            SettingKind::UnCat => "un_cat",
            SettingKind::TargCat => "targ_cat",
        }
    }
}

impl fmt::Display for SettingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SettingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SettingKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::InvalidSetting(format!("unknown setting {s:?}")))
    }
}

/// How an untargeted counterfactual must move the source's top item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    /// The candidate's top-1 differs from the source's top-1.
    Top1Change,
    /// The source's top-1 is absent from the candidate's top-k.
    #[default]
    TopkAbsence,
}

/// Loss the genetic search minimizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// [`Objective::admissible_loss`].
    #[default]
    Admissible,
    /// [`Objective::loss`]: score, or mass, of the source top-1 (untargeted)
    /// and one minus target score, or mass (targeted).
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSpec {
    pub targeted: bool,
    pub categorized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_item: Option<ItemId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_category: Option<u32>,
    pub threshold: f64,
    pub k_eval: Vec<usize>,
    #[serde(default)]
    pub untargeted_rank_rule: RankRule,
}

impl SettingSpec {
    fn base(kind: SettingKind) -> Self {
        SettingSpec {
            targeted: kind.targeted(),
            categorized: kind.categorized(),
            target_item: None,
            target_category: None,
            threshold: DEFAULT_THRESHOLD,
            k_eval: vec![1, 5, 10],
            untargeted_rank_rule: RankRule::default(),
        }
    }

    pub fn untargeted_uncategorized() -> Self {
        Self::base(SettingKind::UnUn)
    }

    pub fn untargeted_categorized() -> Self {
        Self::base(SettingKind::UnCat)
    }

    pub fn targeted_item(target: ItemId) -> Self {
        SettingSpec {
            target_item: Some(target),
            ..Self::base(SettingKind::TargUn)
        }
    }

    pub fn targeted_category(category: u32) -> Self {
        SettingSpec {
            target_category: Some(category),
            ..Self::base(SettingKind::TargCat)
        }
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = t;
        self
    }

    pub fn with_k_eval(mut self, ks: Vec<usize>) -> Self {
        self.k_eval = ks;
        self
    }

    pub fn with_rank_rule(mut self, rule: RankRule) -> Self {
        self.untargeted_rank_rule = rule;
        self
    }

    pub fn kind(&self) -> SettingKind {
        match (self.targeted, self.categorized) {
            (false, false) => SettingKind::UnUn,
            (true, false) => SettingKind::TargUn,
            (false, true) => SettingKind::UnCat,
            (true, true) => SettingKind::TargCat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind();
        let want_item = kind == SettingKind::TargUn;
        let want_cat = kind == SettingKind::TargCat;
        if self.target_item.is_some() != want_item {
            return Err(Error::InvalidSetting(format!(
                "target_item must be {} for {kind}",
                if want_item { "set" } else { "absent" }
            )));
        }
        if self.target_category.is_some() != want_cat {
            return Err(Error::InvalidSetting(format!(
                "target_category must be {} for {kind}",
                if want_cat { "set" } else { "absent" }
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidSetting(format!(
                "threshold must be in (0,1), got {}",
                self.threshold
            )));
        }
        if self.k_eval.contains(&0) {
            return Err(Error::InvalidSetting("k_eval entries must be >= 1".into()));
        }
        Ok(())
    }
}

/// A validated setting bound to the category metadata it needs.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    setting: &'a SettingSpec,
    categories: Option<&'a CategoryMap>,
}

impl<'a> Objective<'a> {
    pub fn new(setting: &'a SettingSpec, categories: Option<&'a CategoryMap>) -> Result<Self> {
        setting.validate()?;
        if setting.categorized {
            let map = categories.ok_or(Error::MissingCategories)?;
            if let Some(c) = setting.target_category {
                if c as usize >= map.num_categories() {
                    return Err(Error::InvalidSetting(format!(
                        "target category {c} out of range for {} categories",
                        map.num_categories()
                    )));
                }
            }
        }
        Ok(Objective {
            setting,
            categories,
        })
    }

    pub fn setting(&self) -> &'a SettingSpec {
        self.setting
    }

    fn cats(&self) -> &'a CategoryMap {
        self.categories.expect("checked in Objective::new")
    }

    /// Candidate validity at cut-off `k`. Every regime also requires the
    /// candidate's top-1 to differ from the source's.
    pub fn is_valid(&self, source: &ScoreVector, cand: &ScoreVector, k: usize) -> Result<bool> {
        let top = cand.top_k(k)?;
        let src_top1 = source.top1();
        let cand_top1 = top[0];
        if cand_top1 == src_top1 {
            return Ok(false);
        }
        let t = self.setting.threshold;
        let top1_passes = cand.get(cand_top1) >= t;
        let ok = match self.setting.kind() {
            SettingKind::UnUn => match self.setting.untargeted_rank_rule {
                RankRule::Top1Change => top1_passes,
                RankRule::TopkAbsence => !top.contains(&src_top1) && top1_passes,
            },
            SettingKind::TargUn => {
                let target = self.setting.target_item.expect("validated");
                top.contains(&target) && cand.get(target) >= t
            }
            SettingKind::UnCat => self.cats().disjoint(cand_top1, src_top1) && top1_passes,
            SettingKind::TargCat => {
                let c = self.setting.target_category.expect("validated");
                top.iter()
                    .any(|&it| cand.get(it) >= t && self.cats().has(it, c))
            }
        };
        Ok(ok)
    }

    /// Scalar in `[0,1]` the search minimizes.
    pub fn loss(&self, source: &ScoreVector, cand: &ScoreVector) -> f64 {
        let loss = match self.setting.kind() {
            SettingKind::UnUn => cand.get(source.top1()),
            SettingKind::TargUn => 1.0 - cand.get(self.setting.target_item.expect("validated")),
            SettingKind::UnCat => {
                let anchor = source.top1();
                let map = self.cats();
                let anchor_cats = map.categories(anchor);
                mass_where(cand, |it| {
                    it == anchor || map.categories(it).iter().any(|c| anchor_cats.contains(c))
                })
            }
            SettingKind::TargCat => {
                let c = self.setting.target_category.expect("validated");
                let map = self.cats();
                1.0 - mass_where(cand, |it| map.has(it, c))
            }
        };
        loss.clamp(0.0, 1.0)
    }

    /// Items whose presence at the top of the candidate's ranking would
    /// satisfy the setting.
    pub fn admissible(&self, source: &ScoreVector, item: ItemId) -> bool {
        let anchor = source.top1();
        match self.setting.kind() {
            SettingKind::UnUn => item != anchor,
            SettingKind::UnCat => item != anchor && self.cats().disjoint(item, anchor),
            SettingKind::TargUn => Some(item) == self.setting.target_item,
            SettingKind::TargCat => {
                self.cats().has(item, self.setting.target_category.expect("validated"))
            }
        }
    }

    /// `1 -` the highest normalized score among admissible items. Zero only
    /// when an admissible item takes all the mass, and at most `1 - t` once an
    /// admissible item clears the threshold.
    pub fn admissible_loss(&self, source: &ScoreVector, cand: &ScoreVector) -> f64 {
        let best = cand
            .normalized()
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.admissible(source, ItemId(i as u32)))
            .map(|(_, &s)| s)
            .fold(0.0, f64::max);
        (1.0 - best).clamp(0.0, 1.0)
    }

    pub fn search_loss(&self, kind: LossKind, source: &ScoreVector, cand: &ScoreVector) -> f64 {
        match kind {
            LossKind::Admissible => self.admissible_loss(source, cand),
            LossKind::Surrogate => self.loss(source, cand),
        }
    }
}

fn mass_where(scores: &ScoreVector, pred: impl Fn(ItemId) -> bool) -> f64 {
    scores
        .normalized()
        .iter()
        .enumerate()
        .filter(|&(i, _)| pred(ItemId(i as u32)))
        .map(|(_, &s)| s)
        .sum()
}

pub fn is_valid(
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    source_scores: &ScoreVector,
    cand_scores: &ScoreVector,
    k: usize,
) -> Result<bool> {
    Objective::new(setting, categories)?.is_valid(source_scores, cand_scores, k)
}

pub fn objective_loss(
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    source_scores: &ScoreVector,
    cand_scores: &ScoreVector,
) -> Result<f64> {
    Ok(Objective::new(setting, categories)?.loss(source_scores, cand_scores))
}

/// Two-step certificate check: the model's top-1 output must change, then
/// the candidate must lie within `eps` of the source.
pub fn verify_eps_vcs<D>(
    model: &dyn BlackBoxScorer,
    source: &UserSequence,
    candidate: &UserSequence,
    eps: f64,
    distance: D,
) -> Result<bool>
where
    D: Fn(&[ItemId], &[ItemId]) -> usize,
{
    let out_src = model.score(source.items())?.top1();
    let out_cand = model.score(candidate.items())?.top1();
    if out_cand == out_src {
        return Ok(false);
    }
    if distance(candidate.items(), source.items()) as f64 > eps {
        return Ok(false);
    }
    Ok(true)
}
