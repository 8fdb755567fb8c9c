//! Substitution baselines: random items, or the target item/category
//! ("educated"), placed at random positions one edit at a time.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gece::{mutate_replace, ExplanationRecord, Method};
use crate::model::BlackBoxScorer;
use crate::objective::{Objective, SettingKind, SettingSpec};
use crate::rng::{purpose, SeedSpec, Stream};
use crate::types::{CategoryMap, ItemId, UserSequence};

pub const DEFAULT_BUDGET: usize = 10;

#[allow(clippy::too_many_arguments)]
fn run_edits(
    method: Method,
    source: &UserSequence,
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    model: &dyn BlackBoxScorer,
    k: usize,
    budget: usize,
    seed: SeedSpec,
    mut step: impl FnMut(&UserSequence, &mut Stream) -> Result<Option<UserSequence>>,
) -> Result<ExplanationRecord> {
    if budget == 0 {
        return Err(Error::InvalidConfig("baseline budget must be >= 1".into()));
    }
    let num_items = model.num_items();
    if k == 0 || k > num_items {
        return Err(Error::KOutOfRange { k, max: num_items });
    }
    let objective = Objective::new(setting, categories)?;
    let source_scores = model.score(source.items())?;
    let mut rng = seed.stream(&[purpose::BASELINE, source.user(), method as u64]);
    let mut current = source.clone();
    let mut found = None;
    let mut edits = 0;
    while edits < budget {
        let Some(next) = step(&current, &mut rng)? else {
            break;
        };
        edits += 1;
        current = next;
        let scores = model.score(current.items())?;
        if objective.is_valid(&source_scores, &scores, k)? {
            found = Some(current.items().to_vec());
            break;
        }
    }
    ExplanationRecord::build(
        method,
        &objective,
        model,
        source,
        &source_scores,
        k,
        seed.master_seed,
        found.as_deref().map(|cf| (cf, None)),
        edits,
    )
}

/// Replaces a random position with a random absent item until the candidate
/// is valid or `budget` edits have been made.
pub fn baseline_random(
    source: &UserSequence,
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    model: &dyn BlackBoxScorer,
    k: usize,
    budget: usize,
    seed: SeedSpec,
) -> Result<ExplanationRecord> {
    let num_items = model.num_items();
    run_edits(
        Method::Random,
        source,
        setting,
        categories,
        model,
        k,
        budget,
        seed,
        |seq, rng| match mutate_replace(seq, num_items, rng) {
            Ok(s) => Ok(Some(s)),
            Err(Error::CatalogExhausted) => Ok(None),
            Err(e) => Err(e),
        },
    )
}

/// Puts `item` at `index`. If the item already sits at another position
/// `j`, that position reverts to the source's item, so repeated placements of
/// one target relocate it instead of piling up edits. When reverting would
/// duplicate an item the target is moved by removal and re-insertion.
pub fn place_item(
    current: &UserSequence,
    source: &[ItemId],
    index: usize,
    item: ItemId,
) -> Result<UserSequence> {
    if index >= current.len() {
        return Err(Error::InvalidSequence(format!("index {index} out of bounds")));
    }
    let mut items = current.items().to_vec();
    match items.iter().position(|&x| x == item) {
        None => items[index] = item,
        Some(j) if j == index => {}
        Some(j) => {
            items[index] = item;
            match source.get(j) {
                Some(&orig) if orig != item && !items.contains(&orig) => items[j] = orig,
                _ => {
                    items = current.items().to_vec();
                    items.remove(j);
                    items.insert(index, item);
                }
            }
        }
    }
    current.with_items(items)
}

/// Substitutes the target item (or a random member of the target category)
/// at random positions. Only defined for targeted settings.
pub fn baseline_educated(
    source: &UserSequence,
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    model: &dyn BlackBoxScorer,
    k: usize,
    budget: usize,
    seed: SeedSpec,
) -> Result<ExplanationRecord> {
    let pool: Vec<ItemId> = match setting.kind() {
        SettingKind::UnUn | SettingKind::UnCat => {
            return Err(Error::NotApplicable(format!(
                "educated baseline needs a targeted setting, got {}",
                setting.kind()
            )))
        }
        SettingKind::TargUn => vec![setting
            .target_item
            .ok_or_else(|| Error::InvalidSetting("missing target item".into()))?],
        SettingKind::TargCat => {
            let map = categories.ok_or(Error::MissingCategories)?;
            let c = setting
                .target_category
                .ok_or_else(|| Error::InvalidSetting("missing target category".into()))?;
            let members = map.items_in(c);
            if members.is_empty() {
                return Err(Error::NotApplicable(format!(
                    "target category {c} has no member items"
                )));
            }
            members
        }
    };
    run_edits(
        Method::Educated,
        source,
        setting,
        categories,
        model,
        k,
        budget,
        seed,
        |seq, rng| {
            let index = rng.gen_range(0..seq.len());
            let fresh: Vec<ItemId> = pool.iter().copied().filter(|&z| !seq.contains(z)).collect();
            let from = if fresh.is_empty() { &pool } else { &fresh };
            let item = *from.choose(rng).expect("non-empty pool");
            place_item(seq, source.items(), index, item).map(Some)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::levenshtein;
    use crate::model::ScoreVector;
    use crate::objective::verify_eps_vcs;

    /// Predicts the last item of the input with high confidence; no masking.
    struct EchoLast {
        n: usize,
    }

    impl BlackBoxScorer for EchoLast {
        fn num_items(&self) -> usize {
            self.n
        }
        fn score(&self, items: &[ItemId]) -> Result<ScoreVector> {
            let last = items.last().ok_or(Error::EmptySequence)?.index();
            Ok(ScoreVector::from_logits(
                (0..self.n).map(|i| if i == last { 10.0 } else { 0.0 }).collect(),
                &[],
            ))
        }
    }

    /// Predicts (sum of item ids mod n); with ids below n any single
    /// replacement changes the prediction.
    struct SumMod {
        n: usize,
    }

    impl BlackBoxScorer for SumMod {
        fn num_items(&self) -> usize {
            self.n
        }
        fn score(&self, items: &[ItemId]) -> Result<ScoreVector> {
            let s: usize = items.iter().map(|i| i.index()).sum::<usize>() % self.n;
            Ok(ScoreVector::from_logits(
                (0..self.n).map(|i| if i == s { 10.0 } else { 0.0 }).collect(),
                &[],
            ))
        }
    }

    fn us(items: &[u32]) -> UserSequence {
        UserSequence::new(1, items.iter().copied().map(ItemId).collect(), 50).unwrap()
    }

    #[test]
    fn random_flips_after_one_edit() {
        let model = SumMod { n: 50 };
        let src = us(&[1, 2, 3]);
        let s = SettingSpec::untargeted_uncategorized().with_k_eval(vec![1]);
        let rec = baseline_random(&src, &s, None, &model, 1, 10, SeedSpec::new(4)).unwrap();
        assert_eq!(rec.edits, 1);
        assert_eq!(rec.hamming, Some(1));
        let again = baseline_random(&src, &s, None, &model, 1, 10, SeedSpec::new(4)).unwrap();
        assert_eq!(rec, again);
        let cf = src.with_items(rec.counterfactual.unwrap()).unwrap();
        assert!(verify_eps_vcs(&model, &src, &cf, 1.0, levenshtein).unwrap());
    }

    #[test]
    fn zero_budget_rejected() {
        let model = SumMod { n: 50 };
        let s = SettingSpec::untargeted_uncategorized();
        assert!(baseline_random(&us(&[1]), &s, None, &model, 1, 0, SeedSpec::new(0)).is_err());
    }

    #[test]
    fn educated_targets_last_item_model() {
        let model = EchoLast { n: 20 };
        let src = us(&[1, 2, 3, 4]);
        let s = SettingSpec::targeted_item(ItemId(7)).with_k_eval(vec![1]);
        for seed in 0..20 {
            let rec = baseline_educated(&src, &s, None, &model, 1, 50, SeedSpec::new(seed)).unwrap();
            // placements relocate the target, so the candidate is always one
            // substitution away; only the final position makes 7 the prediction
            assert_eq!(rec.hamming, Some(1), "seed {seed}");
            assert!(rec.edits <= 50);
        }
    }

    #[test]
    fn educated_not_applicable_when_untargeted() {
        let model = EchoLast { n: 20 };
        let map = CategoryMap::new(vec![vec![0]; 20], vec!["a".into()]).unwrap();
        for s in [
            SettingSpec::untargeted_uncategorized(),
            SettingSpec::untargeted_categorized(),
        ] {
            let err = baseline_educated(&us(&[1, 2]), &s, Some(&map), &model, 1, 5, SeedSpec::new(0));
            assert!(matches!(err, Err(Error::NotApplicable(_))));
        }
    }

    #[test]
    fn educated_empty_category_rejected() {
        let model = EchoLast { n: 4 };
        let map = CategoryMap::new(vec![vec![0]; 4], vec!["a".into(), "b".into()]).unwrap();
        let s = SettingSpec::targeted_category(1);
        let err = baseline_educated(&us(&[1, 2]), &s.with_k_eval(vec![1]), Some(&map), &model, 1, 5, SeedSpec::new(0));
        assert!(matches!(err, Err(Error::NotApplicable(_))));
    }

    #[test]
    fn place_item_relocates() {
        let src = us(&[1, 2, 3]);
        let once = place_item(&src, src.items(), 0, ItemId(9)).unwrap();
        assert_eq!(once.items(), us(&[9, 2, 3]).items());
        let moved = place_item(&once, src.items(), 2, ItemId(9)).unwrap();
        assert_eq!(moved.items(), us(&[1, 2, 9]).items());
        // the target is part of the source: plain move
        assert_eq!(
            place_item(&src, src.items(), 2, ItemId(1)).unwrap().items(),
            us(&[2, 3, 1]).items()
        );
    }
}
