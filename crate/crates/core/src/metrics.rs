//! Fidelity@k, sequence distances and aggregate reporting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gece::ExplanationRecord;
use crate::model::{BlackBoxScorer, ScoreVector};
use crate::types::ItemId;

/// Fraction of the top-`k` normalized scores that reach `t`.
pub fn fidelity_at_k(scores: &ScoreVector, k: usize, t: f64) -> Result<f64> {
    let top = scores.top_k_scores(k)?;
    Ok(top.iter().filter(|&&s| s >= t).count() as f64 / k as f64)
}

/// Positional mismatches. Unequal lengths are right-aligned and the shorter
/// side is front-padded with a null item that matches nothing.
pub fn hamming(a: &[ItemId], b: &[ItemId]) -> usize {
    let longest = a.len().max(b.len());
    let matching = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .filter(|(x, y)| x == y)
        .count();
    longest - matching
}

/// Unit-cost insert/delete/substitute edit distance.
pub fn levenshtein(a: &[ItemId], b: &[ItemId]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanDistance {
    pub mean: f64,
    pub included: usize,
    /// Records without a counterfactual.
    pub excluded: usize,
}

pub fn mean_hamming(records: &[ExplanationRecord]) -> Result<MeanDistance> {
    mean_of(records, |r| r.hamming)
}

pub fn mean_levenshtein(records: &[ExplanationRecord]) -> Result<MeanDistance> {
    mean_of(records, |r| r.levenshtein)
}

fn mean_of(
    records: &[ExplanationRecord],
    field: impl Fn(&ExplanationRecord) -> Option<usize>,
) -> Result<MeanDistance> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records".into()));
    }
    let values: Vec<usize> = records
        .iter()
        .filter(|r| r.counterfactual.is_some())
        .filter_map(&field)
        .collect();
    if values.is_empty() {
        return Err(Error::NoCounterfactuals);
    }
    Ok(MeanDistance {
        mean: values.iter().sum::<usize>() as f64 / values.len() as f64,
        included: values.len(),
        excluded: records.len() - values.len(),
    })
}

/// One line of the aggregate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub setting: String,
    pub dataset: String,
    pub model: String,
    /// A seed number, or `mean` for rows averaged over seeds.
    pub seed: String,
    pub k: usize,
    pub fidelity: f64,
    pub mean_hamming: Option<f64>,
    pub mean_levenshtein: Option<f64>,
    pub valid_fraction: f64,
    pub n_users: usize,
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "method",
    "setting",
    "dataset",
    "model",
    "seed",
    "k",
    "fidelity",
    "mean_hamming",
    "mean_levenshtein",
    "valid_fraction",
    "n_users",
];

/// Per (method, seed, k) summary. Users without a counterfactual contribute a
/// fidelity of 0 and are left out of the distance means.
pub fn aggregate_report(
    records: &[ExplanationRecord],
    model: &dyn BlackBoxScorer,
    k_list: &[usize],
    t: f64,
    dataset: &str,
    model_name: &str,
) -> Result<Vec<ReportRow>> {
    let first = records
        .first()
        .ok_or_else(|| Error::EmptyInput("no records to aggregate".into()))?;
    if records.iter().any(|r| r.setting != first.setting) {
        return Err(Error::InvalidSetting(
            "records in one report must share a setting".into(),
        ));
    }
    let mut groups: BTreeMap<(String, u64), Vec<&ExplanationRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.method.tag().to_string(), r.seed))
            .or_default()
            .push(r);
    }
    let setting = first.setting.kind().tag().to_string();
    let mut rows = Vec::new();
    for ((method, seed), group) in groups {
        let cf_scores: Vec<Option<ScoreVector>> = group
            .iter()
            .map(|r| r.counterfactual.as_ref().map(|cf| model.score(cf)).transpose())
            .collect::<Result<_>>()?;
        let owned: Vec<ExplanationRecord> = group.iter().map(|r| (*r).clone()).collect();
        let ham = mean_hamming(&owned).ok().map(|m| m.mean);
        let lev = mean_levenshtein(&owned).ok().map(|m| m.mean);
        let n = group.len();
        let valid = cf_scores.iter().filter(|s| s.is_some()).count();
        for &k in k_list {
            let mut total = 0.0;
            for s in cf_scores.iter().flatten() {
                total += fidelity_at_k(s, k, t)?;
            }
            rows.push(ReportRow {
                method: method.clone(),
                setting: setting.clone(),
                dataset: dataset.to_string(),
                model: model_name.to_string(),
                seed: seed.to_string(),
                k,
                fidelity: total / n as f64,
                mean_hamming: ham,
                mean_levenshtein: lev,
                valid_fraction: valid as f64 / n as f64,
                n_users: n,
            });
        }
    }
    Ok(rows)
}

/// Keeps the per-seed rows and appends one `mean` row per
/// (method, setting, dataset, model, k).
pub fn with_seed_means(rows: &[ReportRow]) -> Vec<ReportRow> {
    type Key = (String, String, String, String, usize);
    let mut groups: BTreeMap<Key, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.seed != "mean") {
        groups
            .entry((
                r.method.clone(),
                r.setting.clone(),
                r.dataset.clone(),
                r.model.clone(),
                r.k,
            ))
            .or_default()
            .push(r);
    }
    let mut out: Vec<ReportRow> = rows.iter().filter(|r| r.seed != "mean").cloned().collect();
    for ((method, setting, dataset, model, k), group) in groups {
        let n = group.len() as f64;
        let opt_mean = |f: fn(&ReportRow) -> Option<f64>| {
            let vals: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        out.push(ReportRow {
            method,
            setting,
            dataset,
            model,
            seed: "mean".into(),
            k,
            fidelity: group.iter().map(|r| r.fidelity).sum::<f64>() / n,
            mean_hamming: opt_mean(|r| r.mean_hamming),
            mean_levenshtein: opt_mean(|r| r.mean_levenshtein),
            valid_fraction: group.iter().map(|r| r.valid_fraction).sum::<f64>() / n,
            n_users: group.iter().map(|r| r.n_users).sum(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gece::Method;
    use crate::model::PopularityScorer;
    use crate::objective::SettingSpec;

    fn ids(v: &[u32]) -> Vec<ItemId> {
        v.iter().copied().map(ItemId).collect()
    }

    fn probs(p: &[f64]) -> ScoreVector {
        ScoreVector::from_scores(p.to_vec())
    }

    #[test]
    fn fidelity_direct_formula() {
        let s = probs(&[0.7, 0.6, 0.4]);
        assert_eq!(fidelity_at_k(&s, 3, 0.5).unwrap(), 2.0 / 3.0);
        let s = probs(&[0.5, 0.3, 0.2]);
        assert_eq!(fidelity_at_k(&s, 1, 0.5).unwrap(), 1.0);
        assert_eq!(fidelity_at_k(&s, 2, 0.6).unwrap(), 0.0);
        assert!(fidelity_at_k(&s, 4, 0.5).is_err());
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming(&ids(&[1, 2, 3]), &ids(&[1, 2, 3])), 0);
        assert_eq!(hamming(&ids(&[1, 2, 3]), &ids(&[1, 5, 3])), 1);
        assert_eq!(hamming(&ids(&[1, 2, 3]), &ids(&[2, 3])), 1);
        assert_eq!(hamming(&ids(&[1, 2, 3]), &ids(&[3])), 2);
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein(&ids(&[1, 2, 3]), &ids(&[1, 2, 3])), 0);
        assert_eq!(levenshtein(&ids(&[1, 2, 3]), &ids(&[1, 3])), 1);
        assert_eq!(levenshtein(&ids(&[1, 2, 3]), &ids(&[2, 3, 4])), 2);
        assert_eq!(levenshtein(&[], &ids(&[1, 2])), 2);
    }

    fn record(seed: u64, cf: Option<&[u32]>) -> ExplanationRecord {
        let source = ids(&[0, 1, 2]);
        let counterfactual = cf.map(ids);
        ExplanationRecord {
            user: 1,
            method: Method::Gece,
            setting: SettingSpec::untargeted_uncategorized(),
            k: 1,
            hamming: counterfactual.as_ref().map(|c| hamming(&source, c)),
            levenshtein: counterfactual.as_ref().map(|c| levenshtein(&source, c)),
            valid_at_k: Default::default(),
            generation_found: None,
            edits: 0,
            seed,
            source,
            counterfactual,
        }
    }

    #[test]
    fn mean_hamming_examples() {
        let recs = vec![record(0, Some(&[0, 1, 3])), record(0, Some(&[0, 4, 3]))];
        let m = mean_hamming(&recs).unwrap();
        assert_eq!(m.mean, 1.5);
        let recs = vec![
            record(0, Some(&[0, 1, 3])),
            record(0, Some(&[0, 1, 4])),
            record(0, Some(&[0, 1, 5])),
            record(0, None),
        ];
        let m = mean_hamming(&recs).unwrap();
        assert_eq!((m.mean, m.included, m.excluded), (1.0, 3, 1));
        assert!(matches!(mean_hamming(&[record(0, None)]), Err(Error::NoCounterfactuals)));
        assert!(mean_hamming(&[]).is_err());
    }

    #[test]
    fn report_absent_counts_zero_and_seed_means() {
        // item 5 dominates once 0..2 are masked
        let model = PopularityScorer::new(vec![1, 1, 1, 1, 1, 100]);
        let one = aggregate_report(&[record(0, Some(&[0, 1, 3]))], &model, &[1], 0.5, "d", "m").unwrap();
        assert_eq!(one[0].fidelity, 1.0);
        assert_eq!(one[0].valid_fraction, 1.0);

        let two = aggregate_report(
            &[record(0, Some(&[0, 1, 3])), record(0, None)],
            &model,
            &[1],
            0.5,
            "d",
            "m",
        )
        .unwrap();
        assert_eq!(two[0].fidelity, 0.5);
        assert_eq!(two[0].n_users, 2);

        let recs: Vec<_> = (0..3)
            .map(|s| record(s, if s == 2 { None } else { Some(&[0, 1, 3][..]) }))
            .collect();
        let rows = with_seed_means(&aggregate_report(&recs, &model, &[1], 0.5, "d", "m").unwrap());
        assert_eq!(rows.len(), 4);
        let mean = rows.iter().find(|r| r.seed == "mean").unwrap();
        assert!((mean.fidelity - 2.0 / 3.0).abs() < 1e-12);
        assert!(aggregate_report(&[], &model, &[1], 0.5, "d", "m").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fidelity_non_increasing(logits in proptest::collection::vec(-4.0f64..4.0, 2..30), t in 0.01f64..0.99) {
                let s = ScoreVector::from_logits(logits, &[]);
                let mut prev = f64::INFINITY;
                for k in 1..=s.len() {
                    let f = fidelity_at_k(&s, k, t).unwrap();
                    prop_assert!(f <= prev + 1e-15);
                    prev = f;
                }
            }

            #[test]
            fn normalization_sums_to_one(logits in proptest::collection::vec(-30.0f64..30.0, 1..40), mask in proptest::collection::vec(0u32..40, 0..10)) {
                let n = logits.len();
                let mask: Vec<ItemId> = mask.into_iter().filter(|&m| (m as usize) < n).map(ItemId).collect();
                let s = ScoreVector::from_logits(logits, &mask);
                let sum: f64 = s.normalized().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(s.normalized().iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }
}
