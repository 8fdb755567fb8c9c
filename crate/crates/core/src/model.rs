//! Black-box scorer abstraction and count-based reference recommenders.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ItemId, UserSequence};

pub const MODEL_MAGIC: &str = "SEQCF-MODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Name of the logit normalization, recorded in output headers.
pub const NORMALIZATION: &str = "softmax";

/// Raw per-item logits and their softmax normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    logits: Vec<f64>,
    normalized: Vec<f64>,
}

impl ScoreVector {
    /// Normalizes `logits` with a softmax after forcing `masked` items to
    /// `-inf`. If no item has a finite logit the mass is spread uniformly
    /// over the unmasked items (or over all items when everything is masked).
    pub fn from_logits(mut logits: Vec<f64>, masked: &[ItemId]) -> Self {
        let n = logits.len();
        let mut is_masked = vec![false; n];
        for &m in masked {
            if let Some(l) = logits.get_mut(m.index()) {
                *l = f64::NEG_INFINITY;
                is_masked[m.index()] = true;
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let normalized = if max.is_finite() {
            let exps: Vec<f64> = logits
                .iter()
                .map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() })
                .collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        } else {
            let open = is_masked.iter().filter(|&&m| !m).count();
            if open == 0 {
                vec![1.0 / n as f64; n]
            } else {
                is_masked
                    .iter()
                    .map(|&m| if m { 0.0 } else { 1.0 / open as f64 })
                    .collect()
            }
        };
        ScoreVector { logits, normalized }
    }

    /// Wraps scores that are already in [0, 1], used both as logits and as
    /// normalized scores.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        ScoreVector {
            logits: scores.clone(),
            normalized: scores,
        }
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    pub fn get(&self, item: ItemId) -> f64 {
        self.normalized[item.index()]
    }

    fn rank_cmp(&self, a: usize, b: usize) -> Ordering {
        self.normalized[b]
            .total_cmp(&self.normalized[a])
            .then(a.cmp(&b))
    }

    /// Highest-scoring item; ties go to the lower id.
    pub fn top1(&self) -> ItemId {
        let best = (0..self.len())
            .min_by(|&a, &b| self.rank_cmp(a, b))
            .expect("non-empty score vector");
        ItemId(best as u32)
    }

    /// The `k` best items by descending normalized score, ascending id on ties.
    pub fn top_k(&self, k: usize) -> Result<Vec<ItemId>> {
        let n = self.len();
        if k == 0 || k > n {
            return Err(Error::KOutOfRange { k, max: n });
        }
        let mut idx: Vec<usize> = (0..n).collect();
        if k < n {
            idx.select_nth_unstable_by(k - 1, |&a, &b| self.rank_cmp(a, b));
            idx.truncate(k);
        }
        idx.sort_unstable_by(|&a, &b| self.rank_cmp(a, b));
        Ok(idx.into_iter().map(|i| ItemId(i as u32)).collect())
    }

    /// Normalized scores of the top `k` items, descending.
    pub fn top_k_scores(&self, k: usize) -> Result<Vec<f64>> {
        Ok(self.top_k(k)?.into_iter().map(|i| self.get(i)).collect())
    }
}

/// A recommender seen only through its input/output behaviour.
pub trait BlackBoxScorer: Send + Sync {
    fn num_items(&self) -> usize;

    /// Scores every catalog item as the next interaction after `items`.
    fn score(&self, items: &[ItemId]) -> Result<ScoreVector>;
}

pub fn score(model: &dyn BlackBoxScorer, seq: &UserSequence) -> Result<ScoreVector> {
    model.score(seq.items())
}

pub fn top_k(scores: &ScoreVector, k: usize) -> Result<Vec<ItemId>> {
    scores.top_k(k)
}

fn check_input(items: &[ItemId], num_items: usize) -> Result<()> {
    if items.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(bad) = items.iter().find(|i| i.index() >= num_items) {
        return Err(Error::ItemOutOfRange {
            item: bad.0,
            num_items,
        });
    }
    Ok(())
}

fn item_frequencies<'a>(
    train: impl IntoIterator<Item = &'a UserSequence>,
    num_items: usize,
) -> Result<Vec<u64>> {
    let mut freq = vec![0u64; num_items];
    let mut any = false;
    for seq in train {
        any = true;
        for &it in seq.items() {
            let slot = freq.get_mut(it.index()).ok_or(Error::ItemOutOfRange {
                item: it.0,
                num_items,
            })?;
            *slot += 1;
        }
    }
    if !any {
        return Err(Error::EmptySplit);
    }
    Ok(freq)
}

/// First-order Markov chain interpolated with item popularity.
///
/// `p(j | S) = beta * (c[last][j] + alpha) / (row[last] + alpha*m)
///           + (1 - beta) * (f[j] + alpha) / (F + alpha*m)`
///
/// Logits are `ln p`, so the softmax recovers `p` renormalized over
/// unmasked items.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovScorer {
    num_items: usize,
    /// Sparse rows of `(next item, count)` sorted by item.
    transitions: Vec<Vec<(u32, u64)>>,
    row_totals: Vec<u64>,
    freq: Vec<u64>,
    total_freq: u64,
    alpha: f64,
    beta: f64,
    mask_seen: bool,
}

impl MarkovScorer {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mask_seen(&self) -> bool {
        self.mask_seen
    }

    pub fn set_mask_seen(&mut self, mask: bool) {
        self.mask_seen = mask;
    }

    pub fn transition_count(&self, from: ItemId, to: ItemId) -> u64 {
        let row = &self.transitions[from.index()];
        row.binary_search_by_key(&to.0, |&(j, _)| j)
            .map(|p| row[p].1)
            .unwrap_or(0)
    }

    pub fn frequency(&self, item: ItemId) -> u64 {
        self.freq[item.index()]
    }

    /// Interpolated probability vector before masking.
    pub fn next_item_probabilities(&self, last: ItemId) -> Vec<f64> {
        let m = self.num_items as f64;
        let row_denom = self.row_totals[last.index()] as f64 + self.alpha * m;
        let pop_denom = self.total_freq as f64 + self.alpha * m;
        let mut p: Vec<f64> = self
            .freq
            .iter()
            .map(|&f| {
                self.beta * self.alpha / row_denom + (1.0 - self.beta) * (f as f64 + self.alpha) / pop_denom
            })
            .collect();
        for &(j, c) in &self.transitions[last.index()] {
            p[j as usize] += self.beta * c as f64 / row_denom;
        }
        p
    }
}

impl BlackBoxScorer for MarkovScorer {
    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score(&self, items: &[ItemId]) -> Result<ScoreVector> {
        check_input(items, self.num_items)?;
        let last = *items.last().expect("checked non-empty");
        let logits = self
            .next_item_probabilities(last)
            .into_iter()
            .map(f64::ln)
            .collect();
        let masked = if self.mask_seen { items } else { &[] };
        Ok(ScoreVector::from_logits(logits, masked))
    }
}

/// Counts adjacent pairs and item occurrences over the training split.
pub fn train_markov<'a>(
    train: impl IntoIterator<Item = &'a UserSequence>,
    num_items: usize,
    alpha: f64,
    beta: f64,
) -> Result<MarkovScorer> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!("beta must be in [0,1], got {beta}")));
    }
    let seqs: Vec<&UserSequence> = train.into_iter().collect();
    let freq = item_frequencies(seqs.iter().copied(), num_items)?;
    let mut dense: Vec<std::collections::BTreeMap<u32, u64>> = vec![Default::default(); num_items];
    for seq in &seqs {
        for w in seq.items().windows(2) {
            *dense[w[0].index()].entry(w[1].0).or_default() += 1;
        }
    }
    let transitions: Vec<Vec<(u32, u64)>> = dense.into_iter().map(|r| r.into_iter().collect()).collect();
    Ok(MarkovScorer::from_counts(num_items, transitions, freq, alpha, beta, true))
}

impl MarkovScorer {
    fn from_counts(
        num_items: usize,
        transitions: Vec<Vec<(u32, u64)>>,
        freq: Vec<u64>,
        alpha: f64,
        beta: f64,
        mask_seen: bool,
    ) -> Self {
        let row_totals = transitions
            .iter()
            .map(|r| r.iter().map(|&(_, c)| c).sum())
            .collect();
        let total_freq = freq.iter().sum();
        MarkovScorer {
            num_items,
            transitions,
            row_totals,
            freq,
            total_freq,
            alpha,
            beta,
            mask_seen,
        }
    }
}

/// Scores proportional to item frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityScorer {
    freq: Vec<u64>,
    mask_seen: bool,
}

impl PopularityScorer {
    pub fn new(freq: Vec<u64>) -> Self {
        PopularityScorer {
            freq,
            mask_seen: true,
        }
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.freq
    }

    pub fn set_mask_seen(&mut self, mask: bool) {
        self.mask_seen = mask;
    }
}

impl BlackBoxScorer for PopularityScorer {
    fn num_items(&self) -> usize {
        self.freq.len()
    }

    fn score(&self, items: &[ItemId]) -> Result<ScoreVector> {
        check_input(items, self.freq.len())?;
        let logits = self.freq.iter().map(|&f| (f as f64).ln()).collect();
        let masked = if self.mask_seen { items } else { &[] };
        Ok(ScoreVector::from_logits(logits, masked))
    }
}

pub fn train_popularity<'a>(
    train: impl IntoIterator<Item = &'a UserSequence>,
    num_items: usize,
) -> Result<PopularityScorer> {
    Ok(PopularityScorer::new(item_frequencies(train, num_items)?))
}

/// The scorers that can be persisted to a model file.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceModel {
    Markov(MarkovScorer),
    Popularity(PopularityScorer),
}

impl ReferenceModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ReferenceModel::Markov(_) => "markov",
            ReferenceModel::Popularity(_) => "popularity",
        }
    }
}

impl BlackBoxScorer for ReferenceModel {
    fn num_items(&self) -> usize {
        match self {
            ReferenceModel::Markov(m) => m.num_items(),
            ReferenceModel::Popularity(m) => m.num_items(),
        }
    }

    fn score(&self, items: &[ItemId]) -> Result<ScoreVector> {
        match self {
            ReferenceModel::Markov(m) => m.score(items),
            ReferenceModel::Popularity(m) => m.score(items),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    version: u32,
    kind: String,
    normalization: String,
    params: ModelParams,
    counts: ModelCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run_config: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct ModelParams {
    mask_seen: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelCounts {
    num_items: usize,
    freq: Vec<u64>,
    /// `[from, to, count]` triples.
    #[serde(default)]
    transitions: Vec<(u32, u32, u64)>,
}

/// Writes the model as a JSON container headed by [`MODEL_MAGIC`].
pub fn save_model(
    model: &ReferenceModel,
    path: impl AsRef<Path>,
    run_config: Option<serde_json::Value>,
) -> Result<()> {
    let path = path.as_ref();
    let (params, counts) = match model {
        ReferenceModel::Markov(m) => (
            ModelParams {
                mask_seen: m.mask_seen,
                alpha: Some(m.alpha),
                beta: Some(m.beta),
            },
            ModelCounts {
                num_items: m.num_items,
                freq: m.freq.clone(),
                transitions: m
                    .transitions
                    .iter()
                    .enumerate()
                    .flat_map(|(i, row)| row.iter().map(move |&(j, c)| (i as u32, j, c)))
                    .collect(),
            },
        ),
        ReferenceModel::Popularity(p) => (
            ModelParams {
                mask_seen: p.mask_seen,
                alpha: None,
                beta: None,
            },
            ModelCounts {
                num_items: p.freq.len(),
                freq: p.freq.clone(),
                transitions: Vec::new(),
            },
        ),
    };
    let file = ModelFile {
        magic: MODEL_MAGIC.to_string(),
        version: MODEL_FORMAT_VERSION,
        kind: model.kind().to_string(),
        normalization: NORMALIZATION.to_string(),
        params,
        counts,
        run_config,
    };
    let text = serde_json::to_string(&file)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ReferenceModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|_| Error::VersionMismatch("not a model file".into()))?;
    match value.get("magic").and_then(|m| m.as_str()) {
        Some(MODEL_MAGIC) => {}
        other => {
            return Err(Error::VersionMismatch(format!(
                "expected magic {MODEL_MAGIC:?}, found {other:?}"
            )))
        }
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(MODEL_FORMAT_VERSION as u64) {
        return Err(Error::VersionMismatch(format!(
            "expected version {MODEL_FORMAT_VERSION}, found {version:?}"
        )));
    }
    let file: ModelFile = serde_json::from_value(value)?;
    let n = file.counts.num_items;
    if file.counts.freq.len() != n {
        return Err(Error::Parse("frequency vector length mismatch".into()));
    }
    match file.kind.as_str() {
        "markov" => {
            let mut rows: Vec<Vec<(u32, u64)>> = vec![Vec::new(); n];
            for (i, j, c) in file.counts.transitions {
                if i as usize >= n || j as usize >= n {
                    return Err(Error::Parse(format!("transition ({i},{j}) out of range")));
                }
                rows[i as usize].push((j, c));
            }
            for r in &mut rows {
                r.sort_unstable();
            }
            let alpha = file.params.alpha.ok_or_else(|| Error::Parse("missing alpha".into()))?;
            let beta = file.params.beta.ok_or_else(|| Error::Parse("missing beta".into()))?;
            Ok(ReferenceModel::Markov(MarkovScorer::from_counts(
                n,
                rows,
                file.counts.freq,
                alpha,
                beta,
                file.params.mask_seen,
            )))
        }
        "popularity" => Ok(ReferenceModel::Popularity(PopularityScorer {
            freq: file.counts.freq,
            mask_seen: file.params.mask_seen,
        })),
        other => Err(Error::VersionMismatch(format!("unknown scorer kind {other:?}"))),
    }
}
