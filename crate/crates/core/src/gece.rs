//! Genetic counterfactual search over item sequences.
//!
//! A population of copies of the source sequence evolves through three
//! mutation operators (replace, add, delete), one-point crossover and elitist
//! truncation selection. Fitness mixes normalized edit distance to the source
//! with a setting-specific objective loss; validity is only checked when the
//! final counterfactual is extracted.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{hamming, levenshtein};
use crate::model::{BlackBoxScorer, ScoreVector};
use crate::objective::{LossKind, Objective, SettingSpec};
use crate::rng::{purpose, SeedSpec, Stream};
use crate::types::{CategoryMap, ItemId, UserSequence, DEFAULT_MAX_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub generations: usize,
    pub population_size: usize,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    /// Weight of the normalized edit distance in the fitness.
    pub lambda: f64,
    pub max_len: usize,
    /// Relative weights of replace, add and delete.
    pub mutation_weights: [f64; 3],
    pub loss: LossKind,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            generations: 30,
            population_size: 8192,
            mutation_prob: 0.5,
            crossover_prob: 0.7,
            lambda: 0.5,
            max_len: DEFAULT_MAX_LEN,
            mutation_weights: [1.0, 1.0, 1.0],
            loss: LossKind::Admissible,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.generations < 1 {
            return bad("generations must be >= 1");
        }
        if self.population_size < 2 {
            return bad("population_size must be >= 2");
        }
        for (name, p) in [
            ("mutation_prob", self.mutation_prob),
            ("crossover_prob", self.crossover_prob),
            ("lambda", self.lambda),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.max_len < 1 {
            return bad("max_len must be >= 1");
        }
        if self.mutation_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.mutation_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("mutation weights must be non-negative with a positive sum");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gece,
    Random,
    Educated,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Gece => "gece",
            Method::Random => "random",
            Method::Educated => "educated",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gece" => Ok(Method::Gece),
            "random" => Ok(Method::Random),
            "educated" => Ok(Method::Educated),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// Outcome of one explanation run for one user. Item ids are dense catalog
/// indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub user: u64,
    pub method: Method,
    pub setting: SettingSpec,
    pub k: usize,
    pub source: Vec<ItemId>,
    pub counterfactual: Option<Vec<ItemId>>,
    pub valid_at_k: BTreeMap<usize, bool>,
    /// Padded Hamming distance to the source.
    pub hamming: Option<usize>,
    pub levenshtein: Option<usize>,
    /// Generation in which the returned sequence first appeared.
    pub generation_found: Option<u32>,
    /// Single-item edits applied (baselines only).
    pub edits: usize,
    pub seed: u64,
}

impl ExplanationRecord {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        method: Method,
        objective: &Objective<'_>,
        model: &dyn BlackBoxScorer,
        source: &UserSequence,
        source_scores: &ScoreVector,
        k: usize,
        seed: u64,
        found: Option<(&[ItemId], Option<u32>)>,
        edits: usize,
    ) -> Result<Self> {
        let setting = objective.setting();
        let mut ks: Vec<usize> = setting.k_eval.clone();
        ks.push(k);
        ks.sort_unstable();
        ks.dedup();
        let (counterfactual, valid_at_k, generation_found) = match found {
            Some((cf, generation)) => {
                let scores = model.score(cf)?;
                let valid = ks
                    .iter()
                    .map(|&kk| Ok((kk, objective.is_valid(source_scores, &scores, kk)?)))
                    .collect::<Result<_>>()?;
                (Some(cf.to_vec()), valid, generation)
            }
            None => (None, ks.iter().map(|&kk| (kk, false)).collect(), None),
        };
        Ok(ExplanationRecord {
            user: source.user(),
            method,
            setting: setting.clone(),
            k,
            source: source.items().to_vec(),
            hamming: counterfactual.as_deref().map(|c| hamming(source.items(), c)),
            levenshtein: counterfactual.as_deref().map(|c| levenshtein(source.items(), c)),
            counterfactual,
            valid_at_k,
            generation_found,
            edits,
            seed,
        })
    }
}

fn draw_absent_item(seq: &[ItemId], num_items: usize, rng: &mut Stream) -> Result<ItemId> {
    if seq.len() >= num_items {
        return Err(Error::CatalogExhausted);
    }
    if seq.len() * 2 < num_items {
        loop {
            let z = ItemId(rng.gen_range(0..num_items as u32));
            if !seq.contains(&z) {
                return Ok(z);
            }
        }
    }
    let free: Vec<ItemId> = (0..num_items as u32)
        .map(ItemId)
        .filter(|z| !seq.contains(z))
        .collect();
    free.choose(rng).copied().ok_or(Error::CatalogExhausted)
}

/// `seq` with position `index` set to `item`.
pub fn replace_at(seq: &UserSequence, index: usize, item: ItemId) -> Result<UserSequence> {
    let mut items = seq.items().to_vec();
    *items
        .get_mut(index)
        .ok_or_else(|| Error::InvalidSequence(format!("index {index} out of bounds")))? = item;
    seq.with_items(items)
}

/// `seq` with `item` inserted before `index`; the oldest item is dropped when
/// the window overflows.
pub fn insert_at(seq: &UserSequence, index: usize, item: ItemId) -> Result<UserSequence> {
    if index > seq.len() {
        return Err(Error::InvalidSequence(format!("index {index} out of bounds")));
    }
    let mut items = seq.items().to_vec();
    items.insert(index, item);
    if items.len() > seq.max_len() {
        items.remove(0);
    }
    seq.with_items(items)
}

pub fn delete_at(seq: &UserSequence, index: usize) -> Result<UserSequence> {
    if seq.len() < 2 {
        return Err(Error::DeleteFromSingleton);
    }
    if index >= seq.len() {
        return Err(Error::InvalidSequence(format!("index {index} out of bounds")));
    }
    let mut items = seq.items().to_vec();
    items.remove(index);
    seq.with_items(items)
}

pub fn mutate_replace(seq: &UserSequence, num_items: usize, rng: &mut Stream) -> Result<UserSequence> {
    if seq.len() >= num_items {
        return Err(Error::CatalogExhausted);
    }
    let i = rng.gen_range(0..seq.len());
    let z = draw_absent_item(seq.items(), num_items, rng)?;
    let mut items = seq.items().to_vec();
    items[i] = z;
    Ok(UserSequence::from_parts_unchecked(seq.user(), items, seq.max_len()))
}

pub fn mutate_add(seq: &UserSequence, num_items: usize, rng: &mut Stream) -> Result<UserSequence> {
    if seq.len() >= num_items {
        return Err(Error::CatalogExhausted);
    }
    let i = rng.gen_range(0..=seq.len());
    let z = draw_absent_item(seq.items(), num_items, rng)?;
    let mut items = seq.items().to_vec();
    items.insert(i, z);
    if items.len() > seq.max_len() {
        items.remove(0);
    }
    Ok(UserSequence::from_parts_unchecked(seq.user(), items, seq.max_len()))
}

pub fn mutate_delete(seq: &UserSequence, rng: &mut Stream) -> Result<UserSequence> {
    if seq.len() < 2 {
        return Err(Error::DeleteFromSingleton);
    }
    let i = rng.gen_range(0..seq.len());
    let mut items = seq.items().to_vec();
    items.remove(i);
    Ok(UserSequence::from_parts_unchecked(seq.user(), items, seq.max_len()))
}

/// Drops later duplicates and keeps the most recent `max_len` items.
fn repair(mut items: Vec<ItemId>, max_len: usize) -> Vec<ItemId> {
    let mut seen = std::collections::HashSet::with_capacity(items.len());
    items.retain(|it| seen.insert(*it));
    if items.len() > max_len {
        items.drain(..items.len() - max_len);
    }
    items
}

/// One-point crossover with explicit cut points: children are
/// `p1[..cut1] ++ p2[cut2..]` and `p2[..cut2] ++ p1[cut1..]`, repaired. A
/// child that comes out empty is replaced by a copy of its first parent.
pub fn crossover_at(
    p1: &UserSequence,
    p2: &UserSequence,
    cut1: usize,
    cut2: usize,
) -> (UserSequence, UserSequence) {
    assert!(cut1 <= p1.len() && cut2 <= p2.len(), "cut out of bounds");
    let (a, b) = (p1.items(), p2.items());
    let max_len = p1.max_len();
    let make = |prefix: &[ItemId], suffix: &[ItemId], fallback: &UserSequence| {
        let items = repair([prefix, suffix].concat(), max_len);
        if items.is_empty() {
            UserSequence::from_parts_unchecked(fallback.user(), fallback.items().to_vec(), max_len)
        } else {
            UserSequence::from_parts_unchecked(p1.user(), items, max_len)
        }
    };
    (
        make(&a[..cut1], &b[cut2..], p1),
        make(&b[..cut2], &a[cut1..], p2),
    )
}

/// Crossover with a uniform cut point in `0..=len` for each parent.
pub fn crossover(p1: &UserSequence, p2: &UserSequence, rng: &mut Stream) -> (UserSequence, UserSequence) {
    let cut1 = rng.gen_range(0..=p1.len());
    let cut2 = rng.gen_range(0..=p2.len());
    crossover_at(p1, p2, cut1, cut2)
}

/// `lambda * edit_distance / max_len + (1 - lambda) * loss`; lower is better.
pub fn fitness(edit_distance: usize, loss: f64, lambda: f64, max_len: usize) -> f64 {
    lambda * (edit_distance as f64 / max_len as f64) + (1.0 - lambda) * loss
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub seq: UserSequence,
    pub fitness: f64,
    pub loss: f64,
    pub edit_distance: usize,
    /// Generation that produced this sequence; 0 for the source copies.
    pub born: u32,
}

#[derive(Debug, Clone)]
pub struct GeneticRun {
    /// Final population, best first.
    pub population: Vec<Candidate>,
    pub source_scores: ScoreVector,
    /// Best fitness after each generation's selection.
    pub best_fitness: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Evaluation {
    fitness: f64,
    loss: f64,
    edit_distance: usize,
}

fn cmp_candidates(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    a.fitness
        .total_cmp(&b.fitness)
        .then_with(|| a.seq.items().cmp(b.seq.items()))
        .then(a.born.cmp(&b.born))
}

struct Evaluator<'a> {
    model: &'a dyn BlackBoxScorer,
    objective: Objective<'a>,
    source: &'a UserSequence,
    source_scores: &'a ScoreVector,
    config: &'a GaConfig,
    cache: HashMap<Vec<ItemId>, Evaluation>,
}

impl Evaluator<'_> {
    fn evaluate_all(&mut self, seqs: impl Iterator<Item = Vec<ItemId>>) -> Result<()> {
        let mut fresh: Vec<Vec<ItemId>> = seqs.filter(|s| !self.cache.contains_key(s)).collect();
        fresh.sort_unstable();
        fresh.dedup();
        let results: Vec<Evaluation> = fresh
            .par_iter()
            .map(|items| {
                let scores = self.model.score(items)?;
                let loss = self.objective.search_loss(self.config.loss, self.source_scores, &scores);
                let edit_distance = levenshtein(self.source.items(), items);
                Ok(Evaluation {
                    fitness: fitness(edit_distance, loss, self.config.lambda, self.config.max_len),
                    loss,
                    edit_distance,
                })
            })
            .collect::<Result<_>>()?;
        self.cache.extend(fresh.into_iter().zip(results));
        Ok(())
    }

    fn candidate(&self, seq: UserSequence, born: u32) -> Candidate {
        let e = self.cache[seq.items()];
        Candidate {
            seq,
            fitness: e.fitness,
            loss: e.loss,
            edit_distance: e.edit_distance,
            born,
        }
    }
}

fn mutate_one(
    seq: &UserSequence,
    num_items: usize,
    weights: &[f64; 3],
    rng: &mut Stream,
) -> Result<Option<UserSequence>> {
    let can_grow = seq.len() < num_items;
    let applicable = [can_grow, can_grow, seq.len() >= 2];
    let w: Vec<f64> = weights
        .iter()
        .zip(applicable)
        .map(|(&w, ok)| if ok { w } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Ok(None);
    }
    let mut pick = rng.gen::<f64>() * total;
    let mut op = 2;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 && pick < wi {
            op = i;
            break;
        }
        pick -= wi;
    }
    if w[op] == 0.0 {
        op = w.iter().rposition(|&x| x > 0.0).expect("positive total");
    }
    let out = match op {
        0 => mutate_replace(seq, num_items, rng)?,
        1 => mutate_add(seq, num_items, rng)?,
        _ => mutate_delete(seq, rng)?,
    };
    Ok(Some(out))
}

/// Runs the evolutionary loop and returns the final population.
pub fn genetic(
    source: &UserSequence,
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    model: &dyn BlackBoxScorer,
    config: &GaConfig,
    seed: SeedSpec,
) -> Result<GeneticRun> {
    config.validate()?;
    let objective = Objective::new(setting, categories)?;
    let num_items = model.num_items();
    let source = UserSequence::new(source.user(), source.items().to_vec(), config.max_len)?;
    for &it in source.items() {
        if it.index() >= num_items {
            return Err(Error::ItemOutOfRange {
                item: it.0,
                num_items,
            });
        }
    }
    let source_scores = model.score(source.items())?;
    let user = source.user();
    let n = config.population_size;

    let mut eval = Evaluator {
        model,
        objective,
        source: &source,
        source_scores: &source_scores,
        config,
        cache: HashMap::new(),
    };
    eval.evaluate_all(std::iter::once(source.items().to_vec()))?;
    let mut population: Vec<Candidate> = vec![eval.candidate(source.clone(), 0); n];
    let mut best_fitness = Vec::with_capacity(config.generations);

    for generation in 1..=config.generations as u32 {
        let g = generation as u64;
        let mut offspring: Vec<(UserSequence, u32)> = population
            .par_iter()
            .enumerate()
            .map(|(i, parent)| {
                let mut rng = seed.stream(&[purpose::MUTATE, user, g, i as u64]);
                if rng.gen::<f64>() < config.mutation_prob {
                    if let Some(child) =
                        mutate_one(&parent.seq, num_items, &config.mutation_weights, &mut rng)?
                    {
                        return Ok((child, generation));
                    }
                }
                Ok((parent.seq.clone(), parent.born))
            })
            .collect::<Result<_>>()?;

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed.stream(&[purpose::CROSSOVER_PAIRING, user, g]));
        let pairs: Vec<(usize, usize)> = order.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        let children: Vec<Option<(UserSequence, UserSequence)>> = pairs
            .par_iter()
            .enumerate()
            .map(|(j, &(a, b))| {
                let mut rng = seed.stream(&[purpose::CROSSOVER, user, g, j as u64]);
                (rng.gen::<f64>() < config.crossover_prob)
                    .then(|| crossover(&offspring[a].0, &offspring[b].0, &mut rng))
            })
            .collect();
        for (&(a, b), kids) in pairs.iter().zip(children) {
            if let Some((c1, c2)) = kids {
                offspring[a] = (c1, generation);
                offspring[b] = (c2, generation);
            }
        }

        eval.evaluate_all(offspring.iter().map(|(s, _)| s.items().to_vec()))?;
        let mut pool = population;
        pool.extend(offspring.into_iter().map(|(s, born)| eval.candidate(s, born)));
        pool.par_sort_unstable_by(cmp_candidates);
        pool.truncate(n);
        best_fitness.push(pool[0].fitness);
        population = pool;
    }

    Ok(GeneticRun {
        population,
        source_scores,
        best_fitness,
    })
}

/// Runs the search and extracts the valid candidate closest to the source:
/// minimal edit distance, then lower loss, then lexicographic order.
pub fn explain(
    source: &UserSequence,
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    model: &dyn BlackBoxScorer,
    k: usize,
    config: &GaConfig,
    seed: SeedSpec,
) -> Result<ExplanationRecord> {
    let num_items = model.num_items();
    if k == 0 || k > num_items {
        return Err(Error::KOutOfRange { k, max: num_items });
    }
    if let Some(&bad) = setting.k_eval.iter().find(|&&kk| kk > num_items) {
        return Err(Error::KOutOfRange {
            k: bad,
            max: num_items,
        });
    }
    let run = genetic(source, setting, categories, model, config, seed)?;
    let objective = Objective::new(setting, categories)?;
    let chosen = extract_best_valid(&run, &objective, model, k)?;
    ExplanationRecord::build(
        Method::Gece,
        &objective,
        model,
        source,
        &run.source_scores,
        k,
        seed.master_seed,
        chosen.as_ref().map(|c| (c.seq.items(), Some(c.born))),
        0,
    )
}

pub fn extract_best_valid(
    run: &GeneticRun,
    objective: &Objective<'_>,
    model: &dyn BlackBoxScorer,
    k: usize,
) -> Result<Option<Candidate>> {
    // population is sorted, so the first occurrence of a sequence has its
    // earliest birth among equal-fitness copies
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<&Candidate> = run
        .population
        .iter()
        .filter(|c| seen.insert(c.seq.items()))
        .collect();
    let valid: Vec<bool> = unique
        .par_iter()
        .map(|c| {
            let scores = model.score(c.seq.items())?;
            objective.is_valid(&run.source_scores, &scores, k)
        })
        .collect::<Result<_>>()?;
    Ok(unique
        .into_iter()
        .zip(valid)
        .filter(|(_, ok)| *ok)
        .map(|(c, _)| c)
        .min_by(|a, b| {
            a.edit_distance
                .cmp(&b.edit_distance)
                .then(a.loss.total_cmp(&b.loss))
                .then_with(|| a.seq.items().cmp(b.seq.items()))
        })
        .cloned())
}
