//! Exhaustive search for the optimal fixed-length counterfactual.
//!
//! Candidates are enumerated by Hamming distance level (replacements only,
//! length preserved); the first level holding a valid candidate is optimal.
//! Within a level the lexicographically smallest valid sequence is returned.

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BlackBoxScorer, ScoreVector};
use crate::objective::{Objective, SettingSpec};
use crate::types::{CategoryMap, ItemId, UserSequence};

pub const ENUMERATION_BUDGET: u128 = 10_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Upper estimate of candidates visited: `sum_d C(L,d) * (n-L)^d`.
pub fn enumeration_cost(num_items: usize, len: usize, max_distance: usize) -> u128 {
    let free = num_items.saturating_sub(len) as u128;
    (1..=max_distance.min(len))
        .map(|d| binomial(len as u128, d as u128).saturating_mul(free.saturating_pow(d as u32)))
        .fold(0u128, u128::saturating_add)
}

/// Returns the optimal counterfactual and its distance, or `None` when no
/// valid candidate exists within `max_distance` replacements.
pub fn oracle_optimal(
    source: &UserSequence,
    setting: &SettingSpec,
    categories: Option<&CategoryMap>,
    model: &dyn BlackBoxScorer,
    k: usize,
    max_distance: usize,
) -> Result<Option<(UserSequence, usize)>> {
    let n = model.num_items();
    let len = source.len();
    let needed = enumeration_cost(n, len, max_distance);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: ENUMERATION_BUDGET,
        });
    }
    let objective = Objective::new(setting, categories)?;
    let source_scores = model.score(source.items())?;
    for d in 1..=max_distance.min(len) {
        if let Some(best) = best_at_distance(source, d, n, &objective, model, &source_scores, k)? {
            return Ok(Some((source.with_items(best)?, d)));
        }
    }
    Ok(None)
}

/// Lexicographically smallest valid candidate at exactly `d` replacements.
pub fn best_at_distance(
    source: &UserSequence,
    d: usize,
    num_items: usize,
    objective: &Objective<'_>,
    model: &dyn BlackBoxScorer,
    source_scores: &ScoreVector,
    k: usize,
) -> Result<Option<Vec<ItemId>>> {
    let mut combos = Vec::new();
    for_each_combination(source.len(), d, &mut |positions| combos.push(positions.to_vec()));
    let per_combo: Vec<Option<Vec<ItemId>>> = combos
        .par_iter()
        .map(|positions| {
            let mut best: Option<Vec<ItemId>> = None;
            let mut err = None;
            enumerate_assignments(source.items(), positions, num_items, &mut |cand| {
                if err.is_some() || best.as_deref().is_some_and(|b| b <= cand) {
                    return;
                }
                let valid = model
                    .score(cand)
                    .and_then(|s| objective.is_valid(source_scores, &s, k));
                match valid {
                    Ok(true) => best = Some(cand.to_vec()),
                    Ok(false) => {}
                    Err(e) => err = Some(e),
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(best),
            }
        })
        .collect::<Result<_>>()?;
    Ok(per_combo.into_iter().flatten().min())
}

/// Calls `f` with every `d`-subset of `0..len` in lexicographic order.
pub fn for_each_combination(len: usize, d: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, len: usize, left: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if left == 0 {
            f(acc);
            return;
        }
        for i in start..=len - left {
            acc.push(i);
            rec(i + 1, len, left - 1, acc, f);
            acc.pop();
        }
    }
    if d <= len {
        rec(0, len, d, &mut Vec::with_capacity(d), f);
    }
}

/// Every duplicate-free sequence that differs from `source` at exactly the
/// given positions, in lexicographic order.
pub fn enumerate_assignments(
    source: &[ItemId],
    positions: &[usize],
    num_items: usize,
    f: &mut dyn FnMut(&[ItemId]),
) {
    let mut used = vec![false; num_items];
    for (i, it) in source.iter().enumerate() {
        if !positions.contains(&i) {
            used[it.index()] = true;
        }
    }
    let mut cand = source.to_vec();
    fn rec(
        depth: usize,
        positions: &[usize],
        source: &[ItemId],
        cand: &mut Vec<ItemId>,
        used: &mut Vec<bool>,
        f: &mut dyn FnMut(&[ItemId]),
    ) {
        if depth == positions.len() {
            f(cand);
            return;
        }
        let p = positions[depth];
        for z in 0..used.len() {
            if used[z] || source[p].index() == z {
                continue;
            }
            used[z] = true;
            cand[p] = ItemId(z as u32);
            rec(depth + 1, positions, source, cand, used, f);
            used[z] = false;
        }
        cand[p] = source[p];
    }
    rec(0, positions, source, &mut cand, &mut used, f);
}

/// Number of ordered length-`len` selections without repetition from `n`
/// items, `n! / (n - len)!`.
pub fn count_search_space(n: u64, len: u64) -> Result<BigUint> {
    if len == 0 || n < len {
        return Err(Error::InvalidConfig(format!(
            "need n >= L >= 1, got n={n}, L={len}"
        )));
    }
    Ok(((n - len + 1)..=n).fold(BigUint::from(1u32), |acc, x| acc * x))
}
