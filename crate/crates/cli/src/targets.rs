//! Popularity strata for picking targets and seeded user sampling.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use seqcf_core::rng::purpose;
use seqcf_core::{CategoryMap, SeedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    /// Top decile by training popularity.
    Popular,
    /// The two middle quartiles.
    Standard,
    /// Bottom decile.
    Unpopular,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stratum::Popular => "popular",
            Stratum::Standard => "standard",
            Stratum::Unpopular => "unpopular",
        })
    }
}

/// Indices in the stratum, most popular first. Ranking ties break by index.
pub fn stratum_members(popularity: &[u64], stratum: Stratum) -> Vec<usize> {
    let n = popularity.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| popularity[b].cmp(&popularity[a]).then(a.cmp(&b)));
    let decile = n.div_ceil(10).max(1).min(n);
    match stratum {
        Stratum::Popular => order[..decile].to_vec(),
        Stratum::Unpopular => order[n - decile..].to_vec(),
        Stratum::Standard => order[n / 4..n - n / 4].to_vec(),
    }
}

/// Uniform draw from the stratum.
pub fn pick_from_stratum(popularity: &[u64], stratum: Stratum, seed: u64) -> Option<usize> {
    let members = stratum_members(popularity, stratum);
    if members.is_empty() {
        return None;
    }
    let mut rng = SeedSpec::new(seed).stream(&[purpose::TARGETS, stratum as u64]);
    Some(members[rng.gen_range(0..members.len())])
}

/// Summed training popularity of each category's member items.
pub fn category_popularity(item_popularity: &[u64], categories: &CategoryMap) -> Vec<u64> {
    let mut out = vec![0u64; categories.num_categories()];
    for (i, &p) in item_popularity.iter().enumerate() {
        for &c in categories.categories(seqcf_core::ItemId(i as u32)) {
            out[c as usize] += p;
        }
    }
    out
}

/// `n` users drawn without replacement, returned in ascending order. All
/// users when `n` covers them.
pub fn sample_users(users: &[u64], n: usize, seed: u64) -> Vec<u64> {
    if n >= users.len() {
        return users.to_vec();
    }
    let mut rng = SeedSpec::new(seed).stream(&[purpose::SAMPLE_USERS]);
    let mut picked: Vec<usize> = index::sample(&mut rng, users.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| users[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strata_of_twenty() {
        let pop: Vec<u64> = (0..20).map(|i| 100 - i).collect();
        assert_eq!(stratum_members(&pop, Stratum::Popular), vec![0, 1]);
        assert_eq!(stratum_members(&pop, Stratum::Unpopular), vec![18, 19]);
        assert_eq!(stratum_members(&pop, Stratum::Standard), (5..15).collect::<Vec<_>>());
    }

    #[test]
    fn strata_on_tiny_inputs() {
        assert_eq!(stratum_members(&[3, 9], Stratum::Popular), vec![1]);
        assert_eq!(stratum_members(&[3, 9], Stratum::Standard), vec![1, 0]);
        assert_eq!(stratum_members(&[], Stratum::Popular), Vec::<usize>::new());
        assert_eq!(pick_from_stratum(&[], Stratum::Popular, 0), None);
    }

    #[test]
    fn sampling_is_sorted_and_seeded() {
        let users: Vec<u64> = (10..110).collect();
        let a = sample_users(&users, 20, 7);
        assert_eq!(a.len(), 20);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a, sample_users(&users, 20, 7));
        assert_ne!(a, sample_users(&users, 20, 8));
        assert_eq!(sample_users(&users, 500, 0), users);
    }
}
