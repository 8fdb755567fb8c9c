//! Synthetic interaction corpus with Zipf popularity and sticky successors.
//!
//! Each item has one preferred successor. A user's next item follows the
//! previous item's successor with probability `follow_prob`, otherwise it is
//! drawn from the popularity distribution. Items already consumed by the user
//! are never repeated.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Interaction, InteractionLog};
use crate::error::{Error, Result};
use crate::rng::{purpose, SeedSpec};

const GENRES: &[&str] = &[
    "Action",
    "Adventure",
    "Animation",
    "Drama",
    "Fantasy",
    "Horror",
    "Comedy",
    "Romance",
    "Sci-Fi",
    "Thriller",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_categories: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub zipf_exponent: f64,
    pub follow_prob: f64,
    /// Probability that an item carries a second category.
    pub second_category_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 200,
            num_items: 100,
            num_categories: 6,
            min_len: 15,
            max_len: 40,
            zipf_exponent: 0.8,
            follow_prob: 0.9,
            second_category_prob: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub log: InteractionLog,
    /// `(external item id, category labels)` rows.
    pub category_rows: Vec<(String, Vec<String>)>,
    /// Preferred successor of each item, by 0-based generator index.
    pub successor: Vec<usize>,
}

impl SynthCorpus {
    pub fn interactions_tsv(&self) -> String {
        let mut out = String::from("user\titem\ttimestamp\n");
        for r in &self.log.rows {
            out.push_str(&format!("{}\t{}\t{}\n", r.user, r.item, r.timestamp));
        }
        out
    }

    pub fn categories_tsv(&self) -> String {
        self.category_rows
            .iter()
            .map(|(item, labels)| format!("{}\t{}\n", item, labels.join("|")))
            .collect()
    }
}

fn item_label(index: usize) -> String {
    (index + 1).to_string()
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    let SynthConfig {
        num_users,
        num_items,
        num_categories,
        min_len,
        max_len,
        ..
    } = *config;
    if num_items < 2 || num_users == 0 {
        return Err(Error::InvalidConfig("need >= 2 items and >= 1 user".into()));
    }
    if min_len == 0 || min_len > max_len || max_len > num_items {
        return Err(Error::InvalidConfig(format!(
            "sequence lengths must satisfy 1 <= min_len <= max_len <= num_items, got {min_len}..{max_len} with {num_items} items"
        )));
    }
    if !(0.0..=1.0).contains(&config.follow_prob) {
        return Err(Error::InvalidConfig("follow_prob must be in [0,1]".into()));
    }
    let seed = SeedSpec::new(config.seed);

    let mut rng = seed.stream(&[purpose::SYNTH, 0]);
    let mut order: Vec<usize> = (0..num_items).collect();
    order.shuffle(&mut rng);
    // popularity rank r gets weight 1 / (r+1)^s
    let mut weights = vec![0.0; num_items];
    for (rank, &item) in order.iter().enumerate() {
        weights[item] = 1.0 / ((rank + 1) as f64).powf(config.zipf_exponent);
    }
    let popularity = WeightedIndex::new(&weights).expect("positive weights");
    let successor: Vec<usize> = (0..num_items)
        .map(|i| {
            let s = rng.gen_range(0..num_items - 1);
            if s >= i {
                s + 1
            } else {
                s
            }
        })
        .collect();

    let mut category_rows = Vec::with_capacity(num_items);
    if num_categories > 0 {
        let labels: Vec<String> = (0..num_categories)
            .map(|c| {
                GENRES
                    .get(c)
                    .map(|g| g.to_string())
                    .unwrap_or_else(|| format!("Category{c}"))
            })
            .collect();
        let mut rng = seed.stream(&[purpose::SYNTH, 1]);
        for item in 0..num_items {
            let first = rng.gen_range(0..num_categories);
            let mut ls = vec![labels[first].clone()];
            if num_categories > 1 && rng.gen_bool(config.second_category_prob) {
                let mut second = rng.gen_range(0..num_categories - 1);
                if second >= first {
                    second += 1;
                }
                ls.push(labels[second].clone());
            }
            category_rows.push((item_label(item), ls));
        }
    }

    let mut rows = Vec::new();
    for u in 0..num_users {
        let user = u as u64 + 1;
        let mut rng = seed.stream(&[purpose::SYNTH, 2, user]);
        let len = rng.gen_range(min_len..=max_len);
        let mut seen = vec![false; num_items];
        let mut seq: Vec<usize> = Vec::with_capacity(len);
        while seq.len() < len {
            let next = match seq.last() {
                Some(&prev) if rng.gen_bool(config.follow_prob) && !seen[successor[prev]] => {
                    successor[prev]
                }
                _ => draw_unseen(&popularity, &seen, &mut rng),
            };
            seen[next] = true;
            seq.push(next);
        }
        let base = 1_000_000 + user as i64 * 10_000;
        rows.extend(seq.into_iter().enumerate().map(|(t, item)| Interaction {
            user,
            item: item_label(item),
            timestamp: base + 60 * t as i64,
        }));
    }

    Ok(SynthCorpus {
        log: InteractionLog::from_rows(rows),
        category_rows,
        successor,
    })
}

fn draw_unseen<R: Rng>(popularity: &WeightedIndex<f64>, seen: &[bool], rng: &mut R) -> usize {
    for _ in 0..64 {
        let i = popularity.sample(rng);
        if !seen[i] {
            return i;
        }
    }
    let unseen: Vec<usize> = (0..seen.len()).filter(|&i| !seen[i]).collect();
    *unseen.choose(rng).expect("caller keeps length below catalog size")
}
