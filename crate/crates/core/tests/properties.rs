use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use seqcf_core::dataset::{k_core_filter, leave_one_out_split, user_histories, Interaction, InteractionLog};
use seqcf_core::gece::{crossover, mutate_add, mutate_delete, mutate_replace};
use seqcf_core::metrics::{hamming, levenshtein};
use seqcf_core::{ItemId, SeedSpec, UserSequence};

fn ids(v: &[u32]) -> Vec<ItemId> {
    v.iter().copied().map(ItemId).collect()
}

/// Full-matrix Wagner-Fischer.
fn lev_matrix(a: &[ItemId], b: &[ItemId]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

fn distinct_seq(max_item: u32, max_len: usize) -> impl Strategy<Value = Vec<u32>> {
    proptest::sample::subsequence((0..max_item).collect::<Vec<_>>(), 1..=max_len)
        .prop_shuffle()
}

fn log_strategy() -> impl Strategy<Value = Vec<(u64, u32, i64)>> {
    proptest::collection::vec((0u64..8, 0u32..10, 0i64..50), 0..80)
}

fn to_log(rows: &[(u64, u32, i64)]) -> InteractionLog {
    InteractionLog::from_rows(
        rows.iter()
            .map(|&(user, item, timestamp)| Interaction {
                user,
                item: item.to_string(),
                timestamp,
            })
            .collect(),
    )
}

fn row_set(log: &InteractionLog) -> Vec<(u64, String, i64)> {
    let mut v: Vec<_> = log
        .rows
        .iter()
        .map(|r| (r.user, r.item.clone(), r.timestamp))
        .collect();
    v.sort();
    v
}

proptest! {
    #[test]
    fn levenshtein_matches_matrix(a in proptest::collection::vec(0u32..5, 0..9), b in proptest::collection::vec(0u32..5, 0..9)) {
        let (a, b) = (ids(&a), ids(&b));
        prop_assert_eq!(levenshtein(&a, &b), lev_matrix(&a, &b));
        prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
    }

    #[test]
    fn hamming_is_a_metric(a in proptest::collection::vec(0u32..4, 0..7), b in proptest::collection::vec(0u32..4, 0..7), c in proptest::collection::vec(0u32..4, 0..7)) {
        let (a, b, c) = (ids(&a), ids(&b), ids(&c));
        prop_assert_eq!(hamming(&a, &a), 0);
        prop_assert_eq!(hamming(&a, &b), hamming(&b, &a));
        prop_assert_eq!(hamming(&a, &b) == 0, a == b);
        prop_assert!(hamming(&a, &c) <= hamming(&a, &b) + hamming(&b, &c));
    }

    #[test]
    fn levenshtein_bounded_by_hamming_on_equal_lengths(pairs in proptest::collection::vec((0u32..6, 0u32..6), 0..9)) {
        let a: Vec<ItemId> = pairs.iter().map(|p| ItemId(p.0)).collect();
        let b: Vec<ItemId> = pairs.iter().map(|p| ItemId(p.1)).collect();
        prop_assert!(levenshtein(&a, &b) <= hamming(&a, &b));
    }

    #[test]
    fn operators_preserve_sequence_invariants(items in distinct_seq(12, 6), other in distinct_seq(12, 6), seed in any::<u64>(), max_len in 1usize..8) {
        prop_assume!(items.len() <= max_len && other.len() <= max_len);
        let s = UserSequence::new(1, ids(&items), max_len).unwrap();
        let t = UserSequence::new(1, ids(&other), max_len).unwrap();
        let mut rng = SeedSpec::new(seed).stream(&[1]);
        let check = |x: &UserSequence| {
            let set: BTreeSet<_> = x.items().iter().collect();
            set.len() == x.len() && !x.is_empty() && x.len() <= max_len
        };
        let r = mutate_replace(&s, 12, &mut rng).unwrap();
        prop_assert!(check(&r) && r.len() == s.len());
        let a = mutate_add(&s, 12, &mut rng).unwrap();
        prop_assert!(check(&a) && a.len() == (s.len() + 1).min(max_len));
        if s.len() >= 2 {
            let d = mutate_delete(&s, &mut rng).unwrap();
            prop_assert!(check(&d) && d.len() == s.len() - 1);
        }
        let (c1, c2) = crossover(&s, &t, &mut rng);
        prop_assert!(check(&c1) && check(&c2));
    }

    #[test]
    fn k_core_idempotent_and_order_independent(rows in log_strategy(), k in 1usize..4, seed in any::<u64>()) {
        let log = to_log(&rows);
        let mut shuffled = log.rows.clone();
        shuffled.shuffle(&mut SeedSpec::new(seed).stream(&[9]));
        let shuffled = InteractionLog::from_rows(shuffled);
        match k_core_filter(&log, k) {
            Ok(once) => {
                let twice = k_core_filter(&once, k).unwrap();
                prop_assert_eq!(&twice.rows, &once.rows);
                let other = k_core_filter(&shuffled, k).unwrap();
                prop_assert_eq!(row_set(&other), row_set(&once));
            }
            Err(_) => prop_assert!(k_core_filter(&shuffled, k).is_err()),
        }
    }

    #[test]
    fn split_reconstructs_each_history_suffix(rows in log_strategy(), max_len in 1usize..6) {
        let log = to_log(&rows);
        let hist = user_histories(&log);
        match leave_one_out_split(&log, max_len) {
            Ok(split) => {
                for (user, seq) in &split.train {
                    let mut rebuilt: Vec<String> = seq.items().iter().map(|&i| split.catalog.label(i)).collect();
                    rebuilt.push(split.catalog.label(split.validation[user]));
                    rebuilt.push(split.catalog.label(split.test[user]));
                    let h = &hist[user];
                    prop_assert!(seq.len() <= max_len);
                    prop_assert_eq!(&h[h.len() - rebuilt.len()..], &rebuilt.iter().map(String::as_str).collect::<Vec<_>>()[..]);
                    prop_assert_eq!(seq.len(), (h.len() - 2).min(max_len));
                }
            }
            Err(_) => prop_assert!(log.rows.is_empty() || hist.values().any(|h| h.len() < 3)),
        }
    }
}
