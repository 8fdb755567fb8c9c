use seqcf_core::baselines::{baseline_educated, baseline_random, DEFAULT_BUDGET};
use seqcf_core::dataset::{categories_from_rows, k_core_filter, leave_one_out_split, SplitDataset};
use seqcf_core::metrics::{aggregate_report, hamming, levenshtein, with_seed_means};
use seqcf_core::model::{load_model, save_model, train_markov, train_popularity, ReferenceModel};
use seqcf_core::objective::verify_eps_vcs;
use seqcf_core::oracle::oracle_optimal;
use seqcf_core::synth::{generate, SynthConfig};
use seqcf_core::vcreduce::{all_graphs, check_equivalence};
use seqcf_core::{explain, BlackBoxScorer, GaConfig, ItemId, SeedSpec, SettingSpec};

fn small_split() -> SplitDataset {
    let corpus = generate(&SynthConfig {
        num_users: 40,
        num_items: 30,
        min_len: 6,
        max_len: 12,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let log = k_core_filter(&corpus.log, 3).unwrap();
    let mut split = leave_one_out_split(&log, 50).unwrap();
    split.categories = categories_from_rows(&split.catalog, &corpus.category_rows).unwrap();
    split
}

fn small_ga() -> GaConfig {
    GaConfig {
        generations: 10,
        population_size: 64,
        ..Default::default()
    }
}

#[test]
fn split_and_model_survive_disk_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let split = small_split();
    let sp = dir.path().join("split.json");
    split.save(&sp).unwrap();
    assert_eq!(SplitDataset::load(&sp).unwrap(), split);

    let n = split.catalog.num_items();
    let markov = ReferenceModel::Markov(train_markov(split.train.values(), n, 0.1, 0.9).unwrap());
    let pop = ReferenceModel::Popularity(train_popularity(split.train.values(), n).unwrap());
    for model in [markov, pop] {
        let mp = dir.path().join(format!("{}.json", model.kind()));
        save_model(&model, &mp, None).unwrap();
        let back = load_model(&mp).unwrap();
        for seq in split.train.values().take(5) {
            assert_eq!(back.score(seq.items()).unwrap(), model.score(seq.items()).unwrap());
        }
    }
}

#[test]
fn every_method_emits_verifiable_counterfactuals() {
    let split = small_split();
    let n = split.catalog.num_items();
    let model = train_markov(split.train.values(), n, 0.1, 0.9).unwrap();
    let cats = &split.categories;
    let settings = [
        SettingSpec::untargeted_uncategorized(),
        SettingSpec::untargeted_categorized(),
        SettingSpec::targeted_item(ItemId(3)),
        SettingSpec::targeted_category(1),
    ];
    let mut emitted = 0;
    for s in &settings {
        for seq in split.train.values().take(8) {
            let seed = SeedSpec::new(5);
            let mut recs = vec![
                explain(seq, s, Some(cats), &model, 1, &small_ga(), seed).unwrap(),
                baseline_random(seq, s, Some(cats), &model, 1, DEFAULT_BUDGET, seed).unwrap(),
            ];
            if s.targeted {
                recs.push(baseline_educated(seq, s, Some(cats), &model, 1, DEFAULT_BUDGET, seed).unwrap());
            }
            for r in recs {
                let Some(cf) = &r.counterfactual else {
                    assert!(r.valid_at_k.values().all(|v| !v));
                    continue;
                };
                emitted += 1;
                let cf = seq.with_items(cf.clone()).unwrap();
                let lev = r.levenshtein.unwrap();
                assert!(lev >= 1);
                assert_eq!(lev, levenshtein(seq.items(), cf.items()));
                assert_eq!(r.hamming, Some(hamming(seq.items(), cf.items())));
                assert!(verify_eps_vcs(&model, seq, &cf, lev as f64, levenshtein).unwrap());
                assert!(r.valid_at_k[&1]);
            }
        }
    }
    assert!(emitted > 0);
}

#[test]
fn gece_never_beats_the_oracle_on_tiny_instances() {
    let corpus = generate(&SynthConfig {
        num_users: 30,
        num_items: 8,
        num_categories: 2,
        min_len: 4,
        max_len: 7,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let split = leave_one_out_split(&corpus.log, 50).unwrap();
    let model = train_markov(split.train.values(), split.catalog.num_items(), 0.1, 0.9).unwrap();
    let s = SettingSpec::untargeted_uncategorized().with_k_eval(vec![1]);
    let ga = GaConfig {
        population_size: 128,
        generations: 30,
        max_len: 3,
        ..Default::default()
    };
    for u in split.train.values().filter(|u| u.len() >= 3).take(10) {
        let src = u.with_items(u.items()[u.len() - 3..].to_vec()).unwrap();
        let rec = explain(&src, &s, None, &model, 1, &ga, SeedSpec::new(0)).unwrap();
        let best = oracle_optimal(&src, &s, None, &model, 1, 3).unwrap();
        if let (Some(lev), Some((_, d))) = (rec.levenshtein, best) {
            assert!(lev >= d, "GECE {lev} beat oracle {d}");
        }
    }
}

#[test]
fn report_over_seeds_has_mean_rows() {
    let split = small_split();
    let n = split.catalog.num_items();
    let model = train_markov(split.train.values(), n, 0.1, 0.9).unwrap();
    let s = SettingSpec::untargeted_uncategorized();
    let mut rows = Vec::new();
    for seed in 0..3 {
        let recs: Vec<_> = split
            .train
            .values()
            .take(6)
            .map(|u| baseline_random(u, &s, None, &model, 1, 5, SeedSpec::new(seed)).unwrap())
            .collect();
        rows.extend(aggregate_report(&recs, &model, &[1, 5], 0.5, "synth", "markov").unwrap());
    }
    let merged = with_seed_means(&rows);
    assert_eq!(merged.len(), rows.len() + 2);
    let mean1 = merged.iter().find(|r| r.seed == "mean" && r.k == 1).unwrap();
    let per_seed: f64 = rows.iter().filter(|r| r.k == 1).map(|r| r.fidelity).sum::<f64>() / 3.0;
    assert!((mean1.fidelity - per_seed).abs() < 1e-12);
}

#[test]
fn reduction_holds_on_all_graphs_up_to_four_vertices() {
    for n in 1..=4 {
        for g in all_graphs(n) {
            for k in 0..=n {
                assert!(check_equivalence(&g, k).unwrap(), "{g:?} k={k}");
            }
        }
    }
}
