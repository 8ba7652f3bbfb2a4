use proptest::prelude::*;
use rand::Rng;
use rsf_core::forest::{harrell_concordance, oob_mortality};
use rsf_core::rng::stream_rng;
use rsf_core::{
    fit, oob_error, predict_ensemble, predict_oob, Dataset, FactorSchema, FactorVariable, Forest, ForestParams,
    StepFunction, SurvivalRecord,
};

fn dataset(seed: u64, n: usize) -> Dataset {
    let mut rng = stream_rng(seed, 0);
    let schema = FactorSchema::new(vec![
        FactorVariable::new("a", (0..4).map(|k| k.to_string()).collect()),
        FactorVariable::new("b", vec!["x".into(), "y".into()]),
        FactorVariable::new("c", (0..12).map(|k| k.to_string()).collect()),
    ])
    .unwrap();
    let records: Vec<SurvivalRecord> = (0..n)
        .map(|_| {
            let features = vec![rng.random_range(0..4), rng.random_range(0..2), rng.random_range(0..12)];
            let rate = 0.3 * (1.0 + features[0] as f64);
            let t0 = -rng.random::<f64>().ln() / rate;
            let c = 4.0 * rng.random::<f64>();
            SurvivalRecord {
                time: t0.min(c),
                event: t0 <= c,
                features,
            }
        })
        .collect();
    Dataset::from_records(&schema, &records).unwrap()
}

fn params(n_trees: usize, seed: u64) -> ForestParams {
    ForestParams {
        n_trees,
        mtry: None,
        nsplit: 5,
        min_events: 3,
        seed,
    }
}

#[test]
fn oob_fraction_is_near_exp_minus_one() {
    let data = dataset(1, 312);
    let forest = fit(&data, &params(100, 4)).unwrap();
    let n = data.len() as f64;
    let mean: f64 = forest
        .inbag_counts()
        .iter()
        .map(|c| c.iter().filter(|&&k| k == 0).count() as f64 / n)
        .sum::<f64>()
        / 100.0;
    assert!((mean - 0.36).abs() <= 0.02, "{mean}");
    for counts in forest.inbag_counts() {
        assert_eq!(counts.iter().sum::<u32>() as usize, data.len());
    }
}

#[test]
fn oob_membership_matches_inbag_counts() {
    let data = dataset(2, 80);
    let forest = fit(&data, &params(10, 1)).unwrap();
    for i in 0..data.len() {
        let recount: Vec<usize> = (0..10).filter(|&b| forest.inbag_counts()[b][i] == 0).collect();
        assert_eq!(forest.oob_trees(i), recount);
        let oob = predict_oob(&forest, &data, i).unwrap();
        if recount.is_empty() {
            assert!(oob.is_none());
            continue;
        }
        let x = data.features(i).unwrap();
        let curves: Vec<&StepFunction> = recount.iter().map(|&b| forest.trees()[b].predict(&x).unwrap().0).collect();
        assert_eq!(oob.unwrap().0, StepFunction::mean(&curves));
    }
}

#[test]
fn single_tree_forest_predicts_like_its_tree() {
    let data = dataset(3, 60);
    let forest = fit(&data, &params(1, 2)).unwrap();
    for i in 0..data.len() {
        let x = data.features(i).unwrap();
        let (s, h) = predict_ensemble(&forest, &x).unwrap();
        let (ts, th) = forest.trees()[0].predict(&x).unwrap();
        assert_eq!((&s, &h), (ts, th));
        if forest.is_oob(0, i) {
            assert_eq!(predict_oob(&forest, &data, i).unwrap().unwrap().0, s);
        }
    }
}

#[test]
fn ensemble_survival_is_a_survival_curve() {
    let data = dataset(4, 200);
    let forest = fit(&data, &params(30, 3)).unwrap();
    let mut rng = stream_rng(4, 9);
    for _ in 0..100 {
        let x = vec![rng.random_range(0..4), rng.random_range(0..2), rng.random_range(0..12)];
        let (s, h) = predict_ensemble(&forest, &x).unwrap();
        assert_eq!(s.eval(0.0), 1.0);
        assert_eq!(h.eval(0.0), 0.0);
        let mut prev = 1.0;
        for &v in s.values() {
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            prev = v;
        }
        assert!(h.values().windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn fitting_is_identical_across_thread_counts() {
    let data = dataset(5, 150);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit(&data, &params(20, 11)).unwrap().to_json().unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn save_and_load_round_trip_byte_identically() {
    let data = dataset(6, 100);
    let forest = fit(&data, &params(8, 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    forest.save(&path).unwrap();
    let loaded = Forest::load(&path).unwrap();
    assert_eq!(loaded, forest);
    assert_eq!(loaded.to_json().unwrap(), std::fs::read_to_string(&path).unwrap());
    let x = data.features(0).unwrap();
    assert_eq!(predict_ensemble(&loaded, &x).unwrap(), predict_ensemble(&forest, &x).unwrap());
}

#[test]
fn fit_refuses_data_without_events() {
    let schema = FactorSchema::new(vec![FactorVariable::new("a", vec!["0".into(), "1".into()])]).unwrap();
    let records: Vec<SurvivalRecord> = (0..10)
        .map(|i| SurvivalRecord {
            time: f64::from(i + 1),
            event: false,
            features: vec![(i % 2) as u32],
        })
        .collect();
    let data = Dataset::from_records(&schema, &records).unwrap();
    assert!(fit(&data, &params(3, 0)).is_err());
}

#[test]
fn oob_error_is_sensible_on_signal() {
    let data = dataset(7, 300);
    let forest = fit(&data, &params(50, 8)).unwrap();
    let err = oob_error(&forest, &data).unwrap();
    assert!(err > 0.0 && err < 0.45, "{err}");
    let m = oob_mortality(&forest, &data).unwrap();
    assert_eq!(m.len(), data.len());
}

#[test]
fn perfect_and_constant_rankings() {
    let times: Vec<f64> = (1..=20).map(f64::from).collect();
    let events = vec![true; 20];
    let inverse: Vec<f64> = times.iter().map(|t| 100.0 - t).collect();
    assert_eq!(1.0 - harrell_concordance(&times, &events, &inverse).unwrap(), 0.0);
    assert_eq!(1.0 - harrell_concordance(&times, &events, &[3.0; 20]).unwrap(), 0.5);
}

proptest! {
    #[test]
    fn concordance_depends_only_on_score_order(
        cases in prop::collection::vec((1u32..50, any::<bool>(), 0u32..20), 2..40),
    ) {
        let times: Vec<f64> = cases.iter().map(|c| f64::from(c.0)).collect();
        let events: Vec<bool> = cases.iter().map(|c| c.1).collect();
        let scores: Vec<f64> = cases.iter().map(|c| f64::from(c.2) * 0.37).collect();
        let doubled: Vec<f64> = scores.iter().map(|s| 2.0 * s).collect();
        let warped: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let base = harrell_concordance(&times, &events, &scores);
        prop_assume!(base.is_ok());
        let base = base.unwrap();
        prop_assert_eq!(base, harrell_concordance(&times, &events, &doubled).unwrap());
        prop_assert_eq!(base, harrell_concordance(&times, &events, &warped).unwrap());
    }
}
