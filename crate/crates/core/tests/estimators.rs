use proptest::prelude::*;
use rand::Rng;
use rsf_core::estimators::{build_risk_table, kaplan_meier, logrank_statistic, nelson_aalen, Sample};
use rsf_core::rng::stream_rng;

/// Product-limit and Nelson-Aalen values at each distinct event time,
/// computed straight from the definition with a full scan per time.
fn brute_force(times: &[f64], events: &[bool]) -> Vec<(f64, f64, f64)> {
    let mut event_times: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let mut s = 1.0;
    let mut h = 0.0;
    let mut out = Vec::new();
    for &t in &event_times {
        let d = times.iter().zip(events).filter(|(&u, &e)| e && u == t).count();
        let y = times.iter().filter(|&&u| u >= t).count();
        let inc = d as f64 / y as f64;
        s *= 1.0 - inc;
        h += inc;
        out.push((t, s, h));
    }
    out
}

fn random_sample(rng: &mut impl Rng, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(1..=max_n);
    // small integer times force ties between events and censorings
    let times = (0..n).map(|_| f64::from(rng.random_range(1..=8u32))).collect();
    let events = (0..n).map(|_| rng.random_bool(0.6)).collect();
    (times, events)
}

#[test]
fn estimators_match_product_limit_oracle_exactly() {
    let mut rng = stream_rng(2024, 0);
    for _ in 0..1000 {
        let (times, events) = random_sample(&mut rng, 20);
        let table = build_risk_table(&times, &events).unwrap();
        let km = kaplan_meier(&table);
        let na = nelson_aalen(&table);
        let oracle = brute_force(&times, &events);
        assert_eq!(km.times().len(), oracle.len());
        for (k, &(t, s, h)) in oracle.iter().enumerate() {
            assert_eq!(km.times()[k], t);
            assert_eq!(km.values()[k], s);
            assert_eq!(na.values()[k], h);
        }
        assert_eq!(km.eval(0.0), 1.0);
        assert_eq!(na.eval(0.0), 0.0);
    }
}

#[test]
fn worked_examples() {
    let table = build_risk_table(&[1.0, 2.0, 3.0], &[true, false, true]).unwrap();
    assert_eq!(table.event_times(), &[1.0, 3.0]);
    assert_eq!(table.events(), &[1, 1]);
    assert_eq!(table.at_risk(), &[3, 1]);
    let na = nelson_aalen(&table);
    assert_eq!(na.eval(1.0), 1.0 / 3.0);
    assert_eq!(na.eval(3.0), 1.0 / 3.0 + 1.0);
    let km = kaplan_meier(&table);
    assert_eq!(km.eval(0.5), 1.0);
    assert_eq!(km.eval(1.0), 1.0 - 1.0 / 3.0);
    assert_eq!(km.eval(2.9), 1.0 - 1.0 / 3.0);
    assert_eq!(km.eval(3.0), 0.0);

    // a censoring tied with events stays in the risk set
    let tied = build_risk_table(&[2.0, 2.0, 2.0], &[true, true, false]).unwrap();
    assert_eq!(tied.events(), &[2]);
    assert_eq!(tied.at_risk(), &[3]);
    assert_eq!(nelson_aalen(&tied).eval(2.0), 2.0 / 3.0);

    let single = kaplan_meier(&build_risk_table(&[5.0], &[true]).unwrap());
    assert_eq!((single.eval(4.99), single.eval(5.0)), (1.0, 0.0));

    let censored = build_risk_table(&[1.0, 2.0], &[false, false]).unwrap();
    assert!(censored.is_empty());
    assert_eq!(kaplan_meier(&censored).eval(9.0), 1.0);
    assert_eq!(nelson_aalen(&censored).eval(9.0), 0.0);
}

#[test]
fn product_limit_equals_product_of_hazard_increments() {
    let mut rng = stream_rng(31, 0);
    for _ in 0..1000 {
        let (times, events) = random_sample(&mut rng, 20);
        let table = build_risk_table(&times, &events).unwrap();
        let km = kaplan_meier(&table);
        let mut s = 1.0;
        for (k, inc) in table.hazard_increments().enumerate() {
            s *= 1.0 - inc;
            assert_eq!(km.values()[k], s);
        }
    }
}

/// Two-sample log-rank from the textbook observed-minus-expected table,
/// written independently of the library's bucketed sweep.
fn textbook_logrank(left: (&[f64], &[bool]), right: (&[f64], &[bool])) -> f64 {
    let mut all: Vec<f64> = left
        .0
        .iter()
        .zip(left.1)
        .chain(right.0.iter().zip(right.1))
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let count = |s: (&[f64], &[bool]), t: f64| {
        let y = s.0.iter().filter(|&&u| u >= t).count() as f64;
        let d = s.0.iter().zip(s.1).filter(|(&u, &e)| e && u == t).count() as f64;
        (y, d)
    };
    let (mut num, mut var) = (0.0, 0.0);
    for t in all {
        let (y1, d1) = count(left, t);
        let (y2, d2) = count(right, t);
        let (y, d) = (y1 + y2, d1 + d2);
        num += d1 - y1 * d / y;
        if y > 1.0 {
            var += (y1 / y) * (1.0 - y1 / y) * ((y - d) / (y - 1.0)) * d;
        }
    }
    if var > 0.0 {
        num.abs() / var.sqrt()
    } else {
        0.0
    }
}

#[test]
fn logrank_matches_textbook_on_random_small_splits() {
    let mut rng = stream_rng(77, 0);
    let mut checked = 0;
    while checked < 500 {
        let (times, events) = random_sample(&mut rng, 10);
        if times.len() < 2 || !events.contains(&true) {
            continue;
        }
        let cut = rng.random_range(1..times.len());
        let (lt, rt) = times.split_at(cut);
        let (le, re) = events.split_at(cut);
        let stat = logrank_statistic(Sample::new(lt, le), Sample::new(rt, re)).unwrap();
        let oracle = textbook_logrank((lt, le), (rt, re));
        assert!((stat - oracle).abs() < 1e-10, "{stat} vs {oracle}");
        checked += 1;
    }
}

#[test]
fn logrank_hand_example() {
    let ev = [true, true];
    let stat = logrank_statistic(Sample::new(&[1.0, 2.0], &ev), Sample::new(&[3.0, 4.0], &ev)).unwrap();
    assert!((stat - 7.0 / 17f64.sqrt()).abs() < 1e-12);
    assert!((stat - 1.6977).abs() < 1e-4);
}

fn sample_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((1u32..30, any::<bool>()), 1..40)
        .prop_map(|v| v.into_iter().map(|(t, e)| (f64::from(t), e)).unzip())
}

proptest! {
    #[test]
    fn survival_is_monotone_and_chf_nondecreasing((times, events) in sample_strategy()) {
        let table = build_risk_table(&times, &events).unwrap();
        let km = kaplan_meier(&table);
        let na = nelson_aalen(&table);
        let mut prev_s = 1.0;
        let mut prev_h = 0.0;
        for (&s, &h) in km.values().iter().zip(na.values()) {
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= prev_s);
            prop_assert!(h >= prev_h);
            prev_s = s;
            prev_h = h;
        }
    }

    #[test]
    fn logrank_symmetric_and_rank_invariant(
        (times, events) in sample_strategy(),
        cut_frac in 0.0f64..1.0,
    ) {
        prop_assume!(times.len() >= 2 && events.contains(&true));
        let cut = 1 + ((times.len() - 1) as f64 * cut_frac) as usize;
        let cut = cut.min(times.len() - 1);
        let (lt, rt) = times.split_at(cut);
        let (le, re) = events.split_at(cut);
        let a = logrank_statistic(Sample::new(lt, le), Sample::new(rt, re)).unwrap();
        let b = logrank_statistic(Sample::new(rt, re), Sample::new(lt, le)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        // the statistic only sees the order of the times
        let cube = |v: &[f64]| v.iter().map(|t| t * t * t).collect::<Vec<_>>();
        let (lc, rc) = (cube(lt), cube(rt));
        let c = logrank_statistic(Sample::new(&lc, le), Sample::new(&rc, re)).unwrap();
        prop_assert_eq!(a, c);
    }
}
