use twoparty_core::estimator::{bernoulli_trial, mean_sd, mean_statistic_identity_check, ScoreTable};
use twoparty_core::family::{BernoulliFamily, Party};
use twoparty_core::randomness::SearchPolicy;
use twoparty_core::schedule::{one_way_mse_bound, Schedule};

fn trials(f: &BernoulliFamily, s: &Schedule, n: usize, count: u64, seed: u64) -> Vec<f64> {
    let table = ScoreTable::for_family(f, s).unwrap();
    (0..count)
        .map(|t| bernoulli_trial(f, s, &table, n, seed, t, SearchPolicy::default(), 1.0).unwrap().bob.delta_hat)
        .collect()
}

#[test]
fn unbiased_for_both_schedules() {
    for delta in [-0.5, 0.0, 0.5, 1.0] {
        let f = BernoulliFamily::new(20.0, 20.0, delta).unwrap();
        for s in [Schedule::one_way(20.0).unwrap(), Schedule::tetration(20.0).unwrap()] {
            let est = trials(&f, &s, 20_000, 400, 11);
            let (mean, sd) = mean_sd(&est);
            let se = sd / 20.0;
            assert!((mean - delta).abs() <= 4.0 * se, "delta {delta} r {}: {mean} +- {se}", s.rounds());
        }
    }
}

#[test]
fn variance_is_dominated() {
    for delta in [0.0, 0.5] {
        let f = BernoulliFamily::new(20.0, 20.0, delta).unwrap();
        for s in [Schedule::one_way(20.0).unwrap(), Schedule::tetration(20.0).unwrap()] {
            let n = 20_000;
            let est = trials(&f, &s, n, 400, 12);
            let (_, sd) = mean_sd(&est);
            let norm = ScoreTable::for_family(&f, &s).unwrap().normalizer(Party::Bob) * n as f64;
            let bound = (1.0 + delta) / norm * (1.0 + 5.0 / 20.0);
            assert!(sd * sd <= bound, "{} > {bound}", sd * sd);
        }
    }
}

#[test]
fn one_way_mse_within_bound() {
    let f = BernoulliFamily::new(20.0, 20.0, 0.5).unwrap();
    let est = trials(&f, &Schedule::one_way(20.0).unwrap(), 20_000, 400, 13);
    let mse = est.iter().map(|d| (d - 0.5) * (d - 0.5)).sum::<f64>() / est.len() as f64;
    let bound = one_way_mse_bound(20_000, 20.0, 20.0, 0.5);
    assert!((bound - 0.75).abs() < 1e-12);
    assert!(mse <= bound);
}

#[test]
fn mean_statistic_identity() {
    let f = BernoulliFamily::new(20.0, 20.0, 1.0).unwrap();
    for s in [Schedule::one_way(20.0).unwrap(), Schedule::tetration(20.0).unwrap()] {
        let c = mean_statistic_identity_check(&f, &s, 10_000, 200, 5, SearchPolicy::default()).unwrap();
        assert!((c.ratio - 1.0).abs() <= 4.0 * c.std_err, "{c:?}");
    }
    let f0 = BernoulliFamily::new(20.0, 20.0, 0.0).unwrap();
    assert!(mean_statistic_identity_check(&f0, &Schedule::one_way(20.0).unwrap(), 100, 10, 0, SearchPolicy::default())
        .is_err());
}

#[test]
fn alice_estimator_is_unbiased_too() {
    let f = BernoulliFamily::new(20.0, 20.0, 1.0).unwrap();
    let s = Schedule::tetration(20.0).unwrap();
    let table = ScoreTable::for_family(&f, &s).unwrap();
    let est: Vec<f64> = (0..400)
        .map(|t| {
            bernoulli_trial(&f, &s, &table, 20_000, 21, t, SearchPolicy::default(), 1.0)
                .unwrap()
                .alice
                .unwrap()
                .delta_hat
        })
        .collect();
    let (mean, sd) = mean_sd(&est);
    assert!((mean - 1.0).abs() <= 4.0 * sd / 20.0);
}

#[test]
fn exact_normalizer_beats_information_bound() {
    for (m1, m2) in [(20.0, 20.0), (100.0, 100.0), (100.0, 1000.0)] {
        for s in [Schedule::one_way(m1).unwrap(), Schedule::tetration(f64::min(m1, m2)).unwrap()] {
            let t = ScoreTable::build(m1, m2, &s).unwrap();
            let b = s.predicted_bounds(m1, m2);
            assert!(t.normalizer(Party::Bob) >= 2.0 * b.info_odd, "({m1}, {m2}) r {}", s.rounds());
            if s.rounds() > 1 {
                assert!(t.normalizer(Party::Alice) >= 2.0 * b.info_even);
            }
        }
    }
}
