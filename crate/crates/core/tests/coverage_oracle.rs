//! Coverage engine vs the brute-force membership-enumeration oracle, plus
//! the randomized coverage properties: monotonicity under log union,
//! idempotence under duplication, ratio bounds, and v2/v3 dialect
//! invariance.

use restamp_core::coverage::{compute_report, observe, report_for_log, Criterion};
use restamp_core::spec_model::load_spec;
use restamp_core::testkit::generate::{random_api, random_interaction, random_log, render_v2, render_v3};
use restamp_core::testkit::oracle::brute_force_counts;
use restamp_core::testkit::Rng;

#[test]
fn engine_equals_brute_force_oracle_on_random_instances() {
    let mut checked = 0;
    for seed in 0..60u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let document = if seed % 2 == 0 {
            render_v3(&shape)
        } else {
            render_v2(&shape)
        };
        let spec = load_spec(&document, None).unwrap();
        let log = random_log(&mut rng, &shape, 20);

        let report = report_for_log(&spec, &log).unwrap();
        let oracle = brute_force_counts(&spec, &log);

        for (criterion, num, den) in oracle {
            let row = report.criterion(criterion);
            assert_eq!(
                (row.numerator, row.denominator),
                (num, den),
                "seed {seed}: {} disagrees with the oracle",
                criterion.label()
            );
        }
        checked += 1;
    }
    assert!(checked >= 50);
}

#[test]
fn ratios_stay_in_bounds_on_random_instances() {
    for seed in 100..200u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let spec = load_spec(&render_v3(&shape), None).unwrap();
        let log = random_log(&mut rng, &shape, 20);
        let report = report_for_log(&spec, &log).unwrap();
        for row in &report.criteria {
            assert!(row.numerator <= row.denominator, "seed {seed}");
            if let Some(r) = row.ratio {
                assert!((0.0..=1.0).contains(&r), "seed {seed}");
            } else {
                assert_eq!(row.denominator, 0, "seed {seed}");
            }
        }
    }
}

#[test]
fn coverage_is_monotone_under_log_union() {
    for seed in 200..300u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let spec = load_spec(&render_v3(&shape), None).unwrap();
        let base = random_log(&mut rng, &shape, 12);
        let mut extended = base.clone();
        for i in 0..rng.below(6) {
            extended.push(random_interaction(&mut rng, &shape, 100 + i));
        }
        let before = report_for_log(&spec, &base).unwrap();
        let after = report_for_log(&spec, &extended).unwrap();
        for criterion in Criterion::ALL {
            let a = before.criterion(criterion);
            let b = after.criterion(criterion);
            assert!(
                b.numerator >= a.numerator,
                "seed {seed}: {} shrank under union",
                criterion.label()
            );
            assert_eq!(a.denominator, b.denominator);
        }
    }
}

#[test]
fn coverage_is_idempotent_under_duplication() {
    for seed in 300..400u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let spec = load_spec(&render_v3(&shape), None).unwrap();
        let mut log = random_log(&mut rng, &shape, 12);
        let before = report_for_log(&spec, &log).unwrap();
        if log.is_empty() {
            continue;
        }
        let dup = log[rng.below(log.len())].clone();
        log.push(dup);
        let after = report_for_log(&spec, &log).unwrap();
        assert_eq!(before.criteria, after.criteria, "seed {seed}");
    }
}

#[test]
fn v2_and_v3_renderings_are_indistinguishable() {
    for seed in 400..500u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let v2 = load_spec(&render_v2(&shape), None).unwrap();
        let v3 = load_spec(&render_v3(&shape), None).unwrap();

        let d2 = v2.enumerate_coverage_domains();
        let d3 = v3.enumerate_coverage_domains();
        assert_eq!(d2, d3, "seed {seed}: domains differ between dialects");

        let log = random_log(&mut rng, &shape, 15);
        let r2 = compute_report(&d2, &observe(&log, &v2)).unwrap();
        let r3 = compute_report(&d3, &observe(&log, &v3)).unwrap();
        assert_eq!(r2, r3, "seed {seed}: reports differ between dialects");
    }
}

#[test]
fn superset_logs_never_lower_any_delta() {
    for seed in 600..650u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let spec = load_spec(&render_v3(&shape), None).unwrap();
        let base = random_log(&mut rng, &shape, 10);
        let mut extended = base.clone();
        for i in 0..(1 + rng.below(5)) {
            extended.push(random_interaction(&mut rng, &shape, 700 + i));
        }
        let a = report_for_log(&spec, &base).unwrap();
        let b = report_for_log(&spec, &extended).unwrap();
        let deltas = restamp_core::reporting::compare_configurations(&a, &b).unwrap();
        for delta in deltas {
            if let Some(points) = delta.delta_points {
                assert!(points >= 0.0, "seed {seed}: negative delta on a superset log");
            }
        }
    }
}

#[test]
fn empty_log_has_zero_numerators_everywhere() {
    for seed in 500..520u64 {
        let mut rng = Rng::new(seed);
        let shape = random_api(&mut rng, 5);
        let spec = load_spec(&render_v3(&shape), None).unwrap();
        let report = report_for_log(&spec, &[]).unwrap();
        for row in &report.criteria {
            assert_eq!(row.numerator, 0);
        }
    }
}
