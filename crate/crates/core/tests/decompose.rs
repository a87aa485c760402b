use chrono::{TimeZone, Utc};
use esig_core::decompose::{
    apply_norm, chunk_quarters, daily_features, fit_norm, weekly_features, DAYS_PER_WEEK,
};
use esig_core::domain::{Dataset, LoadSeries, Provenance, Stage};
use proptest::prelude::*;

fn hourly(values: Vec<f64>) -> LoadSeries {
    LoadSeries::new("L", Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap(), 3600, values).unwrap()
}

#[test]
fn constant_series_gives_constant_week() {
    let s = hourly(vec![3.25; 168 * 2]);
    assert_eq!(weekly_features(&s, 1).unwrap(), [3.25; 7]);
    assert_eq!(daily_features(&s, 9).unwrap(), [3.25; 4]);
}

#[test]
fn quarter_chunks() {
    let weeks = |w: usize| hourly(vec![1.0; 168 * w]);
    let c = chunk_quarters(&weeks(156)).unwrap();
    assert_eq!(c.len(), 12);
    assert!(c.iter().all(|c| !c.partial && c.series.len() == 2184));
    assert_eq!(c[1].series.start, weeks(156).timestamp(2184));

    let c = chunk_quarters(&weeks(13)).unwrap();
    assert_eq!((c.len(), c[0].partial), (1, false));

    let c = chunk_quarters(&weeks(14)).unwrap();
    assert_eq!(c.len(), 2);
    assert!(!c[0].partial && c[1].partial);
    assert_eq!(c[1].series.len(), 168);

    assert!(chunk_quarters(&hourly(vec![1.0; 100])).is_err());
}

#[test]
fn partial_periods_are_rejected() {
    let s = hourly(vec![1.0; 168 + 30]);
    assert!(weekly_features(&s, 1).is_err());
    assert!(daily_features(&s, 8).is_err());
    assert!(daily_features(&s, 7).is_ok());
}

fn week_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..5000.0, 168 * 2)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn weekly_means_preserve_energy(values in week_values(), w in 0usize..2) {
        let s = hourly(values.clone());
        let v = weekly_features(&s, w).unwrap();
        let kwh: f64 = values[w * 168..(w + 1) * 168].iter().sum();
        let from_means: f64 = v.iter().map(|m| m * 24.0).sum();
        prop_assert!((from_means - kwh).abs() <= 1e-9 * kwh.max(1.0));
    }

    #[test]
    fn block_means_recombine_to_day_means(values in week_values(), w in 0usize..2) {
        let s = hourly(values);
        let week = weekly_features(&s, w).unwrap();
        for (d, want) in week.iter().enumerate() {
            let blocks = daily_features(&s, w * DAYS_PER_WEEK + d).unwrap();
            let day_mean = blocks.iter().sum::<f64>() / 4.0;
            prop_assert!((day_mean - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn normalization_is_affine_and_order_preserving(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..30),
        probe in prop::collection::vec(-2e3f64..2e3, 4),
        other in prop::collection::vec(-2e3f64..2e3, 4),
    ) {
        let mut train = Dataset::empty(Stage::Daily, Provenance::default());
        train.labels = vec![0; rows.len()];
        train.features = rows;
        let stats = fit_norm(&train).unwrap();
        let scaled = apply_norm(&stats, &train).unwrap();
        prop_assert!(scaled.features.iter().flatten().all(|v| (0.0..=1.0).contains(v)));

        let a = stats.apply_row(&probe).unwrap();
        let b = stats.apply_row(&other).unwrap();
        let mid: Vec<f64> = probe.iter().zip(&other).map(|(p, o)| 0.5 * (p + o)).collect();
        let m = stats.apply_row(&mid).unwrap();
        for j in 0..4 {
            if stats.max[j] > stats.min[j] {
                // affine: midpoints map to midpoints
                prop_assert!((m[j] - 0.5 * (a[j] + b[j])).abs() < 1e-9);
                if probe[j] < other[j] {
                    prop_assert!(a[j] < b[j]);
                }
            } else {
                prop_assert_eq!(a[j], 0.0);
            }
        }
    }
}
