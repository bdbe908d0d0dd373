//! Best-uncovered-reward and cumulative-regret series.

/// Running maximum of true totals.
pub fn compute_bur(totals: &[f64]) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    totals
        .iter()
        .map(|&t| {
            best = best.max(t);
            best
        })
        .collect()
}

/// Cumulative shortfall against the optimum.
pub fn compute_cmr(totals: &[f64], optimum: f64) -> Vec<f64> {
    let mut acc = 0.0;
    totals
        .iter()
        .map(|&t| {
            acc += optimum - t;
            acc
        })
        .collect()
}

/// Divides every entry by `optimum`.
pub fn normalize_series(series: &[f64], optimum: f64) -> Vec<f64> {
    series.iter().map(|v| v / optimum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(compute_bur(&[3.0, 1.0, 5.0, 4.0]), vec![3.0, 3.0, 5.0, 5.0]);
        assert_eq!(compute_bur(&[2.0; 4]), vec![2.0; 4]);
        assert_eq!(compute_cmr(&[3.0, 1.0, 5.0, 4.0], 5.0), vec![2.0, 6.0, 6.0, 7.0]);
        assert_eq!(compute_cmr(&[5.0; 3], 5.0), vec![0.0; 3]);
        assert_eq!(normalize_series(&[1.0, 2.0], 4.0), vec![0.25, 0.5]);
    }

    proptest! {
        #[test]
        fn series_properties(totals in prop::collection::vec(0.0f64..10.0, 1..60)) {
            let optimum = totals.iter().cloned().fold(0.0, f64::max) + 0.5;
            let bur = compute_bur(&totals);
            let cmr = compute_cmr(&totals, optimum);
            prop_assert!(bur.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(cmr.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(cmr.iter().all(|&c| c >= 0.0));
            prop_assert!(normalize_series(&bur, optimum).iter().all(|&b| b <= 1.0));
            // each entry is the previous one plus this iteration's shortfall,
            // bit for bit
            for i in 1..cmr.len() {
                prop_assert_eq!(cmr[i], cmr[i - 1] + (optimum - totals[i]));
            }
        }
    }
}
