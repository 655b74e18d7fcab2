use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Upper 1% points of the chi-square distribution for df = 1..=30.
const CRITICAL_01: [f64; 30] = [
    6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209, 24.725, 26.217,
    27.688, 29.141, 30.578, 32.000, 33.409, 34.805, 36.191, 37.566, 38.932, 40.289, 41.638, 42.980,
    44.314, 45.642, 46.963, 48.278, 49.588, 50.892,
];

/// Critical value at alpha = 0.01. Tabulated up to 30 degrees of freedom,
/// Wilson-Hilferty beyond.
pub fn critical_value_01(df: usize) -> f64 {
    match df {
        0 => f64::NAN,
        1..=30 => CRITICAL_01[df - 1],
        _ => {
            let z = 2.326_347_874_040_841;
            let k = df as f64;
            let a = 2.0 / (9.0 * k);
            k * (1.0 - a + z * a.sqrt()).powi(3)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub significant_at_01: bool,
}

/// Pearson statistic over a table given as rows of observed counts. Cells
/// whose expected count is zero contribute nothing.
fn pearson(rows: &[Vec<f64>]) -> (f64, f64) {
    let cols = rows[0].len();
    let total: f64 = rows.iter().flatten().sum();
    let row_sums: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..cols).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let mut stat = 0.0;
    let mut min_expected = f64::INFINITY;
    for (i, r) in rows.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = row_sums[i] * col_sums[j] / total;
            min_expected = min_expected.min(e);
            if e > 0.0 {
                stat += (o - e) * (o - e) / e;
            }
        }
    }
    (stat, min_expected)
}

/// 2×2 test of equal click proportions, one degree of freedom.
pub fn chi_square_two_proportions(
    clicks_a: u64,
    impressions_a: u64,
    clicks_b: u64,
    impressions_b: u64,
) -> Result<ChiSquare, EvalError> {
    if impressions_a == 0 || impressions_b == 0 {
        return Err(EvalError::ZeroImpressions);
    }
    if clicks_a > impressions_a || clicks_b > impressions_b {
        return Err(EvalError::InvalidCounts);
    }
    let rows = vec![
        vec![clicks_a as f64, (impressions_a - clicks_a) as f64],
        vec![clicks_b as f64, (impressions_b - clicks_b) as f64],
    ];
    let (statistic, min_expected) = pearson(&rows);
    if min_expected < 5.0 {
        log::warn!("chi-square: expected cell count {min_expected:.2} below 5");
    }
    Ok(ChiSquare {
        statistic,
        df: 1,
        significant_at_01: statistic > critical_value_01(1),
    })
}

/// r×2 contingency test that two categorical samples share a distribution.
/// Categories empty in both samples are dropped.
pub fn chi_square_homogeneity(
    dist_a: &BTreeMap<String, u64>,
    dist_b: &BTreeMap<String, u64>,
) -> Result<ChiSquare, EvalError> {
    if !dist_a.keys().eq(dist_b.keys()) {
        return Err(EvalError::CategoryMismatch);
    }
    let rows: Vec<Vec<f64>> = dist_a
        .iter()
        .zip(dist_b.values())
        .filter(|((_, &a), &b)| a + b > 0)
        .map(|((_, &a), &b)| vec![a as f64, b as f64])
        .collect();
    if dist_a.values().sum::<u64>() == 0 || dist_b.values().sum::<u64>() == 0 {
        return Err(EvalError::EmptyInput);
    }
    if rows.len() < 2 {
        return Err(EvalError::DegenerateTest);
    }
    let (statistic, min_expected) = pearson(&rows);
    if min_expected < 5.0 {
        log::warn!("chi-square: expected cell count {min_expected:.2} below 5");
    }
    let df = rows.len() - 1;
    Ok(ChiSquare {
        statistic,
        df,
        significant_at_01: statistic > critical_value_01(df),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn equal_proportions_give_zero() {
        let r = chi_square_two_proportions(50, 100, 50, 100).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.significant_at_01);
    }

    #[test]
    fn ninety_vs_ten() {
        // E = 50 in every cell: 4 * 40^2 / 50
        let r = chi_square_two_proportions(90, 100, 10, 100).unwrap();
        assert!((r.statistic - 128.0).abs() < 1e-9);
        assert!(r.significant_at_01);
    }

    #[test]
    fn zero_impressions() {
        assert_eq!(chi_square_two_proportions(0, 0, 1, 10).unwrap_err(), EvalError::ZeroImpressions);
    }

    #[test]
    fn critical_boundary() {
        let c = critical_value_01(1);
        assert!(6.64 > c && 6.63 < c);
    }

    #[test]
    fn wilson_hilferty_continues_table() {
        // exact 0.99 quantile for df = 40 is 63.691
        assert!((critical_value_01(40) - 63.691).abs() < 0.05);
        assert!(critical_value_01(31) > critical_value_01(30));
    }

    #[test]
    fn homogeneity_examples() {
        let a = dist(&[("x", 30), ("y", 70)]);
        let r = chi_square_homogeneity(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        let b = dist(&[("x", 70), ("y", 30)]);
        let r = chi_square_homogeneity(&a, &b).unwrap();
        assert!((r.statistic - 32.0).abs() < 1e-9);
        assert_eq!(r.df, 1);
        assert!(r.significant_at_01);
    }

    #[test]
    fn homogeneity_errors() {
        let one = dist(&[("x", 5)]);
        assert_eq!(chi_square_homogeneity(&one, &one).unwrap_err(), EvalError::DegenerateTest);
        assert_eq!(
            chi_square_homogeneity(&one, &dist(&[("y", 5)])).unwrap_err(),
            EvalError::CategoryMismatch
        );
    }
}
