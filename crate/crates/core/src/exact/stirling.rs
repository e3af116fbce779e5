use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::log_add;

/// Largest table built without an explicit budget (entries, not rows).
pub const DEFAULT_STIRLING_BUDGET: usize = 10_000_000;

/// `ln s(n, w)` for the unsigned Stirling numbers of the first kind,
/// `0 ≤ w ≤ n ≤ n_max`. Zero entries are stored as `-inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StirlingTable {
    rows: Vec<Vec<f64>>,
}

impl StirlingTable {
    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn ln_s(&self, n: usize, w: usize) -> f64 {
        if w > n {
            return f64::NEG_INFINITY;
        }
        self.rows[n][w]
    }

    /// Row `n` as a slice indexed by `w`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }
}

/// Builds the table by `s(n,w) = s(n-1,w-1) + (n-1)·s(n-1,w)` in log space.
pub fn stirling_table(n_max: usize) -> Result<StirlingTable> {
    stirling_table_with_budget(n_max, DEFAULT_STIRLING_BUDGET)
}

pub fn stirling_table_with_budget(n_max: usize, budget: usize) -> Result<StirlingTable> {
    let entries = (n_max as u128 + 1) * (n_max as u128 + 2) / 2;
    if entries > budget as u128 {
        return Err(Error::Budget {
            what: "Stirling table",
            needed: entries,
            budget,
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    rows.push(vec![0.0]);
    for n in 1..=n_max {
        let prev = &rows[n - 1];
        let ln_m = ((n - 1) as f64).ln();
        let mut row = vec![f64::NEG_INFINITY; n + 1];
        for (w, slot) in row.iter_mut().enumerate().skip(1) {
            let a = prev[w - 1];
            let b = if w < n { prev[w] + ln_m } else { f64::NEG_INFINITY };
            *slot = log_add(a, b);
        }
        rows.push(row);
    }
    Ok(StirlingTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ln_gamma, log_sum_exp};

    #[test]
    fn small_values() {
        let s = stirling_table(6).unwrap();
        assert_eq!(s.ln_s(0, 0), 0.0);
        assert_eq!(s.ln_s(1, 1), 0.0);
        assert_eq!(s.ln_s(3, 0), f64::NEG_INFINITY);
        assert!((s.ln_s(3, 2).exp() - 3.0).abs() < 1e-12);
        assert!((s.ln_s(4, 2).exp() - 11.0).abs() < 1e-12);
        assert!((s.ln_s(6, 3).exp() - 225.0).abs() < 1e-9);
        for n in 0..=6 {
            assert!(s.ln_s(n, n).abs() < 1e-15);
        }
    }

    #[test]
    fn row_sums_are_factorials() {
        let s = stirling_table(150).unwrap();
        for n in [1usize, 5, 20, 80, 150] {
            let got = log_sum_exp(s.row(n));
            let want = ln_gamma(n as f64 + 1.0);
            assert!((got - want).abs() < 1e-10 * want.max(1.0), "n={n}");
        }
    }

    #[test]
    fn budget() {
        assert!(matches!(
            stirling_table_with_budget(100, 50),
            Err(Error::Budget { .. })
        ));
    }
}
