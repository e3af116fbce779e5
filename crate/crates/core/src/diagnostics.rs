//! Chain diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ess {
    pub value: f64,
    /// Set when the series has zero variance; `value` is then its length.
    pub constant: bool,
}

/// Effective sample size by Geyer's initial monotone positive sequence.
pub fn ess(trace: &[f64]) -> Result<Ess> {
    let n = trace.len();
    if n < 10 {
        return Err(Error::SeriesTooShort(n));
    }
    let nf = n as f64;
    let mean = trace.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = trace.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };
    let var = autocov(0);
    if var <= 0.0 || !var.is_finite() {
        log::warn!("zero-variance series of length {n}; reporting ESS = {n}");
        return Ok(Ess {
            value: nf,
            constant: true,
        });
    }
    // Sum of consecutive pairs Γ_m = ρ(2m) + ρ(2m+1), truncated at the first
    // nonpositive pair and forced to be nonincreasing.
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (autocov(2 * m) + autocov(2 * m + 1)) / var;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        m += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0 / nf);
    Ok(Ess {
        value: nf / tau,
        constant: false,
    })
}
