//! MALA-within-Gibbs updates of the latent prior means of one node.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::ParentChildTable;
use crate::error::{Error, Result};
use crate::model::{CategoryTarget, NodeHyper, NodeLatents};

/// Acceptance rate aimed for by [`adapt_stepsize`].
pub const DEFAULT_TARGET_ACCEPT: f64 = 0.574;

/// Per-category Langevin step sizes of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    pub eps: Vec<f64>,
    pub target_accept: f64,
}

impl StepSizes {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidParameter(format!("step sizes must be positive: {eps:?}")));
        }
        Ok(Self {
            eps,
            target_accept: DEFAULT_TARGET_ACCEPT,
        })
    }

    pub fn uniform(k: usize, eps: f64) -> Result<Self> {
        Self::new(vec![eps; k])
    }
}

// Beta draws can round to exactly 0 or 1 for extreme shapes; ln u must stay finite.
const U_MIN: f64 = 1e-300;
const U_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Draws `u_c ~ Beta(β, n_c)` for every observed parent configuration and
/// clears the slots of unobserved ones.
pub fn sample_aux<R: Rng + ?Sized>(lat: &mut NodeLatents, pct: &ParentChildTable, rng: &mut R) {
    let beta = lat.beta();
    lat.u.clear();
    lat.u.resize(pct.n_configs(), None);
    for c in pct.positive_configs() {
        let n = pct.parent_count(c) as f64;
        let dist = Beta::new(beta, n).expect("positive Beta shapes");
        let u: f64 = dist.sample(rng);
        lat.u[c] = Some(u.clamp(U_MIN, U_MAX));
    }
}

/// Log density of the Langevin proposal `to` given `from`, up to a constant
/// shared by both directions.
fn log_proposal(target: &CategoryTarget, from: f64, to: f64, eps: f64) -> f64 {
    let mean = from + 0.5 * eps * eps * target.grad(from);
    let d = to - mean;
    -d * d / (2.0 * eps * eps)
}

/// Metropolis–Hastings log acceptance ratio of moving from `t` to `t_star`.
pub fn log_acceptance_ratio(target: &CategoryTarget, t: f64, t_star: f64, eps: f64) -> f64 {
    if t_star <= 0.0 {
        return f64::NEG_INFINITY;
    }
    target.log_h(t_star) - target.log_h(t) + log_proposal(target, t_star, t, eps)
        - log_proposal(target, t, t_star, eps)
}

/// One Langevin step driven by given randomness: `z` standard normal and
/// `log_uniform = ln U` with `U` uniform on (0,1).
pub fn mala_step_with_noise(
    target: &CategoryTarget,
    t: f64,
    eps: f64,
    z: f64,
    log_uniform: f64,
) -> (f64, bool) {
    let t_star = t + 0.5 * eps * eps * target.grad(t) + eps * z;
    if !(t_star > 0.0 && t_star.is_finite()) {
        return (t, false);
    }
    if log_uniform < log_acceptance_ratio(target, t, t_star, eps) {
        (t_star, true)
    } else {
        (t, false)
    }
}

/// One Langevin step. Both random numbers are always drawn so the stream
/// position does not depend on the outcome.
pub fn mala_step<R: Rng + ?Sized>(target: &CategoryTarget, t: f64, eps: f64, rng: &mut R) -> (f64, bool) {
    let z: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    mala_step_with_noise(target, t, eps, z, u.ln())
}

/// One sweep of the node update: refresh `u`, then one Langevin step per
/// category. Returns the acceptance flag of each category.
pub fn gibbs_sweep_node<R: Rng + ?Sized>(
    lat: &mut NodeLatents,
    pct: &ParentChildTable,
    hyp: &NodeHyper,
    steps: &StepSizes,
    rng: &mut R,
) -> Vec<bool> {
    sample_aux(lat, pct, rng);
    (0..pct.k_child())
        .map(|x| {
            let target = CategoryTarget::new(x, lat, pct, hyp).expect("u populated by sample_aux");
            let (t, acc) = mala_step(&target, lat.t[x], steps.eps[x], rng);
            lat.t[x] = t;
            acc
        })
        .collect()
}

/// Multiplicative Robbins–Monro update `ε ← ε·exp((rate − target)/sweep)`,
/// with `sweep` counted from 1.
pub fn adapt_stepsize(steps: &StepSizes, rates: &[f64], sweep: usize) -> StepSizes {
    let gain = 1.0 / sweep.max(1) as f64;
    let eps = steps
        .eps
        .iter()
        .zip(rates)
        .map(|(&e, &r)| e * (gain * (r - steps.target_accept)).exp())
        .collect();
    StepSizes {
        eps,
        target_accept: steps.target_accept,
    }
}
