use serde::{Deserialize, Serialize};

use crate::data::ParentChildTable;
use crate::error::{Error, Result};
use crate::special::{digamma, ln_rising, trigamma};

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let candidate = (cum - 1.0) / (i + 1) as f64;
        if ui - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn check_interior(omega: &[f64], k: usize) -> Result<()> {
    if omega.len() != k {
        return Err(Error::Shape(format!("omega has {} entries, child has {k} categories", omega.len())));
    }
    if omega.iter().any(|&w| !(w > 0.0 && w < 1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("omega must lie in the open simplex: {omega:?}")));
    }
    Ok(())
}

/// Negative log marginal likelihood in `ω` for fixed `β`, up to constants.
pub fn mmle_objective(omega: &[f64], pct: &ParentChildTable, beta: f64) -> Result<f64> {
    check_interior(omega, pct.k_child())?;
    Ok(objective(omega, pct, beta))
}

fn objective(omega: &[f64], pct: &ParentChildTable, beta: f64) -> f64 {
    let mut g = 0.0;
    for c in pct.positive_configs() {
        for (&n, &w) in pct.row(c).iter().zip(omega) {
            g -= ln_rising(beta * w, n);
        }
    }
    g
}

pub fn mmle_gradient(omega: &[f64], pct: &ParentChildTable, beta: f64) -> Result<Vec<f64>> {
    check_interior(omega, pct.k_child())?;
    Ok(gradient(omega, pct, beta))
}

fn gradient(omega: &[f64], pct: &ParentChildTable, beta: f64) -> Vec<f64> {
    let mut g = vec![0.0; omega.len()];
    for c in pct.positive_configs() {
        for ((gx, &n), &w) in g.iter_mut().zip(pct.row(c)).zip(omega) {
            if n > 0 {
                let a = beta * w;
                *gx -= beta * (digamma(a + n as f64) - digamma(a));
            }
        }
    }
    g
}

/// Diagonal of the Hessian of the objective; all entries are positive when
/// every category has been observed.
pub fn mmle_hessian_diag(omega: &[f64], pct: &ParentChildTable, beta: f64) -> Result<Vec<f64>> {
    check_interior(omega, pct.k_child())?;
    let mut h = vec![0.0; omega.len()];
    for c in pct.positive_configs() {
        for ((hx, &n), &w) in h.iter_mut().zip(pct.row(c)).zip(omega) {
            if n > 0 {
                let a = beta * w;
                *hx -= beta * beta * (trigamma(a + n as f64) - trigamma(a));
            }
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmleConfig {
    /// Initial step size; halved whenever a step leaves the interior or
    /// increases the objective.
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once the gradient-mapping norm falls below this.
    pub grad_tol: f64,
}

impl Default for MmleConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            max_iters: 20_000,
            grad_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmleResult {
    pub omega: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting from the initial point.
    pub trace: Vec<f64>,
}

const MAX_HALVINGS: usize = 60;
const STALL_TOL: f64 = 1e-5;

fn gradient_mapping_norm(omega: &[f64], g: &[f64], eta: f64) -> f64 {
    let step: Vec<f64> = omega.iter().zip(g).map(|(w, gx)| w - eta * gx).collect();
    project_simplex(&step)
        .iter()
        .zip(omega)
        .map(|(a, b)| ((a - b) / eta).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Projected gradient descent from the uniform point.
pub fn mmle_solve(pct: &ParentChildTable, beta: f64, cfg: &MmleConfig) -> Result<MmleResult> {
    let k = pct.k_child();
    if !(beta > 0.0) || !(cfg.eta > 0.0) {
        return Err(Error::InvalidParameter("beta and eta must be positive".into()));
    }
    if let Some(x) = pct.child_marginal().iter().position(|&n| n == 0) {
        return Err(Error::InvalidParameter(format!(
            "category {x} is never observed; the objective has no interior minimizer"
        )));
    }
    let mut omega = vec![1.0 / k as f64; k];
    let mut f = objective(&omega, pct, beta);
    let mut trace = vec![f];
    let mut eta = cfg.eta;
    for it in 0..cfg.max_iters {
        let g = gradient(&omega, pct, beta);
        let gm = gradient_mapping_norm(&omega, &g, cfg.eta);
        if gm < cfg.grad_tol {
            return Ok(MmleResult {
                omega,
                objective: f,
                iterations: it,
                converged: true,
                trace,
            });
        }
        let mut halvings = 0;
        let (next, f_next) = loop {
            let step: Vec<f64> = omega.iter().zip(&g).map(|(w, gx)| w - eta * gx).collect();
            let cand = project_simplex(&step);
            if cand.iter().all(|&w| w > 0.0) {
                let fc = objective(&cand, pct, beta);
                if fc <= f {
                    break (cand, fc);
                }
            }
            halvings += 1;
            if halvings > MAX_HALVINGS {
                // Near the optimum the objective is flat to rounding and no
                // step can decrease it any further: converged to working precision.
                if gm < STALL_TOL {
                    return Ok(MmleResult {
                        omega,
                        objective: f,
                        iterations: it,
                        converged: true,
                        trace,
                    });
                }
                return Err(Error::Optimizer(format!(
                    "no admissible step after {MAX_HALVINGS} halvings at iteration {it}"
                )));
            }
            eta *= 0.5;
        };
        omega = next;
        f = f_next;
        trace.push(f);
        if halvings == 0 {
            eta = (eta * 1.5).min(cfg.eta * 1e6);
        }
    }
    Ok(MmleResult {
        omega,
        objective: f,
        iterations: cfg.max_iters,
        converged: false,
        trace,
    })
}

/// Conventional choices of the concentration `β` for `k` categories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaRule {
    /// `k / 2`
    Jeffreys,
    /// `k`
    BayesLaplace,
    /// `1`
    Perks,
    Fixed(f64),
}

impl BetaRule {
    pub fn value(self, k: usize) -> f64 {
        match self {
            BetaRule::Jeffreys => k as f64 / 2.0,
            BetaRule::BayesLaplace => k as f64,
            BetaRule::Perks => 1.0,
            BetaRule::Fixed(b) => b,
        }
    }
}

/// `λ·π̃ + (1 − λ)·MLE` with `λ = β / (β + n_Pa)`; unobserved parent
/// configurations get `π̃`.
pub fn shrinkage_predictive(pt: &[f64], beta: f64, pct: &ParentChildTable, config: usize) -> Vec<f64> {
    let n = pct.parent_count(config) as f64;
    if n == 0.0 {
        return pt.to_vec();
    }
    let lambda = beta / (beta + n);
    pt.iter()
        .zip(pct.row(config))
        .map(|(&w, &c)| lambda * w + (1.0 - lambda) * c as f64 / n)
        .collect()
}

/// Shrinkage predictive for every parent configuration.
pub fn shrinkage_table(pt: &[f64], beta: f64, pct: &ParentChildTable) -> Vec<Vec<f64>> {
    (0..pct.n_configs()).map(|c| shrinkage_predictive(pt, beta, pct, c)).collect()
}

/// Profile log marginal likelihood in `β` for fixed `ω`, with its first two
/// derivatives.
fn beta_profile(omega: &[f64], pct: &ParentChildTable, beta: f64) -> (f64, f64, f64) {
    let (mut l, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for c in pct.positive_configs() {
        let n = pct.parent_count(c) as f64;
        l -= ln_rising(beta, pct.parent_count(c));
        d1 += digamma(beta) - digamma(beta + n);
        d2 += trigamma(beta) - trigamma(beta + n);
        for (&m, &w) in pct.row(c).iter().zip(omega) {
            if m > 0 {
                let a = beta * w;
                l += ln_rising(a, m);
                d1 += w * (digamma(a + m as f64) - digamma(a));
                d2 += w * w * (trigamma(a + m as f64) - trigamma(a));
            }
        }
    }
    (l, d1, d2)
}

/// Newton's method on `ln β` for the profile likelihood with `ω` fixed,
/// falling back to bisection whenever a Newton step leaves the bracket.
pub fn newton_beta(omega: &[f64], pct: &ParentChildTable, beta0: f64, max_iters: usize) -> Result<f64> {
    check_interior(omega, pct.k_child())?;
    let (mut lo, mut hi) = (1e-8f64.ln(), 1e8f64.ln());
    let mut x = beta0.ln().clamp(lo, hi);
    for _ in 0..max_iters {
        let b = x.exp();
        let (_, d1, d2) = beta_profile(omega, pct, b);
        // derivatives with respect to x = ln β
        let g = b * d1;
        let h = b * b * d2 + b * d1;
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if h < 0.0 { x - g / h } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() < 1e-12 {
            return Ok(next.exp());
        }
        x = next;
    }
    Ok(x.exp())
}

/// Alternates [`mmle_solve`] in `ω` with [`newton_beta`] in `β`.
pub fn mmle_solve_with_beta(
    pct: &ParentChildTable,
    beta0: f64,
    cfg: &MmleConfig,
    rounds: usize,
) -> Result<(MmleResult, f64)> {
    let mut beta = beta0;
    let mut res = mmle_solve(pct, beta, cfg)?;
    for _ in 0..rounds {
        let next = newton_beta(&res.omega, pct, beta, 100)?;
        let done = (next - beta).abs() <= 1e-9 * beta;
        beta = next;
        res = mmle_solve(pct, beta, cfg)?;
        if done {
            break;
        }
    }
    Ok((res, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(k: usize, joint: Vec<u64>) -> ParentChildTable {
        let kpa = joint.len() / k;
        ParentChildTable::from_joint_counts(1, vec![0], vec![kpa], k, joint).unwrap()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        let p = project_simplex(&[0.5, 0.7]);
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15);
        assert_eq!(project_simplex(&[2.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn symmetric_counts_give_uniform() {
        let pct = table(2, vec![3, 3, 1, 1, 5, 5]);
        let g = mmle_gradient(&[0.5, 0.5], &pct, 2.0).unwrap();
        assert!((g[0] - g[1]).abs() < 1e-12);
        let res = mmle_solve(&pct, 2.0, &MmleConfig::default()).unwrap();
        assert!((res.omega[0] - 0.5).abs() < 1e-9);
        assert!(mmle_objective(&[0.0, 1.0], &pct, 2.0).is_err());
    }

    #[test]
    fn unobserved_category_is_rejected() {
        let pct = table(2, vec![3, 0, 1, 0]);
        assert!(mmle_solve(&pct, 1.0, &MmleConfig::default()).is_err());
    }

    #[test]
    fn shrinkage_limits() {
        let pct = table(2, vec![3, 1, 0, 0]);
        assert_eq!(shrinkage_predictive(&[0.3, 0.7], 1.0, &pct, 1), vec![0.3, 0.7]);
        let small = shrinkage_predictive(&[0.3, 0.7], 1e-12, &pct, 0);
        assert!((small[0] - 0.75).abs() < 1e-11);
        // Bayes–Laplace β = k = 2: λ = 2/6
        let bl = shrinkage_predictive(&[0.3, 0.7], BetaRule::BayesLaplace.value(2), &pct, 0);
        assert!((bl[0] - (2.0 / 6.0 * 0.3 + 4.0 / 6.0 * 0.75)).abs() < 1e-15);
        assert_eq!(BetaRule::Jeffreys.value(3), 1.5);
        assert_eq!(BetaRule::Perks.value(9), 1.0);
    }

    #[test]
    fn newton_beta_finds_stationary_point() {
        let pct = table(2, vec![5, 1, 0, 4, 3, 3, 6, 0]);
        let omega = [0.55, 0.45];
        let b = newton_beta(&omega, &pct, 1.0, 200).unwrap();
        let h = 1e-5 * b;
        let d = (beta_profile(&omega, &pct, b + h).0 - beta_profile(&omega, &pct, b - h).0) / (2.0 * h);
        assert!(d.abs() < 1e-5, "derivative {d} at beta {b}");
        let (res, b2) = mmle_solve_with_beta(&pct, 1.0, &MmleConfig::default(), 20).unwrap();
        assert!(b2 > 0.0 && res.converged, "{res:?} beta {b2}");
    }

    fn arb_table() -> impl Strategy<Value = ParentChildTable> {
        (2usize..=4, 1usize..=6).prop_flat_map(|(k, kpa)| {
            proptest::collection::vec(0u64..20, k * kpa).prop_map(move |mut joint| {
                // every category observed at least once
                for x in 0..k {
                    joint[x] += 1;
                }
                table(k, joint)
            })
        })
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(pct in arb_table(), beta in 0.2f64..10.0, raw in proptest::collection::vec(0.05f64..1.0, 4)) {
            let k = pct.k_child();
            let s: f64 = raw[..k].iter().sum();
            let omega: Vec<f64> = raw[..k].iter().map(|w| w / s).collect();
            let g = mmle_gradient(&omega, &pct, beta).unwrap();
            for x in 0..k {
                let h = 1e-6;
                let mut up = omega.clone();
                let mut dn = omega.clone();
                up[x] += h;
                dn[x] -= h;
                let fd = (objective(&up, &pct, beta) - objective(&dn, &pct, beta)) / (2.0 * h);
                prop_assert!((fd - g[x]).abs() <= 1e-5 * g[x].abs().max(1.0), "fd {} vs {}", fd, g[x]);
            }
            prop_assert!(mmle_hessian_diag(&omega, &pct, beta).unwrap().iter().all(|&h| h > 0.0));
        }

        #[test]
        fn projection_satisfies_kkt(v in proptest::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_simplex(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // p = max(v - θ, 0): equal shift on the support, below it off the support
            let support: Vec<usize> = (0..v.len()).filter(|&i| p[i] > 0.0).collect();
            let theta = v[support[0]] - p[support[0]];
            for i in 0..v.len() {
                if p[i] > 0.0 {
                    prop_assert!((v[i] - p[i] - theta).abs() < 1e-12);
                } else {
                    prop_assert!(v[i] <= theta + 1e-12);
                }
            }
        }

        #[test]
        fn objective_is_strictly_convex_on_chords(pct in arb_table(), beta in 0.2f64..10.0,
                a in proptest::collection::vec(0.05f64..1.0, 4), b in proptest::collection::vec(0.05f64..1.0, 4)) {
            let k = pct.k_child();
            let norm = |v: &[f64]| { let s: f64 = v[..k].iter().sum(); v[..k].iter().map(|x| x / s).collect::<Vec<_>>() };
            let (wa, wb) = (norm(&a), norm(&b));
            prop_assume!(wa.iter().zip(&wb).any(|(x, y)| (x - y).abs() > 1e-3));
            let mid: Vec<f64> = wa.iter().zip(&wb).map(|(x, y)| 0.5 * (x + y)).collect();
            let fm = objective(&mid, &pct, beta);
            let chord = 0.5 * (objective(&wa, &pct, beta) + objective(&wb, &pct, beta));
            prop_assert!(fm < chord);
        }

        #[test]
        fn descent_is_monotone(pct in arb_table(), beta in 0.2f64..10.0) {
            let res = mmle_solve(&pct, beta, &MmleConfig::default()).unwrap();
            prop_assert!(res.trace.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!((res.omega.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
