//! Expected information gain of planned observations.
//!
//! The reward of a set of planned measurements `Y` is the additive relaxation
//!
//! ```text
//! Σ_i E_Y[ KL( p(X_i | Y, history) ‖ p(X_i | history) ) ]
//! ```
//!
//! The expectation is a tensor-product Gauss-Hermite sum. Planned
//! observations are put in canonical order (ascending cell) and expanded
//! sequentially: each one is drawn from its predictive distribution given the
//! history and the earlier synthetic values. That sequential expansion is a
//! Cholesky factorization `LLᵀ` of the predictive covariance, so node `z` of
//! the grid produces measurements `y = m + L z`.
//!
//! Under a GP the posterior of `U_i` given `y` has a `y`-independent variance
//! and a mean that is affine in `z`: `μ_i + b_i · z` with `b_i = L⁻¹ cov(U_i, Y)`.
//! Each cell is therefore summed only over the grid dimensions where `b_i` is
//! nonzero; the remaining dimensions integrate to one.

mod quadrature;

pub use quadrature::{QuadratureError, QuadratureRule, MAX_ORDER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{phenomenon_probability, BeliefError, BeliefState};
use crate::grid::Cell;

/// Default number of planned observations one evaluation may expand
/// (`5^6` quadrature nodes at order 5).
pub const DEFAULT_MAX_PLANNED: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("plan has {planned} observations, quadrature budget allows {cap}")]
    Budget { planned: usize, cap: usize },
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("predictive covariance is not positive definite")]
    Singular,
}

/// `p ln(p/q) + (1-p) ln((1-p)/(1-q))`, in nats. Inputs must already be
/// clamped away from 0 and 1.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

/// Per-agent future cells, one per step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationPlan {
    pub paths: Vec<Vec<Cell>>,
}

impl ObservationPlan {
    pub fn single(path: Vec<Cell>) -> Self {
        ObservationPlan { paths: vec![path] }
    }

    pub fn horizon(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// All planned cells, agent-major.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.paths.iter().flatten().copied()
    }

    pub fn num_observations(&self) -> usize {
        self.paths.iter().map(Vec::len).sum()
    }
}

/// Configuration of the reward evaluator.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainConfig {
    pub quadrature_order: usize,
    pub max_planned_observations: usize,
}

impl Default for GainConfig {
    fn default() -> Self {
        GainConfig { quadrature_order: 5, max_planned_observations: DEFAULT_MAX_PLANNED }
    }
}

/// Evaluates expected information gain with a fixed quadrature rule.
#[derive(Clone, Debug)]
pub struct InfoGain {
    rule: QuadratureRule,
    cap: usize,
}

impl InfoGain {
    pub fn new(config: GainConfig) -> Result<Self, GainError> {
        Ok(InfoGain {
            rule: QuadratureRule::gauss_hermite(config.quadrature_order)?,
            cap: config.max_planned_observations,
        })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn max_planned_observations(&self) -> usize {
        self.cap
    }

    pub fn expected_gain(&self, belief: &BeliefState, plan: &ObservationPlan) -> Result<f64, GainError> {
        let cells: Vec<Cell> = plan.cells().collect();
        self.expected_gain_cells(belief, &cells)
    }

    /// Expected gain of observing every cell in `cells` once (repeats allowed).
    pub fn expected_gain_cells(&self, belief: &BeliefState, cells: &[Cell]) -> Result<f64, GainError> {
        if cells.len() > self.cap {
            return Err(GainError::Budget { planned: cells.len(), cap: self.cap });
        }
        if cells.is_empty() {
            return Ok(0.0);
        }
        let mut vars = cells.iter().map(|&c| belief.var_of(c)).collect::<Result<Vec<_>, _>>()?;
        vars.sort_unstable();
        let m = vars.len();
        let gp = belief.model().gp();
        let ph = *belief.model().phenomenon();
        let noise = gp.noise_variance();

        let mut cov = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..=a {
                let c = belief.posterior_cov_vars(vars[a], vars[b]);
                cov[a * m + b] = if a == b { c.max(0.0) + noise } else { c };
            }
        }
        let chol = cholesky_lower(&cov, m).ok_or(GainError::Singular)?;

        let mut candidates: Vec<usize> = Vec::new();
        let mut last = usize::MAX;
        for &v in &vars {
            if v != last {
                candidates.extend(belief.correlated_vars(v));
                last = v;
            }
        }
        candidates.sort_unstable();
        candidates.dedup();

        let probs = belief.phenomenon_probs();
        let mut total = 0.0;
        let mut cross = vec![0.0; m];
        for i in candidates {
            for (a, &v) in vars.iter().enumerate() {
                cross[a] = belief.posterior_cov_vars(i, v);
            }
            let gains = forward_solve(&chol, m, &cross);
            let dims: Vec<f64> = gains.iter().copied().filter(|&g| g != 0.0).collect();
            if dims.is_empty() {
                continue;
            }
            let (mean, var) = belief.marginal_var(i);
            let reduction: f64 = dims.iter().map(|g| g * g).sum();
            let post_var = (var - reduction).max(0.0);
            let prior_p = probs[i];
            total += self.tensor_expectation(&dims, |shift| {
                bernoulli_kl(phenomenon_probability(mean + shift, post_var, &ph), prior_p)
            });
        }
        Ok(total)
    }

    /// `Σ_{k ∈ grid} (Π w) f(Σ_d g_d x_{k_d})` over a tensor grid of `gains.len()` dims.
    fn tensor_expectation(&self, gains: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let order = self.rule.order();
        let nodes = self.rule.nodes();
        let weights = self.rule.weights();
        let dims = gains.len();
        let mut idx = vec![0usize; dims];
        let mut acc = 0.0;
        loop {
            let mut shift = 0.0;
            let mut weight = 1.0;
            for d in 0..dims {
                shift += gains[d] * nodes[idx[d]];
                weight *= weights[idx[d]];
            }
            acc += weight * f(shift);
            // odometer, last dimension fastest
            let mut d = dims;
            loop {
                if d == 0 {
                    return acc;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < order {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
}

pub(crate) fn cholesky_lower(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn forward_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * out[k];
        }
        out[i] = s / l[i * n + i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{GpHyperparams, Observation, PhenomenonParams};
    use crate::grid::GridMap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gain(order: usize) -> InfoGain {
        InfoGain::new(GainConfig { quadrature_order: order, max_planned_observations: 8 }).unwrap()
    }

    /// Literal nested expectation: every grid node conditions a belief clone
    /// on its synthetic values, then KL is summed over every cell.
    fn nested_oracle(rule: &QuadratureRule, belief: &BeliefState, cells: &[Cell]) -> f64 {
        let mut sorted = cells.to_vec();
        sorted.sort_unstable_by_key(|&c| belief.var_of(c).unwrap());
        fn recurse(rule: &QuadratureRule, root: &BeliefState, current: &BeliefState, rest: &[Cell], t: u32) -> f64 {
            let Some((&cell, tail)) = rest.split_first() else {
                return root
                    .phenomenon_probs()
                    .iter()
                    .zip(current.phenomenon_probs())
                    .map(|(&q, &p)| bernoulli_kl(p, q))
                    .sum();
            };
            let pred = current.predictive_marginal(&[cell]).unwrap();
            let var = if current.model().gp().sigma == 0.0 { pred.cov_at(0, 0) + 1e-10 } else { pred.cov_at(0, 0) };
            let sd = var.sqrt();
            rule.nodes()
                .iter()
                .zip(rule.weights())
                .map(|(&x, &w)| {
                    let obs = Observation { agent: 99, time: t, cell, value: pred.mean[0] + sd * x };
                    w * recurse(rule, root, &current.condition(&[obs]).unwrap(), tail, t + 1)
                })
                .sum()
        }
        recurse(rule, belief, belief, &sorted, 1000)
    }

    fn random_belief(rng: &mut ChaCha8Rng, map: &GridMap, gp: GpHyperparams, len: usize) -> BeliefState {
        let mut b = BeliefState::prior(map, gp, PhenomenonParams::default()).unwrap();
        let cells: Vec<Cell> = map.passable_cells().collect();
        for t in 0..len {
            let cell = cells[rng.random_range(0..cells.len())];
            b.observe(Observation { agent: 0, time: t as u32, cell, value: rng.random_range(0.5..2.2) }).unwrap();
        }
        b
    }

    #[test]
    fn kl_values() {
        assert_eq!(bernoulli_kl(0.3, 0.3), 0.0);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((bernoulli_kl(0.5, 0.25) - expected).abs() < 1e-15);
        assert!((expected - 0.143_841).abs() < 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = rng.random_range(1e-12..1.0 - 1e-12);
            let q = rng.random_range(1e-12..1.0 - 1e-12);
            assert!(bernoulli_kl(p, q) >= -1e-15);
        }
    }

    #[test]
    fn matches_nested_conditioning() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rule = QuadratureRule::gauss_hermite(5).unwrap();
        for trial in 0..25 {
            let map = GridMap::empty(3, 3, "e").unwrap();
            let gp = GpHyperparams {
                theta1: 0.4,
                theta2: [0.01, 0.9, 1.6][trial % 3],
                sigma: if trial == 4 { 0.0 } else { 0.2 },
                mean: 1.0,
            };
            let len = rng.random_range(0..4);
            let belief = random_belief(&mut rng, &map, gp, len);
            let len = rng.random_range(1..=4);
            let cells: Vec<Cell> = (0..len).map(|_| Cell(rng.random_range(0..9))).collect();
            let fast = gain(5).expected_gain_cells(&belief, &cells).unwrap();
            let slow = nested_oracle(&rule, &belief, &cells);
            assert!((fast - slow).abs() < 1e-9 * slow.max(1.0), "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn no_residual_uncertainty_no_gain() {
        let map = GridMap::empty(3, 1, "e").unwrap();
        let gp = GpHyperparams { theta1: 0.4, theta2: 0.01, sigma: 0.0, mean: 1.0 };
        let b = BeliefState::prior(&map, gp, PhenomenonParams::default())
            .unwrap()
            .condition(&[Observation { agent: 0, time: 0, cell: Cell(1), value: 1.1 }])
            .unwrap();
        let g = gain(5).expected_gain_cells(&b, &[Cell(1)]).unwrap();
        assert!(g.abs() < 1e-6, "{g}");
    }

    /// Fine-grid trapezoid integration of the one- and two-visit gains at an
    /// isolated cell, through the scalar sufficient statistic of the visits.
    fn fine_grid_gain(mean: f64, var: f64, noise: f64, visits: usize) -> f64 {
        let ph = PhenomenonParams::default();
        let reduction = var * var * visits as f64 / (visits as f64 * var + noise);
        let post = var - reduction;
        let sd = reduction.sqrt();
        let p0 = phenomenon_probability(mean, var, &ph);
        let (lo, hi, n) = (-12.0, 12.0, 200_000);
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|k| {
                let z = lo + k as f64 * h;
                let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                w * h * density * bernoulli_kl(phenomenon_probability(mean + sd * z, post, &ph), p0)
            })
            .sum()
    }

    #[test]
    fn repeated_visit_is_submodular() {
        let map = GridMap::empty(3, 1, "e").unwrap();
        let gp = GpHyperparams::default();
        let b = BeliefState::prior(&map, gp, PhenomenonParams::default()).unwrap();
        let once = gain(5).expected_gain_cells(&b, &[Cell(1)]).unwrap();
        let twice = gain(5).expected_gain_cells(&b, &[Cell(1), Cell(1)]).unwrap();
        assert!(twice < 2.0 * once);
        let exact_once = fine_grid_gain(1.0, 0.4, 0.04, 1);
        let exact_twice = fine_grid_gain(1.0, 0.4, 0.04, 2);
        assert!(exact_twice < 2.0 * exact_once);
        // Frozen from the fine-grid oracle above.
        assert!((exact_once - 0.376_108_8).abs() < 1e-6, "{exact_once}");
        assert!((exact_twice - 0.420_632_2).abs() < 1e-6, "{exact_twice}");
    }

    #[test]
    fn budget_is_enforced() {
        let map = GridMap::empty(4, 4, "e").unwrap();
        let b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
        let ig = InfoGain::new(GainConfig::default()).unwrap();
        let cells: Vec<Cell> = (0..7).map(Cell).collect();
        assert_eq!(ig.expected_gain_cells(&b, &cells), Err(GainError::Budget { planned: 7, cap: 6 }));
        assert!(ig.expected_gain_cells(&b, &cells[..6]).is_ok());
        assert_eq!(ig.expected_gain_cells(&b, &[]), Ok(0.0));
    }

    #[test]
    fn agent_exchange_symmetry_and_nonnegativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ig = gain(5);
        for trial in 0..200 {
            let map = GridMap::empty(4, 4, "e").unwrap();
            let gp = GpHyperparams { theta2: [0.01, 1.0, 2.0][trial % 3], ..Default::default() };
            let len = rng.random_range(0..5);
            let b = random_belief(&mut rng, &map, gp, len);
            let a: Vec<Cell> = (0..2).map(|_| Cell(rng.random_range(0..16))).collect();
            let c: Vec<Cell> = (0..2).map(|_| Cell(rng.random_range(0..16))).collect();
            let ab = ig.expected_gain(&b, &ObservationPlan { paths: vec![a.clone(), c.clone()] }).unwrap();
            let ba = ig.expected_gain(&b, &ObservationPlan { paths: vec![c, a] }).unwrap();
            assert!((ab - ba).abs() < 1e-9);
            assert!(ab >= -1e-9);
        }
    }

    #[test]
    fn order_five_converges_on_three_cells() {
        // High-noise regime: the posterior mean moves smoothly with the
        // measurement, which is where a 5-point rule is accurate.
        let map = GridMap::empty(3, 1, "line").unwrap();
        let gp = GpHyperparams { theta1: 0.4, theta2: 1.0, sigma: 1.0, mean: 1.0 };
        let b = BeliefState::prior(&map, gp, PhenomenonParams::default()).unwrap();
        let plan = [Cell(0), Cell(2)];
        let g5 = gain(5).expected_gain_cells(&b, &plan).unwrap();
        let g20 = gain(20).expected_gain_cells(&b, &plan).unwrap();
        assert!(((g5 - g20) / g20).abs() < 1e-3, "{g5} vs {g20}");
        let g1 = gain(1).expected_gain_cells(&b, &plan).unwrap();
        assert!(((g1 - g20) / g20).abs() > 1e-3);
    }
}
