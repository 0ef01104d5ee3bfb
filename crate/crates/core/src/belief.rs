//! Gaussian-process belief over per-cell features and the Bernoulli
//! phenomenon beliefs derived from it.
//!
//! The posterior is kept in whitened form: for observations `o_1..o_k` with
//! Gram factor `L L^T = K_OO + σ² I`, column `w_i = L^{-1} k(O, x_i)` is stored
//! sparsely for every cell. Then
//!
//! ```text
//! cov(U_a, U_b | y) = k(a, b) - w_a · w_b
//! ```
//!
//! and a new observation appends one row to every column it correlates with.
//! Means, variances and phenomenon probabilities are cached per cell and
//! refreshed only where the new row is nonzero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{AgentId, Cell, GridMap, Step};

/// Lower clamp on phenomenon probabilities (upper clamp is `1 - PROB_EPS`).
pub const PROB_EPS: f64 = 1e-12;

/// Added to Gram diagonals when the observation noise is exactly zero.
pub const NOISELESS_JITTER: f64 = 1e-10;

/// `exp(-x)` underflows to zero for `x` beyond this.
const EXP_UNDERFLOW: f64 = 746.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("cell {0} is blocked or outside the map")]
    BlockedCell(Cell),
    #[error("observation value {0} is not finite")]
    NonFinite(f64),
    #[error("Gram matrix is not positive definite at cell {0}")]
    Singular(Cell),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
}

/// Squared-exponential GP prior `k(x, x') = θ1 exp(-‖x - x'‖² / θ2²)` with a
/// constant mean, in cell units.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpHyperparams {
    pub theta1: f64,
    pub theta2: f64,
    pub sigma: f64,
    pub mean: f64,
}

impl Default for GpHyperparams {
    /// Values used for the MAPF benchmark maps.
    fn default() -> Self {
        GpHyperparams { theta1: 0.4, theta2: 0.01, sigma: 0.2, mean: 1.0 }
    }
}

impl GpHyperparams {
    pub fn validate(&self) -> Result<(), BeliefError> {
        let bad = |field, reason: &str| Err(BeliefError::InvalidParams { field, reason: reason.into() });
        if !(self.theta1 > 0.0 && self.theta1.is_finite()) {
            return bad("theta1", "must be positive");
        }
        if !(self.theta2 > 0.0 && self.theta2.is_finite()) {
            return bad("theta2", "must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma", "must be non-negative");
        }
        if !self.mean.is_finite() {
            return bad("mean", "must be finite");
        }
        Ok(())
    }

    pub fn kernel(&self, squared_distance: f64) -> f64 {
        self.theta1 * (-squared_distance / (self.theta2 * self.theta2)).exp()
    }

    /// Observation noise variance, jittered when noiseless.
    pub fn noise_variance(&self) -> f64 {
        if self.sigma == 0.0 {
            NOISELESS_JITTER
        } else {
            self.sigma * self.sigma
        }
    }

    fn support_radius(&self) -> usize {
        (self.theta2 * EXP_UNDERFLOW.sqrt()).ceil() as usize
    }
}

/// Parameters of the erf link from feature posterior to phenomenon belief.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhenomenonParams {
    pub u_tilde: f64,
    pub p1: f64,
    pub p2: f64,
}

impl Default for PhenomenonParams {
    fn default() -> Self {
        PhenomenonParams { u_tilde: 1.4, p1: 0.98, p2: 0.002 }
    }
}

impl PhenomenonParams {
    pub fn validate(&self) -> Result<(), BeliefError> {
        if !self.u_tilde.is_finite() {
            return Err(BeliefError::InvalidParams { field: "u_tilde", reason: "must be finite".into() });
        }
        if !(0.0 <= self.p2 && self.p2 <= self.p1 && self.p1 <= 1.0) {
            return Err(BeliefError::InvalidParams {
                field: "p1",
                reason: format!("need 0 <= p2 <= p1 <= 1, got p1={} p2={}", self.p1, self.p2),
            });
        }
        Ok(())
    }
}

/// `p(X = 1)` for a feature with posterior `N(mu, var)`:
///
/// ```text
/// P1/2 (1 - erf((ũ - μ)/√(2Σ))) + P2/2 (1 + erf((ũ - μ)/√(2Σ)))
/// ```
///
/// clamped to `[PROB_EPS, 1 - PROB_EPS]`. A zero variance gives the step limit.
pub fn phenomenon_probability(mu: f64, var: f64, ph: &PhenomenonParams) -> f64 {
    let e = if var > 0.0 {
        libm::erf((ph.u_tilde - mu) / (2.0 * var).sqrt())
    } else {
        match ph.u_tilde.partial_cmp(&mu) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => -1.0,
            _ => 0.0,
        }
    };
    let p = 0.5 * ph.p1 * (1.0 - e) + 0.5 * ph.p2 * (1.0 + e);
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// A noisy feature measurement. Identity is `(agent, time)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub agent: AgentId,
    pub time: Step,
    pub cell: Cell,
    pub value: f64,
}

impl Observation {
    pub fn identity(&self) -> (AgentId, Step) {
        (self.agent, self.time)
    }
}

/// Gaussian over prospective measurements at a list of cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianJoint {
    pub mean: Vec<f64>,
    /// Row-major, `mean.len()` square.
    pub cov: Vec<f64>,
}

impl GaussianJoint {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_at(&self, a: usize, b: usize) -> f64 {
        self.cov[a * self.dim() + b]
    }
}

/// Map geometry restricted to passable cells plus the prior parameters.
/// Shared by every belief built from the same prior.
#[derive(Debug)]
pub struct GpModel {
    width: usize,
    height: usize,
    coords: Vec<(usize, usize)>,
    cells: Vec<Cell>,
    var_of: Vec<Option<usize>>,
    gp: GpHyperparams,
    ph: PhenomenonParams,
    radius: usize,
}

impl GpModel {
    pub fn new(map: &GridMap, gp: GpHyperparams, ph: PhenomenonParams) -> Result<Self, BeliefError> {
        gp.validate()?;
        ph.validate()?;
        let mut var_of = vec![None; map.num_cells()];
        let mut cells = Vec::new();
        let mut coords = Vec::new();
        for cell in map.passable_cells() {
            var_of[cell.0] = Some(cells.len());
            cells.push(cell);
            coords.push(map.coords(cell));
        }
        Ok(GpModel {
            width: map.width(),
            height: map.height(),
            coords,
            cells,
            var_of,
            gp,
            ph,
            radius: gp.support_radius(),
        })
    }

    pub fn gp(&self) -> &GpHyperparams {
        &self.gp
    }

    pub fn phenomenon(&self) -> &PhenomenonParams {
        &self.ph
    }

    /// Number of belief variables (passable cells).
    pub fn num_vars(&self) -> usize {
        self.cells.len()
    }

    pub fn var_of(&self, cell: Cell) -> Option<usize> {
        self.var_of.get(cell.0).copied().flatten()
    }

    pub fn cell_of(&self, var: usize) -> Cell {
        self.cells[var]
    }

    /// Prior covariance between two variables.
    pub fn prior_cov(&self, a: usize, b: usize) -> f64 {
        let (ra, ca) = self.coords[a];
        let (rb, cb) = self.coords[b];
        let dr = ra.abs_diff(rb) as f64;
        let dc = ca.abs_diff(cb) as f64;
        self.gp.kernel(dr * dr + dc * dc)
    }

    /// Variables with nonzero prior covariance to `var`, ascending.
    pub fn kernel_support(&self, var: usize) -> Vec<usize> {
        let (r, c) = self.coords[var];
        let rad = self.radius;
        let mut out = Vec::new();
        for row in r.saturating_sub(rad)..=(r + rad).min(self.height - 1) {
            for col in c.saturating_sub(rad)..=(c + rad).min(self.width - 1) {
                if let Some(other) = self.var_of[row * self.width + col] {
                    if self.prior_cov(var, other) != 0.0 {
                        out.push(other);
                    }
                }
            }
        }
        out
    }
}

/// Posterior over features and phenomena given an observation history.
#[derive(Clone, Debug)]
pub struct BeliefState {
    model: Arc<GpModel>,
    history: Vec<Observation>,
    /// Per variable: `(row, w)` entries of its whitened column, rows ascending.
    cols: Vec<Vec<(u32, f64)>>,
    /// Per observation row: variables where that row is nonzero.
    row_support: Vec<Vec<u32>>,
    mean: Vec<f64>,
    var: Vec<f64>,
    prob: Vec<f64>,
}

impl BeliefState {
    /// Prior belief: empty history, constant mean, kernel covariance.
    pub fn prior(map: &GridMap, gp: GpHyperparams, ph: PhenomenonParams) -> Result<Self, BeliefError> {
        Ok(Self::from_model(Arc::new(GpModel::new(map, gp, ph)?)))
    }

    pub fn from_model(model: Arc<GpModel>) -> Self {
        let n = model.num_vars();
        let gp = model.gp;
        let p0 = phenomenon_probability(gp.mean, gp.theta1, &model.ph);
        BeliefState {
            history: Vec::new(),
            cols: vec![Vec::new(); n],
            row_support: Vec::new(),
            mean: vec![gp.mean; n],
            var: vec![gp.theta1; n],
            prob: vec![p0; n],
            model,
        }
    }

    /// A fresh prior sharing this belief's model.
    pub fn to_prior(&self) -> Self {
        Self::from_model(self.model.clone())
    }

    pub fn model(&self) -> &Arc<GpModel> {
        &self.model
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn var_of(&self, cell: Cell) -> Result<usize, BeliefError> {
        self.model.var_of(cell).ok_or(BeliefError::BlockedCell(cell))
    }

    /// Returns a new belief conditioned on `obs` in order.
    pub fn condition(&self, obs: &[Observation]) -> Result<Self, BeliefError> {
        let mut next = self.clone();
        for o in obs {
            next.observe(*o)?;
        }
        Ok(next)
    }

    /// Conditions in place on one observation.
    pub fn observe(&mut self, obs: Observation) -> Result<(), BeliefError> {
        let o = self.var_of(obs.cell)?;
        if !obs.value.is_finite() {
            return Err(BeliefError::NonFinite(obs.value));
        }
        let pivot_sq = self.model.prior_cov(o, o) - self.col_dot(o, o) + self.model.gp.noise_variance();
        if !(pivot_sq > 0.0) {
            return Err(BeliefError::Singular(obs.cell));
        }
        let pivot = pivot_sq.sqrt();
        let alpha = (obs.value - self.mean[o]) / pivot;

        let mut candidates = self.model.kernel_support(o);
        for &(row, _) in &self.cols[o] {
            candidates.extend(self.row_support[row as usize].iter().map(|&v| v as usize));
        }
        candidates.sort_unstable();
        candidates.dedup();

        let row = self.row_support.len() as u32;
        let weights: Vec<(usize, f64)> = candidates
            .into_iter()
            .map(|i| (i, self.posterior_cov_vars(o, i) / pivot))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        let ph = self.model.ph;
        let mut support = Vec::with_capacity(weights.len());
        for (i, w) in weights {
            self.cols[i].push((row, w));
            support.push(i as u32);
            self.mean[i] += w * alpha;
            self.var[i] -= w * w;
            self.prob[i] = phenomenon_probability(self.mean[i], self.var[i].max(0.0), &ph);
        }
        self.row_support.push(support);
        self.history.push(obs);
        Ok(())
    }

    fn col_dot(&self, a: usize, b: usize) -> f64 {
        let (ca, cb) = (&self.cols[a], &self.cols[b]);
        if a == b {
            return ca.iter().map(|(_, w)| w * w).sum();
        }
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < ca.len() && j < cb.len() {
            match ca[i].0.cmp(&cb[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += ca[i].1 * cb[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Posterior feature covariance between two variables.
    pub fn posterior_cov_vars(&self, a: usize, b: usize) -> f64 {
        self.model.prior_cov(a, b) - self.col_dot(a, b)
    }

    /// Posterior feature covariance between two passable cells.
    pub fn posterior_cov(&self, a: Cell, b: Cell) -> Result<f64, BeliefError> {
        Ok(self.posterior_cov_vars(self.var_of(a)?, self.var_of(b)?))
    }

    /// Variables whose posterior covariance with `var` can be nonzero, ascending.
    pub fn correlated_vars(&self, var: usize) -> Vec<usize> {
        let mut out = self.model.kernel_support(var);
        for &(row, _) in &self.cols[var] {
            out.extend(self.row_support[row as usize].iter().map(|&v| v as usize));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Posterior `(mean, variance)` of the feature at a variable.
    pub fn marginal_var(&self, var: usize) -> (f64, f64) {
        (self.mean[var], self.var[var].max(0.0))
    }

    pub fn marginal(&self, cell: Cell) -> Result<(f64, f64), BeliefError> {
        Ok(self.marginal_var(self.var_of(cell)?))
    }

    /// Cached `p(X = 1 | history)` per variable.
    pub fn phenomenon_probs(&self) -> &[f64] {
        &self.prob
    }

    pub fn phenomenon_prob(&self, cell: Cell) -> Result<f64, BeliefError> {
        Ok(self.prob[self.var_of(cell)?])
    }

    /// Joint Gaussian over noisy measurements at `cells`.
    pub fn predictive_marginal(&self, cells: &[Cell]) -> Result<GaussianJoint, BeliefError> {
        let vars = cells.iter().map(|&c| self.var_of(c)).collect::<Result<Vec<_>, _>>()?;
        let m = vars.len();
        let noise = self.model.gp.sigma * self.model.gp.sigma;
        let mut cov = vec![0.0; m * m];
        for a in 0..m {
            for b in a..m {
                let mut c = self.posterior_cov_vars(vars[a], vars[b]);
                if a == b {
                    c = c.max(0.0) + noise;
                }
                cov[a * m + b] = c;
                cov[b * m + a] = c;
            }
        }
        Ok(GaussianJoint { mean: vars.iter().map(|&v| self.mean[v]).collect(), cov })
    }
}
