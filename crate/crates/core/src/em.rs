//! Expectation-maximization for diagonal Gaussian mixtures.
//!
//! Each restart seeds means k-means++ style from its own ChaCha stream
//! `(seed, restart)`, starts every component at the per-column sample
//! variance and uniform weights, then alternates E and M steps until the
//! relative change in log-likelihood drops below the tolerance.
//!
//! Variances are clamped after each M-step to `max(var, floor)`. For a
//! diagonal model the expected complete-data log-likelihood separates per
//! component and dimension and is unimodal in each variance, so the clamp
//! is the exact constrained maximizer and EM stays monotone.
//!
//! A component whose total responsibility falls below
//! [`EMPTY_COMPONENT_MASS`] is re-seeded at the row the current model
//! explains worst. A restart that needs more than [`MAX_RESEEDS`] re-seeds
//! is abandoned.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AnalysisMatrix;
use crate::error::{Error, Result};
use crate::mixture::{criteria, CriterionValue, MixtureModel};
use crate::rng;

/// Variance floor applied even in unconstrained mode; a truly zero
/// variance makes the density singular.
pub const NUMERICAL_VARIANCE_FLOOR: f64 = 1e-6;
pub const EMPTY_COMPONENT_MASS: f64 = 1e-10;
pub const MAX_RESEEDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub k: usize,
    /// 0 selects unconstrained mode (numerical floor only); 1.0 forbids
    /// clusters narrower than one scale point.
    pub variance_floor: f64,
    pub max_iterations: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(k: usize) -> Self {
        FitConfig {
            k,
            variance_floor: 0.0,
            max_iterations: 500,
            tolerance: 1e-8,
            restarts: 10,
            seed: 0,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.variance_floor = floor;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn effective_floor(&self) -> f64 {
        self.variance_floor.max(NUMERICAL_VARIANCE_FLOOR)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        if !(self.variance_floor >= 0.0) || !self.variance_floor.is_finite() {
            return Err(Error::InvalidArgument("variance floor must be a nonnegative number".into()));
        }
        Ok(())
    }
}

/// Posterior component probabilities, `n x k` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    /// Wraps a row-major matrix. Rows must already sum to one.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument("ragged or empty responsibilities".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-9 || r.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("row {i} is not a distribution")));
            }
        }
        Ok(Responsibilities {
            n: rows.len(),
            k,
            values: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, row: usize, component: usize) -> f64 {
        self.values[row * self.k + component]
    }
}

/// Rows with identical positions merged and weighted by multiplicity.
/// Survey answers sit on a small grid, so EM over distinct rows computes
/// the same sums at a fraction of the cost.
struct WeightedRows {
    dims: usize,
    positions: Vec<f64>,
    weights: Vec<f64>,
    /// Index of each distinct row's first occurrence in the data.
    first: Vec<usize>,
}

impl WeightedRows {
    fn unit(data: &AnalysisMatrix) -> Self {
        WeightedRows {
            dims: data.dims(),
            positions: data.positions().to_vec(),
            weights: vec![1.0; data.n()],
            first: (0..data.n()).collect(),
        }
    }

    fn merged(data: &AnalysisMatrix) -> Self {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut out = WeightedRows {
            dims: data.dims(),
            positions: Vec::new(),
            weights: Vec::new(),
            first: Vec::new(),
        };
        for (i, x) in data.rows().enumerate() {
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            match index.get(&key) {
                Some(&u) => out.weights[u] += 1.0,
                None => {
                    index.insert(key, out.weights.len());
                    out.positions.extend_from_slice(x);
                    out.weights.push(1.0);
                    out.first.push(i);
                }
            }
        }
        out
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.positions.chunks_exact(self.dims)
    }

    fn row(&self, u: usize) -> &[f64] {
        &self.positions[u * self.dims..(u + 1) * self.dims]
    }
}

/// E-step output plus the per-row log densities it computed on the way.
pub(crate) struct Expectation {
    pub resp: Responsibilities,
    pub row_log_density: Vec<f64>,
    pub log_likelihood: f64,
}

pub(crate) fn expectation(data: &AnalysisMatrix, model: &MixtureModel) -> Result<Expectation> {
    weighted_expectation(&WeightedRows::unit(data), model)
}

fn weighted_expectation(rows: &WeightedRows, model: &MixtureModel) -> Result<Expectation> {
    if rows.dims != model.dims() {
        return Err(Error::DimensionMismatch {
            expected: model.dims(),
            actual: rows.dims,
        });
    }
    let k = model.k();
    let terms = model.log_terms();
    let mut values = vec![0.0; rows.len() * k];
    let mut row_log_density = Vec::with_capacity(rows.len());
    let mut total = 0.0;
    for (u, (x, out)) in rows.rows().zip(values.chunks_exact_mut(k)).enumerate() {
        terms.joint(x, out);
        let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Underflow { row: rows.first[u] });
        }
        let mut s = 0.0;
        for v in out.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in out.iter_mut() {
            *v /= s;
        }
        let ll = m + s.ln();
        row_log_density.push(ll);
        total += rows.weights[u] * ll;
    }
    Ok(Expectation {
        resp: Responsibilities {
            n: rows.len(),
            k,
            values,
        },
        row_log_density,
        log_likelihood: total,
    })
}

pub fn e_step(data: &AnalysisMatrix, model: &MixtureModel) -> Result<Responsibilities> {
    expectation(data, model).map(|e| e.resp)
}

struct Maximization {
    mass: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    floor_hits: usize,
}

fn maximize(rows: &WeightedRows, resp: &Responsibilities, floor: f64) -> Maximization {
    let (k, d) = (resp.k, rows.dims);
    let mut mass = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    for ((x, r), w) in rows.rows().zip(resp.values.chunks_exact(k)).zip(&rows.weights) {
        for i in 0..k {
            let wr = w * r[i];
            mass[i] += wr;
            for j in 0..d {
                means[i][j] += wr * x[j];
            }
        }
    }
    for i in 0..k {
        if mass[i] >= EMPTY_COMPONENT_MASS {
            means[i].iter_mut().for_each(|m| *m /= mass[i]);
        }
    }
    let mut variances = vec![vec![0.0; d]; k];
    for ((x, r), w) in rows.rows().zip(resp.values.chunks_exact(k)).zip(&rows.weights) {
        for i in 0..k {
            let wr = w * r[i];
            for j in 0..d {
                let diff = x[j] - means[i][j];
                variances[i][j] += wr * diff * diff;
            }
        }
    }
    let mut floor_hits = 0;
    for i in 0..k {
        for v in variances[i].iter_mut() {
            *v /= mass[i].max(EMPTY_COMPONENT_MASS);
            if *v < floor {
                *v = floor;
                floor_hits += 1;
            }
        }
    }
    Maximization {
        mass,
        means,
        variances,
        floor_hits,
    }
}

fn weights_from_mass(mass: &[f64]) -> Vec<f64> {
    let total: f64 = mass.iter().sum();
    mass.iter().map(|m| m / total).collect()
}

/// Weighted maximum-likelihood update, with variances clamped to the
/// configured floor.
pub fn m_step(data: &AnalysisMatrix, resp: &Responsibilities, cfg: &FitConfig) -> Result<MixtureModel> {
    if resp.n != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: resp.n,
        });
    }
    let m = maximize(&WeightedRows::unit(data), resp, cfg.effective_floor());
    if let Some(component) = m.mass.iter().position(|&w| w < EMPTY_COMPONENT_MASS) {
        return Err(Error::EmptyComponent { component });
    }
    Ok(MixtureModel::from_parts_unchecked(
        weights_from_mass(&m.mass),
        m.means,
        m.variances,
    ))
}

fn floored(vars: Vec<f64>, floor: f64) -> Vec<f64> {
    vars.into_iter().map(|v| v.max(floor)).collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding from the ChaCha stream `(cfg.seed, restart)`.
pub fn init_model(data: &AnalysisMatrix, cfg: &FitConfig, restart: usize) -> Result<MixtureModel> {
    cfg.validate()?;
    let n = data.n();
    if n < cfg.k {
        return Err(Error::Infeasible {
            needed: cfg.k,
            available: n,
        });
    }
    let mut rng = rng::stream(cfg.seed, restart as u64);
    let mut chosen: Vec<usize> = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = data
        .rows()
        .map(|x| squared_distance(x, data.row(chosen[0])))
        .collect();
    while chosen.len() < cfg.k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just above the final sum
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // every row coincides with a chosen mean
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, x) in data.rows().enumerate() {
            nearest[i] = nearest[i].min(squared_distance(x, data.row(pick)));
        }
    }
    let variance = floored(data.column_variances(), cfg.effective_floor());
    Ok(MixtureModel::from_parts_unchecked(
        vec![1.0 / cfg.k as f64; cfg.k],
        chosen.iter().map(|&i| data.row(i).to_vec()).collect(),
        vec![variance; cfg.k],
    ))
}

/// Outcome of one EM run from a given starting model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmRun {
    pub model: MixtureModel,
    pub log_likelihood: f64,
    /// Log-likelihood of the starting model followed by one entry per
    /// iteration.
    pub lnl_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Iterations at which an empty component was re-seeded; the trace
    /// may dip at these points.
    pub reseed_iterations: Vec<usize>,
    /// Number of variance entries clamped by the floor in the final M-step.
    pub floor_hits: usize,
}

/// Runs EM from `init` until convergence or `cfg.max_iterations`.
pub fn run_em(data: &AnalysisMatrix, init: MixtureModel, cfg: &FitConfig) -> Result<EmRun> {
    cfg.validate()?;
    let floor = cfg.effective_floor();
    let global_var = floored(data.column_variances(), floor);
    let rows = WeightedRows::merged(data);
    let mut model = init;
    let mut exp = weighted_expectation(&rows, &model)?;
    let mut trace = vec![exp.log_likelihood];
    let mut reseeds = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut floor_hits = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut m = maximize(&rows, &exp.resp, floor);
        floor_hits = m.floor_hits;
        let empty: Vec<usize> = (0..m.mass.len())
            .filter(|&i| m.mass[i] < EMPTY_COMPONENT_MASS)
            .collect();
        if !empty.is_empty() {
            if reseeds.len() + empty.len() > MAX_RESEEDS {
                return Err(Error::EmptyComponent { component: empty[0] });
            }
            // worst-explained rows first, ties to the earliest row; a
            // distinct row occupies as many slots as it has duplicates
            let mut order: Vec<usize> = (0..rows.len()).collect();
            order.sort_by(|&a, &b| {
                exp.row_log_density[a]
                    .total_cmp(&exp.row_log_density[b])
                    .then(rows.first[a].cmp(&rows.first[b]))
            });
            let mut slots = order
                .iter()
                .flat_map(|&u| std::iter::repeat_n(u, rows.weights[u] as usize));
            let mut last = order[0];
            for &component in &empty {
                let u = slots.next().unwrap_or(last);
                last = u;
                m.means[component] = rows.row(u).to_vec();
                m.variances[component] = global_var.clone();
                m.mass[component] = 1.0;
                reseeds.push(iterations);
            }
        }
        model = MixtureModel::from_parts_unchecked(weights_from_mass(&m.mass), m.means, m.variances);
        let next = weighted_expectation(&rows, &model)?;
        let previous = exp.log_likelihood;
        exp = next;
        trace.push(exp.log_likelihood);
        if !exp.log_likelihood.is_finite() {
            return Err(Error::FitFailed("log-likelihood is not finite".into()));
        }
        let change = (exp.log_likelihood - previous).abs();
        if empty.is_empty() && change <= cfg.tolerance * previous.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(EmRun {
        log_likelihood: exp.log_likelihood,
        model,
        lnl_trace: trace,
        iterations,
        converged,
        reseed_iterations: reseeds,
        floor_hits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: MixtureModel,
    pub criterion: CriterionValue,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub lnl_trace: Vec<f64>,
    pub reseed_iterations: Vec<usize>,
    /// Restarts abandoned after repeated empty components.
    pub failed_restarts: Vec<usize>,
}

/// Run metadata written next to the model JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub config: FitConfig,
    pub n: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub num_params: usize,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub failed_restarts: Vec<usize>,
    pub reseed_iterations: Vec<usize>,
    pub lnl_trace: Vec<f64>,
}

impl FitResult {
    pub fn metadata(&self, cfg: &FitConfig) -> FitMetadata {
        FitMetadata {
            config: cfg.clone(),
            n: self.criterion.n,
            log_likelihood: self.criterion.log_likelihood,
            aic: self.criterion.aic,
            bic: self.criterion.bic,
            num_params: self.criterion.num_params,
            iterations: self.iterations,
            converged: self.converged,
            restart_index: self.restart_index,
            failed_restarts: self.failed_restarts.clone(),
            reseed_iterations: self.reseed_iterations.clone(),
            lnl_trace: self.lnl_trace.clone(),
        }
    }
}

/// Fits `cfg.restarts` independent EM runs and keeps the one with the
/// highest final log-likelihood (ties go to the lowest restart index).
pub fn fit(data: &AnalysisMatrix, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if data.n() < cfg.k {
        return Err(Error::Infeasible {
            needed: cfg.k,
            available: data.n(),
        });
    }
    let runs: Vec<Result<EmRun>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| init_model(data, cfg, r).and_then(|init| run_em(data, init, cfg)))
        .collect();

    let mut best: Option<(usize, EmRun)> = None;
    let mut failed = Vec::new();
    let mut reasons = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let better = best
                    .as_ref()
                    .is_none_or(|(_, b)| run.log_likelihood > b.log_likelihood);
                if better {
                    best = Some((r, run));
                }
            }
            Err(e) => {
                failed.push(r);
                reasons.push(format!("restart {r}: {e}"));
            }
        }
    }
    let (restart_index, run) = best.ok_or_else(|| {
        Error::FitFailed(format!(
            "all {} restarts failed for k={}: {}",
            cfg.restarts,
            cfg.k,
            reasons.join("; ")
        ))
    })?;
    Ok(FitResult {
        criterion: criteria(run.log_likelihood, cfg.k, data.dims(), data.n()),
        model: run.model,
        iterations: run.iterations,
        converged: run.converged,
        restart_index,
        lnl_trace: run.lnl_trace,
        reseed_iterations: run.reseed_iterations,
        failed_restarts: failed,
    })
}
