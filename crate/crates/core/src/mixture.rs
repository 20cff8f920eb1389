//! Diagonal-covariance Gaussian mixture: density, likelihood and
//! information criteria.
//!
//! The normal density uses the standard normalizer
//! `(2 pi)^(-D/2) |Sigma|^(-1/2)`. Everything downstream works in the log
//! domain; on a 7-point grid a component with variance near the numerical
//! floor assigns densities far below `f64::MIN_POSITIVE` to distant rows.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::AnalysisMatrix;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Tolerance on the weight sum accepted by [`MixtureModel::new`]; weights
/// are renormalized afterwards.
const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

/// `ln(sum(exp(xs)))` without overflow. Returns `-inf` for an empty slice
/// or when every term is `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    k: usize,
    #[serde(rename = "D")]
    dims: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidModel("model needs at least one component".into()));
        }
        if means.len() != k || variances.len() != k {
            return Err(Error::InvalidModel(format!(
                "{k} weights but {} means and {} variance vectors",
                means.len(),
                variances.len()
            )));
        }
        let dims = means[0].len();
        if dims == 0 {
            return Err(Error::InvalidModel("model needs at least one dimension".into()));
        }
        if means.iter().chain(&variances).any(|v| v.len() != dims) {
            return Err(Error::InvalidModel("ragged mean/variance vectors".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidModel("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        if means.iter().flatten().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("non-finite mean".into()));
        }
        if let Some(&v) = variances.iter().flatten().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositiveVariance(v));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(MixtureModel {
            k,
            dims,
            weights,
            means,
            variances,
        })
    }

    /// Builds a model without validation. Used by the fitter, whose updates
    /// preserve the invariants by construction.
    pub(crate) fn from_parts_unchecked(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
    ) -> Self {
        MixtureModel {
            k: weights.len(),
            dims: means[0].len(),
            weights,
            means,
            variances,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<f64>] {
        &self.variances
    }

    /// Reorders components: component `i` of the result is component
    /// `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.k];
        if order.len() != self.k || order.iter().any(|&i| i >= self.k || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidArgument("not a permutation of the components".into()));
        }
        Ok(MixtureModel {
            k: self.k,
            dims: self.dims,
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            means: order.iter().map(|&i| self.means[i].clone()).collect(),
            variances: order.iter().map(|&i| self.variances[i].clone()).collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MixtureModel = serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<model>".into(),
            message: e.to_string(),
        })?;
        let (k, dims) = (raw.k, raw.dims);
        let model = MixtureModel::new(raw.weights, raw.means, raw.variances)?;
        if model.k != k || model.dims != dims {
            return Err(Error::InvalidModel(format!(
                "declared k={k}, D={dims} but arrays give k={}, D={}",
                model.k, model.dims
            )));
        }
        Ok(model)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json { message, .. } => Error::Json {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub(crate) fn log_terms(&self) -> LogTerms {
        LogTerms::new(self)
    }

    fn check_dims(&self, actual: usize) -> Result<()> {
        if actual != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                actual,
            });
        }
        Ok(())
    }
}

/// Per-component constants for fast repeated evaluation.
pub(crate) struct LogTerms {
    dims: usize,
    /// `ln alpha_i - D/2 ln 2pi - 1/2 sum_d ln var_{i,d}`
    offset: Vec<f64>,
    means: Vec<f64>,
    half_precision: Vec<f64>,
}

impl LogTerms {
    fn new(model: &MixtureModel) -> Self {
        let d = model.dims;
        let mut offset = Vec::with_capacity(model.k);
        let mut means = Vec::with_capacity(model.k * d);
        let mut half_precision = Vec::with_capacity(model.k * d);
        for i in 0..model.k {
            let log_det: f64 = model.variances[i].iter().map(|v| v.ln()).sum();
            offset.push(model.weights[i].ln() - 0.5 * (d as f64 * LN_2PI + log_det));
            means.extend_from_slice(&model.means[i]);
            half_precision.extend(model.variances[i].iter().map(|v| 0.5 / v));
        }
        LogTerms {
            dims: d,
            offset,
            means,
            half_precision,
        }
    }

    /// Fills `out[i] = ln(alpha_i N_i(x))`.
    #[inline]
    pub(crate) fn joint(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dims;
        for (i, o) in out.iter_mut().enumerate() {
            let mu = &self.means[i * d..(i + 1) * d];
            let hp = &self.half_precision[i * d..(i + 1) * d];
            let mut q = 0.0;
            for j in 0..d {
                let diff = x[j] - mu[j];
                q += diff * diff * hp[j];
            }
            *o = self.offset[i] - q;
        }
    }
}

/// Density of a diagonal-covariance normal at `x`.
pub fn component_density(x: &[f64], mean: &[f64], var_diag: &[f64]) -> Result<f64> {
    log_component_density(x, mean, var_diag).map(f64::exp)
}

pub fn log_component_density(x: &[f64], mean: &[f64], var_diag: &[f64]) -> Result<f64> {
    if mean.len() != x.len() || var_diag.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: mean.len().min(var_diag.len()),
        });
    }
    if let Some(&v) = var_diag.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveVariance(v));
    }
    let mut log_det = 0.0;
    let mut q = 0.0;
    for ((xi, mi), vi) in x.iter().zip(mean).zip(var_diag) {
        log_det += vi.ln();
        q += (xi - mi) * (xi - mi) / vi;
    }
    Ok(-0.5 * (x.len() as f64 * (2.0 * PI).ln() + log_det + q))
}

pub fn mixture_density(x: &[f64], model: &MixtureModel) -> Result<f64> {
    log_mixture_density(x, model).map(f64::exp)
}

pub fn log_mixture_density(x: &[f64], model: &MixtureModel) -> Result<f64> {
    model.check_dims(x.len())?;
    let terms = model.log_terms();
    let mut buf = vec![0.0; model.k];
    terms.joint(x, &mut buf);
    Ok(logsumexp(&buf))
}

/// Total log-likelihood of `data` under `model`.
pub fn log_likelihood(data: &AnalysisMatrix, model: &MixtureModel) -> Result<f64> {
    model.check_dims(data.dims())?;
    let terms = model.log_terms();
    let mut buf = vec![0.0; model.k];
    let mut total = 0.0;
    for (row, x) in data.rows().enumerate() {
        terms.joint(x, &mut buf);
        let ll = logsumexp(&buf);
        if !ll.is_finite() {
            return Err(Error::Underflow { row });
        }
        total += ll;
    }
    Ok(total)
}

/// Free parameters of a `k`-component diagonal mixture in `d` dimensions:
/// `k - 1` weights, `k d` means and `k d` variances.
pub fn num_params(k: usize, d: usize) -> usize {
    k * (2 * d + 1) - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub num_params: usize,
    pub n: usize,
}

pub fn criteria(log_likelihood: f64, k: usize, d: usize, n: usize) -> CriterionValue {
    let p = num_params(k, d);
    CriterionValue {
        log_likelihood,
        aic: 2.0 * p as f64 - 2.0 * log_likelihood,
        bic: p as f64 * (n as f64).ln() - 2.0 * log_likelihood,
        num_params: p,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table1() -> MixtureModel {
        MixtureModel::new(
            vec![0.73, 0.27],
            vec![vec![3.6, 4.1], vec![6.0, 6.7]],
            vec![vec![2.5, 2.2], vec![1.0, 0.2]],
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_values() {
        let p = component_density(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        assert!((p - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((p - 0.159155).abs() < 1e-6);
        let p = component_density(&[1.0], &[0.0], &[1.0]).unwrap();
        assert!((p - 0.241971).abs() < 1e-6);
        let p = component_density(&[0.0, 0.0], &[0.0, 0.0], &[4.0, 1.0]).unwrap();
        assert!((p - 0.079577).abs() < 1e-6);
    }

    #[test]
    fn anisotropic_density_integrates_to_one() {
        // trapezoid rule over +-12 sd per axis; the density factorizes
        let var = [4.0f64, 1.0];
        let h = 0.01;
        let mut per_axis = [0.0; 2];
        for (axis, v) in var.iter().enumerate() {
            let sd = v.sqrt();
            let steps = (24.0 * sd / h).round() as i64;
            let f = |t: f64| (-0.5 * t * t / v).exp() / (2.0 * PI * v).sqrt();
            let mut s = 0.5 * (f(-12.0 * sd) + f(12.0 * sd));
            for i in 1..steps {
                s += f(-12.0 * sd + i as f64 * h);
            }
            per_axis[axis] = s * h;
        }
        assert!((per_axis[0] * per_axis[1] - 1.0).abs() < 1e-9);
        // and the peak the implementation reports matches the product of 1-D peaks
        let peak = component_density(&[0.0, 0.0], &[0.0, 0.0], &var).unwrap();
        let oracle = 1.0 / (2.0 * PI * 4.0f64).sqrt() / (2.0 * PI).sqrt();
        assert!((peak - oracle).abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_normalization() {
        let (mu, var) = (1.3, 0.7);
        let sd = f64::sqrt(var);
        let steps = 200_000;
        let h = 20.0 * sd / steps as f64;
        let mut s = 0.0;
        for i in 0..=steps {
            let x = mu - 10.0 * sd + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            s += w * component_density(&[x], &[mu], &[var]).unwrap();
        }
        assert!((s * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn density_errors() {
        assert!(matches!(
            component_density(&[0.0], &[0.0], &[0.0]),
            Err(Error::NonPositiveVariance(_))
        ));
        assert!(matches!(
            component_density(&[0.0, 1.0], &[0.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            mixture_density(&[0.0], &table1()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_mixtures() {
        let single = MixtureModel::new(vec![1.0], vec![vec![2.0, 3.0]], vec![vec![1.5, 0.5]]).unwrap();
        let x = [2.5, 2.0];
        let direct = component_density(&x, &[2.0, 3.0], &[1.5, 0.5]).unwrap();
        assert!((mixture_density(&x, &single).unwrap() - direct).abs() < 1e-15);

        let twin = MixtureModel::new(
            vec![0.3, 0.7],
            vec![vec![2.0, 3.0]; 2],
            vec![vec![1.5, 0.5]; 2],
        )
        .unwrap();
        assert!((mixture_density(&x, &twin).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn table1_model_at_first_center() {
        let x = [3.6, 4.1];
        let first = 0.73 / (2.0 * PI * (2.5f64 * 2.2).sqrt());
        let (dx, dy) = (3.6f64 - 6.0, 4.1f64 - 6.7);
        let second = 0.27 / (2.0 * PI * (1.0f64 * 0.2).sqrt())
            * (-0.5 * (dx * dx / 1.0 + dy * dy / 0.2)).exp();
        let p = mixture_density(&x, &table1()).unwrap();
        assert!((first - 0.0495).abs() < 5e-5);
        assert!(second < 1e-7);
        assert!((p - (first + second)).abs() < 1e-15);
    }

    #[test]
    fn log_likelihood_basics() {
        let model = MixtureModel::new(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![1.0, 1.0]]).unwrap();
        let data = AnalysisMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let ll = log_likelihood(&data, &model).unwrap();
        assert!((ll - (-1.837877)).abs() < 1e-6);

        let rows = [[1.0, 2.0], [3.0, 7.0], [5.0, 5.0]];
        let doubled: Vec<_> = rows.iter().chain(rows.iter()).copied().collect();
        let a = log_likelihood(&AnalysisMatrix::from_rows(&rows).unwrap(), &table1()).unwrap();
        let b = log_likelihood(&AnalysisMatrix::from_rows(&doubled).unwrap(), &table1()).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * b.abs());
    }

    #[test]
    fn far_rows_stay_finite_in_log_domain() {
        let model = MixtureModel::new(vec![1.0], vec![vec![1.0]], vec![vec![1e-6]]).unwrap();
        let data = AnalysisMatrix::from_rows(&[[7.0]]).unwrap();
        let ll = log_likelihood(&data, &model).unwrap();
        assert!(ll.is_finite() && ll < -1e6);
        assert_eq!(mixture_density(&[7.0], &model).unwrap(), 0.0);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(num_params(1, 2), 4);
        assert_eq!(num_params(6, 2), 29);
        assert_eq!(num_params(3, 2), 14);
    }

    #[test]
    fn criterion_arithmetic() {
        let c = criteria(4227.26, 6, 2, 5914);
        assert!((c.aic - (-8396.52)).abs() < 1e-9);
        let c = criteria(0.0, 1, 1, 1);
        assert_eq!((c.aic, c.bic), (4.0, 0.0));
        let a = criteria(-100.0, 2, 2, 50);
        let b = criteria(-100.0, 3, 2, 50);
        assert_eq!(b.aic - a.aic, 10.0);
    }

    #[test]
    fn model_validation() {
        assert!(MixtureModel::new(vec![0.5, 0.6], vec![vec![0.0]; 2], vec![vec![1.0]; 2]).is_err());
        assert!(matches!(
            MixtureModel::new(vec![1.0], vec![vec![0.0]], vec![vec![-1.0]]),
            Err(Error::NonPositiveVariance(_))
        ));
        assert!(MixtureModel::new(vec![], vec![], vec![]).is_err());
        assert!(MixtureModel::new(vec![1.0], vec![vec![0.0, 1.0]], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn json_round_trip_and_shape_check() {
        let m = table1();
        let text = m.to_json();
        assert!(text.contains("\"D\": 2"));
        assert_eq!(MixtureModel::from_json(&text).unwrap(), m);
        let lying = text.replace("\"k\": 2", "\"k\": 3");
        assert!(MixtureModel::from_json(&lying).is_err());
    }

    fn arb_model() -> impl Strategy<Value = (MixtureModel, Vec<Vec<f64>>)> {
        (1usize..4, 1usize..4).prop_flat_map(|(k, d)| {
            (
                proptest::collection::vec(0.05f64..1.0, k),
                proptest::collection::vec(proptest::collection::vec(1.0f64..7.0, d), k),
                proptest::collection::vec(proptest::collection::vec(0.3f64..3.0, d), k),
                proptest::collection::vec(proptest::collection::vec(1.0f64..7.0, d), 1..20),
            )
                .prop_map(|(w, m, v, rows)| {
                    let s: f64 = w.iter().sum();
                    let w = w.into_iter().map(|x| x / s).collect();
                    (MixtureModel::new(w, m, v).unwrap(), rows)
                })
        })
    }

    proptest! {
        #[test]
        fn mixture_is_convex_combination((model, rows) in arb_model()) {
            for x in &rows {
                let p = mixture_density(x, &model).unwrap();
                let comps: Vec<f64> = (0..model.k())
                    .map(|i| component_density(x, &model.means()[i], &model.variances()[i]).unwrap())
                    .collect();
                let lo = comps.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = comps.iter().copied().fold(0.0, f64::max);
                prop_assert!(p >= lo * (1.0 - 1e-12) && p <= hi * (1.0 + 1e-12));
            }
        }

        #[test]
        fn logsumexp_matches_naive((model, rows) in arb_model()) {
            let data = AnalysisMatrix::from_rows(&rows).unwrap();
            let stable = log_likelihood(&data, &model).unwrap();
            let naive: f64 = rows
                .iter()
                .map(|x| {
                    (0..model.k())
                        .map(|i| model.weights()[i]
                            * component_density(x, &model.means()[i], &model.variances()[i]).unwrap())
                        .sum::<f64>()
                        .ln()
                })
                .sum();
            prop_assert!((stable - naive).abs() <= 1e-9 * naive.abs().max(1.0));
        }

        #[test]
        fn permutation_invariance((model, rows) in arb_model(), seed in 0u64..1000) {
            let mut order: Vec<usize> = (0..model.k()).collect();
            order.rotate_left(seed as usize % model.k());
            let perm = model.permuted(&order).unwrap();
            let data = AnalysisMatrix::from_rows(&rows).unwrap();
            let a = log_likelihood(&data, &model).unwrap();
            let b = log_likelihood(&data, &perm).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            for x in &rows {
                let pa = mixture_density(x, &model).unwrap();
                let pb = mixture_density(x, &perm).unwrap();
                prop_assert!((pa - pb).abs() <= 1e-12 * pa.max(1e-300));
            }
        }

        #[test]
        fn criteria_identities(ll in -1e5f64..1e5, k in 1usize..20, d in 1usize..12, n in 1usize..100_000) {
            let c = criteria(ll, k, d, n);
            let p = num_params(k, d) as f64;
            prop_assert_eq!(c.aic, 2.0 * p - 2.0 * ll);
            prop_assert_eq!(c.bic, p * (n as f64).ln() - 2.0 * ll);
        }
    }
}
