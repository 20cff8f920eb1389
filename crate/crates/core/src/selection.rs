//! Choosing the number of clusters: AIC/BIC sweeps and k-fold
//! cross-validation.

use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::AnalysisMatrix;
use crate::em::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::mixture::{log_likelihood, num_params, MixtureModel};
use crate::rng;

/// Stream tag for the fold shuffle.
const FOLD_SHUFFLE_STREAM: u64 = 0x666f_6c64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub ok: bool,
    pub log_likelihood: Option<f64>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub num_params: usize,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    /// Smallest fitted variance over all components and dimensions.
    pub min_variance: Option<f64>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<MixtureModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Only one k was fitted.
    Single,
    /// Smallest interior k whose AIC is strictly below both neighbours.
    LocalMin,
    /// No interior local minimum; the global minimum is returned.
    GlobalMin,
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionRule::Single => "single",
            SelectionRule::LocalMin => "local-min",
            SelectionRule::GlobalMin => "global-min (no interior local min)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub n: usize,
    pub dims: usize,
    pub variance_floor: f64,
    pub seed: u64,
    pub entries: Vec<SweepEntry>,
    pub selected_k: usize,
    pub selection_rule: SelectionRule,
}

impl SweepReport {
    pub fn successful(&self) -> impl Iterator<Item = &SweepEntry> {
        self.entries.iter().filter(|e| e.ok)
    }

    pub fn entry(&self, k: usize) -> Option<&SweepEntry> {
        self.entries.iter().find(|e| e.k == k)
    }

    /// True when the AIC curve has a strict interior local minimum.
    pub fn has_interior_local_min(&self) -> bool {
        let aic: Vec<f64> = self.successful().filter_map(|e| e.aic).collect();
        interior_local_min(&aic).is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "k",
            "status",
            "log_likelihood",
            "aic",
            "bic",
            "num_params",
            "iterations",
            "converged",
            "min_variance",
        ])
        .expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.k.to_string(),
                if e.ok { "ok" } else { "failed" }.to_string(),
                opt(e.log_likelihood),
                opt(e.aic),
                opt(e.bic),
                e.num_params.to_string(),
                e.iterations.map(|v| v.to_string()).unwrap_or_default(),
                e.converged.map(|v| v.to_string()).unwrap_or_default(),
                opt(e.min_variance),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn interior_local_min(aic: &[f64]) -> Option<usize> {
    (1..aic.len().saturating_sub(1)).find(|&i| aic[i] < aic[i - 1] && aic[i] < aic[i + 1])
}

/// Fits every k in `k_min..=k_max` with seed `cfg.seed + k`.
pub fn sweep_k(data: &AnalysisMatrix, k_min: usize, k_max: usize, cfg: &FitConfig) -> Result<SweepReport> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidArgument(format!("bad k range {k_min}..={k_max}")));
    }
    if k_max > data.n() {
        return Err(Error::Infeasible {
            needed: k_max,
            available: data.n(),
        });
    }
    let entries: Vec<SweepEntry> = (k_min..=k_max)
        .map(|k| {
            let cfg_k = FitConfig {
                k,
                seed: cfg.seed.wrapping_add(k as u64),
                ..cfg.clone()
            };
            match fit(data, &cfg_k) {
                Ok(r) => SweepEntry {
                    k,
                    ok: true,
                    log_likelihood: Some(r.criterion.log_likelihood),
                    aic: Some(r.criterion.aic),
                    bic: Some(r.criterion.bic),
                    num_params: r.criterion.num_params,
                    iterations: Some(r.iterations),
                    converged: Some(r.converged),
                    min_variance: r
                        .model
                        .variances()
                        .iter()
                        .flatten()
                        .copied()
                        .reduce(f64::min),
                    error: None,
                    model: Some(r.model),
                },
                Err(e) => SweepEntry {
                    k,
                    ok: false,
                    log_likelihood: None,
                    aic: None,
                    bic: None,
                    num_params: num_params(k, data.dims()),
                    iterations: None,
                    converged: None,
                    min_variance: None,
                    error: Some(e.to_string()),
                    model: None,
                },
            }
        })
        .collect();
    let mut report = SweepReport {
        n: data.n(),
        dims: data.dims(),
        variance_floor: cfg.variance_floor,
        seed: cfg.seed,
        entries,
        selected_k: 0,
        selection_rule: SelectionRule::Single,
    };
    let (k, rule) = select_local_min(&report)?;
    report.selected_k = k;
    report.selection_rule = rule;
    Ok(report)
}

/// Picks the smallest k at a strict interior AIC local minimum, falling
/// back to the global minimum (smallest k on ties).
pub fn select_local_min(report: &SweepReport) -> Result<(usize, SelectionRule)> {
    let ok: Vec<(usize, f64)> = report
        .successful()
        .filter_map(|e| e.aic.map(|a| (e.k, a)))
        .collect();
    match ok.len() {
        0 => Err(Error::Selection("every k in the sweep failed".into())),
        1 => Ok((ok[0].0, SelectionRule::Single)),
        _ => {
            let aic: Vec<f64> = ok.iter().map(|e| e.1).collect();
            if let Some(i) = interior_local_min(&aic) {
                return Ok((ok[i].0, SelectionRule::LocalMin));
            }
            let best = ok
                .iter()
                .copied()
                .reduce(|a, b| if b.1 < a.1 { b } else { a })
                .expect("nonempty");
            Ok((best.0, SelectionRule::GlobalMin))
        }
    }
}

/// Seeded permutation split into `folds` contiguous blocks whose sizes
/// differ by at most one.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, FOLD_SHUFFLE_STREAM));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub k: usize,
    pub ok: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub train_lnl: Option<f64>,
    pub test_lnl: Option<f64>,
    /// `2p - 2 * test_lnl`.
    pub test_aic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XvalAggregate {
    pub k: usize,
    pub folds_ok: usize,
    pub mean_test_lnl: Option<f64>,
    pub sum_test_lnl: Option<f64>,
    pub mean_test_aic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XvalReport {
    pub folds: usize,
    pub n: usize,
    pub dims: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub results: Vec<FoldResult>,
    pub aggregates: Vec<XvalAggregate>,
}

impl XvalReport {
    /// Fraction of (fold, k) fits that succeeded.
    pub fn coverage(&self) -> f64 {
        self.results.iter().filter(|r| r.ok).count() as f64 / self.results.len() as f64
    }

    pub fn aggregate(&self, k: usize) -> Option<&XvalAggregate> {
        self.aggregates.iter().find(|a| a.k == k)
    }

    pub fn folds_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "fold", "k", "status", "n_train", "n_test", "train_lnl", "test_lnl", "test_aic",
        ])
        .expect("in-memory write");
        for r in &self.results {
            w.write_record([
                r.fold.to_string(),
                r.k.to_string(),
                if r.ok { "ok" } else { "failed" }.to_string(),
                r.n_train.to_string(),
                r.n_test.to_string(),
                opt(r.train_lnl),
                opt(r.test_lnl),
                opt(r.test_aic),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "folds_ok", "mean_test_lnl", "sum_test_lnl", "mean_test_aic"])
            .expect("in-memory write");
        for a in &self.aggregates {
            w.write_record([
                a.k.to_string(),
                a.folds_ok.to_string(),
                opt(a.mean_test_lnl),
                opt(a.sum_test_lnl),
                opt(a.mean_test_aic),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// k-fold cross-validation: for each fold and k, fit on the other folds and
/// score the held-out rows.
pub fn cross_validate(
    data: &AnalysisMatrix,
    k_list: &[usize],
    folds: usize,
    cfg: &FitConfig,
) -> Result<XvalReport> {
    if folds < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least 2 folds".into()));
    }
    let k_max = *k_list
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidArgument("empty k list".into()))?;
    if k_list.contains(&0) {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if data.n() < folds * k_max {
        return Err(Error::Infeasible {
            needed: folds * k_max,
            available: data.n(),
        });
    }
    let partition = fold_partition(data.n(), folds, cfg.seed);
    let splits = (0..folds)
        .map(|f| {
            let train: Vec<usize> = partition
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            Ok((data.select(&train)?, data.select(&partition[f])?))
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..folds)
        .flat_map(|f| k_list.iter().map(move |&k| (f, k)))
        .collect();
    let results: Vec<FoldResult> = jobs
        .par_iter()
        .map(|&(f, k)| {
            let (train, test) = &splits[f];
            let cfg_fk = FitConfig {
                k,
                seed: rng::derive(cfg.seed.wrapping_add(k as u64), f as u64),
                ..cfg.clone()
            };
            let scored = fit(train, &cfg_fk).and_then(|r| {
                let test_lnl = log_likelihood(test, &r.model)?;
                Ok((r.criterion.log_likelihood, test_lnl))
            });
            let base = FoldResult {
                fold: f,
                k,
                ok: false,
                n_train: train.n(),
                n_test: test.n(),
                train_lnl: None,
                test_lnl: None,
                test_aic: None,
                error: None,
            };
            match scored {
                Ok((train_lnl, test_lnl)) => FoldResult {
                    ok: true,
                    train_lnl: Some(train_lnl),
                    test_lnl: Some(test_lnl),
                    test_aic: Some(2.0 * num_params(k, data.dims()) as f64 - 2.0 * test_lnl),
                    ..base
                },
                Err(e) => FoldResult {
                    error: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect();

    let aggregates = k_list
        .iter()
        .map(|&k| {
            let ok: Vec<&FoldResult> = results.iter().filter(|r| r.k == k && r.ok).collect();
            let lnl: Vec<f64> = ok.iter().filter_map(|r| r.test_lnl).collect();
            let aic: Vec<f64> = ok.iter().filter_map(|r| r.test_aic).collect();
            let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            XvalAggregate {
                k,
                folds_ok: ok.len(),
                mean_test_lnl: mean(&lnl),
                sum_test_lnl: (!lnl.is_empty()).then(|| lnl.iter().sum()),
                mean_test_aic: mean(&aic),
            }
        })
        .collect();

    Ok(XvalReport {
        folds,
        n: data.n(),
        dims: data.dims(),
        seed: cfg.seed,
        fold_sizes: partition.iter().map(Vec::len).collect(),
        results,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::criteria;
    use proptest::prelude::*;

    fn report_with(aics: &[(usize, Option<f64>)]) -> SweepReport {
        SweepReport {
            n: 100,
            dims: 2,
            variance_floor: 0.0,
            seed: 0,
            entries: aics
                .iter()
                .map(|&(k, aic)| SweepEntry {
                    k,
                    ok: aic.is_some(),
                    log_likelihood: aic.map(|a| -a / 2.0),
                    aic,
                    bic: aic,
                    num_params: num_params(k, 2),
                    iterations: None,
                    converged: None,
                    min_variance: None,
                    error: None,
                    model: None,
                })
                .collect(),
            selected_k: 0,
            selection_rule: SelectionRule::Single,
        }
    }

    #[test]
    fn local_min_rule() {
        let r = report_with(&[(2, Some(4.87e4)), (3, Some(4.68e4)), (4, Some(4.80e4))]);
        assert_eq!(select_local_min(&r).unwrap(), (3, SelectionRule::LocalMin));

        let mono: Vec<_> = (2..=6).map(|k| (k, Some(1000.0 - k as f64))).collect();
        let (k, rule) = select_local_min(&report_with(&mono)).unwrap();
        assert_eq!(k, 6);
        assert_eq!(rule.to_string(), "global-min (no interior local min)");

        assert_eq!(
            select_local_min(&report_with(&[(5, Some(1.0))])).unwrap(),
            (5, SelectionRule::Single)
        );
        assert!(select_local_min(&report_with(&[(2, None), (3, None)])).is_err());
    }

    #[test]
    fn failed_entries_are_skipped_as_neighbours() {
        let r = report_with(&[(2, Some(10.0)), (3, None), (4, Some(5.0)), (5, Some(7.0))]);
        assert_eq!(select_local_min(&r).unwrap(), (4, SelectionRule::LocalMin));
    }

    #[test]
    fn smallest_interior_minimum_wins() {
        let r = report_with(&[(1, Some(9.0)), (2, Some(5.0)), (3, Some(6.0)), (4, Some(1.0)), (5, Some(2.0))]);
        assert_eq!(select_local_min(&r).unwrap().0, 2);
    }

    fn blobs() -> AnalysisMatrix {
        let rows: Vec<[f64; 2]> = (0..60)
            .map(|i| {
                let j = (i % 5) as f64 * 0.3;
                if i % 2 == 0 { [1.0 + j, 2.0 - j] } else { [6.0 - j, 5.5 + j] }
            })
            .collect();
        AnalysisMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn sweep_records_criteria() {
        let data = blobs();
        let cfg = FitConfig::new(1).with_restarts(3).with_seed(4);
        let r = sweep_k(&data, 1, 3, &cfg).unwrap();
        assert_eq!(r.entries.iter().map(|e| e.k).collect::<Vec<_>>(), vec![1, 2, 3]);
        for e in &r.entries {
            let c = criteria(e.log_likelihood.unwrap(), e.k, 2, data.n());
            assert_eq!(e.aic.unwrap(), c.aic);
            assert_eq!(e.bic.unwrap(), c.bic);
        }
        assert!(r.entries.iter().any(|e| e.k == r.selected_k));
        let single = sweep_k(&data, 1, 1, &cfg).unwrap();
        assert_eq!((single.entries.len(), single.selected_k), (1, 1));
        assert!(sweep_k(&data, 3, 2, &cfg).is_err());
        assert!(sweep_k(&data, 1, 61, &cfg).is_err());
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn folds_divide_evenly() {
        let p = fold_partition(100, 5, 1);
        assert!(p.iter().all(|f| f.len() == 20));
    }

    #[test]
    fn single_gaussian_xval_matches_direct_evaluation() {
        let data = blobs();
        let cfg = FitConfig::new(1).with_restarts(2).with_seed(9);
        let r = cross_validate(&data, &[1], 5, &cfg).unwrap();
        let parts = fold_partition(data.n(), 5, cfg.seed);
        for res in &r.results {
            let test = data.select(&parts[res.fold]).unwrap();
            let train_idx: Vec<usize> = (0..data.n()).filter(|i| !parts[res.fold].contains(i)).collect();
            let train = data.select(&train_idx).unwrap();
            let (mean, var) = (train.column_means(), train.column_variances());
            let model = MixtureModel::new(vec![1.0], vec![mean], vec![var]).unwrap();
            let direct = log_likelihood(&test, &model).unwrap();
            assert!((res.test_lnl.unwrap() - direct).abs() < 1e-9 * direct.abs());
        }
        assert_eq!(r.coverage(), 1.0);
    }

    #[test]
    fn xval_argument_checks() {
        let data = blobs();
        let cfg = FitConfig::new(1);
        assert!(cross_validate(&data, &[1], 1, &cfg).is_err());
        assert!(cross_validate(&data, &[], 5, &cfg).is_err());
        assert!(matches!(
            cross_validate(&data, &[13], 5, &cfg),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn xval_is_reproducible() {
        let data = blobs();
        let cfg = FitConfig::new(1).with_restarts(2).with_seed(21);
        let a = cross_validate(&data, &[1, 2], 3, &cfg).unwrap();
        let b = cross_validate(&data, &[1, 2], 3, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.folds_csv(), b.folds_csv());
        assert_eq!(a.results.len(), 6);
        let agg = a.aggregate(2).unwrap();
        let sum: f64 = a.results.iter().filter(|r| r.k == 2).map(|r| r.test_lnl.unwrap()).sum();
        assert!((agg.sum_test_lnl.unwrap() - sum).abs() < 1e-9);
        assert!((agg.mean_test_lnl.unwrap() - sum / 3.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn partition_covers_rows_once(n in 2usize..300, folds in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n >= folds);
            let p = fold_partition(n, folds, seed);
            let mut all: Vec<usize> = p.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = p.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(p, fold_partition(n, folds, seed));
        }

        #[test]
        fn interior_selection_is_a_local_min(aic in proptest::collection::vec(0.0f64..100.0, 3..10)) {
            let entries: Vec<_> = aic.iter().enumerate().map(|(i, &a)| (i + 1, Some(a))).collect();
            let (k, rule) = select_local_min(&report_with(&entries)).unwrap();
            let i = k - 1;
            if rule == SelectionRule::LocalMin {
                prop_assert!(aic[i] <= aic[i - 1] && aic[i] <= aic[i + 1]);
            } else {
                prop_assert!(aic.iter().all(|&a| a >= aic[i]));
            }
        }
    }
}
