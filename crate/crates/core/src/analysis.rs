//! Party-representation analytics on top of a fitted mixture.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::{AnalysisMatrix, PartyGroup};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;

/// Maximum-responsibility cluster of every row; ties go to the lowest
/// cluster index.
pub fn hard_assign(data: &AnalysisMatrix, model: &MixtureModel) -> Result<Vec<usize>> {
    if data.dims() != model.dims() {
        return Err(Error::DimensionMismatch {
            expected: model.dims(),
            actual: data.dims(),
        });
    }
    let terms = model.log_terms();
    let mut buf = vec![0.0; model.k()];
    Ok(data
        .rows()
        .map(|x| {
            terms.joint(x, &mut buf);
            argmax(&buf)
        })
        .collect())
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Unweighted mean position of the rows in `group`.
pub fn party_mean(data: &AnalysisMatrix, group: PartyGroup) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; data.dims()];
    let mut count = 0usize;
    for (x, g) in data.rows().zip(data.party_groups()) {
        if *g == group {
            count += 1;
            sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
    }
    if count == 0 {
        return Err(Error::EmptyGroup(group.to_string()));
    }
    sum.iter_mut().for_each(|s| *s /= count as f64);
    Ok(sum)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterComposition {
    pub cluster: usize,
    pub center: Vec<f64>,
    pub variance: Vec<f64>,
    pub count: usize,
    pub share: f64,
    /// Row counts per party group, indexed by [`PartyGroup::index`].
    pub party_counts: [usize; 3],
    /// Percentages within the cluster; `None` for an empty cluster.
    pub party_percent: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionTable {
    pub n: usize,
    pub issue_labels: Vec<String>,
    pub clusters: Vec<ClusterComposition>,
}

pub fn composition(
    data: &AnalysisMatrix,
    labels: &[usize],
    model: &MixtureModel,
) -> Result<CompositionTable> {
    if labels.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: labels.len(),
        });
    }
    let k = model.k();
    let mut counts = vec![[0usize; 3]; k];
    for (&c, g) in labels.iter().zip(data.party_groups()) {
        let slot = counts
            .get_mut(c)
            .ok_or_else(|| Error::InvalidArgument(format!("label {c} >= k = {k}")))?;
        slot[g.index()] += 1;
    }
    let clusters = (0..k)
        .map(|i| {
            let count: usize = counts[i].iter().sum();
            ClusterComposition {
                cluster: i,
                center: model.means()[i].clone(),
                variance: model.variances()[i].clone(),
                count,
                share: count as f64 / data.n() as f64,
                party_counts: counts[i],
                party_percent: (count > 0)
                    .then(|| counts[i].map(|c| 100.0 * c as f64 / count as f64)),
            }
        })
        .collect();
    Ok(CompositionTable {
        n: data.n(),
        issue_labels: data.issue_labels().to_vec(),
        clusters,
    })
}

fn fmt_point(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("({})", parts.join(", "))
}

impl CompositionTable {
    /// One row per quantity, one column per cluster.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["quantity".to_string()];
        header.extend(self.clusters.iter().map(|c| format!("cluster{}", c.cluster + 1)));
        w.write_record(&header).expect("in-memory write");
        let mut row = |name: String, values: Vec<String>| {
            let mut rec = vec![name];
            rec.extend(values);
            w.write_record(&rec).expect("in-memory write");
        };
        for (d, label) in self.issue_labels.iter().enumerate() {
            row(
                format!("center[{label}]"),
                self.clusters.iter().map(|c| c.center[d].to_string()).collect(),
            );
        }
        for (d, label) in self.issue_labels.iter().enumerate() {
            row(
                format!("variance[{label}]"),
                self.clusters.iter().map(|c| c.variance[d].to_string()).collect(),
            );
        }
        row("share".into(), self.clusters.iter().map(|c| c.share.to_string()).collect());
        row("count".into(), self.clusters.iter().map(|c| c.count.to_string()).collect());
        for g in PartyGroup::ALL {
            row(
                format!("{g}_percent"),
                self.clusters
                    .iter()
                    .map(|c| c.party_percent.map(|p| p[g.index()].to_string()).unwrap_or_default())
                    .collect(),
            );
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("|  |");
        for c in &self.clusters {
            out.push_str(&format!(" Cluster {} |", c.cluster + 1));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.clusters.len()));
        out.push('\n');
        let mut line = |name: &str, cells: Vec<String>| {
            out.push_str(&format!("| {name} |"));
            for c in cells {
                out.push_str(&format!(" {c} |"));
            }
            out.push('\n');
        };
        line(
            "Cluster center position",
            self.clusters.iter().map(|c| fmt_point(&c.center, 1)).collect(),
        );
        line("Variance", self.clusters.iter().map(|c| fmt_point(&c.variance, 1)).collect());
        line(
            "Contains portion of data",
            self.clusters.iter().map(|c| format!("{:.0}%", 100.0 * c.share)).collect(),
        );
        for g in PartyGroup::ALL {
            line(
                g.as_str(),
                self.clusters
                    .iter()
                    .map(|c| match c.party_percent {
                        Some(p) => format!("{:.0}%", p[g.index()]),
                        None => "n/a".into(),
                    })
                    .collect(),
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyPr {
    pub party: PartyGroup,
    pub cluster: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    /// `None` when the mapped cluster is empty.
    pub precision: Option<f64>,
    /// Precision with Independents left out of the cluster total; `None`
    /// when the cluster holds no Democrats or Republicans.
    pub precision_partisan: Option<f64>,
    /// `None` when the party has no members.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrMetrics {
    pub n: usize,
    pub rows: Vec<PartyPr>,
    /// `confusion[cluster][party.index()]`; sums to `n`.
    pub confusion: Vec<[usize; 3]>,
}

/// Precision and recall of each mapped party against its cluster.
///
/// Independents have no row of their own but still count toward cluster
/// sizes, so they lower precision.
pub fn precision_recall(
    labels: &[usize],
    parties: &[PartyGroup],
    mapping: &[(PartyGroup, usize)],
    k: usize,
) -> Result<PrMetrics> {
    if labels.len() != parties.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: parties.len(),
        });
    }
    for (i, &(p, c)) in mapping.iter().enumerate() {
        if c >= k {
            return Err(Error::InvalidArgument(format!("cluster {c} >= k = {k}")));
        }
        if mapping[..i].iter().any(|&(q, d)| q == p || d == c) {
            return Err(Error::InvalidArgument(
                "party-to-cluster mapping must be one-to-one".into(),
            ));
        }
    }
    let mut confusion = vec![[0usize; 3]; k];
    for (&c, p) in labels.iter().zip(parties) {
        if c >= k {
            return Err(Error::InvalidArgument(format!("label {c} >= k = {k}")));
        }
        confusion[c][p.index()] += 1;
    }
    let rows = mapping
        .iter()
        .map(|&(party, cluster)| {
            let tp = confusion[cluster][party.index()];
            let cluster_size: usize = confusion[cluster].iter().sum();
            let party_size: usize = confusion.iter().map(|row| row[party.index()]).sum();
            let partisans = cluster_size - confusion[cluster][PartyGroup::Independent.index()];
            PartyPr {
                party,
                cluster,
                true_positive: tp,
                false_positive: cluster_size - tp,
                false_negative: party_size - tp,
                precision: (cluster_size > 0).then(|| tp as f64 / cluster_size as f64),
                precision_partisan: (partisans > 0).then(|| tp as f64 / partisans as f64),
                recall: (party_size > 0).then(|| tp as f64 / party_size as f64),
            }
        })
        .collect();
    Ok(PrMetrics {
        n: labels.len(),
        rows,
        confusion,
    })
}

/// Default Democrat/Republican to cluster pairing: the pair of distinct
/// clusters minimizing the summed distance from each party mean to its
/// cluster center.
pub fn default_party_mapping(
    model: &MixtureModel,
    democrat_mean: &[f64],
    republican_mean: &[f64],
) -> Result<Vec<(PartyGroup, usize)>> {
    if model.k() < 2 {
        return Err(Error::Unsupported(
            "party mapping needs at least two clusters".into(),
        ));
    }
    let mut best = (f64::INFINITY, 0, 1);
    for a in 0..model.k() {
        for b in 0..model.k() {
            if a == b {
                continue;
            }
            let cost = euclidean(democrat_mean, &model.means()[a])
                + euclidean(republican_mean, &model.means()[b]);
            if cost < best.0 {
                best = (cost, a, b);
            }
        }
    }
    Ok(vec![
        (PartyGroup::Democrat, best.1),
        (PartyGroup::Republican, best.2),
    ])
}

impl PrMetrics {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "party",
            "cluster",
            "precision",
            "recall",
            "precision_partisan",
            "tp",
            "fp",
            "fn",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.party.to_string(),
                (r.cluster + 1).to_string(),
                r.precision.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into()),
                r.recall.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into()),
                r.precision_partisan.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into()),
                r.true_positive.to_string(),
                r.false_positive.to_string(),
                r.false_negative.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn to_markdown(&self) -> String {
        let pct = |v: Option<f64>| v.map(|x| format!("{:.0}%", 100.0 * x)).unwrap_or_else(|| "undefined".into());
        let mut out = String::from("|  |");
        for r in &self.rows {
            out.push_str(&format!(" {}/Cluster {} |", r.party, r.cluster + 1));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.rows.len()));
        out.push_str("\n| Precision |");
        for r in &self.rows {
            out.push_str(&format!(" {} |", pct(r.precision)));
        }
        out.push_str("\n| Recall |");
        for r in &self.rows {
            out.push_str(&format!(" {} |", pct(r.recall)));
        }
        out.push_str("\n| Precision, partisans only |");
        for r in &self.rows {
            out.push_str(&format!(" {} |", pct(r.precision_partisan)));
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub center: Vec<f64>,
    /// Two orthonormal rows of length D.
    pub axes: [Vec<f64>; 2],
    pub projected: Vec<[f64; 2]>,
    pub explained_variance: [f64; 2],
    pub total_variance: f64,
}

impl PcaProjection {
    pub fn project(&self, x: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (o, axis) in out.iter_mut().zip(&self.axes) {
            *o = axis
                .iter()
                .zip(x.iter().zip(&self.center))
                .map(|(a, (v, c))| a * (v - c))
                .sum();
        }
        out
    }
}

/// Projects rows onto the top two eigenvectors of the sample covariance.
/// Each axis is signed so its largest-magnitude entry is positive.
pub fn pca_project(data: &AnalysisMatrix) -> Result<PcaProjection> {
    let (n, d) = (data.n(), data.dims());
    if d < 2 || n < 3 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs D >= 2 and n >= 3, got D = {d}, n = {n}"
        )));
    }
    let center = data.column_means();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for x in data.rows() {
        for i in 0..d {
            let di = x[i] - center[i];
            for j in i..d {
                cov[(i, j)] += di * (x[j] - center[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let total_variance = cov.trace();
    if !(total_variance > 0.0) {
        return Err(Error::Degenerate("data has zero total variance".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axis = |idx: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let lead = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let axes = [axis(order[0]), axis(order[1])];
    let explained_variance = [
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
    ];
    let mut pca = PcaProjection {
        center,
        axes,
        projected: Vec::new(),
        explained_variance,
        total_variance,
    };
    pca.projected = data.rows().map(|x| pca.project(x)).collect();
    Ok(pca)
}

/// Inputs for one year of the distance series.
#[derive(Debug, Clone, PartialEq)]
pub struct YearSnapshot {
    pub year: i32,
    pub model: MixtureModel,
    pub democrat_mean: Vec<f64>,
    pub republican_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub year: i32,
    pub cluster_separation: f64,
    pub party_separation: f64,
    pub cluster1_to_center: f64,
    pub cluster2_to_center: f64,
    pub democrat_to_center: f64,
    pub republican_to_center: f64,
}

impl DistanceRow {
    pub const METRICS: [&'static str; 6] = [
        "cluster_separation",
        "party_separation",
        "cluster1_to_center",
        "cluster2_to_center",
        "democrat_to_center",
        "republican_to_center",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.cluster_separation,
            self.party_separation,
            self.cluster1_to_center,
            self.cluster2_to_center,
            self.democrat_to_center,
            self.republican_to_center,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub center: Vec<f64>,
    pub rows: Vec<DistanceRow>,
}

impl DistanceSeries {
    /// Long format: `year,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["year", "metric", "value"]).expect("in-memory write");
        for r in &self.rows {
            for (name, v) in DistanceRow::METRICS.iter().zip(r.values()) {
                w.write_record([r.year.to_string(), name.to_string(), v.to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn metric(&self, name: &str) -> Option<Vec<(i32, f64)>> {
        let idx = DistanceRow::METRICS.iter().position(|m| *m == name)?;
        Some(self.rows.iter().map(|r| (r.year, r.values()[idx])).collect())
    }
}

/// Scale midpoint `(4, ..., 4)`.
pub fn scale_center(dims: usize) -> Vec<f64> {
    vec![4.0; dims]
}

pub fn distance_report(years: &[YearSnapshot], center: &[f64]) -> Result<DistanceSeries> {
    let rows = years
        .iter()
        .map(|y| {
            if y.model.k() != 2 {
                return Err(Error::Unsupported(format!(
                    "distance series needs k = 2, year {} has k = {}",
                    y.year,
                    y.model.k()
                )));
            }
            let d = y.model.dims();
            for v in [center, &y.democrat_mean, &y.republican_mean] {
                if v.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: v.len(),
                    });
                }
            }
            let [a, b] = [&y.model.means()[0], &y.model.means()[1]];
            Ok(DistanceRow {
                year: y.year,
                cluster_separation: euclidean(a, b),
                party_separation: euclidean(&y.democrat_mean, &y.republican_mean),
                cluster1_to_center: euclidean(a, center),
                cluster2_to_center: euclidean(b, center),
                democrat_to_center: euclidean(&y.democrat_mean, center),
                republican_to_center: euclidean(&y.republican_mean, center),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceSeries {
        center: center.to_vec(),
        rows,
    })
}
