//! Synthetic electorates drawn from a known mixture.
//!
//! Draw order per row, all from one ChaCha8 stream seeded with
//! `spec.seed`: the component (weighted index over the mixture weights),
//! then one standard normal per dimension (`x = mean + sd * z`), then, when
//! a party profile is present, the party group and a strength code within
//! the group (Democrat uniform on 1..=3, Independent 4, Republican uniform
//! on 5..=7). Without a profile every row is an Independent.
//!
//! Discretization rounds half away from zero and clamps to `[1, 7]`. The
//! clamp piles mass onto the scale ends, so discretized moments are biased
//! relative to the generating model, especially for narrow components near
//! 1 or 7.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    AnalysisMatrix, IssueSchema, PartyGroup, PartyGrouping, SchemaConfig, SCALE_MAX, SCALE_MIN,
};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::rng;

fn default_year() -> i32 {
    2012
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub model: MixtureModel,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub discretize: bool,
    /// Per-component (Democrat, Independent, Republican) probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub party_profile: Option<Vec<[f64; 3]>>,
    #[serde(default = "default_year")]
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issue_labels: Option<Vec<String>>,
}

impl GeneratorSpec {
    pub fn new(model: MixtureModel, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            model,
            n,
            seed,
            discretize: false,
            party_profile: None,
            year: default_year(),
            issue_labels: None,
        }
    }

    pub fn discretized(mut self) -> Self {
        self.discretize = true;
        self
    }

    pub fn with_party_profile(mut self, profile: Vec<[f64; 3]>) -> Self {
        self.party_profile = Some(profile);
        self
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = year;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("generator needs n >= 1".into()));
        }
        if let Some(profile) = &self.party_profile {
            if profile.len() != self.model.k() {
                return Err(Error::InvalidArgument(format!(
                    "party profile has {} entries for {} components",
                    profile.len(),
                    self.model.k()
                )));
            }
            for (i, p) in profile.iter().enumerate() {
                let s: f64 = p.iter().sum();
                if p.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "party profile {i} is not a probability triple"
                    )));
                }
            }
        }
        if let Some(labels) = &self.issue_labels {
            if labels.len() != self.model.dims() {
                return Err(Error::DimensionMismatch {
                    expected: self.model.dims(),
                    actual: labels.len(),
                });
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.issue_labels
            .clone()
            .unwrap_or_else(|| (1..=self.model.dims()).map(|d| format!("issue{d}")).collect())
    }
}

/// A generator file holds one spec or a list (e.g. one per survey year).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum GeneratorFile {
    One(GeneratorSpec),
    Many(Vec<GeneratorSpec>),
}

pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<GeneratorSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: GeneratorFile = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let specs = match file {
        GeneratorFile::One(s) => vec![s],
        GeneratorFile::Many(v) => v,
    };
    if specs.is_empty() {
        return Err(Error::InvalidArgument("generator file lists no specs".into()));
    }
    for s in &specs {
        s.validate()?;
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub data: AnalysisMatrix,
    /// Generating component of each row.
    pub components: Vec<usize>,
}

pub fn sample(spec: &GeneratorSpec) -> Result<SyntheticSample> {
    spec.validate()?;
    let model = &spec.model;
    let d = model.dims();
    let mut rng = rng::seeded(spec.seed);
    let pick_component =
        WeightedIndex::new(model.weights()).map_err(|e| Error::InvalidModel(e.to_string()))?;
    let party_pickers = spec
        .party_profile
        .as_ref()
        .map(|profile| {
            profile
                .iter()
                .map(|p| WeightedIndex::new(p).map_err(|e| Error::InvalidArgument(e.to_string())))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let sds: Vec<Vec<f64>> = model
        .variances()
        .iter()
        .map(|v| v.iter().map(|x| x.sqrt()).collect())
        .collect();

    let mut positions = Vec::with_capacity(spec.n * d);
    let mut components = Vec::with_capacity(spec.n);
    let mut strength = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let c = pick_component.sample(&mut rng);
        components.push(c);
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut x = model.means()[c][j] + sds[c][j] * z;
            if spec.discretize {
                x = x.round().clamp(SCALE_MIN, SCALE_MAX);
            }
            positions.push(x);
        }
        let code = match &party_pickers {
            Some(pickers) => match PartyGroup::ALL[pickers[c].sample(&mut rng)] {
                PartyGroup::Democrat => rng.random_range(1..=3u8),
                PartyGroup::Independent => 4,
                PartyGroup::Republican => rng.random_range(5..=7u8),
            },
            None => 4,
        };
        strength.push(code);
    }
    let data = AnalysisMatrix::from_parts(
        d,
        positions,
        strength,
        &PartyGrouping::default(),
        spec.labels(),
        vec![spec.year; spec.n],
    )?;
    Ok(SyntheticSample { data, components })
}

/// Samples every spec and stacks the rows in order.
pub fn sample_all(specs: &[GeneratorSpec]) -> Result<AnalysisMatrix> {
    let samples = specs.iter().map(sample).collect::<Result<Vec<_>>>()?;
    let first = &samples[0].data;
    if samples.iter().any(|s| s.data.issue_labels() != first.issue_labels()) {
        return Err(Error::InvalidArgument(
            "generator specs disagree on issue labels".into(),
        ));
    }
    let mut positions = Vec::new();
    let mut strength = Vec::new();
    let mut years = Vec::new();
    for s in &samples {
        positions.extend_from_slice(s.data.positions());
        strength.extend_from_slice(s.data.party_strength());
        years.extend_from_slice(s.data.years());
    }
    AnalysisMatrix::from_parts(
        first.dims(),
        positions,
        strength,
        &PartyGrouping::default(),
        first.issue_labels().to_vec(),
        years,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentMoments {
    pub count: usize,
    pub mean: Vec<f64>,
    /// Maximum-likelihood (divide-by-count) variance.
    pub variance: Vec<f64>,
}

/// Per-component sample moments given the generating labels.
pub fn empirical_moments(
    data: &AnalysisMatrix,
    labels: &[usize],
    k: usize,
) -> Result<Vec<ComponentMoments>> {
    if labels.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: labels.len(),
        });
    }
    let d = data.dims();
    let mut out: Vec<ComponentMoments> = (0..k)
        .map(|_| ComponentMoments {
            count: 0,
            mean: vec![0.0; d],
            variance: vec![0.0; d],
        })
        .collect();
    for (x, &c) in data.rows().zip(labels) {
        let m = out
            .get_mut(c)
            .ok_or_else(|| Error::InvalidArgument(format!("label {c} >= k = {k}")))?;
        m.count += 1;
        m.mean.iter_mut().zip(x).for_each(|(a, v)| *a += v);
    }
    for (i, m) in out.iter_mut().enumerate() {
        if m.count == 0 {
            return Err(Error::EmptyGroup(format!("component {i}")));
        }
        let c = m.count as f64;
        m.mean.iter_mut().for_each(|v| *v /= c);
    }
    for (x, &c) in data.rows().zip(labels) {
        let m = &mut out[c];
        for j in 0..d {
            let diff = x[j] - m.mean[j];
            m.variance[j] += diff * diff;
        }
    }
    for m in &mut out {
        let c = m.count as f64;
        m.variance.iter_mut().for_each(|v| *v /= c);
    }
    Ok(out)
}

/// Schema describing the CSV written by [`write_csv`].
pub fn csv_schema(labels: &[String]) -> SchemaConfig {
    SchemaConfig {
        year_column: "year".into(),
        party_column: "party".into(),
        issues: labels.iter().map(|l| IssueSchema::new(l.clone(), l.clone())).collect(),
        party_grouping: PartyGrouping::default(),
    }
}

/// Writes integer-valued data in the survey CSV layout read by
/// [`crate::dataset::load_survey`]: `year,party,<issue labels...>`.
pub fn write_csv(data: &AnalysisMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if data.positions().iter().any(|v| v.fract() != 0.0) {
        return Err(Error::InvalidArgument(
            "only discretized (integer) data can be written as survey CSV".into(),
        ));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let to_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut header = vec!["year".to_string(), "party".to_string()];
    header.extend(data.issue_labels().iter().cloned());
    w.write_record(&header).map_err(to_err)?;
    for (i, x) in data.rows().enumerate() {
        let mut rec = vec![data.years()[i].to_string(), data.party_strength()[i].to_string()];
        rec.extend(x.iter().map(|v| format!("{}", *v as i64)));
        w.write_record(&rec).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_matrix, impute_neutral, load_survey, YearFilter};

    fn table1_model() -> MixtureModel {
        MixtureModel::new(
            vec![0.73, 0.27],
            vec![vec![3.6, 4.1], vec![6.0, 6.7]],
            vec![vec![2.5, 2.2], vec![1.0, 0.2]],
        )
        .unwrap()
    }

    #[test]
    fn tight_component_discretizes_to_its_mean() {
        let model = MixtureModel::new(vec![1.0], vec![vec![4.0, 4.0]], vec![vec![1e-4, 1e-4]]).unwrap();
        let s = sample(&GeneratorSpec::new(model, 200, 1).discretized()).unwrap();
        assert!(s.data.positions().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn weights_drive_component_counts() {
        let s = sample(&GeneratorSpec::new(table1_model(), 10_000, 42)).unwrap();
        let first = s.components.iter().filter(|&&c| c == 0).count() as i64;
        // 3 sd of Binomial(10000, 0.73) is about 133
        assert!((first - 7300).abs() <= 150, "count {first}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = GeneratorSpec::new(table1_model(), 500, 9)
            .discretized()
            .with_party_profile(vec![[0.49, 0.36, 0.15], [0.16, 0.39, 0.45]]);
        assert_eq!(sample(&spec).unwrap(), sample(&spec).unwrap());
        let other = GeneratorSpec { seed: 10, ..spec.clone() };
        assert_ne!(sample(&spec).unwrap().data, sample(&other).unwrap().data);
    }

    #[test]
    fn discretized_output_on_grid() {
        let spec = GeneratorSpec::new(table1_model(), 2000, 3).discretized();
        let s = sample(&spec).unwrap();
        for v in s.data.positions() {
            assert!(v.fract() == 0.0 && (1.0..=7.0).contains(v));
        }
    }

    #[test]
    fn continuous_moments_converge() {
        let s = sample(&GeneratorSpec::new(table1_model(), 100_000, 17)).unwrap();
        let m = empirical_moments(&s.data, &s.components, 2).unwrap();
        for (i, comp) in m.iter().enumerate() {
            for d in 0..2 {
                assert!((comp.mean[d] - table1_model().means()[i][d]).abs() < 0.05);
                assert!((comp.variance[d] - table1_model().variances()[i][d]).abs() < 0.1);
            }
        }
        assert!((m[0].variance[0] - 2.5).abs() < 0.05);
    }

    #[test]
    fn clamping_biases_narrow_component_near_the_edge() {
        let s = sample(&GeneratorSpec::new(table1_model(), 50_000, 5).discretized()).unwrap();
        let m = empirical_moments(&s.data, &s.components, 2).unwrap();
        // most draws round to 7 or 6; the sample variance is not 0.2
        assert!((m[1].variance[1] - 0.2).abs() > 0.01, "{}", m[1].variance[1]);
        assert!(m[1].mean[1] < 6.7);
    }

    #[test]
    fn moments_edge_cases() {
        let data = AnalysisMatrix::from_rows(&[[2.0, 3.0]]).unwrap();
        let m = empirical_moments(&data, &[0], 1).unwrap();
        assert_eq!(m[0].variance, vec![0.0, 0.0]);
        assert!(matches!(
            empirical_moments(&data, &[0], 2),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn party_profile_is_respected() {
        let spec = GeneratorSpec::new(table1_model(), 20_000, 8)
            .with_party_profile(vec![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let s = sample(&spec).unwrap();
        for (c, g) in s.components.iter().zip(s.data.party_groups()) {
            let expected = if *c == 0 { PartyGroup::Democrat } else { PartyGroup::Republican };
            assert_eq!(*g, expected);
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = GeneratorSpec::new(table1_model(), 10, 0).with_party_profile(vec![[0.5, 0.5, 0.5]; 2]);
        assert!(sample(&bad).is_err());
        let short = GeneratorSpec::new(table1_model(), 10, 0).with_party_profile(vec![[1.0, 0.0, 0.0]]);
        assert!(sample(&short).is_err());
        assert!(sample(&GeneratorSpec::new(table1_model(), 0, 0)).is_err());
    }

    #[test]
    fn csv_round_trip_through_loader() {
        let spec = GeneratorSpec::new(table1_model(), 300, 4)
            .discretized()
            .with_party_profile(vec![[0.49, 0.36, 0.15], [0.16, 0.39, 0.45]]);
        let s = sample(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        write_csv(&s.data, &path).unwrap();
        let schema = csv_schema(s.data.issue_labels());
        let (ds, report) =
            load_survey(&path, &schema.issues, &schema.party_column, &schema.year_column).unwrap();
        assert_eq!(report.diagnostic_count(), 0);
        let (m, _) = build_matrix(
            &impute_neutral(&ds),
            s.data.issue_labels(),
            &YearFilter::All,
            &schema.party_grouping,
        )
        .unwrap();
        assert_eq!(m, s.data);

        let continuous = sample(&GeneratorSpec::new(table1_model(), 5, 4)).unwrap();
        assert!(write_csv(&continuous.data, dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn multi_year_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.json");
        let specs = vec![
            GeneratorSpec::new(table1_model(), 50, 1).with_year(2008),
            GeneratorSpec::new(table1_model(), 70, 2).with_year(2012),
        ];
        std::fs::write(&path, serde_json::to_string(&specs).unwrap()).unwrap();
        let loaded = load_specs(&path).unwrap();
        assert_eq!(loaded, specs);
        let all = sample_all(&loaded).unwrap();
        assert_eq!(all.n(), 120);
        assert_eq!(all.distinct_years(), vec![2008, 2012]);

        std::fs::write(&path, serde_json::to_string(&specs[0]).unwrap()).unwrap();
        assert_eq!(load_specs(&path).unwrap().len(), 1);
    }
}
