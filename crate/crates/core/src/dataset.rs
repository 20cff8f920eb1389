//! Survey ingestion: CSV loading, neutral imputation and complete-case
//! matrices.
//!
//! Answers are kept as raw integer codes until [`build_matrix`] turns the
//! selected issues into a dense `n x D` matrix of scale positions. "Don't
//! know" and "not applicable" codes are mapped to the scale midpoint by
//! [`impute_neutral`]; anything else outside the valid range is treated as
//! missing and the row is dropped at matrix construction.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale midpoint assigned to "don't know" / "not applicable" answers.
pub const NEUTRAL_CODE: i64 = 4;
/// Earliest year of the cumulative time series.
pub const FIRST_SURVEY_YEAR: i32 = 1948;
pub const SCALE_MIN: f64 = 1.0;
pub const SCALE_MAX: f64 = 7.0;

fn default_na() -> i64 {
    0
}

fn default_dk() -> i64 {
    9
}

fn default_range() -> (i64, i64) {
    (1, 7)
}

/// One Likert-style question column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueSchema {
    pub column: String,
    pub label: String,
    #[serde(default = "default_na")]
    pub code_na: i64,
    #[serde(default = "default_dk")]
    pub code_dk: i64,
    #[serde(default = "default_range")]
    pub valid_range: (i64, i64),
}

impl IssueSchema {
    pub fn new(column: impl Into<String>, label: impl Into<String>) -> Self {
        IssueSchema {
            column: column.into(),
            label: label.into(),
            code_na: default_na(),
            code_dk: default_dk(),
            valid_range: default_range(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.valid_range;
        if lo > hi || lo < 1 || hi > 7 {
            return Err(Error::Schema(format!(
                "issue `{}`: valid_range {lo}..={hi} must be nonempty and inside 1..=7",
                self.label
            )));
        }
        for (name, code) in [("code_na", self.code_na), ("code_dk", self.code_dk)] {
            if self.in_range(code) {
                return Err(Error::Schema(format!(
                    "issue `{}`: {name} = {code} lies inside the valid range",
                    self.label
                )));
            }
        }
        Ok(())
    }

    pub fn in_range(&self, code: i64) -> bool {
        code >= self.valid_range.0 && code <= self.valid_range.1
    }

    fn is_non_answer(&self, code: i64) -> bool {
        code == self.code_na || code == self.code_dk
    }
}

/// Coarse party identification used for composition tables and party means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartyGroup {
    Democrat,
    Independent,
    Republican,
}

impl PartyGroup {
    pub const ALL: [PartyGroup; 3] = [
        PartyGroup::Democrat,
        PartyGroup::Independent,
        PartyGroup::Republican,
    ];

    pub fn index(self) -> usize {
        match self {
            PartyGroup::Democrat => 0,
            PartyGroup::Independent => 1,
            PartyGroup::Republican => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PartyGroup::Democrat => "Democrat",
            PartyGroup::Independent => "Independent",
            PartyGroup::Republican => "Republican",
        }
    }
}

impl fmt::Display for PartyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Partition of the 7-point party-identification scale into three groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyGrouping {
    pub democrat: Vec<i64>,
    pub independent: Vec<i64>,
    pub republican: Vec<i64>,
}

impl Default for PartyGrouping {
    fn default() -> Self {
        PartyGrouping {
            democrat: vec![1, 2, 3],
            independent: vec![4],
            republican: vec![5, 6, 7],
        }
    }
}

impl PartyGrouping {
    /// Checks that the three groups partition 1..=7.
    pub fn validate(&self) -> Result<()> {
        let mut seen = [false; 7];
        for code in self
            .democrat
            .iter()
            .chain(&self.independent)
            .chain(&self.republican)
        {
            if !(1..=7).contains(code) {
                return Err(Error::Schema(format!(
                    "party grouping contains code {code} outside 1..=7"
                )));
            }
            let slot = &mut seen[(*code - 1) as usize];
            if *slot {
                return Err(Error::Schema(format!(
                    "party grouping assigns code {code} twice"
                )));
            }
            *slot = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Schema(format!(
                "party grouping leaves code {} unassigned",
                missing + 1
            )));
        }
        Ok(())
    }

    pub fn map(&self, code: i64) -> Result<PartyGroup> {
        if !(1..=7).contains(&code) {
            return Err(Error::InvalidPartyCode(code));
        }
        if self.democrat.contains(&code) {
            Ok(PartyGroup::Democrat)
        } else if self.independent.contains(&code) {
            Ok(PartyGroup::Independent)
        } else if self.republican.contains(&code) {
            Ok(PartyGroup::Republican)
        } else {
            Err(Error::InvalidPartyCode(code))
        }
    }

    /// Human-readable description, printed alongside reports.
    pub fn describe(&self) -> String {
        let fmt_codes = |codes: &[i64]| {
            codes
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "Democrat={{{}}} Independent={{{}}} Republican={{{}}}",
            fmt_codes(&self.democrat),
            fmt_codes(&self.independent),
            fmt_codes(&self.republican)
        )
    }
}

/// Maps a party-identification code with the default grouping
/// (1-3 Democrat, 4 Independent, 5-7 Republican).
pub fn map_party(code: i64) -> Result<PartyGroup> {
    PartyGrouping::default().map(code)
}

/// Declarative description of a survey export, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub year_column: String,
    pub party_column: String,
    pub issues: Vec<IssueSchema>,
    #[serde(default)]
    pub party_grouping: PartyGrouping,
}

impl SchemaConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SchemaConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.issues.is_empty() {
            return Err(Error::Schema("no issue columns declared".into()));
        }
        let mut labels = BTreeSet::new();
        for issue in &self.issues {
            issue.validate()?;
            if !labels.insert(issue.label.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate issue label `{}`",
                    issue.label
                )));
            }
        }
        self.party_grouping.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyRecord {
    pub year: i32,
    pub party_code: Option<i64>,
    /// Raw answer codes, aligned with [`SurveyDataset::schemas`].
    pub answers: Vec<Option<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    pub schemas: Vec<IssueSchema>,
    pub rows: Vec<SurveyRecord>,
}

impl SurveyDataset {
    pub fn issue_index(&self, label: &str) -> Option<usize> {
        self.schemas.iter().position(|s| s.label == label)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellDiagnostic {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub column: String,
    pub value: String,
    pub row_dropped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub diagnostics: Vec<CellDiagnostic>,
}

impl LoadReport {
    pub fn diagnostic_count(&self) -> usize {
        self.diagnostics.len()
    }
}

enum Cell {
    Empty,
    Value(i64),
    Bad,
}

fn parse_cell(raw: &str) -> Cell {
    let s = raw.trim();
    if s.is_empty() {
        return Cell::Empty;
    }
    match s.parse::<i64>() {
        Ok(v) => Cell::Value(v),
        Err(_) => Cell::Bad,
    }
}

/// Reads a survey CSV.
///
/// Unparseable party or answer cells become missing values and are
/// reported. A row whose year cell is unparseable, or earlier than 1948,
/// cannot be placed in the time series and is dropped.
pub fn load_survey(
    csv_path: impl AsRef<Path>,
    schemas: &[IssueSchema],
    party_column: &str,
    year_column: &str,
) -> Result<(SurveyDataset, LoadReport)> {
    let path = csv_path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };

    let headers = reader.headers().map_err(csv_err)?.clone();
    let header_index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    let find = |name: &str| {
        header_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let year_idx = find(year_column)?;
    let party_idx = find(party_column)?;
    let issue_idx = schemas
        .iter()
        .map(|s| find(&s.column))
        .collect::<Result<Vec<_>>>()?;

    let mut report = LoadReport::default();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row_no = i + 1;
        report.rows_read += 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("");

        let year = match parse_cell(cell(year_idx)) {
            Cell::Value(y) if y >= FIRST_SURVEY_YEAR as i64 && y <= i32::MAX as i64 => y as i32,
            _ => {
                report.rows_dropped += 1;
                report.diagnostics.push(CellDiagnostic {
                    row: row_no,
                    column: year_column.to_string(),
                    value: cell(year_idx).to_string(),
                    row_dropped: true,
                });
                continue;
            }
        };

        let mut read_code = |idx: usize, column: &str| match parse_cell(cell(idx)) {
            Cell::Empty => None,
            Cell::Value(v) => Some(v),
            Cell::Bad => {
                report.diagnostics.push(CellDiagnostic {
                    row: row_no,
                    column: column.to_string(),
                    value: cell(idx).to_string(),
                    row_dropped: false,
                });
                None
            }
        };
        let party_code = read_code(party_idx, party_column);
        let answers = schemas
            .iter()
            .zip(&issue_idx)
            .map(|(s, &idx)| read_code(idx, &s.column))
            .collect();
        rows.push(SurveyRecord {
            year,
            party_code,
            answers,
        });
    }

    Ok((
        SurveyDataset {
            schemas: schemas.to_vec(),
            rows,
        },
        report,
    ))
}

/// Replaces "not applicable" and "don't know" codes with the neutral
/// midpoint. In-range answers pass through; any other code becomes missing.
pub fn impute_neutral(ds: &SurveyDataset) -> SurveyDataset {
    let rows = ds
        .rows
        .iter()
        .map(|r| SurveyRecord {
            year: r.year,
            party_code: r.party_code,
            answers: r
                .answers
                .iter()
                .zip(&ds.schemas)
                .map(|(a, schema)| match *a {
                    Some(code) if schema.in_range(code) => Some(code),
                    Some(code) if schema.is_non_answer(code) => Some(NEUTRAL_CODE),
                    _ => None,
                })
                .collect(),
        })
        .collect();
    SurveyDataset {
        schemas: ds.schemas.clone(),
        rows,
    }
}

/// Which survey years to keep.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum YearFilter {
    #[default]
    All,
    /// Inclusive year ranges.
    Ranges(Vec<(i32, i32)>),
}

impl YearFilter {
    pub fn single(year: i32) -> Self {
        YearFilter::Ranges(vec![(year, year)])
    }

    pub fn range(from: i32, to: i32) -> Self {
        YearFilter::Ranges(vec![(from, to)])
    }

    pub fn contains(&self, year: i32) -> bool {
        match self {
            YearFilter::All => true,
            YearFilter::Ranges(r) => r.iter().any(|&(a, b)| year >= a && year <= b),
        }
    }

    /// Parses `"all"`, `"2012"`, `"1990-2012"` or comma-separated mixes.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() || text.eq_ignore_ascii_case("all") {
            return Ok(YearFilter::All);
        }
        let bad = || Error::InvalidArgument(format!("cannot parse year filter `{text}`"));
        let mut ranges = Vec::new();
        for part in text.split(',') {
            let part = part.trim();
            let (a, b) = match part.split_once(['-', ':']) {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (part, part),
            };
            let a: i32 = a.parse().map_err(|_| bad())?;
            let b: i32 = b.parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            ranges.push((a, b));
        }
        Ok(YearFilter::Ranges(ranges))
    }
}

/// Dense matrix of scale positions with per-row party and year metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisMatrix {
    n: usize,
    dims: usize,
    /// Row-major `n x dims`.
    positions: Vec<f64>,
    party_groups: Vec<PartyGroup>,
    party_strength: Vec<u8>,
    issue_labels: Vec<String>,
    years: Vec<i32>,
}

impl AnalysisMatrix {
    /// Builds a matrix from raw parts. Positions must be finite; they are
    /// not required to lie on the survey scale, so continuous synthetic
    /// samples are accepted.
    pub fn from_parts(
        dims: usize,
        positions: Vec<f64>,
        party_strength: Vec<u8>,
        grouping: &PartyGrouping,
        issue_labels: Vec<String>,
        years: Vec<i32>,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidArgument("matrix needs at least one column".into()));
        }
        if positions.is_empty() || positions.len() % dims != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of width {dims}",
                positions.len()
            )));
        }
        let n = positions.len() / dims;
        if party_strength.len() != n || years.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: party_strength.len().min(years.len()),
            });
        }
        if issue_labels.len() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: issue_labels.len(),
            });
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite position".into()));
        }
        let party_groups = party_strength
            .iter()
            .map(|&c| grouping.map(c as i64))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnalysisMatrix {
            n,
            dims,
            positions,
            party_groups,
            party_strength,
            issue_labels,
            years,
        })
    }

    /// Convenience constructor for tests and ad-hoc data: every row is an
    /// Independent (party code 4) in year 0, columns are named `x1..xD`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dims = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut positions = Vec::with_capacity(rows.len() * dims);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    actual: r.len(),
                });
            }
            positions.extend_from_slice(r);
        }
        let n = rows.len();
        Self::from_parts(
            dims,
            positions,
            vec![4; n],
            &PartyGrouping::default(),
            (1..=dims).map(|d| format!("x{d}")).collect(),
            vec![0; n],
        )
    }

    /// Like [`from_rows`](Self::from_rows) with explicit party codes.
    pub fn from_rows_with_party<R: AsRef<[f64]>>(rows: &[R], party_strength: &[u8]) -> Result<Self> {
        let base = Self::from_rows(rows)?;
        Self::from_parts(
            base.dims,
            base.positions,
            party_strength.to_vec(),
            &PartyGrouping::default(),
            base.issue_labels,
            base.years,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dims..(i + 1) * self.dims]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.positions.chunks_exact(self.dims)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn party_groups(&self) -> &[PartyGroup] {
        &self.party_groups
    }

    pub fn party_strength(&self) -> &[u8] {
        &self.party_strength
    }

    pub fn issue_labels(&self) -> &[String] {
        &self.issue_labels
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    /// Distinct years present, ascending.
    pub fn distinct_years(&self) -> Vec<i32> {
        self.years
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Rows at the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyResult("row selection is empty".into()));
        }
        let mut positions = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            positions.extend_from_slice(self.row(i));
        }
        Ok(AnalysisMatrix {
            n: indices.len(),
            dims: self.dims,
            positions,
            party_groups: indices.iter().map(|&i| self.party_groups[i]).collect(),
            party_strength: indices.iter().map(|&i| self.party_strength[i]).collect(),
            issue_labels: self.issue_labels.clone(),
            years: indices.iter().map(|&i| self.years[i]).collect(),
        })
    }

    pub fn for_year(&self, year: i32) -> Result<Self> {
        let idx: Vec<usize> = (0..self.n).filter(|&i| self.years[i] == year).collect();
        if idx.is_empty() {
            return Err(Error::EmptyResult(format!("no rows for year {year}")));
        }
        self.select(&idx)
    }

    /// Regroups party codes under a different grouping.
    pub fn with_grouping(&self, grouping: &PartyGrouping) -> Result<Self> {
        let party_groups = self
            .party_strength
            .iter()
            .map(|&c| grouping.map(c as i64))
            .collect::<Result<Vec<_>>>()?;
        Ok(AnalysisMatrix {
            party_groups,
            ..self.clone()
        })
    }

    /// Per-column sample mean.
    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dims];
        for row in self.rows() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// Per-column maximum-likelihood variance (divides by n).
    pub fn column_variances(&self) -> Vec<f64> {
        let mean = self.column_means();
        let mut var = vec![0.0; self.dims];
        for row in self.rows() {
            for d in 0..self.dims {
                let diff = row[d] - mean[d];
                var[d] += diff * diff;
            }
        }
        var.iter_mut().for_each(|v| *v /= self.n as f64);
        var
    }
}

/// Why rows were dropped by [`build_matrix`]. Each dropped row is counted
/// under the first failing check, in field order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub rows_in: usize,
    pub kept: usize,
    pub dropped_year: usize,
    pub dropped_party: usize,
    pub dropped_missing_issue: usize,
}

impl BuildStats {
    pub fn dropped(&self) -> usize {
        self.dropped_year + self.dropped_party + self.dropped_missing_issue
    }
}

/// Keeps the rows with every selected issue present and in range, a valid
/// party code, and a year accepted by `years`. Row order is preserved.
pub fn build_matrix(
    ds: &SurveyDataset,
    issues: &[impl AsRef<str>],
    years: &YearFilter,
    grouping: &PartyGrouping,
) -> Result<(AnalysisMatrix, BuildStats)> {
    if issues.is_empty() {
        return Err(Error::InvalidArgument("no issues selected".into()));
    }
    grouping.validate()?;
    let cols = issues
        .iter()
        .map(|l| {
            ds.issue_index(l.as_ref())
                .ok_or_else(|| Error::UnknownIssue(l.as_ref().to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut stats = BuildStats {
        rows_in: ds.rows.len(),
        ..Default::default()
    };
    let mut positions = Vec::new();
    let mut strength = Vec::new();
    let mut row_years = Vec::new();
    'rows: for r in &ds.rows {
        if !years.contains(r.year) {
            stats.dropped_year += 1;
            continue;
        }
        let code = match r.party_code {
            Some(c) if (1..=7).contains(&c) => c,
            _ => {
                stats.dropped_party += 1;
                continue;
            }
        };
        let start = positions.len();
        for &c in &cols {
            match r.answers[c] {
                Some(a) if ds.schemas[c].in_range(a) => positions.push(a as f64),
                _ => {
                    positions.truncate(start);
                    stats.dropped_missing_issue += 1;
                    continue 'rows;
                }
            }
        }
        strength.push(code as u8);
        row_years.push(r.year);
    }
    stats.kept = strength.len();
    if stats.kept == 0 {
        return Err(Error::EmptyResult(format!(
            "{} rows in, {} outside year filter, {} without party, {} with missing issues",
            stats.rows_in, stats.dropped_year, stats.dropped_party, stats.dropped_missing_issue
        )));
    }
    let labels = issues.iter().map(|l| l.as_ref().to_string()).collect();
    let matrix = AnalysisMatrix::from_parts(
        cols.len(),
        positions,
        strength,
        grouping,
        labels,
        row_years,
    )?;
    Ok((matrix, stats))
}
