//! Command-line driver.
//!
//! Each subcommand resolves a run configuration (optional JSON file, then
//! flags, flags win), loads data from a survey CSV or a generator spec, and
//! writes its artifacts under the output directory with fixed file names.
//! Exit codes: 0 success, 1 computational failure, 2 usage or config error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    composition, default_party_mapping, distance_report, hard_assign, party_mean, pca_project,
    precision_recall, scale_center, DistanceSeries, YearSnapshot,
};
use crate::dataset::{
    build_matrix, impute_neutral, load_survey, AnalysisMatrix, PartyGroup, PartyGrouping,
    SchemaConfig, YearFilter,
};
use crate::em::{fit, FitConfig};
use crate::error::{Error, Result};
use crate::mixture::MixtureModel;
use crate::report::{
    center_chart, render_curves, render_density, render_scatter, separation_chart, sweep_chart,
    xval_chart, Marker, PlotKind, PlotSpec,
};
use crate::selection::{cross_validate, sweep_k, SelectionRule, SweepReport, XvalReport};
use crate::synth::{csv_schema, load_specs, sample_all, write_csv};
use crate::rng;

pub const OUT_ENV: &str = "SURVEYMIX_OUT";
const DEFAULT_OUT: &str = "surveymix-out";

#[derive(Debug, Parser)]
#[command(name = "surveymix", version, about = "Mixture-model clustering of opinion surveys")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one mixture and write model, tables and figures.
    Fit(RunArgs),
    /// Fit a range of cluster counts and select k by AIC.
    Sweep(RunArgs),
    /// Score a range of cluster counts on held-out folds.
    Xval(XvalArgs),
    /// Fit k = 2 per survey year and track cluster and party distances.
    Timeseries(RunArgs),
    /// Write a generated electorate as survey CSV.
    Synth(RunArgs),
    /// Re-render figures from saved JSON outputs.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Survey CSV (requires --schema).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Schema JSON describing the survey CSV.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Generator spec JSON, used instead of --data.
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// Comma-separated issue labels (default: all declared issues).
    #[arg(long, value_delimiter = ',')]
    pub issues: Option<Vec<String>>,
    /// Year filter: `all`, `2012`, `1990-2012` or a comma list.
    #[arg(long)]
    pub years: Option<String>,
    /// Cluster count `N` or inclusive range `A..B`.
    #[arg(long)]
    pub k: Option<String>,
    /// Variance floor; 0 is unconstrained.
    #[arg(long)]
    pub floor: Option<f64>,
    /// Random restarts per fit (default 10)
    #[arg(long)]
    pub restarts: Option<usize>,
    /// EM iteration cap per restart (default 500)
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Relative log-likelihood change that counts as converged (default 1e-8)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Master seed (default 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scatter jitter half-width in scale points.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Skip SVG output.
    #[arg(long)]
    pub no_plots: bool,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct XvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of folds, at least 2 (default 5)
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub folds: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    /// Saved model JSON; renders density.svg, plus scatter.svg when a data
    /// source is also given.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Saved sweep.json; renders aic_curve.svg.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Saved xval.json; renders xval_curve.svg.
    #[arg(long)]
    pub xval: Option<PathBuf>,
    /// Saved timeseries.json; renders the two distance charts.
    #[arg(long)]
    pub timeseries: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

/// Cluster count given as a number or a `"A..B"` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KValue {
    Single(usize),
    Text(String),
}

/// Run configuration file. Every field is optional; flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub synth: Option<PathBuf>,
    pub issues: Option<Vec<String>>,
    pub years: Option<String>,
    pub k: Option<KValue>,
    pub variance_floor: Option<f64>,
    pub restarts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub tolerance: Option<f64>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub jitter: Option<f64>,
    pub plots: Option<bool>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Parses `N`, `A..B` or `A..=B` into an inclusive range.
pub fn parse_k_range(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("cannot parse k `{text}`; use N or A..B"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = match text.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let k = num(text)?;
            (k, k)
        }
    };
    if lo == 0 || lo > hi {
        return Err(Error::InvalidArgument(format!("empty or invalid k range `{text}`")));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Survey { data: PathBuf, schema: PathBuf },
    Synthetic(PathBuf),
}

/// Configuration after merging file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub source: Option<Source>,
    pub issues: Option<Vec<String>>,
    pub years: YearFilter,
    pub k: Option<(usize, usize)>,
    pub fit: FitConfig,
    pub folds: usize,
    pub jitter: f64,
    pub plots: bool,
    pub out: PathBuf,
}

impl Resolved {
    fn source(&self) -> Result<&Source> {
        self.source.as_ref().ok_or_else(|| {
            Error::InvalidArgument("no data source; pass --data with --schema, or --synth".into())
        })
    }

    fn single_k(&self, default: usize) -> Result<usize> {
        match self.k {
            None => Ok(default),
            Some((a, b)) if a == b => Ok(a),
            Some((a, b)) => Err(Error::InvalidArgument(format!(
                "this command takes a single k, got {a}..{b}"
            ))),
        }
    }

    fn k_range(&self) -> Result<(usize, usize)> {
        self.k
            .ok_or_else(|| Error::InvalidArgument("--k A..B is required".into()))
    }

    fn plot_spec(&self, kind: PlotKind) -> PlotSpec {
        PlotSpec::new(kind)
            .with_jitter(self.jitter)
            .with_seed(self.fit.seed)
    }
}

pub fn resolve(args: &RunArgs, folds: Option<u64>) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => RunConfig::from_json_file(p)?,
        None => RunConfig::default(),
    };
    let data = args.data.clone().or(file.data);
    let schema = args.schema.clone().or(file.schema);
    let synth = args.synth.clone().or(file.synth);
    let source = match (data, schema, synth) {
        (Some(_), _, Some(_)) => {
            return Err(Error::InvalidArgument(
                "give either --data/--schema or --synth, not both".into(),
            ))
        }
        (Some(data), Some(schema), None) => Some(Source::Survey { data, schema }),
        (Some(_), None, None) => {
            return Err(Error::InvalidArgument("--data requires --schema".into()))
        }
        (None, _, Some(s)) => Some(Source::Synthetic(s)),
        (None, _, None) => None,
    };
    let k = match (&args.k, &file.k) {
        (Some(text), _) | (None, Some(KValue::Text(text))) => Some(parse_k_range(text)?),
        (None, Some(KValue::Single(k))) => Some(parse_k_range(&k.to_string())?),
        (None, None) => None,
    };
    let years = match args.years.as_ref().or(file.years.as_ref()) {
        Some(text) => YearFilter::parse(text)?,
        None => YearFilter::All,
    };
    let mut fit = FitConfig::new(1);
    if let Some(v) = args.floor.or(file.variance_floor) {
        fit.variance_floor = v;
    }
    if let Some(v) = args.restarts.or(file.restarts) {
        fit.restarts = v;
    }
    if let Some(v) = args.max_iter.or(file.max_iterations) {
        fit.max_iterations = v;
    }
    if let Some(v) = args.tol.or(file.tolerance) {
        fit.tolerance = v;
    }
    if let Some(v) = args.seed.or(file.seed) {
        fit.seed = v;
    }
    fit.validate()?;
    let folds = match folds.map(|f| f as usize).or(file.folds) {
        Some(f) if f < 2 => {
            return Err(Error::InvalidArgument("--folds must be at least 2".into()))
        }
        Some(f) => f,
        None => 5,
    };
    let jitter = args.jitter.or(file.jitter).unwrap_or(0.25);
    PlotSpec::new(PlotKind::Scatter).with_jitter(jitter).validate()?;
    Ok(Resolved {
        source,
        issues: args.issues.clone().or(file.issues),
        years,
        k,
        fit,
        folds,
        jitter,
        plots: !args.no_plots && file.plots.unwrap_or(true),
        out: args.out.clone().or(file.out).unwrap_or_else(|| DEFAULT_OUT.into()),
    })
}

/// Loads the configured data source into an analysis matrix.
pub fn load_data(r: &Resolved) -> Result<AnalysisMatrix> {
    match r.source()? {
        Source::Survey { data, schema } => {
            let schema = SchemaConfig::from_json_file(schema)?;
            let (ds, report) = load_survey(data, &schema.issues, &schema.party_column, &schema.year_column)?;
            if !report.diagnostics.is_empty() {
                eprintln!(
                    "warning: {} malformed cells in {} ({} rows dropped)",
                    report.diagnostics.len(),
                    data.display(),
                    report.rows_dropped
                );
            }
            let ds = impute_neutral(&ds);
            let issues: Vec<String> = match &r.issues {
                Some(list) => list.clone(),
                None => schema.issues.iter().map(|s| s.label.clone()).collect(),
            };
            let (m, stats) = build_matrix(&ds, &issues, &r.years, &schema.party_grouping)?;
            eprintln!(
                "loaded {} rows, kept {} (dropped: year {}, party {}, missing issue {})",
                stats.rows_in, stats.kept, stats.dropped_year, stats.dropped_party, stats.dropped_missing_issue
            );
            Ok(m)
        }
        Source::Synthetic(path) => {
            let m = sample_all(&load_specs(path)?)?;
            let m = match &r.issues {
                Some(list) => select_columns(&m, list)?,
                None => m,
            };
            let keep: Vec<usize> = (0..m.n()).filter(|&i| r.years.contains(m.years()[i])).collect();
            if keep.is_empty() {
                return Err(Error::EmptyResult("year filter removed every row".into()));
            }
            m.select(&keep)
        }
    }
}

fn select_columns(m: &AnalysisMatrix, labels: &[String]) -> Result<AnalysisMatrix> {
    let cols = labels
        .iter()
        .map(|l| {
            m.issue_labels()
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::UnknownIssue(l.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let positions = m.rows().flat_map(|x| cols.iter().map(move |&c| x[c])).collect();
    AnalysisMatrix::from_parts(
        cols.len(),
        positions,
        m.party_strength().to_vec(),
        &PartyGrouping::default(),
        labels.to_vec(),
        m.years().to_vec(),
    )
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable output");
        text.push('\n');
        self.write(name, &text)
    }
}

fn both_party_means(data: &AnalysisMatrix) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    (
        party_mean(data, PartyGroup::Democrat).ok(),
        party_mean(data, PartyGroup::Republican).ok(),
    )
}

fn party_markers(dem: &Option<Vec<f64>>, rep: &Option<Vec<f64>>) -> Vec<Marker> {
    let mut out = Vec::new();
    if let Some(d) = dem {
        out.push(Marker::new("Democrat mean", d.clone()));
    }
    if let Some(r) = rep {
        out.push(Marker::new("Republican mean", r.clone()));
    }
    out
}

fn write_model_figures(
    out: &Output,
    data: Option<&AnalysisMatrix>,
    model: &MixtureModel,
    labels: &[String],
    r: &Resolved,
) -> Result<()> {
    if let Some(data) = data {
        let (dem, rep) = both_party_means(data);
        let markers = party_markers(&dem, &rep);
        let spec = r.plot_spec(PlotKind::Scatter);
        match data.dims() {
            1 => eprintln!("note: scatter plot skipped for one-issue data"),
            2 => out.write("scatter.svg", &render_scatter(data, model, &markers, None, &spec)?)?,
            _ => {
                let pca = pca_project(data)?;
                out.write("scatter.svg", &render_scatter(data, model, &markers, Some(&pca), &spec)?)?;
            }
        }
    }
    if model.dims() == 2 {
        out.write("density.svg", &render_density(model, labels, &r.plot_spec(PlotKind::Density))?)?;
    } else {
        eprintln!("note: density plot needs exactly two issues, skipped");
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PartyMeans<'a> {
    grouping: String,
    issue_labels: &'a [String],
    democrat: Option<Vec<f64>>,
    republican: Option<Vec<f64>>,
}

fn cmd_fit(r: &Resolved) -> Result<()> {
    let data = load_data(r)?;
    let k = r.single_k(2)?;
    let cfg = FitConfig { k, ..r.fit.clone() };
    let result = fit(&data, &cfg)?;
    let out = Output::create(&r.out)?;
    out.write("model.json", &(result.model.to_json() + "\n"))?;
    out.write_json("fit_meta.json", &result.metadata(&cfg))?;

    let labels = hard_assign(&data, &result.model)?;
    let table = composition(&data, &labels, &result.model)?;
    let grouping = describe_grouping(r)?;
    out.write("composition.csv", &table.to_csv())?;
    out.write(
        "composition.md",
        &format!("{}\nParty grouping: {grouping}. n = {}.\n", table.to_markdown(), data.n()),
    )?;

    let (dem, rep) = both_party_means(&data);
    out.write_json(
        "party_means.json",
        &PartyMeans {
            grouping: grouping.clone(),
            issue_labels: data.issue_labels(),
            democrat: dem.clone(),
            republican: rep.clone(),
        },
    )?;
    match (&dem, &rep) {
        (Some(d), Some(rp)) if k >= 2 => {
            let mapping = default_party_mapping(&result.model, d, rp)?;
            let pr = precision_recall(&labels, data.party_groups(), &mapping, k)?;
            out.write("precision_recall.csv", &pr.to_csv())?;
            out.write("precision_recall.md", &pr.to_markdown())?;
        }
        _ => eprintln!("note: precision/recall needs k >= 2 and both parties present, skipped"),
    }
    if r.plots {
        write_model_figures(&out, Some(&data), &result.model, data.issue_labels(), r)?;
    }

    println!("party grouping: {grouping}");
    println!(
        "fit k = {k} on n = {}: lnL = {:.4}, AIC = {:.4}, BIC = {:.4}, converged = {}",
        data.n(),
        result.criterion.log_likelihood,
        result.criterion.aic,
        result.criterion.bic,
        result.converged
    );
    for c in &table.clusters {
        println!(
            "  cluster {}: share {:.1}%, center {:?}",
            c.cluster + 1,
            100.0 * c.share,
            c.center
        );
    }
    Ok(())
}

fn describe_grouping(r: &Resolved) -> Result<String> {
    Ok(match r.source()? {
        Source::Survey { schema, .. } => SchemaConfig::from_json_file(schema)?.party_grouping.describe(),
        Source::Synthetic(_) => PartyGrouping::default().describe(),
    })
}

fn cmd_sweep(r: &Resolved) -> Result<()> {
    let data = load_data(r)?;
    let (lo, hi) = r.k_range()?;
    let report = sweep_k(&data, lo, hi, &r.fit)?;
    let out = Output::create(&r.out)?;
    out.write("sweep.csv", &report.to_csv())?;
    out.write("sweep.json", &(report.to_json() + "\n"))?;
    if r.plots {
        out.write("aic_curve.svg", &render_curves(&sweep_chart(&report), &r.plot_spec(PlotKind::AicCurve))?)?;
    }
    for e in &report.entries {
        match (e.ok, e.aic) {
            (true, Some(aic)) => println!("k = {:>2}: AIC = {aic:.4}", e.k),
            _ => println!("k = {:>2}: failed ({})", e.k, e.error.as_deref().unwrap_or("unknown")),
        }
    }
    print_selection(&report);
    Ok(())
}

fn print_selection(report: &SweepReport) {
    println!("selected k = {} ({})", report.selected_k, report.selection_rule);
    if report.selection_rule == SelectionRule::GlobalMin {
        eprintln!(
            "warning: AIC has no interior local minimum over the swept range; \
             the reported k is the global minimum and may sit at the range boundary"
        );
    }
}

fn cmd_xval(r: &Resolved) -> Result<()> {
    let data = load_data(r)?;
    let (lo, hi) = r.k_range()?;
    let ks: Vec<usize> = (lo..=hi).collect();
    let report = cross_validate(&data, &ks, r.folds, &r.fit)?;
    let out = Output::create(&r.out)?;
    out.write("xval_folds.csv", &report.folds_csv())?;
    out.write("xval_summary.csv", &report.summary_csv())?;
    out.write("xval.json", &(report.to_json() + "\n"))?;
    if r.plots {
        out.write("xval_curve.svg", &render_curves(&xval_chart(&report), &r.plot_spec(PlotKind::AicCurve))?)?;
    }
    for a in &report.aggregates {
        match a.mean_test_aic {
            Some(aic) => println!("k = {:>2}: mean test AIC = {aic:.4} ({} folds)", a.k, a.folds_ok),
            None => println!("k = {:>2}: every fold failed", a.k),
        }
    }
    println!("fit coverage: {:.1}%", 100.0 * report.coverage());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedYear {
    pub year: i32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesReport {
    pub seed: u64,
    pub variance_floor: f64,
    pub skipped: Vec<SkippedYear>,
    pub series: DistanceSeries,
}

fn cmd_timeseries(r: &Resolved) -> Result<()> {
    let k = r.single_k(2)?;
    if k != 2 {
        return Err(Error::InvalidArgument(format!("timeseries fits k = 2, got k = {k}")));
    }
    let data = load_data(r)?;
    let years = data.distinct_years();
    let outcomes: Vec<std::result::Result<YearSnapshot, SkippedYear>> = years
        .par_iter()
        .map(|&year| {
            let skip = |reason: String| SkippedYear { year, reason };
            let sub = data.for_year(year).map_err(|e| skip(e.to_string()))?;
            if sub.n() < k {
                return Err(skip(format!("only {} rows", sub.n())));
            }
            let (dem, rep) = both_party_means(&sub);
            let (Some(democrat_mean), Some(republican_mean)) = (dem, rep) else {
                return Err(skip("needs both Democrat and Republican respondents".into()));
            };
            let cfg = FitConfig {
                k,
                seed: rng::derive(r.fit.seed, year as u64),
                ..r.fit.clone()
            };
            let res = fit(&sub, &cfg).map_err(|e| skip(e.to_string()))?;
            Ok(YearSnapshot {
                year,
                model: res.model,
                democrat_mean,
                republican_mean,
            })
        })
        .collect();

    let mut snaps = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(s) => snaps.push(s),
            Err(s) => {
                eprintln!("warning: year {} skipped: {}", s.year, s.reason);
                skipped.push(s);
            }
        }
    }
    if snaps.is_empty() {
        return Err(Error::EmptyResult("no year could be fitted".into()));
    }
    let series = distance_report(&snaps, &scale_center(data.dims()))?;
    let out = Output::create(&r.out)?;
    for s in &snaps {
        out.write(&format!("models/model_{}.json", s.year), &(s.model.to_json() + "\n"))?;
    }
    out.write("distance.csv", &series.to_csv())?;
    let report = TimeseriesReport {
        seed: r.fit.seed,
        variance_floor: r.fit.variance_floor,
        skipped,
        series,
    };
    out.write_json("timeseries.json", &report)?;
    if r.plots {
        write_distance_figures(&out, &report.series, r)?;
    }
    for row in &report.series.rows {
        println!(
            "{}: cluster separation {:.4}, party separation {:.4}",
            row.year, row.cluster_separation, row.party_separation
        );
    }
    Ok(())
}

fn write_distance_figures(out: &Output, series: &DistanceSeries, r: &Resolved) -> Result<()> {
    let spec = r.plot_spec(PlotKind::DistanceSeries);
    out.write("distance_separation.svg", &render_curves(&separation_chart(series), &spec)?)?;
    out.write("distance_center.svg", &render_curves(&center_chart(series), &spec)?)
}

fn cmd_synth(r: &Resolved) -> Result<()> {
    let Source::Synthetic(path) = r.source()? else {
        return Err(Error::InvalidArgument("synth needs --synth <spec.json>".into()));
    };
    let specs = load_specs(path)?;
    let data = load_data(r)?;
    let out = Output::create(&r.out)?;
    write_csv(&data, out.dir.join("synth.csv"))?;
    out.write_json("synth_spec.json", &specs)?;
    out.write_json("synth_schema.json", &csv_schema(data.issue_labels()))?;
    println!("wrote {} rows x {} issues", data.n(), data.dims());
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn cmd_render(args: &RenderArgs, r: &Resolved) -> Result<()> {
    if args.model.is_none() && args.sweep.is_none() && args.xval.is_none() && args.timeseries.is_none() {
        return Err(Error::InvalidArgument(
            "render needs at least one of --model, --sweep, --xval, --timeseries".into(),
        ));
    }
    let out = Output::create(&r.out)?;
    if let Some(path) = &args.model {
        let model = MixtureModel::from_json_file(path)?;
        let data = match r.source {
            Some(_) => Some(load_data(r)?),
            None => None,
        };
        let labels = data
            .as_ref()
            .map(|d| d.issue_labels().to_vec())
            .unwrap_or_else(|| (1..=model.dims()).map(|d| format!("x{d}")).collect());
        write_model_figures(&out, data.as_ref(), &model, &labels, r)?;
    }
    if let Some(path) = &args.sweep {
        let report: SweepReport = read_json(path)?;
        out.write("aic_curve.svg", &render_curves(&sweep_chart(&report), &r.plot_spec(PlotKind::AicCurve))?)?;
    }
    if let Some(path) = &args.xval {
        let report: XvalReport = read_json(path)?;
        out.write("xval_curve.svg", &render_curves(&xval_chart(&report), &r.plot_spec(PlotKind::AicCurve))?)?;
    }
    if let Some(path) = &args.timeseries {
        let report: TimeseriesReport = read_json(path)?;
        write_distance_figures(&out, &report.series, r)?;
    }
    Ok(())
}

/// Machine-readable error document written to stderr and `error.json`.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub path: Option<String>,
    pub exit_code: i32,
}

impl ErrorReport {
    pub fn from_error(e: &Error) -> Self {
        Self {
            error: e.kind(),
            message: e.to_string(),
            path: e.path().map(|p| p.display().to_string()),
            exit_code: exit_code(e),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_usage() {
        2
    } else {
        1
    }
}

pub fn execute(cli: &Cli) -> std::result::Result<(), (Error, Option<PathBuf>)> {
    let (run, folds) = match &cli.command {
        Command::Fit(a) | Command::Sweep(a) | Command::Timeseries(a) | Command::Synth(a) => (a, None),
        Command::Xval(a) => (&a.run, a.folds),
        Command::Render(a) => (&a.run, None),
    };
    let r = resolve(run, folds).map_err(|e| (e, run.out.clone()))?;
    let result = match &cli.command {
        Command::Fit(_) => cmd_fit(&r),
        Command::Sweep(_) => cmd_sweep(&r),
        Command::Xval(_) => cmd_xval(&r),
        Command::Timeseries(_) => cmd_timeseries(&r),
        Command::Synth(_) => cmd_synth(&r),
        Command::Render(a) => cmd_render(a, &r),
    };
    result.map_err(|e| (e, Some(r.out.clone())))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err((e, out)) => {
            let report = ErrorReport::from_error(&e);
            let text = serde_json::to_string_pretty(&report).expect("error serializes");
            eprintln!("{text}");
            if let Some(dir) = out {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), text + "\n");
                }
            }
            report.exit_code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("3").unwrap(), (3, 3));
        assert_eq!(parse_k_range("2..12").unwrap(), (2, 12));
        assert_eq!(parse_k_range("1..=8").unwrap(), (1, 8));
        for bad in ["0", "4..2", "a..b", "", "2.."] {
            assert!(parse_k_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.json");
        std::fs::write(
            &cfg,
            r#"{"synth": "a.json", "k": "2..4", "variance_floor": 1.0, "seed": 9, "out": "x"}"#,
        )
        .unwrap();
        let args = RunArgs {
            config: Some(cfg.clone()),
            seed: Some(3),
            ..Default::default()
        };
        let r = resolve(&args, None).unwrap();
        assert_eq!(r.fit.seed, 3);
        assert_eq!(r.fit.variance_floor, 1.0);
        assert_eq!(r.k, Some((2, 4)));
        assert_eq!(r.source, Some(Source::Synthetic("a.json".into())));

        std::fs::write(&cfg, r#"{"k": 3, "bogus": 1}"#).unwrap();
        assert!(matches!(resolve(&args, None), Err(Error::Json { .. })));
    }

    #[test]
    fn source_must_be_unambiguous() {
        let both = RunArgs {
            data: Some("d.csv".into()),
            schema: Some("s.json".into()),
            synth: Some("g.json".into()),
            ..Default::default()
        };
        assert!(resolve(&both, None).is_err());
        let no_schema = RunArgs {
            data: Some("d.csv".into()),
            ..Default::default()
        };
        assert!(resolve(&no_schema, None).is_err());
    }
}
