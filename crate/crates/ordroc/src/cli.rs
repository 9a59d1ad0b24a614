//! Command line interface.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordroc_core::homogeneity::{homogeneity_test, pairwise, roc_curve_test, Metric};
use ordroc_core::power::{min_sample_size, ratio_label, PowerSpec, TrueDesign};
use ordroc_core::roc::{default_grid, DEFAULT_GRID_POINTS};
use ordroc_core::{auc_summary, fit, roc_summary, CovariateProfile, DesignSpec, FitOptions, FittedModel};
use serde::Serialize;

use crate::config::{parse_ratio, CliConfig, Experiment, MetricKind, PowerConfig, ProfileConfig, SimulationConfig};
use crate::csv_io::{load_csv, write_table, Schema};
use crate::error::{Error, Result};
use crate::formats::{write_curve_csv, write_pairwise_csv, write_roc_csv, write_sample_size_csv, AucReport, ModelFile, SampleSizeRow, TestReportFile};
use crate::sim::{self, ExperimentResult};

#[derive(Debug, Parser)]
#[command(name = "ordroc", version, about = "Covariate-adjusted ROC analysis and group homogeneity tests for ordinal scores")]
pub struct Cli {
    /// TOML or JSON configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Significance level of tests.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for simulations.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the ordinal location-scale model and write it as JSON.
    Fit(FitArgs),
    /// Covariate-specific ROC curve with pointwise confidence band (CSV).
    Roc(RocArgs),
    /// Covariate-specific AUC with confidence interval (JSON).
    Auc(AucArgs),
    /// Homogeneity test across groups.
    Test(TestArgs),
    /// Post hoc pairwise differences between groups (CSV).
    Pairwise(PairwiseArgs),
    /// Minimum sample size tables.
    Power(OutArgs),
    /// Simulation experiments.
    Simulate(OutArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub score: Option<String>,
    #[arg(long)]
    pub status: Option<String>,
    #[arg(long)]
    pub group: Option<String>,
    /// Continuous covariate column; repeat for several.
    #[arg(long = "covariate")]
    pub covariates: Vec<String>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Ordered group levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub group_levels: Option<Vec<String>>,
    /// Reference group label; defaults to the last level.
    #[arg(long)]
    pub reference: Option<String>,
    /// Source score range `MIN,MAX` mapped onto 1..L.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_score_range)]
    pub score_range: Option<[i64; 2]>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub allow_nonconverged: bool,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Covariate value `NAME=VALUE`; unset covariates use their sample mean.
    #[arg(long = "at", value_parser = parse_assignment)]
    pub at: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Explicit FPR values, comma separated; otherwise an even grid.
    #[arg(long, value_delimiter = ',')]
    pub fpr: Option<Vec<f64>>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AucArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestMode {
    Auc,
    Roc,
    Curve,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_enum, default_value = "auc")]
    pub metric: TestMode,
    /// FPR for the `roc` metric.
    #[arg(long, default_value_t = 0.3)]
    pub t: f64,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-FPR table in curve mode.
    #[arg(long)]
    pub curve_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairwiseArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_enum, default_value = "auc")]
    pub metric: MetricKindArg,
    /// FPR values for the `roc` metric, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub fpr: Vec<f64>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub bonferroni: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricKindArg {
    Auc,
    Roc,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output file (power) or ignored (simulate writes into the output directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_assignment(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let v = value.trim().parse::<f64>().map_err(|_| format!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), v))
}

struct Context {
    config: CliConfig,
    seed: u64,
    alpha: f64,
    level: f64,
    out_dir: PathBuf,
}

impl Context {
    fn new(cli: &Cli) -> Result<Self> {
        let config = match &cli.config {
            Some(p) => CliConfig::load(p)?,
            None => CliConfig::default(),
        };
        let alpha = cli.alpha.or(config.alpha).unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Self {
            seed: cli.seed.or(config.seed).unwrap_or(1),
            alpha,
            level: config.level.unwrap_or(0.95),
            out_dir: cli.out_dir.clone().or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from(".")),
            config,
        })
    }

    fn output(&self, explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
        match explicit {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => p.clone(),
            None => self.out_dir.join(default_name),
        }
    }

    fn model(&self, args: &ProfileArgs) -> Result<FittedModel> {
        let path = args
            .model
            .clone()
            .or_else(|| self.config.model.clone())
            .ok_or_else(|| Error::Usage("--model is required".into()))?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        file.to_model()
    }

    fn covariates(&self, model: &FittedModel, args: &ProfileArgs) -> Result<Vec<f64>> {
        let mut values: BTreeMap<String, f64> =
            self.config.profile.as_ref().map(|p| p.covariates.clone()).unwrap_or_default();
        values.extend(args.at.iter().cloned());
        let names = model.spec.covariate_names();
        if let Some(unknown) = values.keys().find(|k| !names.contains(k)) {
            return Err(Error::Usage(format!("unknown covariate `{unknown}`")));
        }
        Ok(names
            .iter()
            .zip(&model.covariate_means)
            .map(|(n, mean)| values.get(n).copied().unwrap_or(*mean))
            .collect())
    }

    fn group(&self, spec: &DesignSpec, flag: &Option<String>) -> Result<usize> {
        let label = flag
            .clone()
            .or_else(|| self.config.profile.as_ref().and_then(|p: &ProfileConfig| p.group.clone()))
            .ok_or_else(|| Error::Usage("--group is required".into()))?;
        Ok(spec.group_index(&label)?)
    }

    fn grid(&self, fpr: &Option<Vec<f64>>, points: Option<usize>) -> Vec<f64> {
        if let Some(f) = fpr.clone().or_else(|| self.config.fpr.clone()) {
            return f;
        }
        default_grid(points.or(self.config.grid).unwrap_or(DEFAULT_GRID_POINTS))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| Error::io(path, e))?;
    std::io::Write::flush(&mut w).map_err(|e| Error::io(path, e))
}

fn check_level(level: f64) -> Result<f64> {
    if level > 0.0 && level < 1.0 {
        Ok(level)
    } else {
        Err(Error::Usage(format!("confidence level must lie in (0, 1), got {level}")))
    }
}

fn cmd_fit(ctx: &Context, a: &FitArgs) -> Result<()> {
    let base = ctx.config.schema.clone();
    let pick = |flag: &Option<String>, from: Option<&String>, name: &str| -> Result<String> {
        flag.clone().or_else(|| from.cloned()).ok_or_else(|| Error::Usage(format!("--{name} is required")))
    };
    let schema = Schema {
        score: pick(&a.score, base.as_ref().map(|s| &s.score), "score")?,
        status: pick(&a.status, base.as_ref().map(|s| &s.status), "status")?,
        group: pick(&a.group, base.as_ref().map(|s| &s.group), "group")?,
        covariates: if a.covariates.is_empty() { base.as_ref().map(|s| s.covariates.clone()).unwrap_or_default() } else { a.covariates.clone() },
        levels: a.levels.or(base.as_ref().and_then(|s| s.levels)),
        group_levels: a.group_levels.clone().or_else(|| base.as_ref().and_then(|s| s.group_levels.clone())),
        score_range: a.score_range.or_else(|| base.as_ref().and_then(|s| s.score_range)),
    };
    let input = a.input.clone().or_else(|| ctx.config.input.clone()).ok_or_else(|| Error::Usage("--in is required".into()))?;
    let table = load_csv(&input, &schema)?;
    let mut spec = DesignSpec::for_table(&table);
    if let Some(r) = &a.reference {
        spec = spec.with_reference(r)?;
    }
    let model = fit(&table, &spec, &FitOptions::default())?;
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&ctx.output(&a.out, "model.json"), &ModelFile::from_model(&model))?;
    if !model.converged && !a.allow_nonconverged {
        return Err(Error::NotConverged { iterations: model.iterations, gradient_norm: model.gradient_norm });
    }
    Ok(())
}

fn cmd_roc(ctx: &Context, a: &RocArgs) -> Result<()> {
    let model = ctx.model(&a.profile)?;
    let profile = CovariateProfile::new(ctx.group(&model.spec, &a.group)?, ctx.covariates(&model, &a.profile)?);
    let grid = ctx.grid(&a.fpr, a.grid);
    let s = roc_summary(&model, &profile, &grid, check_level(a.level.unwrap_or(ctx.level))?)?;
    write_roc_csv(create(&ctx.output(&a.out, "roc.csv"))?, &s)
}

fn cmd_auc(ctx: &Context, a: &AucArgs) -> Result<()> {
    let model = ctx.model(&a.profile)?;
    let profile = CovariateProfile::new(ctx.group(&model.spec, &a.group)?, ctx.covariates(&model, &a.profile)?);
    let s = auc_summary(&model, &profile, check_level(a.level.unwrap_or(ctx.level))?)?;
    write_json(&ctx.output(&a.out, "auc.json"), &AucReport::new(&model.spec, &s))
}

fn cmd_test(ctx: &Context, a: &TestArgs) -> Result<()> {
    let model = ctx.model(&a.profile)?;
    let covs = ctx.covariates(&model, &a.profile)?;
    let profiles = CovariateProfile::per_group(model.spec.n_groups(), &covs);
    let out = ctx.output(&a.out, "test.json");
    match a.metric {
        TestMode::Curve => {
            let grid = ctx.grid(&None, a.grid);
            let r = roc_curve_test(&model, &profiles, &grid, ctx.alpha)?;
            write_json(&out, &TestReportFile::curve(&model.spec, &covs, &r))?;
            let csv_path = a.curve_csv.clone().unwrap_or_else(|| out.with_extension("csv"));
            write_curve_csv(create(&csv_path)?, &r)
        }
        mode => {
            let metric = if mode == TestMode::Auc { Metric::Auc } else { Metric::RocAt(a.t) };
            let r = homogeneity_test(&model, &profiles, metric, ctx.alpha)?;
            write_json(&out, &TestReportFile::scalar(&model.spec, &covs, &r))
        }
    }
}

fn cmd_pairwise(ctx: &Context, a: &PairwiseArgs) -> Result<()> {
    let model = ctx.model(&a.profile)?;
    let covs = ctx.covariates(&model, &a.profile)?;
    let profiles = CovariateProfile::per_group(model.spec.n_groups(), &covs);
    let metrics: Vec<Metric> = match a.metric {
        MetricKindArg::Auc => vec![Metric::Auc],
        MetricKindArg::Roc => a.fpr.iter().map(|&t| Metric::RocAt(t)).collect(),
    };
    let r = pairwise(&model, &profiles, &metrics, check_level(a.level.unwrap_or(ctx.level))?, a.bonferroni)?;
    write_pairwise_csv(create(&ctx.output(&a.out, "pairwise.csv"))?, &r)
}

fn truth_for(p: &PowerConfig, setting: u8, groups: usize) -> Result<TrueDesign> {
    let mut t = TrueDesign::setting(setting, groups, p.raters)?;
    t.psi = p.psi;
    t.phi = p.phi;
    t.x1 = p.x1;
    t.levels = p.levels;
    t.tau_sim = p.tau_sim.clone();
    t.k0_fraction = p.k0_fraction;
    Ok(t)
}

fn power_row(ctx: &Context, p: &PowerConfig, label: String, truth: &TrueDesign) -> SampleSizeRow {
    let mut metrics: Vec<Metric> = p.fpr.iter().map(|&t| Metric::RocAt(t)).collect();
    if p.auc {
        metrics.push(Metric::Auc);
    }
    let cells = metrics
        .into_iter()
        .map(|m| {
            let mut spec = PowerSpec::new(truth.clone(), m);
            spec.alpha = ctx.alpha;
            spec.beta = p.beta;
            spec.cap = p.cap;
            min_sample_size(&spec).map_err(|e| e.to_string())
        })
        .collect();
    SampleSizeRow { label, cells }
}

fn power_headers(p: &PowerConfig) -> Vec<String> {
    let mut h: Vec<String> = p.fpr.iter().map(|t| format!("t={t}")).collect();
    if p.auc {
        h.push("AUC".into());
    }
    h
}

fn cmd_power(ctx: &Context, a: &OutArgs) -> Result<()> {
    let p = ctx.config.power.clone().ok_or_else(|| Error::Usage("power needs a config file with a [power] block".into()))?;
    if !(p.beta > 0.0 && p.beta < 1.0) {
        return Err(Error::Usage(format!("beta must lie in (0, 1), got {}", p.beta)));
    }
    let headers = power_headers(&p);
    let mut written = Vec::new();
    if p.ratios.is_empty() {
        for &setting in &p.settings {
            let rows = p
                .groups
                .iter()
                .map(|&g| Ok(power_row(ctx, &p, g.to_string(), &truth_for(&p, setting, g)?)))
                .collect::<Result<Vec<_>>>()?;
            let name = if p.settings.len() == 1 { a.out.clone() } else { None };
            let path = ctx.output(&name, &format!("min_sample_size_setting{setting}.csv"));
            write_sample_size_csv(create(&path)?, "G", &headers, &rows)?;
            written.push((path, rows));
        }
    } else {
        let rows = p
            .ratios
            .iter()
            .map(|r| {
                let ratio = parse_ratio(r)?;
                let truth = truth_for(&p, p.ratio_setting, ratio.len())?.with_ratio(&ratio, p.raters)?;
                Ok(power_row(ctx, &p, ratio_label(&ratio), &truth))
            })
            .collect::<Result<Vec<_>>>()?;
        let path = ctx.output(&a.out, "min_sample_size_ratio.csv");
        write_sample_size_csv(create(&path)?, "ratio", &headers, &rows)?;
        written.push((path, rows));
    }
    for (_, rows) in &written {
        for row in rows {
            for c in row.cells.iter().filter_map(|c| c.as_ref().err()) {
                eprintln!("warning: row {}: {c}", row.label);
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ExperimentSummary<'a> {
    experiment: &'a str,
    seed: u64,
    config: &'a SimulationConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_min: Option<u64>,
    summary: &'a [sim::Summary],
    ks: &'a [sim::KsSummary],
}

fn cmd_simulate(ctx: &Context) -> Result<()> {
    let mut s = ctx
        .config
        .simulation
        .clone()
        .ok_or_else(|| Error::Usage("simulate needs a config file with a [simulation] block".into()))?;
    s.design.seed = ctx.seed;
    let design = &s.design;
    let ks = if s.ks.is_empty() { vec![design.k] } else { s.ks.clone() };
    let level = check_level(ctx.level)?;
    let metric = match s.metric {
        MetricKind::Roc => Metric::RocAt(s.t),
        MetricKind::Auc => Metric::Auc,
    };
    let (result, k_min): (ExperimentResult, Option<u64>) = match s.experiment {
        Experiment::Generate => {
            let table = sim::generate(design)?;
            return write_table(create(&ctx.out_dir.join("simulated.csv"))?, &table);
        }
        Experiment::Consistency => (sim::consistency_experiment(design, &ks, s.replications)?, None),
        Experiment::Coverage => (sim::coverage_experiment(design, &ks, s.replications, s.t, level)?, None),
        Experiment::Type1 => {
            let groups = if s.groups.is_empty() { vec![design.groups] } else { s.groups.clone() };
            (sim::type1_experiment(design, ks[0], &groups, s.replications, s.t, ctx.alpha)?, None)
        }
        Experiment::Power => {
            let (r, k) = sim::power_validation(design, metric, ctx.alpha, s.beta, s.replications)?;
            (r, Some(k))
        }
    };
    let name = &result.experiment;
    result.write_records_csv(create(&ctx.out_dir.join(format!("{name}_replications.csv")))?)?;
    let summary = ExperimentSummary {
        experiment: name,
        seed: result.seed,
        config: &s,
        k_min,
        summary: &result.summary,
        ks: &result.ks,
    };
    write_json(&ctx.out_dir.join(format!("{name}_summary.json")), &summary)
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Context::new(cli)?;
    let threads = cli.threads.or(ctx.config.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Fit(a) => cmd_fit(&ctx, a),
        Command::Roc(a) => cmd_roc(&ctx, a),
        Command::Auc(a) => cmd_auc(&ctx, a),
        Command::Test(a) => cmd_test(&ctx, a),
        Command::Pairwise(a) => cmd_pairwise(&ctx, a),
        Command::Power(a) => cmd_power(&ctx, a),
        Command::Simulate(_) => cmd_simulate(&ctx),
    })
}

fn parse_score_range(s: &str) -> std::result::Result<[i64; 2], String> {
    let (lo, hi) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let lo: i64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi: i64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
    if lo >= hi {
        return Err(format!("empty score range {lo},{hi}"));
    }
    Ok([lo, hi])
}
