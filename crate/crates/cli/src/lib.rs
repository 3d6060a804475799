//! Command implementations behind the `hemisel` binary.
//!
//! Every command writes `config.json` (the fully resolved configuration,
//! seeds included) next to its outputs; re-running with
//! `--config <out>/config.json` reproduces every file byte for byte.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hemisel::estimators::{
    default_t_grid, fourier_root, mean_at_boundary, mean_by_integral, nonrespondent_cdf, series_coefficients,
};
use hemisel::frame::SurveyFrame;
use hemisel::selection::{derive_seed, rng_from_seed, simulate};
use hemisel::survey::{multiple_impute, weighted_gini, ImputationReport, ImputeConfig};
use hemisel::Grid;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{
    EstimateConfig, EstimatorSpec, ExperimentConfig, ImputeSection, Phi, RunConfig, SimulateConfig, XCell,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Core { context: String, source: hemisel::Error },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => source.exit_code(),
            CliError::Io(_) => 3,
        }
    }
}

trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for hemisel::Result<T> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { context: what.to_string(), source })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Estimate,
    Impute,
    Experiment,
}

/// Flag values that override the configuration file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub keep_latents: bool,
}

/// Loads the configuration (empty when `path` is `None`) and applies flags.
pub fn resolve(path: Option<&Path>, flags: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &flags.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(t) = flags.threads {
        cfg.threads = Some(t);
    }
    if flags.keep_latents {
        if let Some(s) = cfg.simulate.as_mut() {
            s.keep_latents = true;
        }
    }
    if cfg.threads == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    Ok(cfg)
}

/// Runs one command and returns the files written.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let work = || match command {
        Command::Simulate => cmd_simulate(cfg, &out),
        Command::Estimate => cmd_estimate(cfg, &out),
        Command::Impute => cmd_impute(cfg, &out),
        Command::Experiment => cmd_experiment(cfg, &out),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Configuration with only the section a command reads, as echoed.
fn echoed(cfg: &RunConfig, command: Command) -> RunConfig {
    let mut c = RunConfig { seed: cfg.seed, ..RunConfig::default() };
    match command {
        Command::Simulate => c.simulate = cfg.simulate.clone(),
        Command::Estimate => c.estimate = cfg.estimate.clone(),
        Command::Impute => c.impute = cfg.impute.clone(),
        Command::Experiment => c.experiment = cfg.experiment.clone(),
    }
    c
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    fn sidecar(&mut self, cfg: &RunConfig) -> Result<(), CliError> {
        self.write("config.json", cfg.to_json().as_bytes())
    }
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("missing `{name}` section")))
}

fn read_frame(path: &Path, cell: Option<XCell>) -> Result<SurveyFrame, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::Config(format!("data file {}: {e}", path.display())))?;
    let frame = SurveyFrame::read_csv(std::io::BufReader::new(file)).context(&format!("reading {}", path.display()))?;
    frame.validate().context(&format!("validating {}", path.display()))?;
    match cell {
        None => Ok(frame),
        Some(XCell { column: 0, .. }) => Err(CliError::Config("x_cell.column is 1-based".into())),
        Some(c) => frame.x_cell(c.column - 1, c.value).context("x_cell"),
    }
}

fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sim = section(&cfg.simulate, "simulate")?;
    if !(sim.weight > 0.0 && sim.weight.is_finite()) {
        return Err(CliError::Config("simulate.weight must be positive".into()));
    }
    let data = simulate(&sim.model, sim.n, cfg.seed).context("simulate")?;
    let mut frame = data.to_frame(sim.keep_latents);
    frame.weight = vec![sim.weight; frame.len()];
    let mut csv = Vec::new();
    frame.write_csv(&mut csv).context("writing data.csv")?;
    let echo = echoed(cfg, Command::Simulate);
    let mut o = Output::create(out)?;
    o.write("data.csv", &csv)?;
    o.json(
        "report.json",
        &json!({
            "config": echo,
            "n": frame.len(),
            "respondents": frame.respondents(),
            "response_rate": data.response_rate(),
        }),
    )?;
    o.sidecar(&echo)?;
    Ok(o.written)
}

fn cmd_estimate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let est = section(&cfg.estimate, "estimate")?;
    let frame = read_frame(&est.data, est.x_cell)?;
    let phi = est.phi;
    let echo = echoed(cfg, Command::Estimate);
    let mut o = Output::create(out)?;
    match &est.estimator {
        EstimatorSpec::MeanByIntegral { config } => {
            let r = mean_by_integral(&frame, |y| phi.eval(y), config).context("mean_by_integral")?;
            let mut csv = String::from("p,local_iv\n");
            for (p, d) in &r.local_iv {
                writeln!(csv, "{p},{d}").expect("string write");
            }
            o.write("local_iv.csv", csv.as_bytes())?;
            o.json("report.json", &json!({ "config": echo, "estimator": "mean_by_integral", "result": r }))?;
        }
        EstimatorSpec::MeanAtBoundary { s_tilde, config } => {
            let s = boundary_direction(s_tilde, frame.z.width() + 1);
            let r = mean_at_boundary(&frame, |y| phi.eval(y), &s, config).context("mean_at_boundary")?;
            o.json("report.json", &json!({ "config": echo, "estimator": "mean_at_boundary", "s_tilde": s, "result": r }))?;
        }
        EstimatorSpec::Series { truncation, grid_resolution, mean_estimate, s_tilde, boundary, config } => {
            let d = frame.z.width() + 1;
            let mean = match mean_estimate {
                Some(m) => *m,
                None => {
                    let s = boundary_direction(s_tilde, d);
                    mean_at_boundary(&frame, |y| phi.eval(y), &s, boundary).context("series mean estimate")?.estimate
                }
            };
            let grid = Arc::new(Grid::build(d, *grid_resolution).context("series grid")?);
            let r = series_coefficients(&frame, |y| phi.eval(y), grid.clone(), *truncation, mean, config)
                .context("series")?;
            let mut nodes = String::new();
            let coords: Vec<String> = (1..=d).map(|j| format!("gamma_{j}")).collect();
            writeln!(nodes, "node,{},weight,root,reconstructed", coords.join(",")).expect("string write");
            for i in 0..grid.len() {
                let c: Vec<String> = grid.node(i).iter().map(f64::to_string).collect();
                writeln!(
                    nodes,
                    "{i},{},{},{},{}",
                    c.join(","),
                    grid.weight(i),
                    r.root.values()[i],
                    r.reconstructed.values()[i]
                )
                .expect("string write");
            }
            let mut coef = String::from("node,p,degree,coefficient\n");
            for (i, row) in r.coefficients.iter().enumerate() {
                for (p, c) in row.iter().enumerate() {
                    writeln!(coef, "{i},{p},{},{c}", 2 * p + 1).expect("string write");
                }
            }
            o.write("series_root.csv", nodes.as_bytes())?;
            o.write("series_coefficients.csv", coef.as_bytes())?;
            o.json(
                "report.json",
                &json!({
                    "config": echo,
                    "estimator": "series",
                    "mean_estimate": mean,
                    "truncation": r.truncation,
                    "nodes": grid.len(),
                    "dropped": r.dropped,
                    "density_bandwidth": r.density_bandwidth,
                    "root_integral": grid.integrate(r.reconstructed.values()),
                    "warnings": r.warnings,
                }),
            )?;
        }
        EstimatorSpec::Fourier { grids, cutoff, config } => {
            let r = fourier_root(&frame, |y| phi.eval(y), grids, *cutoff, config).context("fourier")?;
            let mut csv = String::from("theta,gammabar,density\n");
            for (i, t) in r.theta.iter().enumerate() {
                for (j, g) in r.gammabar.iter().enumerate() {
                    writeln!(csv, "{t},{g},{}", r.at(i, j)).expect("string write");
                }
            }
            o.write("fourier_density.csv", csv.as_bytes())?;
            o.json(
                "report.json",
                &json!({
                    "config": echo,
                    "estimator": "fourier",
                    "integral": r.integral(),
                    "cutoff": r.cutoff,
                    "imaginary_residue": r.imaginary_residue,
                    "filled_share": r.filled_share,
                    "bandwidth_v": r.bandwidth_v,
                    "bandwidth_z": r.bandwidth_z,
                    "widened": r.widened,
                    "zbar": r.zbar,
                    "s0_slice": r.s0_slice,
                }),
            )?;
        }
        EstimatorSpec::NonrespondentCdf { method, grid_points, t_grid, config } => {
            let grid = match t_grid {
                Some(g) => g.clone(),
                None => default_t_grid(&frame.observed_y(), *grid_points).context("t-grid")?,
            };
            let r = nonrespondent_cdf(&frame, &grid, *method, config).context("nonrespondent_cdf")?;
            let mut csv = String::from("t,cdf,raw\n");
            for ((t, f), raw) in r.t.iter().zip(&r.cdf).zip(&r.raw) {
                writeln!(csv, "{t},{f},{raw}").expect("string write");
            }
            o.write("cdf.csv", csv.as_bytes())?;
            o.json(
                "report.json",
                &json!({
                    "config": echo,
                    "estimator": "nonrespondent_cdf",
                    "method": r.method,
                    "nonresponse_rate": r.nonresponse_rate,
                    "normalizer": r.normalizer,
                    "at_infinity_unreliable": r.at_infinity_unreliable,
                }),
            )?;
        }
    }
    o.sidecar(&echo)?;
    Ok(o.written)
}

fn boundary_direction(s_tilde: &Option<Vec<f64>>, d: usize) -> Vec<f64> {
    s_tilde.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; d];
        if d > 1 {
            e[1] = 1.0;
        }
        e
    })
}

fn report_json(report: &ImputationReport, include_replicates: bool) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if !include_replicates {
        if let Some(m) = v.as_object_mut() {
            m.remove("replicates");
            m.remove("completed_estimates");
        }
    }
    v
}

fn cmd_impute(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sec = section(&cfg.impute, "impute")?;
    let frame = read_frame(&sec.data, sec.x_cell)?;
    let mut echo = echoed(cfg, Command::Impute);
    let imp = &mut echo.impute.as_mut().expect("section present").imputation;
    imp.seed = cfg.seed;
    let report = multiple_impute(&frame, imp).context("multiple_impute")?;
    let mut o = Output::create(out)?;
    o.json("report.json", &json!({ "config": echo, "report": report_json(&report, sec.include_replicates) }))?;
    o.write("impute.csv", format!("{}\n{}\n", ImputationReport::CSV_HEADER, report.csv_line()).as_bytes())?;
    o.sidecar(&echo)?;
    Ok(o.written)
}

/// One replication of the coverage study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepRow {
    pub rep: usize,
    pub seed: u64,
    pub true_gini: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub covered: Option<bool>,
    pub naive_estimate: Option<f64>,
    pub naive_lower: Option<f64>,
    pub naive_upper: Option<f64>,
    pub naive_covered: Option<bool>,
    pub nonresponse_rate: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub reps: usize,
    pub failed: usize,
    pub nominal: f64,
    pub coverage: Option<f64>,
    pub naive_coverage: Option<f64>,
}

impl CoverageSummary {
    pub fn from_rows(rows: &[RepRow], nominal: f64) -> Self {
        let ok: Vec<&RepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
        let rate = |f: fn(&RepRow) -> Option<bool>| {
            (!ok.is_empty()).then(|| ok.iter().filter(|r| f(r) == Some(true)).count() as f64 / ok.len() as f64)
        };
        Self {
            reps: rows.len(),
            failed: rows.len() - ok.len(),
            nominal,
            coverage: rate(|r| r.covered),
            naive_coverage: rate(|r| r.naive_covered),
        }
    }
}

/// Simulates a population, draws a simple random sample, imputes, and
/// checks whether the intervals cover the population Gini index.
pub fn experiment_rep(exp: &ExperimentConfig, seed: u64, rep: usize) -> RepRow {
    let rep_seed = derive_seed(seed, rep as u64);
    let mut row = RepRow {
        rep,
        seed: rep_seed,
        true_gini: None,
        lower: None,
        upper: None,
        covered: None,
        naive_estimate: None,
        naive_lower: None,
        naive_upper: None,
        naive_covered: None,
        nonresponse_rate: None,
        error: None,
    };
    let result = (|| -> hemisel::Result<()> {
        let pop = simulate(&exp.model, exp.population, derive_seed(rep_seed, 0))?;
        let truth = weighted_gini(&pop.y, &vec![1.0; pop.len()])?;
        row.true_gini = Some(truth);
        let mut rng = rng_from_seed(derive_seed(rep_seed, 1));
        let mut idx = rand::seq::index::sample(&mut rng, exp.population, exp.sample).into_vec();
        idx.sort_unstable();
        let mut frame = pop.to_frame(false).select(&idx);
        frame.weight = vec![exp.population as f64 / exp.sample as f64; exp.sample];
        let config = ImputeConfig { seed: derive_seed(rep_seed, 2), ..exp.imputation.clone() };
        let report = multiple_impute(&frame, &config)?;
        let (lo, hi) = report.interval;
        let (nlo, nhi) = report.naive_interval();
        row.lower = Some(lo);
        row.upper = Some(hi);
        row.covered = Some(lo <= truth && truth <= hi);
        row.naive_estimate = Some(report.naive.estimate);
        row.naive_lower = Some(nlo);
        row.naive_upper = Some(nhi);
        row.naive_covered = Some(nlo <= truth && truth <= nhi);
        row.nonresponse_rate = Some(report.nonresponse_rate);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

fn validate_experiment(exp: &ExperimentConfig) -> Result<(), CliError> {
    if exp.reps == 0 {
        return Err(CliError::Config("experiment.reps must be at least 1".into()));
    }
    if exp.sample == 0 || exp.sample > exp.population {
        return Err(CliError::Config("experiment.sample must lie in [1, population]".into()));
    }
    Ok(())
}

/// Runs all replications; rows are in rep order.
pub fn run_experiment(exp: &ExperimentConfig, seed: u64) -> Result<(Vec<RepRow>, CoverageSummary), CliError> {
    validate_experiment(exp)?;
    let rows: Vec<RepRow> = (0..exp.reps).into_par_iter().map(|r| experiment_rep(exp, seed, r)).collect();
    let summary = CoverageSummary::from_rows(&rows, 1.0 - exp.imputation.alpha);
    Ok((rows, summary))
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

fn cmd_experiment(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let exp = section(&cfg.experiment, "experiment")?;
    let (rows, summary) = run_experiment(exp, cfg.seed)?;
    let mut csv = String::from(
        "rep,seed,true_gini,lower,upper,covered,naive_estimate,naive_lower,naive_upper,naive_covered,nonresponse_rate,error\n",
    );
    for r in &rows {
        let err = r.error.as_deref().map(|e| format!("\"{}\"", e.replace('"', "\"\""))).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{err}",
            r.rep,
            r.seed,
            opt(&r.true_gini),
            opt(&r.lower),
            opt(&r.upper),
            opt(&r.covered),
            opt(&r.naive_estimate),
            opt(&r.naive_lower),
            opt(&r.naive_upper),
            opt(&r.naive_covered),
            opt(&r.nonresponse_rate),
        )
        .expect("string write");
    }
    let echo = echoed(cfg, Command::Experiment);
    let mut o = Output::create(out)?;
    o.write("experiment.csv", csv.as_bytes())?;
    o.json("report.json", &json!({ "config": echo, "summary": summary }))?;
    o.sidecar(&echo)?;
    Ok(o.written)
}
