//! Command-line front end. Each subcommand loads one JSON config, runs on a
//! dedicated worker pool and writes CSVs plus a `<command>_manifest.json` under
//! `<out>/<config-hash>/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use crate::ensemble::{build_data_matrix, spectrum_of};
use crate::error::{Error, Result};
use crate::harness::{
    run_clt_experiment, run_concentration_suite, run_hs_reconstruction,
    run_resolvent_diagonal_check, run_support_experiment, ExperimentConfig, Moments, Source,
};
use crate::io::{self, RunManifest, ValidatorOutcome};
use crate::sampler::{self, MomentEstimates};
use crate::seed::derive_seed;
use crate::theory::hs::PolyBump;
use crate::theory::{ds1, ds2, mean_process, s1_closed, s2_closed, s_closed, TheoryParams};

/// Exit code when a run completes but an invariant check fails.
pub const EXIT_VALIDATION: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "rmt-lab", version, about = "Wishart-type matrices with log-concave columns: limits and Monte Carlo checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate s¹, s², s, their derivatives and M on the configured grid.
    Theory(RunArgs),
    /// Draw one batch and its spectrum.
    Sample(RunArgs),
    /// Empirical mean process against M(z).
    Clt(RunArgs),
    /// Outliers and zero eigenvalues per replication.
    Support(RunArgs),
    /// Concentration scalings and the diagonal resolvent check.
    Concentration(RunArgs),
    /// Helffer–Sjöstrand reconstruction for the configured bump.
    Hs(RunArgs),
    /// Check a config and re-read any outputs already written for it.
    Validate(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output root; `RMT_LAB_OUT` takes precedence.
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `threads`.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Theory(_) => "theory",
            Command::Sample(_) => "sample",
            Command::Clt(_) => "clt",
            Command::Support(_) => "support",
            Command::Concentration(_) => "concentration",
            Command::Hs(_) => "hs",
            Command::Validate(_) => "validate",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Theory(a)
            | Command::Sample(a)
            | Command::Clt(a)
            | Command::Support(a)
            | Command::Concentration(a)
            | Command::Hs(a)
            | Command::Validate(a) => a,
        }
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Output root after applying `RMT_LAB_OUT`.
pub fn output_root(flag: &Path) -> PathBuf {
    std::env::var_os("RMT_LAB_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| flag.to_path_buf())
}

/// Files written by a subcommand and the checks run on them.
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub validators: Vec<ValidatorOutcome>,
    pub summary: serde_json::Value,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: &Command) -> Result<i32> {
    let args = cmd.args();
    let mut cfg = io::load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    let hash = io::config_hash(&cfg)?;
    let dir = output_root(&args.out).join(&hash[..16]);

    if let Command::Validate(_) = cmd {
        return validate_outputs(&dir);
    }
    fs::create_dir_all(&dir)?;

    let threads = cfg.threads.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let started = now();
    let outcome = pool.install(|| match cmd {
        Command::Theory(_) => cmd_theory(&cfg, &dir),
        Command::Sample(_) => cmd_sample(&cfg, &dir),
        Command::Clt(_) => cmd_clt(&cfg, &dir),
        Command::Support(_) => cmd_support(&cfg, &dir),
        Command::Concentration(_) => cmd_concentration(&cfg, &dir),
        Command::Hs(_) => cmd_hs(&cfg, &dir),
        Command::Validate(_) => unreachable!(),
    })?;
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        config_hash: hash,
        config: cfg.clone(),
        master_seed: cfg.master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: now(),
        threads,
        outputs: outcome.outputs.clone(),
        validators: outcome.validators.clone(),
        summary: outcome.summary,
    };
    let manifest_path = dir.join(format!("{}_manifest.json", cmd.name()));
    io::write_json(&manifest_path, &manifest)?;

    println!("{} -> {}", cmd.name(), dir.display());
    let mut ok = true;
    for v in &outcome.validators {
        println!("  [{}] {}: {}", if v.passed { "ok" } else { "FAIL" }, v.name, v.detail);
        ok &= v.passed;
    }
    Ok(if ok { 0 } else { EXIT_VALIDATION })
}

fn theory_params(cfg: &ExperimentConfig) -> Result<TheoryParams> {
    let m = cfg.moments.unwrap_or(Moments { mu: 3.0, kappa: 2.0 });
    TheoryParams::new(cfg.c_target, cfg.sigma_target, m.mu, m.kappa)
}

/// Writes the closed forms on the grid in long format.
pub fn cmd_theory(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let params = theory_params(cfg)?;
    let c = params.c;
    let mut rows = Vec::new();
    let mut herglotz = true;
    let mut residual: f64 = 0.0;
    for z in cfg.grid() {
        let s1 = s1_closed(z, c)?;
        let s2 = s2_closed(z, c)?;
        let s = s_closed(z, c)?;
        herglotz &= [s1, s2, s].iter().all(|v| v.im * z.im > 0.0);
        residual = residual
            .max((z * s1 * s1 + (z * z - c + 1.0) * s1 + z).norm())
            .max((s2 + 1.0 / (z + s1)).norm());
        rows.push(io::TheoryRow::new("s1", z, s1));
        rows.push(io::TheoryRow::new("s2", z, s2));
        rows.push(io::TheoryRow::new("s", z, s));
        rows.push(io::TheoryRow::new("ds1", z, ds1(z, c)?));
        rows.push(io::TheoryRow::new("ds2", z, ds2(z, c)?));
        rows.push(io::TheoryRow::new("M", z, mean_process(z, &params)?));
    }
    let path = dir.join("theory.csv");
    io::write_rows(&path, &rows)?;
    Ok(Outcome {
        outputs: vec![path],
        validators: vec![
            ValidatorOutcome::new("herglotz", herglotz, "Im s·Im z > 0 for s¹, s², s"),
            ValidatorOutcome::new(
                "quadratic_residual",
                residual <= 1e-12,
                format!("max residual {residual:.3e}"),
            ),
        ],
        summary: json!({ "points": rows.len() / 6, "theory": params }),
    })
}

/// Replication 0 of the configured source, with its spectrum.
pub fn cmd_sample(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let seed = derive_seed(cfg.master_seed, 0);
    let batch = match &cfg.source {
        Source::GaussianBaseline => sampler::gaussian_baseline(cfg.n, cfg.m(), seed),
        Source::ExamplePotential {
            potential, burn_in, ..
        } => {
            let mut chain = sampler::ChainConfig::new(cfg.n, seed);
            if let Some(b) = burn_in {
                chain = chain.with_burn_in(*b);
            }
            let tuning = sampler::tune(potential, &chain, cfg.pilot_samples)?;
            sampler::draw_batch_tuned(potential, cfg.m(), &chain, &tuning)?
        }
    };
    let spec = spectrum_of(&build_data_matrix(&batch)?)?;
    let paths = [
        dir.join("batch.csv"),
        dir.join("batch.json"),
        dir.join("spectrum.csv"),
        dir.join("spectrum.json"),
    ];
    io::write_batch(&paths[0], &paths[1], &batch)?;
    io::write_spectrum(&paths[2], &paths[3], &spec, &[cfg.master_seed, seed])?;
    let finite = batch.data.iter().all(|v| v.is_finite());
    let (second, se) = batch.pooled_second_moment();
    let moments = (batch.m >= 2).then(|| MomentEstimates::from_batch(&batch));
    Ok(Outcome {
        outputs: paths.to_vec(),
        validators: vec![
            ValidatorOutcome::new("finite", finite, "all entries finite"),
            ValidatorOutcome::new(
                "acceptance",
                batch.acceptance_rate > 0.0 && batch.acceptance_rate <= 1.0,
                format!("mean acceptance {:.4}", batch.acceptance_rate),
            ),
        ],
        summary: json!({
            "second_moment": second,
            "second_moment_se": se,
            "rescale": batch.rescale,
            "moments": moments,
            "lambda_max": spec.lambda_max(),
        }),
    })
}

pub fn cmd_clt(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let res = run_clt_experiment(cfg)?;
    let rows: Vec<io::CltCsvRow> = res.rows.iter().map(io::CltCsvRow::from).collect();
    let path = dir.join("clt.csv");
    io::write_rows(&path, &rows)?;
    let positive = res.rows.iter().all(|r| r.stderr > 0.0 && r.stderr.is_finite());
    let covered = res.rows.len() == cfg.grid().len();
    let within = res.rows.iter().filter(|r| r.within(0.1)).count();
    Ok(Outcome {
        outputs: vec![path],
        validators: vec![
            ValidatorOutcome::new("stderr_positive", positive, "stderr > 0 at every point"),
            ValidatorOutcome::new("grid_covered", covered, format!("{} rows", res.rows.len())),
        ],
        summary: json!({
            "moments": res.moments,
            "moment_estimates": res.moment_estimates,
            "points_within_3se_plus_0.1": within,
            "wall_time_secs": res.wall_time_secs,
        }),
    })
}

pub fn cmd_support(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let rep = run_support_experiment(cfg)?;
    let path = dir.join("support.csv");
    io::write_rows(&path, &io::support_rows(&rep))?;
    Ok(Outcome {
        outputs: vec![path],
        validators: vec![ValidatorOutcome::new(
            "zero_count",
            rep.zero_counts_exact(),
            format!("m − n = {} zeros in every replication", rep.m - rep.n),
        )],
        summary: json!({
            "total_outliers": rep.total_outliers(),
            "support": rep.support,
            "max_eigenvalue_sd": rep.max_eigenvalue_sd(),
        }),
    })
}

pub fn cmd_concentration(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let rep = run_concentration_suite(cfg)?;
    let path = dir.join("concentration.csv");
    io::write_rows(&path, &io::concentration_rows(&rep))?;
    let mut outputs = vec![path];
    let finite = rep
        .rows
        .iter()
        .all(|r| r.quad_form_mse.is_finite() && r.trace_variance.is_finite());
    let mut validators = vec![ValidatorOutcome::new("finite", finite, "all statistics finite")];
    let mut summary = json!({
        "quad_form_slope": rep.quad_form_slope,
        "trace_variance_slope": rep.trace_variance_slope,
        "edge_threshold": rep.edge_threshold,
        "edge_exceedances": rep.total_exceedances(),
    });
    if cfg.n <= crate::harness::MAX_DENSE_N {
        let z = Complex64::new(cfg.resolvent_z[0], cfg.resolvent_z[1]);
        let res = run_resolvent_diagonal_check(cfg, z)?;
        let path = dir.join("resolvent.csv");
        io::write_rows(&path, &io::resolvent_rows(&res))?;
        outputs.push(path);
        let worst = res
            .rows
            .iter()
            .map(|r| r.trace_identity_error)
            .fold(0.0, f64::max);
        validators.push(ValidatorOutcome::new(
            "block_trace_identity",
            worst <= 1e-10,
            format!("max deviation {worst:.3e}"),
        ));
        summary["resolvent_decreasing"] = json!(res.decreasing());
    }
    Ok(Outcome {
        outputs,
        validators,
        summary,
    })
}

pub fn cmd_hs(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let f = PolyBump::on_interval(cfg.hs.lo, cfg.hs.hi, cfg.hs.power)?;
    let rep = run_hs_reconstruction(cfg, &f, cfg.hs.quadrature.order)?;
    let path = dir.join("hs.csv");
    io::write_rows(&path, &[io::HsCsvRow::from(&rep)])?;
    let finite = rep.monte_carlo.is_finite() && rep.theory.is_finite();
    Ok(Outcome {
        outputs: vec![path],
        validators: vec![ValidatorOutcome::new("finite", finite, "both sides finite")],
        summary: json!({
            "discrepancy": rep.discrepancy(),
            "within_3se_plus_0.1": rep.within(0.1),
            "moment_estimates": rep.moment_estimates,
        }),
    })
}

/// Re-reads every CSV under `dir` with the typed readers and checks that
/// re-serializing reproduces the file byte for byte.
fn validate_outputs(dir: &Path) -> Result<i32> {
    if !dir.exists() {
        println!("config ok; no outputs at {}", dir.display());
        return Ok(0);
    }
    let mut ok = true;
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    let scratch = tempdir_in(dir)?;
    for path in &names {
        let passed = roundtrip(path, &scratch)?;
        println!("  [{}] {}", if passed { "ok" } else { "FAIL" }, path.display());
        ok &= passed;
    }
    fs::remove_dir_all(&scratch)?;
    Ok(if ok { 0 } else { EXIT_VALIDATION })
}

fn tempdir_in(dir: &Path) -> Result<PathBuf> {
    let p = dir.join(".validate");
    fs::create_dir_all(&p)?;
    Ok(p)
}

fn same_bytes(a: &Path, b: &Path) -> Result<bool> {
    Ok(fs::read(a)? == fs::read(b)?)
}

fn roundtrip(path: &Path, scratch: &Path) -> Result<bool> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let copy = scratch.join(name);
    match name {
        "theory.csv" => io::write_rows(&copy, &io::read_rows::<io::TheoryRow>(path)?)?,
        "clt.csv" => io::write_rows(&copy, &io::read_rows::<io::CltCsvRow>(path)?)?,
        "support.csv" => io::write_rows(&copy, &io::read_rows::<io::SupportCsvRow>(path)?)?,
        "concentration.csv" => io::write_rows(&copy, &io::read_rows::<io::ConcentrationCsvRow>(path)?)?,
        "resolvent.csv" => io::write_rows(&copy, &io::read_rows::<io::ResolventCsvRow>(path)?)?,
        "hs.csv" => io::write_rows(&copy, &io::read_rows::<io::HsCsvRow>(path)?)?,
        "batch.csv" => {
            let side = path.with_extension("json");
            let batch = io::read_batch(path, &side)?;
            io::write_batch(&copy, &scratch.join("batch.json"), &batch)?;
        }
        "spectrum.csv" => {
            let side = path.with_extension("json");
            let (spec, lineage) = io::read_spectrum(path, &side)?;
            io::write_spectrum(&copy, &scratch.join("spectrum.json"), &spec, &lineage)?;
        }
        _ => return Ok(true),
    }
    same_bytes(path, &copy)
}
