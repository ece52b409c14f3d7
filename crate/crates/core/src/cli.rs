//! Command-line interface: argument parsing, dispatch and the output tree.
//!
//! Every run writes into the output directory:
//! - `config.toml`: the input file verbatim (or the effective config when none was given),
//! - `effective_config.toml`: the validated config with all defaults filled in,
//! - `provenance.log`: coefficients, warnings and result summaries (no timings),
//! - command-specific CSVs and snapshots.
//!
//! Outputs depend only on the config, so reruns are byte-identical.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{CommandFactory, Parser};

use crate::checks;
use crate::config::{parse_config_with_command, Command, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    benchmark_run, run_mafea, self_convergence, spatial_convergence, sweep_b, temporal_convergence, errors_vs_exact,
    SolverPath, ERROR_COLUMNS,
};
use crate::model::{build_case_with_layout, DerivedCoefficients, PhysicalParams, Problem};
use crate::solver::Diagnostics;
use crate::spaces::FieldVector;

#[derive(Debug, Parser)]
#[command(
    name = "thermoporo",
    version,
    about = "Thermo-poroelasticity solver with stress-dependent permeability",
    after_help = "Commands: run, converge-space, converge-time, barry, sweep-b, check"
)]
pub struct Cli {
    /// Command to execute; overrides `command` in the config file.
    #[arg(value_parser = parse_command)]
    pub command: Option<Command>,
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also run the benchmark self-convergence study.
    #[arg(long)]
    pub reference_run: bool,
    /// Write field snapshots every K steps.
    #[arg(long, value_name = "K")]
    pub snapshot_every: Option<usize>,
}

fn parse_command(s: &str) -> std::result::Result<Command, String> {
    s.parse::<Command>().map_err(|e| e.to_string())
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Loads the config with command-line overrides applied. Returns the config
/// and the text to echo as `config.toml`.
pub fn load(cli: &Cli) -> Result<(RunConfig, String)> {
    let (mut cfg, text) = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            (parse_config_with_command(&text, cli.command)?, Some(text))
        }
        None => {
            let Some(cmd) = cli.command else {
                let usage = Cli::command().render_usage();
                return Err(Error::config(format!("no command given and no config file\n{usage}")));
            };
            (RunConfig::defaults(cmd)?, None)
        }
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.reference_run {
        cfg.reference_run = true;
    }
    if let Some(k) = cli.snapshot_every {
        cfg.snapshot_every = k;
    }
    let echo = text.unwrap_or_else(|| cfg.to_toml());
    Ok((cfg, echo))
}

/// Runs the command; `Ok(false)` when `check` finds a failing property.
pub fn execute(cli: &Cli) -> Result<bool> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::config("--jobs must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not resize the worker pool: {e}");
        }
    }
    let (cfg, echo) = load(cli)?;
    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write(&out.join("config.toml"), &echo)?;
    write(&out.join("effective_config.toml"), &cfg.to_toml())?;
    for w in &cfg.warnings {
        log::warn!("{w}");
    }
    let started = Instant::now();
    let mut prov = provenance_header(&cfg)?;
    let result = dispatch(&cfg, &mut prov);
    if let Err(e) = &result {
        let _ = writeln!(prov, "\nfailed: {e}");
    }
    write(&out.join("provenance.log"), &prov)?;
    log::info!("{} finished in {:.2} s", cfg.command, started.elapsed().as_secs_f64());
    result
}

/// Dispatches to the command and appends its summary to `prov`.
pub fn dispatch(cfg: &RunConfig, prov: &mut String) -> Result<bool> {
    match cfg.command {
        Command::Run => cmd_run(cfg, prov).map(|_| true),
        Command::ConvergeSpace => cmd_converge_space(cfg, prov).map(|_| true),
        Command::ConvergeTime => cmd_converge_time(cfg, prov).map(|_| true),
        Command::Barry => cmd_barry(cfg, prov).map(|_| true),
        Command::SweepB => cmd_sweep(cfg, prov).map(|_| true),
        Command::Check => cmd_check(cfg, prov),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn provenance_header(cfg: &RunConfig) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "thermoporo {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "command = {}\ncase = {}\npair = {}", cfg.command, cfg.case, cfg.pair);
    let _ = writeln!(s, "\n[derived coefficients]");
    s.push_str(&DerivedCoefficients::derive(&cfg.params)?.report(&cfg.params));
    if !cfg.warnings.is_empty() {
        let _ = writeln!(s, "\n[warnings]");
        for w in &cfg.warnings {
            let _ = writeln!(s, "{w}");
        }
    }
    let _ = writeln!(s, "\n[effective config]");
    s.push_str(&cfg.to_toml());
    let _ = writeln!(s, "\n[results]");
    Ok(s)
}

fn problem(cfg: &RunConfig, params: PhysicalParams) -> Result<Arc<dyn Problem>> {
    build_case_with_layout(&cfg.case, params, Some(cfg.layout))
}

fn snapshot(dir: &Path, tag: &str, fields: &[(&str, &FieldVector)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, f) in fields {
        f.write_csv(&dir.join(format!("{tag}_{name}.csv")))?;
    }
    Ok(())
}

fn errors_line(e: &[f64; 6]) -> String {
    ERROR_COLUMNS
        .iter()
        .zip(e)
        .map(|(c, v)| format!("{c} = {v:.6e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_run(cfg: &RunConfig, prov: &mut String) -> Result<()> {
    let pr = problem(cfg, cfg.params.clone())?;
    let settings = cfg.settings_for(cfg.n);
    let snaps = cfg.out_dir.join("snapshots");
    let every = cfg.snapshot_every;
    let total = settings.num_steps();
    let mut diag = Diagnostics::default();
    let s = run_mafea(pr.clone(), cfg.n, cfg.pair, &settings, None, |d, s| {
        diag.record(d, s);
        if (every > 0 && s.n % every == 0) || s.n == total {
            let fields = [
                ("u", &s.u),
                ("p", &s.p),
                ("T", &s.temp),
                ("tau", &s.tau),
                ("varpi", &s.varpi),
                ("varsigma", &s.varsigma),
            ];
            snapshot(&snaps, &format!("step{:06}", s.n), &fields)?;
        }
        Ok(())
    })?;
    diag.write_csv(&cfg.out_dir.join("log.csv"))?;
    let _ = writeln!(prov, "steps = {}\ndt = {:e}\nt_final = {:e}", total, settings.dt, s.t);
    let _ = writeln!(prov, "max picard iterations = {}", diag.rows.iter().map(|r| r.picard_iterations).max().unwrap_or(0));
    if pr.exact().is_some() {
        let e = errors_vs_exact(pr.as_ref(), &s.u, &s.p, &s.temp, s.t, cfg.relative_errors)?;
        let mut csv = format!("t,{}\n{:.16e}", ERROR_COLUMNS.join(","), s.t);
        for v in e {
            let _ = write!(csv, ",{v:.16e}");
        }
        csv.push('\n');
        write(&cfg.out_dir.join("errors.csv"), &csv)?;
        let _ = writeln!(prov, "errors: {}", errors_line(&e));
    }
    Ok(())
}

fn cmd_converge_space(cfg: &RunConfig, prov: &mut String) -> Result<()> {
    let pr = problem(cfg, cfg.params.clone())?;
    let table = spatial_convergence(pr, cfg.pair, &cfg.n_list, &cfg.solver, cfg.dt_rule, cfg.relative_errors)?;
    table.write_csv(&cfg.out_dir.join("convergence.csv"))?;
    let r = table.render();
    print!("{r}");
    prov.push_str(&r);
    Ok(())
}

fn cmd_converge_time(cfg: &RunConfig, prov: &mut String) -> Result<()> {
    let pr = problem(cfg, cfg.params.clone())?;
    let table = temporal_convergence(pr, cfg.pair, cfg.n, &cfg.dt_list, &cfg.solver)?;
    table.write_csv(&cfg.out_dir.join("temporal.csv"))?;
    let r = table.render();
    print!("{r}");
    prov.push_str(&r);
    Ok(())
}

fn cmd_barry(cfg: &RunConfig, prov: &mut String) -> Result<()> {
    let pr = problem(cfg, cfg.params.clone())?;
    let settings = cfg.settings_for(cfg.n);
    let snaps = cfg.out_dir.join("snapshots");
    let every = cfg.snapshot_every;
    let total = settings.num_steps();
    let mut runs = Vec::new();
    for path in [SolverPath::Classical, SolverPath::Mafea] {
        let run = benchmark_run(pr.clone(), cfg.n, cfg.pair, &settings, path, None, |n, _, u, p, t| {
            if (every > 0 && n % every == 0) || n == total {
                snapshot(&snaps, &format!("{path}_step{n:06}"), &[("u", u), ("p", p), ("T", t)])?;
            }
            Ok(())
        })?;
        let _ = writeln!(
            prov,
            "{path}: max pressure undershoot = {:.6e}, max temperature undershoot = {:.6e}",
            run.max_pressure_undershoot(),
            run.max_temperature_undershoot()
        );
        runs.push(run);
    }
    let (c, m) = (&runs[0], &runs[1]);
    let mut csv = String::from("t,classical_p,classical_T,mafea_p,mafea_T\n");
    for (a, b) in c.history.iter().zip(&m.history) {
        let _ = writeln!(csv, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", a.0, a.1, a.2, b.1, b.2);
    }
    write(&cfg.out_dir.join("undershoot.csv"), &csv)?;
    if let Some(d) = &m.diagnostics {
        d.write_csv(&cfg.out_dir.join("mafea_log.csv"))?;
    }
    if cfg.reference_run {
        let table = self_convergence(pr, cfg.pair, &cfg.n_list, cfg.n_ref, &settings)?;
        table.write_csv(&cfg.out_dir.join("self_convergence.csv"))?;
        let r = table.render();
        print!("{r}");
        let _ = writeln!(prov, "self-convergence against n = {}:", cfg.n_ref);
        prov.push_str(&r);
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, prov: &mut String) -> Result<()> {
    let settings = cfg.settings_for(cfg.n);
    let make = |b: f64| {
        problem(
            cfg,
            PhysicalParams {
                b,
                ..cfg.params.clone()
            },
        )
    };
    let report = sweep_b(make, &cfg.b_values, cfg.n, cfg.pair, &settings)?;
    write(&cfg.out_dir.join("sweep.csv"), &report.to_csv())?;
    let snaps = cfg.out_dir.join("snapshots");
    for (i, r) in report.records.iter().enumerate() {
        match &r.outcome {
            Ok(m) => {
                snapshot(&snaps, &format!("b{i}"), &[("p", &m.p), ("T", &m.temp)])?;
                let _ = writeln!(prov, "b = {:e}: max p = {:.6e}, min p = {:.6e}", r.b, m.max_p, m.min_p);
            }
            Err(e) => {
                let _ = writeln!(prov, "b = {:e}: failed: {e}", r.b);
            }
        }
    }
    match report.control_bitwise_equal {
        Some(eq) => {
            let _ = writeln!(prov, "b = 0 equals constant-permeability control bitwise: {eq}");
        }
        None => {
            let _ = writeln!(prov, "b = 0 not in the sweep; no control run");
        }
    }
    let _ = writeln!(prov, "max p monotone in b: {}", report.monotone_max_p().unwrap_or("no"));
    Ok(())
}

fn cmd_check(cfg: &RunConfig, prov: &mut String) -> Result<bool> {
    let results = checks::run_all();
    let mut text = String::new();
    for r in &results {
        let _ = writeln!(text, "{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(text, "{} checks, {} failed", results.len(), failed);
    print!("{text}");
    write(&cfg.out_dir.join("check.txt"), &text)?;
    prov.push_str(&text);
    Ok(failed == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_command_is_a_usage_error() {
        let e = Cli::try_parse_from(["thermoporo", "frobnicate"]).unwrap_err();
        assert_ne!(e.exit_code(), 0);
        assert!(e.to_string().contains("unknown command"));
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("c.toml");
        fs::write(&cfg_path, "command = \"run\"\ncase = \"test1\"\n[mesh]\nn = 4\n").unwrap();
        let out = dir.path().join("o");
        let cli = Cli::try_parse_from([
            "thermoporo".as_ref(),
            "--config".as_ref(),
            cfg_path.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
            "--snapshot-every".as_ref(),
            "3".as_ref(),
        ] as [&std::ffi::OsStr; 7])
        .unwrap();
        let (c, echo) = load(&cli).unwrap();
        assert_eq!(c.out_dir, out);
        assert_eq!(c.snapshot_every, 3);
        assert!(echo.starts_with("command = \"run\""));
    }

    #[test]
    fn missing_command_and_config_fails() {
        let cli = Cli::try_parse_from(["thermoporo"]).unwrap();
        assert!(load(&cli).is_err());
    }
}
