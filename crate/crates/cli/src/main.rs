#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use icflow::counterexample::{
    default_horizon, h11_dot_closed_form, h11_dot_numeric, patch_flow_short_time, PatchGrid, QuarticPatch,
};
use icflow::io::{parse_config, write_run, RunManifest};
use icflow::reference::SphereSolution;
use icflow::{Ambient, Error, FlowConfig};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(name = "icflow", version, about = "Expanding curvature flows of star-shaped surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AmbientArg {
    Euclidean,
    Hyperbolic,
}

impl From<AmbientArg> for Ambient {
    fn from(a: AmbientArg) -> Self {
        match a {
            AmbientArg::Euclidean => Ambient::Euclidean,
            AmbientArg::Hyperbolic => Ambient::Hyperbolic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one flow from a JSON config.
    Run {
        config: PathBuf,
        /// Output directory, overriding `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the radius of a flowing geodesic sphere as `t,theta` CSV.
    Reference {
        #[arg(long, value_enum)]
        ambient: AmbientArg,
        #[arg(long)]
        r0: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Slope of the smallest curvature of the quartic patch at the origin.
    Counterexample {
        #[arg(long, default_value_t = 1.0)]
        a2: f64,
        #[arg(long, default_value_t = 2.0)]
        b2: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Also integrate the patch flow and print the `t,h11_origin` series.
        #[arg(long)]
        numeric: bool,
    },
    /// Run every `*.json` config in a directory in parallel.
    Sweep {
        dir: PathBuf,
        /// Parent directory for the per-config outputs (default `<dir>/runs`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn load_config(path: &Path) -> Result<FlowConfig, (u8, String)> {
    let text = fs::read_to_string(path).map_err(|e| (EXIT_IO, format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| (EXIT_CONFIG, format!("{}: {e}", path.display())))
}

/// Runs one config into `out`; returns the process exit code and a summary.
fn run_one(cfg: &FlowConfig, out: &Path) -> (u8, String) {
    let started = now();
    let outcome = icflow::flow::run(cfg);
    let manifest = RunManifest::new(cfg, &outcome, started, now());
    if let Err(e) = write_run(out, &manifest, &outcome) {
        return (EXIT_IO, format!("{}: {e}", out.display()));
    }
    match &outcome {
        Ok(res) => {
            let last = res.records.last();
            let msg = format!(
                "{}: stop {} after {} steps at t = {:.6}, u_max = {:.6}",
                out.display(),
                res.stop_reason,
                res.steps,
                last.map_or(f64::NAN, |r| r.t),
                last.map_or(f64::NAN, |r| r.u_max)
            );
            (res.stop_reason.exit_code() as u8, msg)
        }
        Err(e @ Error::Config { .. }) => (EXIT_CONFIG, format!("{}: {e}", out.display())),
        Err(e) => (4, format!("{}: run aborted: {e}", out.display())),
    }
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> u8 {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            return code;
        }
    };
    let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let (code, msg) = run_one(&cfg, &out);
    if code == 0 {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
    code
}

fn cmd_reference(ambient: Ambient, r0: f64, n: usize, p: f64, t_end: f64, samples: usize) -> u8 {
    let sol = match SphereSolution::new(ambient, r0, n, p) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if !(t_end >= 0.0) || samples < 2 {
        eprintln!("error: need t_end >= 0 and at least 2 samples");
        return EXIT_CONFIG;
    }
    let times: Vec<f64> = (0..samples).map(|i| t_end * i as f64 / (samples - 1) as f64).collect();
    match sol.radii(&times) {
        Ok(radii) => {
            println!("t,theta");
            for (t, r) in times.iter().zip(radii) {
                println!("{t:.16e},{r:.16e}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn cmd_counterexample(a2: f64, b2: f64, p: f64, numeric: bool) -> u8 {
    let patch = match QuarticPatch::new(a2, b2) {
        Ok(patch) if p > 1.0 => patch,
        Ok(_) => {
            eprintln!("error: need p > 1, got {p}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let closed = h11_dot_closed_form(a2, b2, p);
    let evolution = match h11_dot_numeric(&patch, p) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return 4;
        }
    };
    let mut summary = format!("closed form {closed:.12e}, evolution equation {evolution:.12e}");
    if numeric {
        let flow = PatchGrid::fitted(&patch, 129)
            .and_then(|grid| Ok((grid, default_horizon(&patch, p, &grid)?)))
            .and_then(|(grid, t_max)| patch_flow_short_time(&patch, p, &grid, t_max));
        match flow {
            Ok(flow) => {
                println!("t,h11_origin");
                for (t, h) in &flow.series {
                    println!("{t:.16e},{h:.16e}");
                }
                summary.push_str(&format!(
                    ", patch flow {:.6e}, h11 crosses below zero: {}",
                    flow.initial_slope,
                    flow.crosses_below_zero()
                ));
            }
            Err(e) => {
                eprintln!("error: {e}");
                return 4;
            }
        }
    }
    eprintln!("h11 slope at t = 0: {summary}");
    0
}

fn cmd_sweep(dir: &Path, out: Option<PathBuf>) -> u8 {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {}: {e}", dir.display());
            return EXIT_IO;
        }
    };
    let mut configs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    let out = out.unwrap_or_else(|| dir.join("runs"));
    let results: Vec<(u8, String)> = configs
        .par_iter()
        .map(|path| {
            let stem = path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
            match load_config(path) {
                Ok(cfg) => run_one(&cfg, &out.join(stem)),
                Err(err) => err,
            }
        })
        .collect();
    for (code, msg) in &results {
        println!("[{code}] {msg}");
    }
    results.iter().map(|r| r.0).max().unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Reference { ambient, r0, n, p, t_end, samples } => {
            cmd_reference(ambient.into(), r0, n, p, t_end, samples)
        }
        Command::Counterexample { a2, b2, p, numeric } => cmd_counterexample(a2, b2, p, numeric),
        Command::Sweep { dir, out } => cmd_sweep(&dir, out),
    };
    ExitCode::from(code)
}
