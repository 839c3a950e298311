// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use switchsynth::artifact::{config_hash, synthesize, Artifact, Controller};
use switchsynth::config::Config;
use switchsynth::runtime::verify::verify_artifact;
use switchsynth::runtime::{simulate, write_geometry, Outcome, Schedule};
use switchsynth::Error;

#[derive(Parser)]
#[command(
    name = "switchsynth",
    version,
    about = "Controller synthesis for switched affine systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a controller artifact from a config file.
    Synth {
        config: PathBuf,
        /// Artifact path (default: <config stem>.artifact.json).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate the closed loop and print the trajectory as CSV.
    Simulate {
        artifact: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long)]
        steps: Option<usize>,
        /// Piecewise-constant perturbation schedule (JSON).
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Write ring and tile boxes as CSV to this file.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Take initial states, step count and schedule from this config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trajectory CSV path (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Re-check every certificate of an artifact.
    Verify {
        artifact: PathBuf,
        /// Config the artifact should come from.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Machine-readable report path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse(_) | Error::Io { .. } | Error::Dimension { .. } => 2,
        _ => 1,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_err(path: &str) -> impl Fn(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_string(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, output } => cmd_synth(&config, output),
        Command::Simulate {
            artifact,
            x0,
            steps,
            schedule,
            geometry,
            config,
            output,
        } => cmd_simulate(&artifact, x0, steps, schedule, geometry, config, output),
        Command::Verify {
            artifact,
            config,
            csv,
        } => cmd_verify(&artifact, config, csv),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn cmd_synth(config: &Path, output: Option<PathBuf>) -> Result<u8, Error> {
    let cfg = Config::load(config)?;
    let start = Instant::now();
    let art = synthesize(&cfg)?;
    let elapsed = start.elapsed();
    let out = output.unwrap_or_else(|| {
        let stem = config
            .file_stem()
            .map_or("controller".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from(format!("{stem}.artifact.json"))
    });
    art.save(&out)?;

    let mut o = io::stdout().lock();
    let w = io_err("stdout");
    writeln!(o, "mode: {:?}", art.mode).map_err(&w)?;
    match &art.controller {
        Controller::Centralized { stability, rings } => {
            if let Some(s) = stability {
                writeln!(
                    o,
                    "stability ring: {} tiles, longest pattern {}",
                    s.tiling.tile_count(),
                    s.longest_pattern()
                )
                .map_err(&w)?;
            }
            for r in rings {
                writeln!(
                    o,
                    "ring {:>3}: a = {:.6}  tiles = {}",
                    r.index,
                    r.a,
                    r.tiling.tile_count()
                )
                .map_err(&w)?;
            }
        }
        Controller::Distributed { stability, rings } => {
            writeln!(
                o,
                "stability ring: k1 = {} k2 = {} ell = {}",
                stability.components[0].k, stability.components[1].k, stability.ell
            )
            .map_err(&w)?;
            for r in rings {
                writeln!(
                    o,
                    "ring {:>3}: a = {:.6}  k1 = {} k2 = {} ell = {}  tiles = {}/{}",
                    r.index,
                    r.a,
                    r.components[0].k,
                    r.components[1].k,
                    r.ell,
                    r.components[0].tiling.tile_count(),
                    r.components[1].tiling.tile_count()
                )
                .map_err(&w)?;
            }
        }
    }
    let s = art.outer_box();
    writeln!(o, "rings: {}", art.ring_count()).map_err(&w)?;
    writeln!(o, "sum a: {:.6}", art.total_extension()).map_err(&w)?;
    let bounds: Vec<String> = s
        .intervals()
        .iter()
        .map(|iv| format!("[{:.6}, {:.6}]", iv.lo, iv.hi))
        .collect();
    writeln!(o, "S: {}", bounds.join(" x ")).map_err(&w)?;
    if let Some(stop) = &art.stop {
        writeln!(o, "stopped: {stop:?}").map_err(&w)?;
    }
    writeln!(o, "wall time: {:.3} s", elapsed.as_secs_f64()).map_err(&w)?;
    writeln!(o, "artifact: {}", out.display()).map_err(&w)?;
    if art.ring_count() == 0 && art.mode != switchsynth::config::SynthMode::Stability {
        eprintln!("error: no ring could be synthesized ({:?})", art.stop);
        return Ok(1);
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    artifact: &Path,
    x0: Option<Vec<f64>>,
    steps: Option<usize>,
    schedule: Option<PathBuf>,
    geometry: Option<PathBuf>,
    config: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<u8, Error> {
    let art = Artifact::load(artifact)?;
    let report = verify_artifact(&art);
    if !report.passed() {
        eprint!("artifact does not verify: {report}");
        return Ok(1);
    }
    let cfg = config.as_deref().map(Config::load).transpose()?;
    let starts = match (x0, &cfg) {
        (Some(x), _) => vec![x],
        (None, Some(c)) if !c.runtime.x0.is_empty() => c.runtime.x0.clone(),
        _ => return Err(Error::config("x0", "give --x0 or a config with runtime.x0")),
    };
    let steps = steps
        .or(cfg.as_ref().map(|c| c.runtime.max_steps))
        .unwrap_or(1000);
    let schedule_path = schedule.or_else(|| cfg.as_ref().and_then(|c| c.runtime.schedule.clone()));
    let schedule = schedule_path
        .as_deref()
        .map(Schedule::load)
        .transpose()?
        .unwrap_or_default();

    if let Some(g) = &geometry {
        write_geometry(&art, create(g)?)?;
    }
    let mut sink: Box<dyn Write> = match &output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut code = 0;
    for (i, x) in starts.iter().enumerate() {
        let traj = simulate(&art, x, steps, &schedule)?;
        // one header; each trajectory restarts at step 0
        traj.write_csv_rows(&art.system, &mut sink, i == 0)?;
        match (traj.outcome, traj.first_entry(&art.objective)) {
            (Outcome::Escaped { step }, _) => {
                eprintln!("x0 = {x:?}: left the controlled domain at step {step}");
                code = 1;
            }
            (Outcome::Completed, Some(t)) => eprintln!("x0 = {x:?}: in R from step {t}"),
            (Outcome::Completed, None) => {
                eprintln!("x0 = {x:?}: R not reached within {steps} steps")
            }
        }
    }
    sink.flush().map_err(io_err("output"))?;
    Ok(code)
}

fn cmd_verify(artifact: &Path, config: Option<PathBuf>, csv: Option<PathBuf>) -> Result<u8, Error> {
    let art = Artifact::load(artifact)?;
    if let Some(path) = config {
        let cfg = Config::load(&path)?;
        if config_hash(&cfg) != art.config_hash {
            eprintln!(
                "warning: artifact was not generated from {}; rechecking all certificates",
                path.display()
            );
        }
        if cfg.build_system()? != art.system {
            eprintln!("warning: config system differs from the artifact's embedded system");
        }
    }
    let report = verify_artifact(&art);
    let _ = write!(io::stdout().lock(), "{report}");
    if let Some(p) = csv {
        report.write_csv(create(&p)?)?;
    }
    Ok(if report.passed() { 0 } else { 1 })
}
