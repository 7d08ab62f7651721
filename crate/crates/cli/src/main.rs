use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use complementary::harness::output::{to_json, write_artifact, write_sweep_csv};
use complementary::harness::{self, ExperimentConfig};
use complementary::spectral;
use complementary::Error;

const PASS: u8 = 0;
const TOLERANCE_FAILURE: u8 = 2;
const CONFIG_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "complementary", version, about = "Lossy complementary media experiments")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV, JSON and SVG artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the checkers' sampling point sets; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Norms and errors of u_delta over the loss schedule.
    Sweep,
    /// Distance of u_delta from the free field beyond the image radius.
    Invisibility,
    /// Power-law fit of the norm growth for incompatible sources.
    Blowup,
    /// Spectral against FEM discrepancies.
    Crossval,
    /// Samples the reflecting-complementary conditions for the configured maps.
    CheckComplementary,
    /// SVG heatmap of |Re u|.
    Render,
    /// Exact radial solver.
    Spectral {
        #[command(subcommand)]
        command: SpectralCommand,
    },
}

#[derive(Subcommand)]
enum SpectralCommand {
    /// Writes the per-mode profiles of u_delta as JSON.
    Solve {
        #[arg(long)]
        delta: f64,
        /// Highest mode kept; max(32, ceil(4 ln(1/delta))) when absent.
        #[arg(long)]
        modes: Option<u32>,
        /// Output file; `<out-dir>/spectral.json` when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    let path = write_artifact(dir, name, contents)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn verdict(pass: bool) -> u8 {
    if pass {
        PASS
    } else {
        TOLERANCE_FAILURE
    }
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> Result<u8, Error> {
    let dir = &cli.out_dir;
    match &cli.command {
        Command::Sweep => {
            let rep = harness::run_delta_sweep(cfg)?;
            let mut csv = Vec::new();
            write_sweep_csv(&rep.rows, &mut csv)?;
            let csv = String::from_utf8(csv).expect("ascii");
            print!("{csv}");
            write(dir, "sweep.csv", &csv)?;
            write(dir, "sweep.json", &to_json(&rep))?;
            if !rep.skipped.is_empty() {
                eprintln!("{} path skipped losses {:?}", rep.path, rep.skipped);
            }
            Ok(verdict(rep.passes(cfg.sweep.energy_tol)))
        }
        Command::Invisibility => {
            let rep = harness::run_invisibility_check(cfg)?;
            for r in &rep.rows {
                println!("{:e}\t{:e}", r.delta, r.sup_rel_err);
            }
            write(dir, "invisibility.json", &to_json(&rep))?;
            Ok(verdict(rep.pass))
        }
        Command::Blowup => {
            let rep = harness::run_blowup_check(cfg)?;
            println!("gamma = {:.6}, R^2 = {:.6}, verdict {:?}", rep.gamma, rep.r_squared, rep.verdict.status);
            write(dir, "blowup.json", &to_json(&rep))?;
            Ok(verdict(rep.pass))
        }
        Command::Crossval => {
            let rep = harness::run_cross_validation(cfg)?;
            for r in &rep.rows {
                println!("h = {}, delta = {:e}: L2 {:.4e}, H1 {:.4e}{}", r.h, r.delta, r.l2_rel, r.h1_rel, if r.held { if r.pass { " pass" } else { " FAIL" } } else { "" });
            }
            write(dir, "crossval.json", &to_json(&rep))?;
            Ok(verdict(rep.pass))
        }
        Command::CheckComplementary => {
            let rep = harness::run_check_complementary(cfg)?;
            let json = serde_json::to_string_pretty(&rep.to_json()).expect("report serializes") + "\n";
            print!("{json}");
            write(dir, "check.json", &json)?;
            Ok(verdict(rep.verdict))
        }
        Command::Render => {
            let svg = harness::render_config(cfg)?;
            write(dir, "field.svg", &svg)?;
            Ok(PASS)
        }
        Command::Spectral { command: SpectralCommand::Solve { delta, modes, out } } => {
            if !(*delta > 0.0) {
                return Err(Error::Config(vec![format!("--delta: {delta} must be positive")]));
            }
            let layout = cfg.layout()?;
            let Some((a, _)) = cfg.media()?.radial_isotropic() else {
                return Err(Error::Config(vec!["media: the spectral solver needs radial isotropic media".into()]));
            };
            let src = cfg.source().scaled(1.0 / a);
            let n_max = modes.unwrap_or_else(|| spectral::mode_truncation(*delta));
            let u = spectral::solve_source_delta(&layout, &src, *delta, Some(n_max))?;
            let doc = serde_json::json!({
                "delta": delta,
                "modes": u.modes().iter().map(|m| m.to_json()).collect::<Vec<_>>(),
            });
            let text = serde_json::to_string_pretty(&doc).expect("json") + "\n";
            match out {
                Some(path) => {
                    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                        std::fs::create_dir_all(parent)?;
                    }
                    std::fs::write(path, &text)?;
                    eprintln!("wrote {}", path.display());
                }
                None => write(dir, "spectral.json", &text)?,
            }
            Ok(PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    }
    let Some(path) = &cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(CONFIG_ERROR);
    };
    let mut cfg = match ExperimentConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match run(&cli, &cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e @ (Error::Config(_) | Error::Parse(_) | Error::Refused(_) | Error::RasterTooLarge { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
