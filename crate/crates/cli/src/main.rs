//! `lsharm`: command-line front end for the level-set harmonic pipeline.
//!
//! Exit codes: 0 success (family accepted where relevant), 2 configuration or
//! usage problems, 3 family rejected by the leaf test, 4 numerical failure
//! (non-convergence, domain exits, truncated flows).

use clap::{Parser, Subcommand};
use levelset_harmonics::checker::{check_family, samples_to_csv, sample_grid};
use levelset_harmonics::config::FamilyConfig;
use levelset_harmonics::family::{load_family, AmbientPoint, ParamPoint};
use levelset_harmonics::flow::integrate_normal_flow;
use levelset_harmonics::oracle::{catalog, catalog_entry};
use levelset_harmonics::reconstruct::{
    evaluate_harmonic, reconstruct_u, verify_gradient_law, Gauge,
};
use levelset_harmonics::{Error, Family64, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lsharm", version, about = "Test whether a family of curves or hypersurfaces consists of the level sets of a harmonic function, and reconstruct that function")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the leaf test on a family and report per-leaf statistics as JSON
    Check {
        /// Family definition (JSON)
        config: PathBuf,
        /// Interior sample counts per axis, sigma axes then t (e.g. "41,21")
        #[arg(long)]
        grid: Option<String>,
        /// Override the acceptance tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct the harmonic profile of an accepted family (CSV)
    Reconstruct {
        config: PathBuf,
        #[arg(long)]
        grid: Option<String>,
        /// Gauge "u0,du0" (default "0,1", or the config's gauge)
        #[arg(long)]
        gauge: Option<String>,
        /// Evaluate the function at an ambient point "y1,y2[,y3...]"
        /// (repeatable); replaces the profile output
        #[arg(long = "at")]
        at: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the normal flow from a parameter point (CSV trace)
    Flow {
        config: PathBuf,
        /// Start "s1[,s2...],t" in parameter coordinates
        #[arg(long)]
        start: String,
        /// Signed arc length to integrate
        #[arg(long)]
        length: f64,
        /// Integration step (default from the family tolerances)
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the gradient law along a normal flow line (JSON)
    VerifyGradient {
        config: PathBuf,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        gauge: Option<String>,
        /// Start "s1[,s2...],t" in parameter coordinates
        #[arg(long)]
        start: String,
        /// Signed arc length to follow
        #[arg(long)]
        length: f64,
        /// Flow integration step
        #[arg(long)]
        flow_step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the raw condition samples on the grid (CSV)
    Sample {
        config: PathBuf,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in families, or emit one as a config file
    Catalog {
        /// Print the JSON config of this catalog family
        #[arg(long)]
        emit: Option<String>,
    },
}

struct Outcome {
    content: String,
    dest: Option<PathBuf>,
    code: u8,
}

impl Outcome {
    fn stdout(content: String) -> Self {
        Outcome {
            content,
            dest: None,
            code: 0,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => {
            if let Some(path) = &outcome.dest {
                if let Err(e) = std::fs::write(path, &outcome.content) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            } else {
                print!("{}", outcome.content);
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Sample { source, .. } => exit_code_for(source),
        Error::Rejected(_) => 3,
        Error::Syntax { .. }
        | Error::UnknownIdentifier { .. }
        | Error::UnboundVariable { .. }
        | Error::Config(_)
        | Error::OrientationViolation { .. } => 2,
        _ => 4,
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Check {
            config,
            grid,
            tol,
            out,
        } => {
            let cfg = read_config(&config)?;
            let mut family = load_family::<f64>(&cfg)?;
            if let Some(tol) = tol {
                family = family.with_check_tol(tol);
            }
            let grid = resolve_grid(&cfg, grid.as_deref(), &family)?;
            let report = check_family(&family, &grid)?;
            let code = if report.accepted { 0 } else { 3 };
            Ok(Outcome {
                content: report.to_json() + "\n",
                dest: out,
                code,
            })
        }
        Command::Reconstruct {
            config,
            grid,
            gauge,
            at,
            out,
        } => {
            let cfg = read_config(&config)?;
            let family = load_family::<f64>(&cfg)?;
            let grid = resolve_grid(&cfg, grid.as_deref(), &family)?;
            let gauge = resolve_gauge(&cfg, gauge.as_deref())?;
            let report = check_family(&family, &grid)?;
            let recon = reconstruct_u(&family, &report, gauge)?;
            let content = if at.is_empty() {
                recon.to_csv()
            } else {
                let mut rows = String::new();
                for i in 1..=family.ambient_dim() {
                    let _ = write!(rows, "y{i},");
                }
                rows.push_str("u\n");
                for spec in &at {
                    let coords = parse_floats(spec, "--at")?;
                    if coords.len() != family.ambient_dim() {
                        return Err(Error::Config(format!(
                            "--at needs {} coordinates, got {}",
                            family.ambient_dim(),
                            coords.len()
                        )));
                    }
                    let value =
                        evaluate_harmonic(&family, &recon, &AmbientPoint::new(coords.clone()))?;
                    for c in &coords {
                        let _ = write!(rows, "{c},");
                    }
                    let _ = writeln!(rows, "{value}");
                }
                rows
            };
            Ok(Outcome {
                content,
                dest: out,
                code: 0,
            })
        }
        Command::Flow {
            config,
            start,
            length,
            step,
            out,
        } => {
            let cfg = read_config(&config)?;
            let family = load_family::<f64>(&cfg)?;
            let start = parse_start(&start, &family)?;
            let step = match step {
                Some(s) if s > 0.0 => s,
                Some(s) => {
                    return Err(Error::Config(format!("--step must be positive, got {s}")))
                }
                None => family.tolerances().flow_step,
            };
            let trace = integrate_normal_flow(&family, &start, length, step)?;
            let code = if trace.truncated {
                eprintln!(
                    "note: flow left the leaf range at s = {}",
                    trace.reached()
                );
                4
            } else {
                0
            };
            Ok(Outcome {
                content: trace.to_csv(),
                dest: out,
                code,
            })
        }
        Command::VerifyGradient {
            config,
            grid,
            gauge,
            start,
            length,
            flow_step,
            out,
        } => {
            let cfg = read_config(&config)?;
            let mut family = load_family::<f64>(&cfg)?;
            if let Some(step) = flow_step {
                if step <= 0.0 {
                    return Err(Error::Config(format!(
                        "--flow-step must be positive, got {step}"
                    )));
                }
                family = family.with_flow_step(step);
            }
            let grid = resolve_grid(&cfg, grid.as_deref(), &family)?;
            let gauge = resolve_gauge(&cfg, gauge.as_deref())?;
            let start = parse_start(&start, &family)?;
            let report = check_family(&family, &grid)?;
            let recon = reconstruct_u(&family, &report, gauge)?;
            let law = verify_gradient_law(&family, &recon, &start, length)?;
            Ok(Outcome {
                content: law.to_json() + "\n",
                dest: out,
                code: 0,
            })
        }
        Command::Sample { config, grid, out } => {
            let cfg = read_config(&config)?;
            let family = load_family::<f64>(&cfg)?;
            let grid = resolve_grid(&cfg, grid.as_deref(), &family)?;
            let samples = sample_grid(&family, &grid)?;
            Ok(Outcome {
                content: samples_to_csv(&samples),
                dest: out,
                code: 0,
            })
        }
        Command::Catalog { emit } => match emit {
            Some(name) => {
                let entry = catalog_entry(&name).ok_or_else(|| {
                    Error::Config(format!("no catalog family named '{name}'"))
                })?;
                Ok(Outcome::stdout(entry.config.to_json() + "\n"))
            }
            None => {
                let mut text = String::new();
                for e in catalog() {
                    let _ = writeln!(
                        text,
                        "{} (dim {}): {}",
                        e.config.name, e.config.ambient_dim, e.notes
                    );
                    let _ = writeln!(text, "  components: {}", e.config.components.join(", "));
                    match e.harmonic {
                        Some(h) => {
                            let _ = writeln!(text, "  harmonic: {h}");
                        }
                        None => {
                            let _ = writeln!(text, "  harmonic: none (rejected by the leaf test)");
                        }
                    }
                }
                Ok(Outcome::stdout(text))
            }
        },
    }
}

fn read_config(path: &Path) -> Result<FamilyConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    FamilyConfig::from_json(&text)
}

fn parse_floats(text: &str, flag: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{flag}: '{part}' is not a number")))
        })
        .collect()
}

fn resolve_grid(
    cfg: &FamilyConfig,
    flag: Option<&str>,
    family: &Family64,
) -> Result<Vec<usize>> {
    let grid = match flag {
        Some(text) => text
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("--grid: '{part}' is not a count")))
            })
            .collect::<Result<Vec<usize>>>()?,
        None => cfg.grid_counts(),
    };
    if grid.len() != family.ambient_dim() {
        return Err(Error::Config(format!(
            "grid needs {} counts (sigma axes then t), got {}",
            family.ambient_dim(),
            grid.len()
        )));
    }
    if grid.iter().any(|&c| c == 0) {
        return Err(Error::Config("grid counts must be positive".into()));
    }
    Ok(grid)
}

fn resolve_gauge(cfg: &FamilyConfig, flag: Option<&str>) -> Result<Gauge<f64>> {
    if let Some(text) = flag {
        let v = parse_floats(text, "--gauge")?;
        if v.len() != 2 {
            return Err(Error::Config(format!(
                "--gauge needs 'u0,du0', got {} values",
                v.len()
            )));
        }
        return Gauge::new(v[0], v[1]);
    }
    if let Some(g) = &cfg.gauge {
        return Gauge::new(g.u0, g.du0);
    }
    Ok(Gauge::neutral())
}

fn parse_start(text: &str, family: &Family64) -> Result<ParamPoint<f64>> {
    let mut v = parse_floats(text, "--start")?;
    if v.len() != family.ambient_dim() {
        return Err(Error::Config(format!(
            "--start needs {} values (sigma axes then t), got {}",
            family.ambient_dim(),
            v.len()
        )));
    }
    let t = v.pop().unwrap();
    Ok(ParamPoint::new(v, t))
}
