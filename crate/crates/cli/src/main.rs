//! Seeded residual checks with deterministic reports.
//!
//! Every subcommand builds one serializable envelope: schema version, the
//! effective seed and tolerances, the module report, and the list of gate
//! failures. The same configuration always produces byte-identical JSON.
//! Exit codes: 0 all gates pass, 1 at least one gate failed, 2 the inputs
//! could not be parsed or a computation could not run.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gema_core::bhk;
use gema_core::kvn::{LGParams, WaveFunction};
use gema_core::potentials::BuiltinPotential;
use gema_core::sweep::{
    self, describe_polynomial, lg_report, sweep_cone, sweep_family, sweep_fibration,
    sweep_potential,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "gema", version, about = "Residual checks for Hessian structures, dual families, mirror pairs, torus fibrations and symmetric cones")]
struct Cli {
    /// Seed of the run; every module draws from its own stream of it.
    #[arg(long, global = true, default_value_t = sweep::DEFAULT_SEED)]
    seed: u64,
    /// Override a gate, e.g. --tol ma=1e-4. Repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to a file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Monge-Ampere, compatibility and symmetry residuals of one potential.
    ///
    /// Potentials: quadratic, simplex-entropy, softmax (all sized by --dim,
    /// the chart dimension) and logdet-N for N x N matrices.
    #[command(name = "gema-check")]
    GemaCheck {
        potential: String,
        /// Chart dimension; matrix size for the determinant family.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Legendre duality residuals of the categorical family.
    #[command(name = "expfam-check")]
    ExpfamCheck {
        #[arg(long, default_value_t = 4)]
        atoms: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Weights, atoms, symmetry group and transposed partner of an
    /// invertible polynomial like "x0^4*x1 + x1^3 + x2^2".
    Bhk { polynomial: String },
    /// Moment-map and fiber diagnostics over a weight system.
    Syz {
        polynomial: String,
        #[arg(long, default_value_t = 40)]
        samples: usize,
        /// Slice level in weight space; defaults to 1/degree.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Free energy, equation residual and family projection of a stored
    /// wavefunction (.json or .csv) with coefficients from a JSON file.
    Kvn {
        wavefunction: PathBuf,
        params: PathBuf,
    },
    /// Determinant-cone constants, geodesics and the flat Cartan torus.
    #[command(name = "cone-check")]
    ConeCheck {
        /// Matrix rank of the cone.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    schema_version: u32,
    command: String,
    seed: u64,
    tolerances: BTreeMap<String, f64>,
    report: T,
    failures: Vec<String>,
    pass: bool,
}

/// Named thresholds with overrides; anything checked against a missing name
/// is reported, not gated.
struct Gates {
    tols: BTreeMap<String, f64>,
    failures: Vec<String>,
}

impl Gates {
    fn new(
        defaults: &[(&str, f64)],
        optional: &[&str],
        overrides: &[String],
    ) -> Result<Self, String> {
        let mut tols: BTreeMap<String, f64> = defaults
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        for spec in overrides {
            let (name, value) = spec
                .split_once('=')
                .ok_or_else(|| format!("tolerance override '{spec}' is not NAME=VALUE"))?;
            if !tols.contains_key(name) && !optional.contains(&name) {
                return Err(format!("unknown tolerance '{name}'"));
            }
            let value: f64 = value
                .parse()
                .map_err(|_| format!("tolerance value in '{spec}' is not a number"))?;
            tols.insert(name.to_string(), value);
        }
        Ok(Gates { tols, failures: Vec::new() })
    }

    fn check(&mut self, name: &str, value: f64) {
        if let Some(&tol) = self.tols.get(name) {
            if !(value <= tol) {
                self.failures.push(format!("{name} {value:e} exceeds {tol:e}"));
            }
        }
    }

    fn require(&mut self, name: &str, ok: bool, detail: &str) {
        if !ok {
            self.failures.push(format!("{name}: {detail}"));
        }
    }
}

fn envelope<T: Serialize>(command: &str, seed: u64, gates: Gates, report: T) -> Envelope<T> {
    let pass = gates.failures.is_empty();
    Envelope {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        seed,
        tolerances: gates.tols,
        report,
        failures: gates.failures,
        pass,
    }
}

fn parse_potential(name: &str, dim: Option<usize>) -> Result<BuiltinPotential, String> {
    if let Some(rest) = name.strip_prefix("logdet-") {
        let size: usize = rest
            .parse()
            .map_err(|_| format!("bad matrix size in potential '{name}'"))?;
        if !(2..=6).contains(&size) {
            return Err(format!("logdet size {size} out of range 2..=6"));
        }
        return Ok(BuiltinPotential::LogDet { size });
    }
    match name {
        "quadratic" => Ok(BuiltinPotential::Quadratic { dim: dim.unwrap_or(3) }),
        "simplex-entropy" => {
            let d = dim.unwrap_or(3);
            if d < 1 {
                return Err("simplex-entropy needs dim >= 1".into());
            }
            Ok(BuiltinPotential::SimplexEntropy { atoms: d + 1 })
        }
        "softmax" => {
            let d = dim.unwrap_or(3);
            if d < 1 {
                return Err("softmax needs dim >= 1".into());
            }
            Ok(BuiltinPotential::LogSumExp { atoms: d + 1 })
        }
        "logdet" => {
            let size = dim.unwrap_or(2);
            if !(2..=6).contains(&size) {
                return Err(format!("logdet size {size} out of range 2..=6"));
            }
            Ok(BuiltinPotential::LogDet { size })
        }
        other => Err(format!(
            "unknown potential '{other}'; use quadratic, simplex-entropy, softmax or logdet-N"
        )),
    }
}

/// Render the envelope: one key per line for humans, the exact serde bytes
/// for machines.
fn render<T: Serialize>(env: &Envelope<T>, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(env).expect("reports serialize");
            s.push('\n');
            s
        }
        Format::Text => {
            let value = serde_json::to_value(env).expect("reports serialize");
            let mut out = format!("{} (seed {})\n", env.command, env.seed);
            if let serde_json::Value::Object(map) = &value["report"] {
                for (k, v) in map {
                    out.push_str(&format!("  {k}: {v}\n"));
                }
            }
            for f in &env.failures {
                out.push_str(&format!("  FAIL {f}\n"));
            }
            out.push_str(if env.pass { "PASS\n" } else { "FAIL\n" });
            out
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("writing {path:?}: {e}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    let seed = cli.seed;
    let core = |e: gema_core::Error| e.to_string();
    match &cli.command {
        Command::GemaCheck { potential, dim, samples } => {
            let p = parse_potential(potential, *dim)?;
            let mut gates = Gates::new(
                &[
                    ("ma", 1e-5),
                    ("compatibility", 1e-6),
                    ("symmetry", 1e-6),
                    ("fd-gap", 1e-6),
                ],
                &["wdvv"],
                &cli.tol,
            )?;
            let report = sweep_potential(&p, *samples, seed).map_err(core)?;
            gates.check("ma", report.max_ma_residual);
            gates.check("compatibility", report.max_compatibility);
            gates.check("symmetry", report.max_symmetry_defect);
            gates.check("fd-gap", report.max_fd_gap);
            gates.check("wdvv", report.max_wdvv);
            let env = envelope("gema-check", seed, gates, report);
            emit(&render(&env, cli.format), cli.out.as_ref())?;
            Ok(env.pass)
        }
        Command::ExpfamCheck { atoms, samples } => {
            let mut gates = Gates::new(
                &[
                    ("roundtrip", 1e-8),
                    ("fenchel", 1e-10),
                    ("dual-ma", 1e-5),
                    ("fisher-fd", 1e-7),
                ],
                &[],
                &cli.tol,
            )?;
            let report = sweep_family(*atoms, *samples, seed).map_err(core)?;
            gates.check("roundtrip", report.max_roundtrip);
            gates.check("fenchel", report.max_fenchel_gap);
            gates.check("dual-ma", report.max_dual_ma_relative);
            gates.check("fisher-fd", report.max_fisher_fd_gap);
            let env = envelope("expfam-check", seed, gates, report);
            emit(&render(&env, cli.format), cli.out.as_ref())?;
            Ok(env.pass)
        }
        Command::Bhk { polynomial } => {
            let gates = Gates::new(&[], &[], &cli.tol)?;
            let e = bhk::parse_polynomial(polynomial).map_err(core)?;
            let report = describe_polynomial(&e).map_err(core)?;
            let env = envelope("bhk", seed, gates, report);
            emit(&render(&env, cli.format), cli.out.as_ref())?;
            Ok(env.pass)
        }
        Command::Syz { polynomial, samples, level } => {
            let mut gates = Gates::new(
                &[
                    ("orbit", 1e-12),
                    ("fiber", 1e-12),
                    ("isotropy", 1e-12),
                    ("legendre", 1e-10),
                ],
                &["level-defect"],
                &cli.tol,
            )?;
            let e = bhk::parse_polynomial(polynomial).map_err(core)?;
            let report = sweep_fibration(&e, *samples, *level, seed).map_err(core)?;
            gates.check("orbit", report.max_moment_invariance);
            gates.check("fiber", report.max_fiber_roundtrip);
            gates.check("isotropy", report.max_isotropy);
            gates.check("legendre", report.legendre_roundtrip);
            gates.check("level-defect", report.max_level_defect);
            let env = envelope("syz", seed, gates, report);
            emit(&render(&env, cli.format), cli.out.as_ref())?;
            Ok(env.pass)
        }
        Command::Kvn { wavefunction, params } => {
            let mut gates = Gates::new(
                &[("phase-energy", 1e-10), ("phase-theta", 1e-10)],
                &["lg-residual", "mass"],
                &cli.tol,
            )?;
            let text = std::fs::read_to_string(wavefunction)
                .map_err(|e| format!("reading {wavefunction:?}: {e}"))?;
            let psi = if wavefunction.extension().is_some_and(|x| x == "csv") {
                WaveFunction::from_csv(&text).map_err(core)?
            } else {
                WaveFunction::from_json(&text).map_err(core)?
            };
            let ptext = std::fs::read_to_string(params)
                .map_err(|e| format!("reading {params:?}: {e}"))?;
            let lg: LGParams =
                serde_json::from_str(&ptext).map_err(|e| format!("params file: {e}"))?;
            let report = lg_report(&psi, &lg).map_err(core)?;
            if let Some(drift) = report.phase_energy_drift {
                gates.check("phase-energy", drift);
            }
            gates.check("phase-theta", report.phase_theta_drift);
            gates.check("mass", (report.mass - 1.0).abs());
            if let Some(r) = report.max_equation_residual {
                gates.check("lg-residual", r);
            }
            let env = envelope("kvn", seed, gates, report);
            emit(&render(&env, cli.format), cli.out.as_ref())?;
            Ok(env.pass)
        }
        Command::ConeCheck { dim, samples } => {
            let mut gates = Gates::new(
                &[
                    ("spread", 1e-5),
                    ("geodesic", 1e-6),
                    ("trace", 1e-12),
                    ("flatness", 1e-6),
                ],
                &[],
                &cli.tol,
            )?;
            let report = sweep_cone(*dim, *samples, seed).map_err(core)?;
            gates.check("spread", report.ratio_spread);
            gates.check("geodesic", report.geodesic_ode_gap);
            gates.check("trace", report.max_trace_invariance);
            gates.check("flatness", report.cartan_flatness);
            let exact = report.cartan.wdvv_residual == 0.0
                && report.cartan.compatibility_residual == 0.0
                && report.cartan.unit_residual == 0.0;
            gates.require("cartan-exact", exact, "tangent algebra residuals are nonzero");
            let env = envelope("cone-check", seed, gates, report);
            emit(&render(&env, cli.format), cli.out.as_ref())?;
            Ok(env.pass)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
