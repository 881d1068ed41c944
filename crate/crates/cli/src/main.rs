//! Command-line surface for the conefan library: fan construction and
//! validation, inclusion evaluation and certification, embeddings, and
//! network analysis.
//!
//! Exit codes: 0 on success or a certified result, 2 when a refutation or
//! violation was found (with witnesses in the output), 1 on input or
//! numerical errors. Identical invocations produce byte-identical output.

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use conefan::cones::{self, Cone};
use conefan::embeddings::{self, EmbedViolation, VerifyConfig};
use conefan::fans::Fan;
use conefan::inclusions::{
    certify_delta, CertMethod, Certificate, DeltaVec, EvalOutcome, FanGeometry, InclusionSpec,
};
use conefan::io;
use conefan::networks::{self, RateSpec, SimOptions, Termination};
use conefan::tolerance;
use conefan::tubes::SupConfig;
use nalgebra::DVector;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "conefan",
    version,
    about = "Polyhedral fans, toric differential inclusions, and reaction networks"
)]
struct Cli {
    /// Seed for every randomized procedure.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Geometric tolerance override (also honored via CONEFAN_TOLERANCE).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Sample-count override for randomized checks.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Write the primary output to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fan validation and construction.
    #[command(subcommand)]
    Fan(FanCmd),
    /// Single-cone queries.
    #[command(subcommand)]
    Cone(ConeCmd),
    /// Toric inclusion evaluation.
    #[command(subcommand)]
    Tdi(TdiCmd),
    /// Quasi-toric inclusion evaluation and certification.
    #[command(subcommand)]
    Qtdi(QtdiCmd),
    /// Embeddings between the two inclusion families.
    #[command(subcommand)]
    Embed(EmbedCmd),
    /// Reaction network checks, simulation, and membership.
    #[command(subcommand)]
    Net(NetCmd),
}

#[derive(Subcommand)]
enum FanCmd {
    /// Check the fan axioms on an explicit cone list.
    Validate { file: PathBuf },
    /// Generate the fan of a central hyperplane arrangement.
    FromHyperplanes { file: PathBuf },
}

#[derive(Subcommand)]
enum ConeCmd {
    /// Polar dual of a cone.
    Polar { file: PathBuf },
    /// Nearest point of a cone to a query point.
    Project {
        file: PathBuf,
        #[arg(long, value_name = "x1,...,xn", allow_hyphen_values = true)]
        point: String,
    },
    /// Full face lattice of a cone.
    Faces { file: PathBuf },
}

#[derive(Subcommand)]
enum TdiCmd {
    /// Evaluate the toric inclusion right-hand side at a point.
    Eval {
        #[arg(long)]
        fan: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_name = "x1,...,xn", allow_hyphen_values = true)]
        point: String,
        /// Skip the completeness requirement on the fan.
        #[arg(long)]
        allow_unchecked: bool,
    },
}

#[derive(Subcommand)]
enum QtdiCmd {
    /// Evaluate the quasi-toric inclusion right-hand side at a point.
    /// Thresholds are certified first unless --allow-unchecked is given.
    Eval {
        #[arg(long)]
        fan: PathBuf,
        #[arg(long, value_name = "d0,...,d(n-1)", allow_hyphen_values = true)]
        d: String,
        #[arg(long, value_name = "x1,...,xn", allow_hyphen_values = true)]
        point: String,
        /// Skip threshold certification and fan completeness checks.
        #[arg(long)]
        allow_unchecked: bool,
    },
    /// Certify that a threshold vector is well defined on a fan.
    Certify {
        #[arg(long)]
        fan: PathBuf,
        #[arg(long, value_name = "d0,...,d(n-1)", allow_hyphen_values = true)]
        d: String,
    },
}

#[derive(Subcommand)]
enum EmbedCmd {
    /// Certified thresholds embedding a toric inclusion.
    TdiToQtdi {
        #[arg(long)]
        fan: PathBuf,
        #[arg(long)]
        delta: f64,
    },
    /// Toric radius embedding a quasi-toric inclusion.
    QtdiToTdi {
        #[arg(long, value_name = "d0,...,d(n-1)", allow_hyphen_values = true)]
        d: String,
    },
    /// Sampled containment check between two inclusions on one fan.
    Verify {
        #[arg(long)]
        fan: PathBuf,
        /// Inner inclusion, e.g. "tdi:1.0" or "qtdi:1.414,1.0".
        #[arg(long)]
        inner: String,
        /// Outer inclusion, same grammar as --inner.
        #[arg(long)]
        outer: String,
    },
}

#[derive(Args)]
struct RateArgs {
    /// Constant rates, one per edge.
    #[arg(long, value_name = "k1,...,km")]
    k: Option<String>,
    /// Sinusoidal profile amplitudes in [0,1], one per edge (requires
    /// --sin-omegas and --sin-phases).
    #[arg(long, value_name = "a1,...,am", requires_all = ["sin_omegas", "sin_phases"])]
    sin_amplitudes: Option<String>,
    #[arg(long, value_name = "w1,...,wm")]
    sin_omegas: Option<String>,
    #[arg(long, value_name = "p1,...,pm")]
    sin_phases: Option<String>,
    /// Piecewise-constant random rates redrawn every PERIOD time units,
    /// log-uniform in the epsilon band, determined by --seed.
    #[arg(long, value_name = "PERIOD")]
    piecewise_period: Option<f64>,
}

#[derive(Subcommand)]
enum NetCmd {
    /// Weak reversibility and endotacticity verdicts.
    Check { file: PathBuf },
    /// Integrate mass-action dynamics; writes a trajectory CSV.
    Simulate {
        file: PathBuf,
        #[arg(long, value_name = "x1,...,xn", allow_hyphen_values = true)]
        x0: String,
        /// Time horizon.
        #[arg(short = 'T', long)]
        horizon: f64,
        #[command(flatten)]
        rates: RateArgs,
        #[arg(long, default_value_t = 1e-8)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-10)]
        atol: f64,
    },
    /// Check trajectory derivatives against an inclusion right-hand side.
    Membership {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        fan: PathBuf,
        /// Quasi-toric thresholds (certified first unless --allow-unchecked).
        #[arg(long, value_name = "d0,...,d(n-1)", conflicts_with = "tdi_delta", allow_hyphen_values = true)]
        qtdi_d: Option<String>,
        /// Toric radius.
        #[arg(long)]
        tdi_delta: Option<f64>,
        #[arg(long)]
        allow_unchecked: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(text) = std::env::var("CONEFAN_TOLERANCE") {
        match text.parse::<f64>() {
            Ok(t) => tolerance::set_geo_tol(t),
            Err(_) => {
                eprintln!("error: CONEFAN_TOLERANCE is not a number: {text}");
                return ExitCode::from(1);
            }
        }
    }
    if let Some(t) = cli.tolerance {
        tolerance::set_geo_tol(t);
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let sup_cfg = SupConfig {
        seed: cli.seed,
        samples: cli.samples,
    };
    match &cli.command {
        Command::Fan(cmd) => run_fan(cli, cmd),
        Command::Cone(cmd) => run_cone(cli, cmd),
        Command::Tdi(TdiCmd::Eval {
            fan,
            delta,
            point,
            allow_unchecked,
        }) => {
            let fan = load_fan(fan)?;
            let geo = FanGeometry::new(&fan);
            let x = parse_vector(point)?;
            let spec = InclusionSpec::Tdi { delta: *delta };
            let outcome = spec.eval(&geo, &x, *allow_unchecked)?;
            emit(cli, &eval_json(&outcome))?;
            Ok(0)
        }
        Command::Qtdi(cmd) => run_qtdi(cli, cmd, &sup_cfg),
        Command::Embed(cmd) => run_embed(cli, cmd, &sup_cfg),
        Command::Net(cmd) => run_net(cli, cmd),
    }
}

fn run_fan(cli: &Cli, cmd: &FanCmd) -> Result<u8> {
    match cmd {
        FanCmd::Validate { file } => {
            let text = read(file)?;
            match io::fan_source_from_json(&text)? {
                io::FanSource::Cones { cones, .. } => match Fan::validate(cones) {
                    Ok(fan) => {
                        emit_text(cli, &io::fan_to_json(&fan))?;
                        Ok(0)
                    }
                    Err(report) => {
                        let violations: Vec<String> =
                            report.violations.iter().map(|v| v.to_string()).collect();
                        emit(cli, &json!({ "valid": false, "violations": violations }))?;
                        Ok(2)
                    }
                },
                io::FanSource::Hyperplanes {
                    ambient_dim,
                    normals,
                } => {
                    // Generated fans satisfy the axioms by construction.
                    let fan = conefan::fans::hyperplane_fan(ambient_dim, &normals)?;
                    emit_text(cli, &io::fan_to_json(&fan))?;
                    Ok(0)
                }
            }
        }
        FanCmd::FromHyperplanes { file } => {
            let fan = io::fan_from_json(&read(file)?)?;
            emit_text(cli, &io::fan_to_json(&fan))?;
            Ok(0)
        }
    }
}

fn run_cone(cli: &Cli, cmd: &ConeCmd) -> Result<u8> {
    match cmd {
        ConeCmd::Polar { file } => {
            let cone = io::cone_from_json(&read(file)?)?;
            emit_text(cli, &io::cone_to_json(&cones::polar(&cone)))?;
            Ok(0)
        }
        ConeCmd::Project { file, point } => {
            let cone = io::cone_from_json(&read(file)?)?;
            let x = parse_vector(point)?;
            let result = cones::project_point(&cone, &x)?;
            emit(
                cli,
                &json!({
                    "nearest_point": dvec_rows(&result.nearest_point),
                    "distance": result.distance,
                    "active_face_dim": result.active_face_dim,
                }),
            )?;
            Ok(0)
        }
        ConeCmd::Faces { file } => {
            let cone = io::cone_from_json(&read(file)?)?;
            let faces = cones::face_lattice(&cone);
            emit(
                cli,
                &json!({
                    "count": faces.len(),
                    "faces": faces.iter().map(cone_json).collect::<Vec<_>>(),
                }),
            )?;
            Ok(0)
        }
    }
}

fn run_qtdi(cli: &Cli, cmd: &QtdiCmd, sup_cfg: &SupConfig) -> Result<u8> {
    match cmd {
        QtdiCmd::Eval {
            fan,
            d,
            point,
            allow_unchecked,
        } => {
            let fan = load_fan(fan)?;
            let geo = FanGeometry::new(&fan);
            let values = parse_list(d)?;
            let d = if *allow_unchecked {
                DeltaVec::unchecked(values)?
            } else {
                let delta_vec = certify_delta(&geo, values, sup_cfg)?;
                if let Certificate::Refuted { witness, cone_pair } = delta_vec.certificate() {
                    emit(cli, &refutation_json(witness, *cone_pair))?;
                    return Ok(2);
                }
                delta_vec
            };
            let x = parse_vector(point)?;
            let spec = InclusionSpec::Qtdi { d };
            let outcome = spec.eval(&geo, &x, *allow_unchecked)?;
            emit(cli, &eval_json(&outcome))?;
            Ok(0)
        }
        QtdiCmd::Certify { fan, d } => {
            let fan = load_fan(fan)?;
            let geo = FanGeometry::new(&fan);
            let delta_vec = certify_delta(&geo, parse_list(d)?, sup_cfg)?;
            match delta_vec.certificate() {
                Certificate::Certified { method, alpha } => {
                    emit(
                        cli,
                        &json!({
                            "certified": true,
                            "alpha": alpha,
                            "method": method_json(method),
                        }),
                    )?;
                    Ok(0)
                }
                Certificate::Refuted { witness, cone_pair } => {
                    emit(cli, &refutation_json(witness, *cone_pair))?;
                    Ok(2)
                }
                Certificate::Unchecked => bail!("certification produced no verdict"),
            }
        }
    }
}

fn run_embed(cli: &Cli, cmd: &EmbedCmd, sup_cfg: &SupConfig) -> Result<u8> {
    match cmd {
        EmbedCmd::TdiToQtdi { fan, delta } => {
            let fan = load_fan(fan)?;
            let geo = FanGeometry::new(&fan);
            let outcome = embeddings::embed_tdi_in_qtdi(&geo, *delta, sup_cfg)?;
            emit(
                cli,
                &json!({
                    "certified": true,
                    "d": outcome.d.entries(),
                    "alpha": outcome.alpha,
                    "lambda": outcome.lambda,
                }),
            )?;
            Ok(0)
        }
        EmbedCmd::QtdiToTdi { d } => {
            let delta_vec = DeltaVec::unchecked(parse_list(d)?)?;
            emit(cli, &json!({ "delta": embeddings::embed_qtdi_in_tdi(&delta_vec) }))?;
            Ok(0)
        }
        EmbedCmd::Verify { fan, inner, outer } => {
            let fan = load_fan(fan)?;
            let geo = FanGeometry::new(&fan);
            let inner = parse_inclusion(inner)?;
            let outer = parse_inclusion(outer)?;
            let cfg = VerifyConfig {
                seed: cli.seed,
                samples: cli.samples.unwrap_or(10_000),
                radius: None,
            };
            let report = embeddings::verify_embedding(&geo, &inner, &outer, &cfg)?;
            let violations: Vec<Value> = report
                .violations
                .iter()
                .map(|v| match v {
                    EmbedViolation::NotContained {
                        point,
                        inner_step,
                        outer_step,
                    } => json!({
                        "kind": "not_contained",
                        "point": dvec_rows(point),
                        "inner_step": inner_step,
                        "outer_step": outer_step,
                    }),
                    EmbedViolation::EvalFailed { point, message } => json!({
                        "kind": "eval_failed",
                        "point": dvec_rows(point),
                        "message": message,
                    }),
                })
                .collect();
            emit(
                cli,
                &json!({
                    "checked": report.checked,
                    "violations": report.violation_count,
                    "witnesses": violations,
                }),
            )?;
            Ok(if report.holds() { 0 } else { 2 })
        }
    }
}

fn run_net(cli: &Cli, cmd: &NetCmd) -> Result<u8> {
    match cmd {
        NetCmd::Check { file } => {
            let g = io::egraph_from_json(&read(file)?)?;
            let wr = networks::is_weakly_reversible(&g);
            let endo = networks::is_endotactic(&g, cli.seed);
            let mut payload = json!({
                "weakly_reversible": wr,
                "endotactic": endo.endotactic,
                "exact": endo.exact,
                "directions_checked": endo.directions_checked,
            });
            if let Some(w) = &endo.witness {
                payload["witness"] = json!(dvec_rows(w));
            }
            emit(cli, &payload)?;
            Ok(0)
        }
        NetCmd::Simulate {
            file,
            x0,
            horizon,
            rates,
            rtol,
            atol,
        } => {
            let g = io::egraph_from_json(&read(file)?)?;
            let k = parse_rates(rates, cli.seed)?;
            let x0 = parse_vector(x0)?;
            let opts = SimOptions {
                rtol: *rtol,
                atol: *atol,
                ..SimOptions::default()
            };
            let traj = networks::simulate(&g, &k, &x0, *horizon, &opts)?;
            emit_text(cli, &io::trajectory_to_csv(&traj))?;
            eprintln!("{}", termination_json(&traj.termination));
            Ok(0)
        }
        NetCmd::Membership {
            traj,
            fan,
            qtdi_d,
            tdi_delta,
            allow_unchecked,
        } => {
            let trajectory = io::trajectory_from_csv(&read(traj)?)?;
            let fan = load_fan(fan)?;
            let geo = FanGeometry::new(&fan);
            let spec = match (qtdi_d, tdi_delta) {
                (Some(d), None) => {
                    let values = parse_list(d)?;
                    let d = if *allow_unchecked {
                        DeltaVec::unchecked(values)?
                    } else {
                        let delta_vec = certify_delta(&geo, values, &SupConfig {
                            seed: cli.seed,
                            samples: cli.samples,
                        })?;
                        if let Certificate::Refuted { witness, cone_pair } =
                            delta_vec.certificate()
                        {
                            emit(cli, &refutation_json(witness, *cone_pair))?;
                            return Ok(2);
                        }
                        delta_vec
                    };
                    InclusionSpec::Qtdi { d }
                }
                (None, Some(delta)) => InclusionSpec::Tdi { delta: *delta },
                _ => bail!("provide exactly one of --qtdi-d or --tdi-delta"),
            };
            let report =
                networks::trajectory_membership(&geo, &spec, &trajectory, *allow_unchecked)?;
            let mut payload = json!({
                "checked": report.checked,
                "satisfied": report.satisfied,
                "fraction": report.fraction,
                "tolerance": report.tolerance,
            });
            if let Some(v) = &report.first_violation {
                payload["first_violation"] = json!({
                    "time": v.time,
                    "state": dvec_rows(&v.state),
                    "distance": v.distance,
                });
            }
            emit(cli, &payload)?;
            Ok(if report.holds() { 0 } else { 2 })
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_fan(path: &Path) -> Result<Fan> {
    Ok(io::fan_from_json(&read(path)?)?)
}

fn emit_text(cli: &Cli, payload: &str) -> Result<()> {
    let text = if payload.ends_with('\n') {
        payload.to_string()
    } else {
        format!("{payload}\n")
    };
    match &cli.output {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit(cli: &Cli, payload: &Value) -> Result<()> {
    emit_text(cli, &serde_json::to_string_pretty(payload)?)
}

fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {f:?}"))
        })
        .collect()
}

fn parse_vector(text: &str) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(parse_list(text)?))
}

/// Grammar: "tdi:DELTA" or "qtdi:D0,...,D(N-1)".
fn parse_inclusion(text: &str) -> Result<InclusionSpec> {
    if let Some(rest) = text.strip_prefix("tdi:") {
        Ok(InclusionSpec::Tdi {
            delta: rest
                .trim()
                .parse()
                .with_context(|| format!("bad tdi radius {rest:?}"))?,
        })
    } else if let Some(rest) = text.strip_prefix("qtdi:") {
        Ok(InclusionSpec::Qtdi {
            d: DeltaVec::unchecked(parse_list(rest)?)?,
        })
    } else {
        bail!("inclusion spec must look like tdi:1.0 or qtdi:1.414,1.0, got {text:?}")
    }
}

fn parse_rates(rates: &RateArgs, seed: u64) -> Result<RateSpec> {
    let given = [
        rates.k.is_some(),
        rates.sin_amplitudes.is_some(),
        rates.piecewise_period.is_some(),
    ]
    .iter()
    .filter(|b| **b)
    .count();
    if given != 1 {
        bail!("provide exactly one rate profile: --k, --sin-amplitudes (with omegas/phases), or --piecewise-period");
    }
    if let Some(k) = &rates.k {
        return Ok(RateSpec::Constant(parse_list(k)?));
    }
    if let Some(amps) = &rates.sin_amplitudes {
        return Ok(RateSpec::Sinusoidal {
            amplitudes: parse_list(amps)?,
            omegas: parse_list(rates.sin_omegas.as_ref().expect("required by clap"))?,
            phases: parse_list(rates.sin_phases.as_ref().expect("required by clap"))?,
        });
    }
    Ok(RateSpec::PiecewiseConstant {
        period: rates.piecewise_period.expect("checked above"),
        seed,
    })
}

fn dvec_rows(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn cone_json(cone: &Cone) -> Value {
    json!({
        "ambient_dim": cone.ambient_dim(),
        "generators": cone.generators().iter().map(dvec_rows).collect::<Vec<_>>(),
        "halfspaces": cone.halfspaces().iter().map(dvec_rows).collect::<Vec<_>>(),
        "dim": cone.dim(),
    })
}

fn eval_json(outcome: &EvalOutcome) -> Value {
    json!({
        "cone_index": outcome.source_index,
        "step": outcome.step,
        "polar_generators": outcome.rhs.generators().iter().map(dvec_rows).collect::<Vec<_>>(),
    })
}

fn refutation_json(witness: &DVector<f64>, cone_pair: (usize, usize)) -> Value {
    json!({
        "certified": false,
        "witness": dvec_rows(witness),
        "cone_pair": [cone_pair.0, cone_pair.1],
    })
}

fn method_json(method: &CertMethod) -> Value {
    match method {
        CertMethod::ExactLowDim => json!("exact-low-dim"),
        CertMethod::Sampled { samples, restarts } => {
            json!({ "sampled": { "samples": samples, "restarts": restarts } })
        }
        CertMethod::Construction => json!("construction"),
    }
}

fn termination_json(t: &Termination) -> Value {
    match t {
        Termination::Horizon => json!({ "termination": "horizon" }),
        Termination::PositivityFloor { component, time } => json!({
            "termination": "positivity_floor",
            "component": component,
            "time": time,
        }),
        Termination::BlowupCeiling { time } => json!({
            "termination": "blowup_ceiling",
            "time": time,
        }),
    }
}
