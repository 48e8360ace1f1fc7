//! Command-line front end: sequence design, exact-propagator evaluation,
//! scaling scans, family sweeps, the full-third-order search, and the
//! Magnus closed-form cross-check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use seldd::config::{
    atomic_write, fmt_f64, matrix_to_pairs, RunManifest, SequenceFile, SystemConfig,
};
use seldd::error::Error;
use seldd::evaluator;
use seldd::magnus;
use seldd::matrix::CMatrix;
use seldd::sequence::{self, Branch, PulseSequence};
use seldd::solver;
use seldd::system::{pulse_operator, LevelSystem};

#[derive(Parser)]
#[command(name = "seldd", version, about = "Selective dynamical-decoupling sequence design")]
struct Cli {
    /// RNG seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the primary JSON output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Tolerance for the search refinement and report thresholds.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Uhrig sequence for an even pulse count.
    Uhrig {
        #[arg(long)]
        n: usize,
    },
    /// Design a sequence: the exact n=2 solution or an n=4 family member.
    Design {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta1: Option<f64>,
        /// Closed-form sign branch; omit to return every feasible branch.
        #[arg(long)]
        branch: Option<String>,
    },
    /// Evaluate a sequence on a system: exact propagator and residual metrics.
    Evaluate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        tf: f64,
    },
    /// Scaling study over a log-spaced evolution-time grid.
    Scan {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        sequence: PathBuf,
        #[arg(long)]
        tf_min: f64,
        #[arg(long)]
        tf_max: f64,
        #[arg(long, default_value_t = 9)]
        points: usize,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// Sweep the n=4 family and emit the residual table.
    Solve {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 99)]
        sweep: usize,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Search for sequences canceling the full third order (expected empty).
    SearchExact {
        #[arg(long, default_value_t = 1000)]
        grid: usize,
        #[arg(long, default_value_t = 200)]
        newton_starts: usize,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Cross-validate the closed-form Magnus coefficients against the
    /// ordered-sum oracle over random Hamiltonians.
    MagnusCheck {
        #[arg(long)]
        order: u32,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Comma-separated fractions; defaults to the Uhrig n=4 sequence.
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        sequence: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        tf: f64,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::BranchCut { .. } | Error::FitUnderdetermined { .. } | Error::TimeTooLarge { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn emit_json(cli: &Cli, command: &str, params: serde_json::Value, value: &serde_json::Value) -> seldd::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match &cli.out {
        Some(path) => {
            atomic_write(path, &format!("{text}\n"))?;
            write_manifest(path, command, params, cli.seed)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn write_manifest(
    target: &Path,
    command: &str,
    params: serde_json::Value,
    seed: u64,
) -> seldd::Result<()> {
    let manifest = RunManifest::new(command, params, seed);
    let mut path = target.as_os_str().to_owned();
    path.push(".manifest.json");
    let path = PathBuf::from(path);
    atomic_write(&path, &format!("{}\n", serde_json::to_string_pretty(&manifest)?))?;
    Ok(())
}

fn load_inputs(system: &Path, sequence: &Path) -> seldd::Result<(LevelSystem, CMatrix, PulseSequence)> {
    let (sys, h) = SystemConfig::from_path(system)?.into_parts()?;
    let seq = SequenceFile::from_path(sequence)?.into_sequence()?;
    Ok((sys, h, seq))
}

fn sequence_json(seq: &PulseSequence) -> serde_json::Value {
    serde_json::to_value(SequenceFile::from_sequence(seq)).expect("sequence serializes")
}

fn solution_json(branch: Option<Branch>, seq: &PulseSequence) -> seldd::Result<serde_json::Value> {
    let res = solver::residuals(seq)?;
    Ok(json!({
        "branch": branch.map(|b| b.name()),
        "sequence": sequence_json(seq),
        "residuals": res,
    }))
}

fn run(cli: &Cli) -> seldd::Result<()> {
    match &cli.command {
        Command::Uhrig { n } => {
            let seq = sequence::uhrig(*n)?;
            emit_json(cli, "uhrig", json!({"n": n}), &sequence_json(&seq))
        }
        Command::Design { n, delta1, branch } => {
            let params = json!({"n": n, "delta1": delta1, "branch": branch});
            let solutions: Vec<serde_json::Value> = match (*n, delta1) {
                (2, _) => vec![solution_json(None, &solver::solve_n2())?],
                (4, Some(d1)) => match branch {
                    Some(name) => {
                        let b: Branch = name.parse()?;
                        vec![solution_json(Some(b), &sequence::family_n4(*d1, b)?)]
                            .into_iter()
                            .collect::<Result<_, _>>()?
                    }
                    None => {
                        let feasible = sequence::family_n4_feasible(*d1)?;
                        if feasible.is_empty() {
                            return Err(Error::InvalidSequence(format!(
                                "no feasible branch at delta1 = {d1}"
                            )));
                        }
                        feasible
                            .iter()
                            .map(|(b, seq)| solution_json(Some(*b), seq))
                            .collect::<Result<_, _>>()?
                    }
                },
                (4, None) => {
                    return Err(Error::Config("design --n 4 requires --delta1".into()))
                }
                (other, _) => return Err(Error::UnsupportedPulseCount(other)),
            };
            emit_json(cli, "design", params, &json!({ "solutions": solutions }))
        }
        Command::Evaluate { system, sequence, tf } => {
            let (sys, h, seq) = load_inputs(system, sequence)?;
            let plan = pulse_operator(&sys);
            let report = evaluator::evaluate(&h, &plan, &seq, *tf)?;
            let value = json!({
                "tf": report.tf,
                "unwanted_residual": report.unwanted_residual,
                "wanted_deviation": report.wanted_deviation,
                "preserved_coupling_deviation": report.preserved_coupling_deviation,
                "h_eff": matrix_to_pairs(&report.h_eff),
                "propagator": matrix_to_pairs(&report.propagator),
            });
            emit_json(
                cli,
                "evaluate",
                json!({"system": system, "sequence": sequence, "tf": tf}),
                &value,
            )
        }
        Command::Scan {
            system,
            sequence,
            tf_min,
            tf_max,
            points,
            out_csv,
        } => {
            let (sys, h, seq) = load_inputs(system, sequence)?;
            let plan = pulse_operator(&sys);
            let fit = evaluator::scaling_study(&h, &plan, &seq, *tf_min, *tf_max, *points)?;
            let mut csv = String::from("tf,unwanted_residual,wanted_deviation\n");
            for (tf, unwanted, wanted) in &fit.grid {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt_f64(*tf),
                    fmt_f64(*unwanted),
                    fmt_f64(*wanted)
                ));
            }
            let params = json!({
                "system": system, "sequence": sequence,
                "tf_min": tf_min, "tf_max": tf_max, "points": points,
            });
            atomic_write(out_csv, &csv)?;
            write_manifest(out_csv, "scan", params.clone(), cli.seed)?;
            let value = json!({
                "slope_unwanted": fit.slope_unwanted,
                "slope_wanted": fit.slope_wanted,
                "excluded": fit.excluded,
            });
            emit_json(cli, "scan", params, &value)
        }
        Command::Solve { n, sweep, out_csv } => {
            if *n == 2 {
                let value = json!({ "solutions": [solution_json(None, &solver::solve_n2())?] });
                return emit_json(cli, "solve", json!({"n": n}), &value);
            }
            if *n != 4 {
                return Err(Error::UnsupportedPulseCount(*n));
            }
            let table = solver::sweep_family_n4(*sweep)?;
            let params = json!({"n": n, "sweep": sweep});
            if let Some(path) = out_csv {
                let mut csv = String::from(
                    "delta1,branch,d0,d1,d2,d3,d4,sum_defect,parity_defect,S,C1,C2,C1_plus_C2\n",
                );
                for row in &table.rows {
                    let r = &row.residuals;
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                        fmt_f64(row.delta1),
                        row.branch.name(),
                        fmt_f64(row.deltas[0]),
                        fmt_f64(row.deltas[1]),
                        fmt_f64(row.deltas[2]),
                        fmt_f64(row.deltas[3]),
                        fmt_f64(row.deltas[4]),
                        fmt_f64(r.sum_defect),
                        fmt_f64(r.parity_defect),
                        fmt_f64(r.second_order),
                        fmt_f64(r.third_c1),
                        fmt_f64(r.third_c2),
                        fmt_f64(r.third_cross),
                    ));
                }
                atomic_write(path, &csv)?;
                write_manifest(path, "solve", params.clone(), cli.seed)?;
            }
            let value = json!({
                "rows": table.rows.len(),
                "infeasible_branches": table.infeasible_branches,
                "max_residual": table
                    .rows
                    .iter()
                    .map(|r| r.residuals.max_family_residual())
                    .fold(0.0f64, f64::max),
            });
            emit_json(cli, "solve", params, &value)
        }
        Command::SearchExact {
            grid,
            newton_starts,
            out_csv,
        } => {
            let outcome = solver::search_full_third_order(*grid, cli.tol)?;
            let newton_roots = solver::newton_search_raw(*newton_starts, cli.seed, 1e-12);
            let params = json!({
                "grid": grid, "refine_tol": cli.tol, "newton_starts": newton_starts,
            });
            if let Some(path) = out_csv {
                let mut csv = String::from("delta1,branch,C1\n");
                for (delta1, branch, c1) in &outcome.scan {
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        fmt_f64(*delta1),
                        branch.name(),
                        fmt_f64(*c1)
                    ));
                }
                atomic_write(path, &csv)?;
                write_manifest(path, "search-exact", params.clone(), cli.seed)?;
            }
            let value = json!({
                "candidates": outcome.candidates,
                "newton_physical_roots": newton_roots,
                "min_abs_c1": outcome.min_abs_c1,
                "argmin_delta1": outcome.argmin_delta1,
                "argmin_branch": outcome.argmin_branch.name(),
                "grid": outcome.grid,
                "refine_tol": outcome.refine_tol,
            });
            emit_json(cli, "search-exact", params, &value)
        }
        Command::MagnusCheck {
            order,
            trials,
            deltas,
            sequence: seq_path,
            tf,
        } => {
            if *order < 2 || *order > 3 {
                return Err(Error::UnsupportedOrder(*order));
            }
            let seq = match (deltas, seq_path) {
                (Some(text), _) => {
                    let parsed: Vec<f64> = text
                        .split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<f64>()
                                .map_err(|e| Error::Config(format!("bad fraction {s:?}: {e}")))
                        })
                        .collect::<Result<_, _>>()?;
                    PulseSequence::new(parsed)?
                }
                (None, Some(path)) => SequenceFile::from_path(path)?.into_sequence()?,
                (None, None) => sequence::uhrig(4)?,
            };
            let plan = pulse_operator(&LevelSystem::new(3)?);
            let report = magnus::closed_form_vs_oracle(&seq, &plan, *tf, *trials, cli.seed)?;
            let params = json!({
                "order": order, "trials": trials, "tf": tf,
                "deltas": seq.deltas(),
            });
            let value = json!({
                "order": order,
                "report": report,
                "max_relative_deviation": if *order == 2 {
                    report.max_dev_order2
                } else {
                    report.max_dev_order3
                },
                "third_order_normalization": magnus::THIRD_ORDER_NORMALIZATION,
            });
            emit_json(cli, "magnus-check", params, &value)
        }
    }
}
