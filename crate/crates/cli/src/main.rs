//! `dle`: command-line front end for the LE-logic engine.
//!
//! Exit codes: 0 derivable/true, 1 not derivable/false, 2 unsupported or
//! unknown, 3 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dle_core::bundles::Bundle;
use dle_core::calculus::{check_analytic, load_rules, RuleSpec};
use dle_core::classify::find_witness;
use dle_core::exec;
use dle_core::frames::{Countermodel, LEFrame, LATTICE_BOUND};
use dle_core::search::{decide, derive_cutfree, Decision, DeriveResult, DEFAULT_BUDGET};
use dle_core::selftest::{self, Config};
use dle_core::syntax::{parse_inequality, parse_sequent};
use dle_core::Signature;

#[derive(Parser)]
#[command(name = "dle", version, about = "Display calculi and finite countermodels for normal LE-logics")]
struct Cli {
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Accept structural rules that fail the analyticity check.
    #[arg(long = "unsafe", global = true)]
    unsafe_rules: bool,
    /// Extra structural rules (JSON list) added to the logic.
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the generated rules of a bundle or signature file.
    Rules { logic: String },
    /// Report the analyticity conditions of each rule in a rule file.
    CheckRule {
        file: PathBuf,
        #[arg(long, default_value = "lattice")]
        sig: String,
    },
    /// Search for an analytic inductive witness of `s <= t`.
    Classify {
        inequality: String,
        #[arg(long, default_value = "lattice")]
        sig: String,
    },
    /// Cut-free derivability.
    Derive {
        logic: String,
        sequent: String,
        #[arg(long)]
        proof: bool,
        #[arg(long)]
        json: bool,
        #[arg(long, env = "DLE_BUDGET", default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Decide a sequent, producing a countermodel when it is not derivable.
    Decide {
        logic: String,
        sequent: String,
        #[arg(long)]
        countermodel: Option<PathBuf>,
        #[arg(long)]
        proof: bool,
        #[arg(long, env = "DLE_BUDGET", default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Dump the lattice of stable sets of a polarity file.
    Lattice { file: PathBuf },
    /// Re-evaluate the goal of a countermodel file.
    Eval { file: PathBuf },
    /// Run the acceptance suite.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// A bundle name (`fl+exchange`), a bundle JSON file or a signature JSON file.
fn load_logic(spec: &str, cli: &Cli) -> Result<Bundle> {
    let path = Path::new(spec);
    let mut bundle = if path.is_file() {
        let text = read(path)?;
        let value: serde_json::Value = serde_json::from_str(&text).context("parsing logic file")?;
        if value.get("signature").is_some() {
            Bundle::from_json(&text, &[], cli.unsafe_rules)?
        } else {
            let sig = Signature::from_json(&text)
                .map_err(|errs| anyhow::anyhow!(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")))?;
            Bundle::from_signature(spec, sig)
        }
    } else {
        Bundle::load_with(spec, cli.unsafe_rules)?
    };
    if let Some(file) = &cli.rules {
        let extra = load_rules(&read(file)?, &bundle.sig, cli.unsafe_rules)?;
        bundle.rules.extend(extra);
    }
    Ok(bundle)
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(j) = cli.jobs {
        exec::configure_jobs(j);
    }
    match &cli.cmd {
        Cmd::Rules { logic } => {
            let calc = load_logic(logic, cli)?.calculus();
            for r in &calc.rules {
                println!("{r}");
            }
            match calc.certificate() {
                Some(c) => println!("certificate: {c:?}"),
                None => println!("certificate: none"),
            }
            Ok(0)
        }
        Cmd::CheckRule { file, sig } => {
            let b = load_logic(sig, cli)?;
            let specs: Vec<RuleSpec> = serde_json::from_str(&read(file)?).context("parsing rule file")?;
            let mut ok = true;
            for s in &specs {
                let r = s.to_schema(&b.sig)?;
                let report = check_analytic(&r, &b.sig);
                ok &= report.accepted();
                print!("{report}");
            }
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Classify { inequality, sig } => {
            let b = load_logic(sig, cli)?;
            let ineq = parse_inequality(inequality, &b.sig)?;
            match find_witness(&ineq, &b.sig)? {
                Some(w) => {
                    println!("analytic inductive: {w}");
                    Ok(0)
                }
                None => {
                    println!("no witness");
                    Ok(1)
                }
            }
        }
        Cmd::Derive { logic, sequent, proof, json, budget } => {
            let calc = load_logic(logic, cli)?.calculus();
            let goal = parse_sequent(sequent, &calc.sig)?;
            match derive_cutfree(&goal, &calc, *budget) {
                DeriveResult::Derivable(p) => {
                    println!("DERIVABLE");
                    if *json {
                        println!("{}", p.to_json());
                    } else if *proof {
                        print!("{p}");
                    }
                    Ok(0)
                }
                DeriveResult::NotDerivable => {
                    println!("NOT_DERIVABLE");
                    Ok(1)
                }
                DeriveResult::Unknown(why) => {
                    println!("UNKNOWN: {why}");
                    Ok(2)
                }
            }
        }
        Cmd::Decide { logic, sequent, countermodel, proof, budget } => {
            let calc = load_logic(logic, cli)?.calculus();
            let goal = parse_sequent(sequent, &calc.sig)?;
            let d = decide(&goal, &calc, *budget)?;
            match &d {
                Decision::Derivable(p) => {
                    println!("DERIVABLE");
                    if *proof {
                        print!("{p}");
                    }
                }
                Decision::NotDerivable(cm) => {
                    println!("NOT_DERIVABLE (countermodel |W|={}, |U|={})", cm.frame.pol.w_len(), cm.frame.pol.u_len());
                    if let Some(out) = countermodel {
                        std::fs::write(out, cm.to_json()).with_context(|| format!("writing {}", out.display()))?;
                        println!("countermodel written to {}", out.display());
                    }
                }
                Decision::Unsupported(why) => println!("UNSUPPORTED: {why}"),
                Decision::Unknown(why) => println!("UNKNOWN: {why}"),
            }
            Ok(d.exit_code() as u8)
        }
        Cmd::Lattice { file } => {
            let frame = LEFrame::from_json(&read(file)?)?;
            let mut sets = frame.pol.stable_sets(LATTICE_BOUND)?;
            sets.sort_by_key(|s| (s.count_ones(..), s.ones().collect::<Vec<_>>()));
            println!("{} stable sets", sets.len());
            for s in &sets {
                let ext: Vec<&str> = s.ones().map(|i| frame.w_labels[i].as_str()).collect();
                let int: Vec<&str> = frame.pol.up(s).ones().map(|i| frame.u_labels[i].as_str()).collect();
                println!("{{{}}} | {{{}}}", ext.join(", "), int.join(", "));
            }
            Ok(0)
        }
        Cmd::Eval { file } => {
            let cm = Countermodel::from_json(&read(file)?)?;
            let holds = !cm.refutes()?;
            println!("{}: {}", cm.goal, holds);
            Ok(if holds { 0 } else { 1 })
        }
        Cmd::Selftest { seed, quick } => {
            let mut cfg = Config { seed: *seed, ..Config::default() };
            if *quick {
                cfg = Config { proofs: 20, goals: 10, frames: 20, relations: 100, seed: *seed };
            }
            let outcomes = selftest::run_all(&cfg);
            for o in &outcomes {
                println!("{o}");
            }
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 3 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
