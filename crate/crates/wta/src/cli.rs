//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 for a negative `equiv` answer, 2 for usage
//! and parse errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::automaton::Wta;
use crate::congruence::coarsest_congruence;
use crate::equivalence::{counterexample, equivalent, Equivalence};
use crate::format::{parse_automaton, parse_push_weights, print_automaton};
use crate::partition::Partition;
use crate::sol::compute_sol;
use crate::transform::{alphabetic, minimize, push, PushWeights};
use crate::tree::parse_ground_tree;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "wta",
    version,
    about = "Weighted tree automata: pushing, minimization, equivalence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an automaton file.
    Validate { file: PathBuf },
    /// Print size, state counts and structural properties.
    Info { file: PathBuf },
    /// Print the recognized weight of a ground tree.
    Run {
        file: PathBuf,
        /// Tree literal, e.g. "gamma(beta)".
        #[arg(short, long)]
        tree: String,
    },
    /// Remove unreachable states.
    Trim {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the coarsest congruence respecting the final states.
    Congruence { file: PathBuf },
    /// Print live blocks, signs of life and pushing weights.
    Sol { file: PathBuf },
    /// Push weights (by default with the sign-of-life weights).
    Push {
        file: PathBuf,
        /// Weights file with one `state weight` line per state.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Move the weights into the symbols (weight-annotated automaton).
    Syn {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compute an equivalent minimal automaton.
    Minimize {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide equivalence of two automata.
    Equiv {
        a: PathBuf,
        b: PathBuf,
        /// Also print a witness tree when inequivalent.
        #[arg(long)]
        witness: bool,
    },
}

fn load(path: &Path) -> Result<Wta> {
    let text = std::fs::read_to_string(path)?;
    parse_automaton(&text).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
        } => Error::Parse {
            line,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn emit(out: &mut impl Write, output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Pushing weights from the sign-of-life computation; dead states (which
/// cannot influence the recognized language) get weight 1.
fn default_push_weights(m: &Wta) -> Result<PushWeights> {
    let weak = coarsest_congruence(m, &Partition::universal(m.num_states()))?;
    let sol = compute_sol(m, &weak)?;
    let weights = (0..m.num_states())
        .map(|q| sol.lambda(q).cloned().unwrap_or_else(|| m.semifield().one()))
        .collect();
    PushWeights::new(m, weights)
}

fn dispatch(command: Command, out: &mut impl Write) -> Result<i32> {
    match command {
        Command::Validate { file } => {
            load(&file)?;
            writeln!(out, "ok")?;
            Ok(0)
        }
        Command::Info { file } => {
            let m = load(&file)?;
            let live = m.live_states();
            let live_count = live.iter().filter(|&&l| l).count();
            writeln!(out, "semifield: {}", m.semifield())?;
            writeln!(out, "states: {}", m.num_states())?;
            writeln!(out, "final: {}", m.num_finals())?;
            writeln!(out, "transitions: {}", m.transitions().len())?;
            writeln!(out, "size: {}", m.size())?;
            writeln!(
                out,
                "deterministic: {}",
                if m.is_deterministic() { "yes" } else { "no" }
            )?;
            writeln!(
                out,
                "accessible: {}",
                if m.is_accessible() { "yes" } else { "no" }
            )?;
            writeln!(out, "live: {live_count}")?;
            writeln!(out, "dead: {}", m.num_states() - live_count)?;
            Ok(0)
        }
        Command::Run { file, tree } => {
            let m = load(&file)?;
            let t = parse_ground_tree(&tree, m.alphabet())?;
            writeln!(out, "{}", m.recognize(&t)?)?;
            Ok(0)
        }
        Command::Trim { file, output } => {
            let m = load(&file)?;
            emit(out, output.as_deref(), &print_automaton(&m.trim_accessible()))?;
            Ok(0)
        }
        Command::Congruence { file } => {
            let m = load(&file)?;
            let p = coarsest_congruence(&m, &Partition::universal(m.num_states()))?;
            write!(out, "{}", p.display_with(m.state_names()))?;
            Ok(0)
        }
        Command::Sol { file } => {
            let m = load(&file)?;
            let weak = coarsest_congruence(&m, &Partition::universal(m.num_states()))?;
            let sol = compute_sol(&m, &weak)?;
            // live blocks in sorted state order, then dead blocks
            for (b, block) in weak.blocks().enumerate() {
                if !sol.is_live_block(b) {
                    continue;
                }
                let names: Vec<&str> = block.iter().map(|&q| m.state_name(q)).collect();
                writeln!(out, "block {}", names.join(" "))?;
                writeln!(out, "  sol {}", sol.sol_context(&m, b).expect("live block"))?;
                for &q in block {
                    writeln!(
                        out,
                        "  lambda {} = {}",
                        m.state_name(q),
                        sol.lambda(q).expect("live state")
                    )?;
                }
            }
            for (_b, block) in weak.blocks().enumerate().filter(|(b, _)| !sol.is_live_block(*b)) {
                let names: Vec<&str> = block.iter().map(|&q| m.state_name(q)).collect();
                writeln!(out, "dead {}", names.join(" "))?;
            }
            Ok(0)
        }
        Command::Push {
            file,
            weights,
            output,
        } => {
            let m = load(&file)?;
            let lambda = match weights {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)?;
                    parse_push_weights(&text, &m)?
                }
                None => default_push_weights(&m)?,
            };
            emit(out, output.as_deref(), &print_automaton(&push(&m, &lambda)?))?;
            Ok(0)
        }
        Command::Syn { file, output } => {
            let m = load(&file)?;
            emit(out, output.as_deref(), &print_automaton(&alphabetic(&m)?))?;
            Ok(0)
        }
        Command::Minimize { file, output } => {
            let m = load(&file)?;
            emit(out, output.as_deref(), &print_automaton(&minimize(&m)?))?;
            Ok(0)
        }
        Command::Equiv { a, b, witness } => {
            let m1 = load(&a)?;
            let m2 = load(&b)?;
            match equivalent(&m1, &m2)? {
                Equivalence::Equivalent => {
                    writeln!(out, "equivalent")?;
                    Ok(0)
                }
                Equivalence::NotEquivalent(ineq) => {
                    writeln!(out, "not equivalent")?;
                    if witness {
                        let tree = match ineq.witness {
                            Some(t) => Some(t),
                            None => counterexample(&m1, &m2)?,
                        };
                        if let Some(t) = tree {
                            writeln!(out, "witness: {t}")?;
                            writeln!(out, "left: {}", m1.recognize(&t)?)?;
                            writeln!(out, "right: {}", m2.recognize(&t)?)?;
                        }
                    }
                    Ok(1)
                }
            }
        }
    }
}

/// Runs the CLI on `args` (including the program name), writing to the
/// given streams. Returns the process exit code.
pub fn run(args: &[String], out: &mut impl Write, err: &mut impl Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version print as normal output with exit 0
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}
