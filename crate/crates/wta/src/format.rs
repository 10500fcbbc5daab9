//! The `.wta` text format.
//!
//! ```text
//! # comments run to the end of the line
//! semifield: rational
//! ranks: alpha:0 gamma:1 sigma:2
//! states: q_1 q_2
//! final: q_1
//! transitions:
//! alpha -> q_1 : 1
//! sigma(q_1,q_2) -> q_2 : 4/3
//! ```
//!
//! The five sections appear in this order. Printing is canonical: symbols,
//! states and transitions are sorted, so `parse(print(m)) == m` and printing
//! is a fixed point.

use std::fmt::Write as _;

use crate::automaton::Wta;
use crate::semifield::Semifield;
use crate::transform::PushWeights;
use crate::tree::{RankedAlphabet, Tree};
use crate::{Error, Result};

struct Line<'a> {
    number: usize,
    content: &'a str,
}

fn meaningful_lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .map(|(i, raw)| Line {
            number: i + 1,
            content: raw.split('#').next().unwrap_or("").trim(),
        })
        .filter(|l| !l.content.is_empty())
        .collect()
}

fn section<'a>(lines: &mut std::slice::Iter<'a, Line<'a>>, keyword: &str) -> Result<&'a Line<'a>> {
    let line = lines.next().ok_or_else(|| {
        Error::parse(0, 1, format!("missing `{keyword}:` section"))
    })?;
    if line.content == format!("{keyword}:") || line.content.starts_with(&format!("{keyword}:")) {
        Ok(line)
    } else {
        Err(Error::parse(
            line.number,
            1,
            format!("expected `{keyword}:` section"),
        ))
    }
}

fn section_tokens<'a>(line: &Line<'a>, keyword: &str) -> Vec<&'a str> {
    line.content[keyword.len() + 1..]
        .split_whitespace()
        .collect()
}

/// Parses the textual automaton format. Nondeterminism is allowed; duplicate
/// `lhs -> target` lines, zero weights and malformed sections are rejected
/// with line/column diagnostics.
pub fn parse_automaton(text: &str) -> Result<Wta> {
    let lines = meaningful_lines(text);
    let mut iter = lines.iter();

    let sf_line = section(&mut iter, "semifield")?;
    let sf_tokens = section_tokens(sf_line, "semifield");
    if sf_tokens.len() != 1 {
        return Err(Error::parse(
            sf_line.number,
            1,
            "expected exactly one semifield name",
        ));
    }
    let semifield = Semifield::from_name(sf_tokens[0])
        .map_err(|e| Error::parse(sf_line.number, 1, e.to_string()))?;

    let ranks_line = section(&mut iter, "ranks")?;
    let mut symbols = Vec::new();
    for token in section_tokens(ranks_line, "ranks") {
        let (name, rank) = token.split_once(':').ok_or_else(|| {
            Error::parse(
                ranks_line.number,
                1,
                format!("expected `name:rank`, got `{token}`"),
            )
        })?;
        let rank: usize = rank.parse().map_err(|_| {
            Error::parse(
                ranks_line.number,
                1,
                format!("invalid rank in `{token}`"),
            )
        })?;
        symbols.push((name.to_string(), rank));
    }
    let alphabet = RankedAlphabet::new(symbols)
        .map_err(|e| Error::parse(ranks_line.number, 1, e.to_string()))?;

    let states_line = section(&mut iter, "states")?;
    let states: Vec<String> = section_tokens(states_line, "states")
        .iter()
        .map(|s| s.to_string())
        .collect();
    for w in {
        let mut sorted = states.clone();
        sorted.sort();
        sorted
    }
    .windows(2)
    {
        if w[0] == w[1] {
            return Err(Error::parse(
                states_line.number,
                1,
                format!("duplicate state `{}`", w[0]),
            ));
        }
    }

    let final_line = section(&mut iter, "final")?;
    let finals: Vec<String> = section_tokens(final_line, "final")
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in &finals {
        if !states.contains(name) {
            return Err(Error::parse(
                final_line.number,
                1,
                format!("unknown state `{name}` in final set"),
            ));
        }
    }

    let trans_line = section(&mut iter, "transitions")?;
    if !section_tokens(trans_line, "transitions").is_empty() {
        return Err(Error::parse(
            trans_line.number,
            1,
            "transitions start on the following lines",
        ));
    }

    let state_set: std::collections::BTreeSet<String> = states.iter().cloned().collect();
    let mut transitions = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for line in iter {
        let (lhs_text, rest) = line.content.split_once("->").ok_or_else(|| {
            Error::parse(line.number, 1, "expected `lhs -> target : weight`")
        })?;
        let (target_text, weight_text) = rest.split_once(':').ok_or_else(|| {
            Error::parse(line.number, 1, "expected `: weight` after the target")
        })?;
        let lhs = crate::tree::parse_tree(lhs_text.trim(), &alphabet, Some(&state_set))
            .map_err(|e| at_line(e, line.number))?;
        let (symbol, source_names) = match &lhs {
            Tree::Node(name, children) => {
                let sources = children
                    .iter()
                    .map(|c| match c {
                        Tree::Leaf(q) => Ok(q.clone()),
                        _ => Err(Error::parse(
                            line.number,
                            1,
                            "left-hand side arguments must be states",
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                (name.clone(), sources)
            }
            _ => {
                return Err(Error::parse(
                    line.number,
                    1,
                    "left-hand side must be a symbol applied to states",
                ))
            }
        };
        let target = target_text.trim().to_string();
        if !state_set.contains(&target) {
            return Err(Error::parse(
                line.number,
                1,
                format!("unknown state `{target}`"),
            ));
        }
        let weight = semifield
            .parse_value(weight_text.trim())
            .map_err(|e| at_line(e, line.number))?;
        if weight.is_zero() {
            return Err(Error::parse(
                line.number,
                1,
                "transition weight must be nonzero (omit the transition instead)",
            ));
        }
        if !seen.insert((symbol.clone(), source_names.clone(), target.clone())) {
            return Err(Error::parse(line.number, 1, "duplicate transition"));
        }
        transitions.push((symbol, source_names, target, weight));
    }

    Wta::new(semifield, alphabet, states, finals, transitions)
}

fn at_line(error: Error, line: usize) -> Error {
    match error {
        Error::Parse {
            column, message, ..
        } => Error::Parse {
            line,
            column,
            message,
        },
        other => Error::parse(line, 1, other.to_string()),
    }
}

/// Canonical text form: sections in fixed order, symbols/states/transitions
/// sorted, nullary left-hand sides without parentheses.
pub fn print_automaton(m: &Wta) -> String {
    let mut out = String::new();
    writeln!(out, "semifield: {}", m.semifield()).unwrap();
    let ranks: Vec<String> = m
        .alphabet()
        .iter()
        .map(|(_, name, rank)| format!("{name}:{rank}"))
        .collect();
    writeln!(out, "ranks:{}", prefix_spaced(&ranks)).unwrap();
    writeln!(out, "states:{}", prefix_spaced(m.state_names())).unwrap();
    let finals: Vec<String> = (0..m.num_states())
        .filter(|&q| m.is_final(q))
        .map(|q| m.state_name(q).to_string())
        .collect();
    writeln!(out, "final:{}", prefix_spaced(&finals)).unwrap();
    writeln!(out, "transitions:").unwrap();
    for t in m.transitions() {
        let lhs = if t.sources.is_empty() {
            m.alphabet().name(t.symbol).to_string()
        } else {
            format!(
                "{}({})",
                m.alphabet().name(t.symbol),
                t.sources
                    .iter()
                    .map(|&q| m.state_name(q))
                    .collect::<Vec<_>>()
                    .join(",")
            )
        };
        writeln!(out, "{lhs} -> {} : {}", m.state_name(t.target), t.weight).unwrap();
    }
    out
}

fn prefix_spaced<S: AsRef<str>>(items: &[S]) -> String {
    let mut s = String::new();
    for item in items {
        s.push(' ');
        s.push_str(item.as_ref());
    }
    s
}

/// Parses a pushing-weights file: one `state weight` pair per line, `#`
/// comments. Unlisted states default to weight 1.
pub fn parse_push_weights(text: &str, m: &Wta) -> Result<PushWeights> {
    let mut pairs = Vec::new();
    for line in meaningful_lines(text) {
        let tokens: Vec<&str> = line.content.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::parse(
                line.number,
                1,
                "expected `state weight` per line",
            ));
        }
        let weight = m
            .semifield()
            .parse_value(tokens[1])
            .map_err(|e| at_line(e, line.number))?;
        pairs.push((tokens[0].to_string(), weight));
    }
    PushWeights::from_named(m, pairs).map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::parse(0, 1, other.to_string()),
    })
}
