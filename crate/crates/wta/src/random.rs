//! Random automaton generators for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::automaton::Wta;
use crate::semifield::{Semifield, Value};
use crate::transform::PushWeights;
use crate::tree::RankedAlphabet;

/// Shape parameters for the small random automata used by the test suites.
#[derive(Debug, Clone)]
pub struct DwtaConfig {
    pub max_states: usize,
    pub nullary: usize,
    pub unary: usize,
    pub binary: usize,
    /// Target number of non-nullary transitions.
    pub transitions: usize,
}

impl DwtaConfig {
    pub fn small(max_states: usize) -> DwtaConfig {
        DwtaConfig {
            max_states,
            nullary: 2,
            unary: 1,
            binary: 1,
            transitions: 3 * max_states,
        }
    }
}

fn alphabet(cfg: &DwtaConfig) -> RankedAlphabet {
    let mut symbols = Vec::new();
    for i in 0..cfg.nullary {
        symbols.push((format!("a{i}"), 0));
    }
    for i in 0..cfg.unary {
        symbols.push((format!("g{i}"), 1));
    }
    for i in 0..cfg.binary {
        symbols.push((format!("s{i}"), 2));
    }
    RankedAlphabet::new(symbols).expect("generated names are valid")
}

fn random_weight(rng: &mut impl Rng) -> Value {
    Value::rational(rng.gen_range(1..=6), rng.gen_range(1..=4))
}

/// All left-hand sides over the alphabet and `n` states, as
/// `(symbol name, source names)` pairs.
fn all_lhs(cfg: &DwtaConfig, states: &[String]) -> Vec<(String, Vec<String>)> {
    let mut lhs = Vec::new();
    for i in 0..cfg.unary {
        for q in states {
            lhs.push((format!("g{i}"), vec![q.clone()]));
        }
    }
    for i in 0..cfg.binary {
        for q in states {
            for p in states {
                lhs.push((format!("s{i}"), vec![q.clone(), p.clone()]));
            }
        }
    }
    lhs
}

fn state_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

/// A random bottom-up deterministic automaton over the rationals with at
/// least one final state.
pub fn random_dwta(cfg: &DwtaConfig, rng: &mut impl Rng) -> Wta {
    let n = rng.gen_range(1..=cfg.max_states);
    let states = state_names(n);
    let mut transitions = Vec::new();
    for i in 0..cfg.nullary {
        if rng.gen_bool(0.85) {
            let target = states[rng.gen_range(0..n)].clone();
            transitions.push((format!("a{i}"), vec![], target, random_weight(rng)));
        }
    }
    let mut lhs = all_lhs(cfg, &states);
    lhs.shuffle(rng);
    lhs.truncate(cfg.transitions.min(lhs.len()));
    for (symbol, sources) in lhs {
        if rng.gen_bool(0.8) {
            let target = states[rng.gen_range(0..n)].clone();
            transitions.push((symbol, sources, target, random_weight(rng)));
        }
    }
    let mut finals: Vec<String> = states
        .iter()
        .filter(|_| rng.gen_bool(0.3))
        .cloned()
        .collect();
    if finals.is_empty() {
        finals.push(states[rng.gen_range(0..n)].clone());
    }
    Wta::new(
        Semifield::Rational,
        alphabet(cfg),
        states,
        finals,
        transitions,
    )
    .expect("generated automaton is valid")
}

/// A random, possibly nondeterministic automaton: left-hand sides may carry
/// several targets.
pub fn random_wta(cfg: &DwtaConfig, rng: &mut impl Rng) -> Wta {
    let n = rng.gen_range(1..=cfg.max_states);
    let states = state_names(n);
    let mut transitions = Vec::new();
    for i in 0..cfg.nullary {
        for _ in 0..rng.gen_range(1..=2) {
            let target = states[rng.gen_range(0..n)].clone();
            let entry = (format!("a{i}"), vec![], target, random_weight(rng));
            if !transitions
                .iter()
                .any(|(s, src, t, _): &(String, Vec<String>, String, Value)| {
                    (s, src, t) == (&entry.0, &entry.1, &entry.2)
                })
            {
                transitions.push(entry);
            }
        }
    }
    let lhs = all_lhs(cfg, &states);
    for _ in 0..cfg.transitions {
        let (symbol, sources) = lhs[rng.gen_range(0..lhs.len())].clone();
        let target = states[rng.gen_range(0..n)].clone();
        if !transitions
            .iter()
            .any(|(s, src, t, _)| (s, src, t) == (&symbol, &sources, &target))
        {
            transitions.push((symbol, sources, target, random_weight(rng)));
        }
    }
    let mut finals: Vec<String> = states
        .iter()
        .filter(|_| rng.gen_bool(0.3))
        .cloned()
        .collect();
    if finals.is_empty() {
        finals.push(states[rng.gen_range(0..n)].clone());
    }
    Wta::new(
        Semifield::Rational,
        alphabet(cfg),
        states,
        finals,
        transitions,
    )
    .expect("generated automaton is valid")
}

/// Random valid pushing weights: nonzero rationals (possibly negative),
/// weight 1 on the final states.
pub fn random_push_weights(m: &Wta, rng: &mut impl Rng) -> PushWeights {
    let weights = (0..m.num_states())
        .map(|q| {
            if m.is_final(q) {
                m.semifield().one()
            } else {
                let sign = if rng.gen_bool(0.25) { -1 } else { 1 };
                Value::rational(sign * rng.gen_range(1..=6), rng.gen_range(1..=4))
            }
        })
        .collect();
    PushWeights::new(m, weights).expect("weights are valid by construction")
}

/// A deterministic automaton family for scaling measurements: a unary chain
/// through all states (which keeps every state accessible and live) plus
/// random distinct binary transitions up to the requested count.
///
/// Chain transitions carry weight 1 so the intermediate pushing weights stay
/// a few machine words wide; the asymptotic claim being checked assumes
/// unit-cost semifield operations.
pub fn layered_dwta(num_states: usize, num_transitions: usize, rng: &mut impl Rng) -> Wta {
    assert!(num_states >= 2);
    let width = (num_states as f64).log10().ceil().max(1.0) as usize + 1;
    let states: Vec<String> = (0..num_states).map(|i| format!("q{i:0width$}")).collect();
    let alphabet = RankedAlphabet::new([
        ("a".to_string(), 0),
        ("g".to_string(), 1),
        ("s".to_string(), 2),
    ])
    .unwrap();
    let mut transitions = vec![(
        "a".to_string(),
        vec![],
        states[0].clone(),
        Value::rational(1, 1),
    )];
    for i in 0..num_states - 1 {
        transitions.push((
            "g".to_string(),
            vec![states[i].clone()],
            states[i + 1].clone(),
            Value::rational(1, 1),
        ));
    }
    let mut used = std::collections::HashSet::new();
    while transitions.len() < num_transitions {
        let a = rng.gen_range(0..num_states);
        let b = rng.gen_range(0..num_states);
        if !used.insert((a, b)) {
            continue;
        }
        let target = rng.gen_range(0..num_states);
        transitions.push((
            "s".to_string(),
            vec![states[a].clone(), states[b].clone()],
            states[target].clone(),
            Value::rational(rng.gen_range(1..=50), 1),
        ));
    }
    Wta::new(
        Semifield::Rational,
        alphabet,
        states.clone(),
        vec![states[num_states - 1].clone()],
        transitions,
    )
    .expect("generated automaton is valid")
}
