//! Weight pushing, the weight-annotated unweighted automaton, state merging
//! and the minimization pipeline.

use std::collections::HashMap;

use crate::automaton::{StateId, Transition, Wta};
use crate::congruence::coarsest_congruence;
use crate::partition::Partition;
use crate::semifield::{Semifield, Value};
use crate::sol::compute_sol;
use crate::tree::RankedAlphabet;
use crate::{Error, Result};

/// A total map assigning every state a nonzero pushing weight, with weight 1
/// on the final states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushWeights {
    weights: Vec<Value>,
}

impl PushWeights {
    pub fn new(m: &Wta, weights: Vec<Value>) -> Result<PushWeights> {
        if weights.len() != m.num_states() {
            return Err(Error::Precondition(
                "pushing weights must be total on the state set".to_string(),
            ));
        }
        for (q, w) in weights.iter().enumerate() {
            if w.semifield() != m.semifield() {
                return Err(Error::SemifieldMismatch {
                    expected: m.semifield(),
                    found: w.semifield(),
                });
            }
            if w.is_zero() {
                return Err(Error::Precondition(format!(
                    "pushing weight of `{}` is zero",
                    m.state_name(q)
                )));
            }
            if m.is_final(q) && !w.is_one() {
                return Err(Error::Precondition(format!(
                    "pushing weight of final state `{}` must be 1",
                    m.state_name(q)
                )));
            }
        }
        Ok(PushWeights { weights })
    }

    /// The identity weights (1 everywhere).
    pub fn identity(m: &Wta) -> PushWeights {
        PushWeights {
            weights: vec![m.semifield().one(); m.num_states()],
        }
    }

    /// Builds weights from `(state name, value)` pairs; unlisted states get
    /// weight 1.
    pub fn from_named(m: &Wta, pairs: Vec<(String, Value)>) -> Result<PushWeights> {
        let mut weights = vec![m.semifield().one(); m.num_states()];
        let mut seen = vec![false; m.num_states()];
        for (name, value) in pairs {
            let q = m
                .state_id(&name)
                .ok_or_else(|| Error::UnknownState(name.clone()))?;
            if seen[q] {
                return Err(Error::Precondition(format!(
                    "pushing weight of `{name}` given twice"
                )));
            }
            seen[q] = true;
            weights[q] = value;
        }
        PushWeights::new(m, weights)
    }

    pub fn get(&self, q: StateId) -> &Value {
        &self.weights[q]
    }

    /// Pointwise multiplicative inverse; again valid pushing weights.
    pub fn inverted(&self, m: &Wta) -> Result<PushWeights> {
        let weights = self
            .weights
            .iter()
            .map(|w| w.inverse())
            .collect::<Result<Vec<_>>>()?;
        PushWeights::new(m, weights)
    }
}

/// Redistributes weights along transitions: the weight of a transition into
/// `q` is multiplied by `lambda(q)` and divided by `lambda(q_i)` for every
/// source `q_i`. The support is unchanged and the recognized weighted tree
/// language is preserved, for deterministic and nondeterministic automata
/// alike. Runs in `O(|M|)`.
pub fn push(m: &Wta, lambda: &PushWeights) -> Result<Wta> {
    let sf = m.semifield();
    let transitions = m
        .transitions()
        .iter()
        .map(|t| {
            let mut weight = sf.times(lambda.get(t.target), &t.weight)?;
            for &src in &t.sources {
                weight = sf.times(&weight, &lambda.get(src).inverse()?)?;
            }
            debug_assert!(!weight.is_zero(), "semifields are zero-divisor free");
            Ok(Transition {
                symbol: t.symbol,
                sources: t.sources.clone(),
                target: t.target,
                weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Wta::from_parts(
        sf,
        m.alphabet().clone(),
        m.state_names().to_vec(),
        m.final_flags().to_vec(),
        transitions,
    )
}

/// Symbol name for a weight-annotated symbol.
fn annotated(name: &str, weight: &Value) -> String {
    format!("{name}@{weight}")
}

/// Moves the weights into the alphabet: each symbol becomes the pair of the
/// original symbol and a transition weight, every transition keeps its shape
/// with weight 1, over the Boolean semifield. The alphabet is the full
/// product of the original symbols with the set of occurring weights.
pub fn alphabetic(m: &Wta) -> Result<Wta> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let mut occurring: Vec<&Value> = m.transitions().iter().map(|t| &t.weight).collect();
    occurring.sort_by_key(|w| w.to_string());
    occurring.dedup();
    let mut symbols = Vec::new();
    for (_, name, rank) in m.alphabet().iter() {
        for weight in &occurring {
            symbols.push((annotated(name, weight), rank));
        }
    }
    let alphabet = RankedAlphabet::new(symbols)?;
    let transitions = m
        .transitions()
        .iter()
        .map(|t| Transition {
            symbol: alphabet
                .id(&annotated(m.alphabet().name(t.symbol), &t.weight))
                .expect("annotated symbol was just added"),
            sources: t.sources.clone(),
            target: t.target,
            weight: Value::Boolean(true),
        })
        .collect();
    Wta::from_parts(
        Semifield::Boolean,
        alphabet,
        m.state_names().to_vec(),
        m.final_flags().to_vec(),
        transitions,
    )
}

/// Quotients a deterministic automaton by a congruence, emitting for every
/// block tuple the pushed weight of its member transitions.
///
/// `lambda` gives the pushing weight per state, `None` for dead states.
/// Blocks containing a dead state must be entirely dead; dead blocks are
/// dropped together with their transitions. The pushed weight must agree
/// across the member transitions of one quotient left-hand side (this is
/// asserted), making the quotient well-defined. Each kept block is named
/// after its lexicographically least member.
pub fn merge_states(m: &Wta, cong: &Partition, lambda: &[Option<Value>]) -> Result<Wta> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    if cong.num_elements() != m.num_states() || lambda.len() != m.num_states() {
        return Err(Error::Precondition(
            "partition or weights do not match the state set".to_string(),
        ));
    }
    if !cong.respects(m.final_flags()) {
        return Err(Error::Precondition(
            "congruence does not respect the final states".to_string(),
        ));
    }
    for (q, w) in lambda.iter().enumerate() {
        match w {
            None => {}
            Some(w) if w.is_zero() => {
                return Err(Error::Precondition(format!(
                    "pushing weight of `{}` is zero",
                    m.state_name(q)
                )))
            }
            Some(w) if m.is_final(q) && !w.is_one() => {
                return Err(Error::Precondition(format!(
                    "pushing weight of final state `{}` must be 1",
                    m.state_name(q)
                )))
            }
            Some(_) => {}
        }
    }
    let sf = m.semifield();
    // Blocks are kept iff their states have pushing weights; mixed blocks
    // violate the precondition (live and dead states are never equivalent).
    let mut kept: Vec<Option<usize>> = vec![None; cong.num_blocks()];
    let mut rep_names: Vec<String> = Vec::new();
    let mut final_flags: Vec<bool> = Vec::new();
    for (b, block) in cong.blocks().enumerate() {
        let live = lambda[block[0]].is_some();
        if block.iter().any(|&q| lambda[q].is_some() != live) {
            return Err(Error::Precondition(
                "block mixes live and dead states".to_string(),
            ));
        }
        if live {
            kept[b] = Some(rep_names.len());
            // least member name; states are sorted by name
            rep_names.push(m.state_name(block[0]).to_string());
            final_flags.push(m.is_final(block[0]));
        }
    }
    // rep_names is sorted: blocks are ordered by least member and state ids
    // are in name order.
    debug_assert!(rep_names.windows(2).all(|w| w[0] < w[1]));

    let mut quotient: HashMap<(usize, Vec<usize>), (usize, Value)> = HashMap::new();
    for t in m.transitions() {
        let target_block = cong.block_of(t.target);
        let Some(new_target) = kept[target_block] else {
            continue;
        };
        let Some(new_sources) = t
            .sources
            .iter()
            .map(|&q| kept[cong.block_of(q)])
            .collect::<Option<Vec<usize>>>()
        else {
            continue;
        };
        let mut weight = sf.times(
            lambda[t.target].as_ref().expect("kept block"),
            &t.weight,
        )?;
        for &src in &t.sources {
            let l = lambda[src].as_ref().expect("kept block");
            weight = sf.times(&weight, &l.inverse()?)?;
        }
        match quotient.insert((t.symbol, new_sources.clone()), (new_target, weight.clone())) {
            None => {}
            Some((prev_target, prev_weight)) => {
                if prev_target != new_target {
                    return Err(Error::Precondition(
                        "not a congruence: quotient transition has two targets".to_string(),
                    ));
                }
                if prev_weight != weight {
                    return Err(Error::Precondition(format!(
                        "pushed weights disagree on a quotient transition ({prev_weight} vs {weight})"
                    )));
                }
            }
        }
    }
    let transitions = quotient
        .into_iter()
        .map(|((symbol, sources), (target, weight))| Transition {
            symbol,
            sources,
            target,
            weight,
        })
        .collect();
    Wta::from_parts(sf, m.alphabet().clone(), rep_names, final_flags, transitions)
}

/// Pushing weights derived from structure-canonical ground signs of life:
/// every state gets the weight of one fixed final-reaching ground context,
/// built from the frame chain of a backward search with the co-arguments
/// grounded by access trees.
///
/// The choice of contexts depends only on the unweighted structure, so the
/// map is covariant under pushing: recomputing it on `push(m, c)` yields the
/// pointwise quotient by `c`. Normalizing with it therefore picks a fixed
/// representative of each pushing orbit, which makes [`minimize`]
/// idempotent. Requires a useful-trimmed automaton.
fn canonical_push_weights(m: &Wta) -> Result<PushWeights> {
    let table = m.access_trees()?;
    let sf = m.semifield();
    let access_weight = table.weights(m)?;
    let mut lambda: Vec<Option<Value>> = vec![None; m.num_states()];
    let mut queue: Vec<StateId> = Vec::new();
    for q in 0..m.num_states() {
        if m.is_final(q) {
            lambda[q] = Some(sf.one());
            queue.push(q);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let q = queue[head];
        head += 1;
        for &tid in m.transitions_into(q) {
            let t = &m.transitions()[tid];
            for (i, &src) in t.sources.iter().enumerate() {
                if lambda[src].is_some() {
                    continue;
                }
                let mut weight = sf.times(lambda[q].as_ref().unwrap(), &t.weight)?;
                for (j, &co) in t.sources.iter().enumerate() {
                    if j != i {
                        weight = sf.times(&weight, &access_weight[co])?;
                    }
                }
                lambda[src] = Some(weight);
                queue.push(src);
            }
        }
    }
    let weights = lambda
        .into_iter()
        .enumerate()
        .map(|(q, w)| {
            w.ok_or_else(|| {
                Error::Precondition(format!(
                    "state `{}` is dead; trim before normalizing",
                    m.state_name(q)
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PushWeights::new(m, weights)
}

/// Minimizes a deterministic automaton.
///
/// The input is first trimmed to its useful (accessible and live) part, then
/// the pipeline runs: coarsest congruence respecting finality, signs of life
/// and pushing weights, pushing, the weight-annotated unweighted automaton,
/// a second refinement from the first congruence, and the final merge. The
/// merged weights are then normalized to the canonical representative of
/// their pushing orbit, so minimization is idempotent. The result is
/// equivalent to the input and minimal. Runs in `O(|M| log |Q|)`.
pub fn minimize(m: &Wta) -> Result<Wta> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let trimmed = m.trim_useful();
    if trimmed.num_states() == 0 {
        return Ok(trimmed);
    }
    let weak = coarsest_congruence(&trimmed, &Partition::universal(trimmed.num_states()))?;
    let sol = compute_sol(&trimmed, &weak)?;
    let lambda = sol.pushing_weights(&trimmed)?;
    let pushed = push(&trimmed, &lambda)?;
    let annotated = alphabetic(&pushed)?;
    let strong = coarsest_congruence(&annotated, &weak)?;
    let merged = merge_states(&trimmed, &strong, sol.lambda_map())?;
    let canonical = canonical_push_weights(&merged)?;
    push(&merged, &canonical)
}
