//! The fast equivalence test for deterministic automata, and the exact
//! product-based counterexample search used for witnesses and as a
//! cross-check.
//!
//! The fast test computes a state correspondence through access trees,
//! transfers signs of life and pushing weights from one automaton to the
//! other, pushes both, and compares the weight-annotated unweighted automata
//! after minimization by canonical renumbering.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::automaton::{AccessTreeTable, StateId, Wta};
use crate::congruence::coarsest_congruence;
use crate::partition::Partition;
use crate::semifield::Value;
use crate::sol::{compute_sol, SolTable};
use crate::transform::{alphabetic, merge_states, push, PushWeights};
use crate::tree::{Context, SymbolId, Tree};
use crate::{Error, Result};

/// Outcome of the equivalence test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    NotEquivalent(Inequivalence),
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }
}

/// Why two automata were found inequivalent, with a witness tree when one
/// was cheap to construct. [`counterexample`] always finds a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inequivalence {
    pub reason: InequivalenceReason,
    pub witness: Option<Tree>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InequivalenceReason {
    /// Exactly one automaton recognizes the constant-zero language.
    EmptinessMismatch,
    /// An access tree of the first automaton is rejected by the second.
    AccessTreeRejected { state: String },
    /// The correspondence does not induce a bijection between the weak
    /// equivalence classes.
    IncompatibleCongruences,
    /// A transferred sign of life is not a sign of life in the second
    /// automaton.
    SignOfLifeNotTransferable { state: String },
    /// The minimized weight-annotated automata are not isomorphic.
    NotIsomorphic,
}

impl std::fmt::Display for InequivalenceReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InequivalenceReason::EmptinessMismatch => {
                write!(f, "exactly one automaton recognizes the zero language")
            }
            InequivalenceReason::AccessTreeRejected { state } => {
                write!(
                    f,
                    "access tree of `{state}` is rejected by the second automaton"
                )
            }
            InequivalenceReason::IncompatibleCongruences => {
                write!(f, "state correspondence is incompatible with the congruences")
            }
            InequivalenceReason::SignOfLifeNotTransferable { state } => {
                write!(f, "transferred sign of life fails for `{state}`")
            }
            InequivalenceReason::NotIsomorphic => {
                write!(f, "minimized weight-annotated automata are not isomorphic")
            }
        }
    }
}

/// The state correspondence induced by access trees.
#[derive(Debug, Clone)]
pub struct Correspondence {
    /// `g(q)`: the state the second automaton reaches on `q`'s access tree.
    pub state_map: Vec<StateId>,
    /// The weight of each access tree in the second automaton.
    pub tree_weights: Vec<Value>,
}

/// Result of [`compute_correspondence`].
#[derive(Debug, Clone)]
pub enum CorrespondenceOutcome {
    Map(Correspondence),
    /// Some access tree of the first automaton is rejected by the second;
    /// the automata are inequivalent when `state` is live.
    Missing { state: StateId },
}

/// Evaluates every access-tree entry of `m1` in `m2`, reusing the results
/// for the sub-entries, giving `g(q) = h2(a(q))`. `O(|M1|)`.
pub fn compute_correspondence(m1: &Wta, m2: &Wta) -> Result<CorrespondenceOutcome> {
    check_same_shape(m1, m2)?;
    if !m2.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let table = m1.access_trees()?;
    let mut g: Vec<Option<StateId>> = vec![None; m1.num_states()];
    let mut u: Vec<Option<Value>> = vec![None; m1.num_states()];
    for &q in table.order() {
        let entry = table.entry(q);
        let sources: Vec<StateId> = entry
            .sources
            .iter()
            .map(|&src| g[src].expect("entries resolve in order"))
            .collect();
        match m2.step_unchecked(entry.symbol, &sources) {
            Some((target, w)) => {
                let mut weight = w.clone();
                for &src in &entry.sources {
                    weight = weight.times(u[src].as_ref().expect("entries resolve in order"))?;
                }
                g[q] = Some(target);
                u[q] = Some(weight);
            }
            None => return Ok(CorrespondenceOutcome::Missing { state: q }),
        }
    }
    Ok(CorrespondenceOutcome::Map(Correspondence {
        state_map: g.into_iter().map(Option::unwrap).collect(),
        tree_weights: u.into_iter().map(Option::unwrap).collect(),
    }))
}

/// Checks that `g` maps weak-equivalence blocks of the first automaton
/// bijectively onto those of the second; returns the induced block map on
/// success. `O(|Q| + |Q'|)`. A `None` answer means the automata are
/// inequivalent (for trimmed inputs).
pub fn check_compatibility(
    g: &[StateId],
    sim1: &Partition,
    sim2: &Partition,
) -> Option<Vec<usize>> {
    if g.len() != sim1.num_elements() || sim1.num_blocks() != sim2.num_blocks() {
        return None;
    }
    let mut block_map = vec![usize::MAX; sim1.num_blocks()];
    let mut hit = vec![false; sim2.num_blocks()];
    for (b, block) in sim1.blocks().enumerate() {
        let image = sim2.block_of(g[block[0]]);
        if block.iter().any(|&q| sim2.block_of(g[q]) != image) {
            return None; // g identifies weakly distinct states
        }
        if hit[image] {
            return None; // not injective on blocks
        }
        hit[image] = true;
        block_map[b] = image;
    }
    // block counts match and the map is injective, hence bijective
    Some(block_map)
}

/// Outcome of [`transfer_pushing_weights`].
#[derive(Debug, Clone)]
pub enum TransferOutcome {
    /// Pushing weights for the second automaton, per state (`None` for
    /// states whose block is not the image of a live block).
    Weights(Vec<Option<Value>>),
    /// The transferred context is not a sign of life for `state`; the
    /// automata are inequivalent.
    Failed { state: StateId },
}

/// Transfers the signs of life of the first automaton through the
/// correspondence and evaluates them in `m2`, yielding pushing weights for
/// `m2`.
///
/// The transferred context of a block is its preimage's sign of life with
/// every state leaf renamed through `g`. The evaluation walks the shared
/// frame chains in discovery order, so the whole transfer is linear.
pub fn transfer_pushing_weights(
    m2: &Wta,
    sim2: &Partition,
    block_map: &[usize],
    sol: &SolTable,
    g: &[StateId],
) -> Result<TransferOutcome> {
    let mut lambda: Vec<Option<Value>> = vec![None; m2.num_states()];
    for &b1 in sol.live_blocks() {
        let b2 = block_map[b1];
        match sol.frame(b1) {
            None => {
                // final block: the trivial context transfers to weight 1
                for &q2 in sim2.block(b2) {
                    if !m2.is_final(q2) {
                        return Ok(TransferOutcome::Failed { state: q2 });
                    }
                    lambda[q2] = Some(m2.semifield().one());
                }
            }
            Some((frame, _)) => {
                let renamed: Vec<StateId> = frame.sources.iter().map(|&q| g[q]).collect();
                for &q2 in sim2.block(b2) {
                    if m2.is_final(q2) {
                        // a final state may only mirror a final block
                        return Ok(TransferOutcome::Failed { state: q2 });
                    }
                    let mut lhs = renamed.clone();
                    lhs[frame.hole] = q2;
                    let Some((target, weight)) = m2.step_unchecked(frame.symbol, &lhs) else {
                        return Ok(TransferOutcome::Failed { state: q2 });
                    };
                    let Some(target_lambda) = lambda[target].clone() else {
                        return Ok(TransferOutcome::Failed { state: q2 });
                    };
                    lambda[q2] = Some(target_lambda.times(weight)?);
                }
            }
        }
    }
    Ok(TransferOutcome::Weights(lambda))
}

/// Renames every state leaf of a context through the correspondence.
pub fn rename_context(c: &Context, m1: &Wta, m2: &Wta, g: &[StateId]) -> Context {
    let renamed = c.tree().rename_leaves(&|name| {
        let q = m1.state_id(name).expect("context leaves are states of m1");
        m2.state_name(g[q]).to_string()
    });
    Context::new(renamed).expect("renaming preserves the hole")
}

type CanonicalTransition = (String, Vec<usize>, usize, String);

/// Canonical renumbering of a deterministic accessible automaton:
/// repeatedly take the least unprocessed transition whose sources are all
/// numbered (ordered by symbol name, then canonical source ids) and number
/// its target. Isomorphic automata produce identical forms.
/// `O(|M| log |M|)` from the priority queue.
fn canonical_form(m: &Wta) -> Result<(usize, Vec<CanonicalTransition>, Vec<usize>)> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let mut canon: Vec<Option<usize>> = vec![None; m.num_states()];
    let mut next_id = 0usize;
    let mut missing: Vec<usize> = m.transitions().iter().map(|t| t.sources.len()).collect();
    let mut heap: BinaryHeap<Reverse<(String, Vec<usize>, usize)>> = BinaryHeap::new();
    let mut recorded = Vec::with_capacity(m.transitions().len());

    let ready_key = |tid: usize, canon: &[Option<usize>]| {
        let t = &m.transitions()[tid];
        let sources: Vec<usize> = t
            .sources
            .iter()
            .map(|&q| canon[q].expect("sources are numbered"))
            .collect();
        Reverse((m.alphabet().name(t.symbol).to_string(), sources, tid))
    };

    for (tid, t) in m.transitions().iter().enumerate() {
        if t.sources.is_empty() {
            heap.push(ready_key(tid, &canon));
        }
    }
    while let Some(Reverse((symbol, sources, tid))) = heap.pop() {
        let t = &m.transitions()[tid];
        let target = match canon[t.target] {
            Some(id) => id,
            None => {
                let id = next_id;
                next_id += 1;
                canon[t.target] = Some(id);
                for &(other, _) in m.occurrences(t.target) {
                    missing[other] -= 1;
                    if missing[other] == 0 {
                        heap.push(ready_key(other, &canon));
                    }
                }
                id
            }
        };
        recorded.push((symbol, sources, target, t.weight.to_string()));
    }
    if let Some(q) = canon.iter().position(Option::is_none) {
        return Err(Error::NotAccessible(m.state_name(q).to_string()));
    }
    let mut finals: Vec<usize> = (0..m.num_states())
        .filter(|&q| m.is_final(q))
        .map(|q| canon[q].unwrap())
        .collect();
    finals.sort_unstable();
    Ok((m.num_states(), recorded, finals))
}

/// Isomorphism of deterministic accessible automata, weights included: a
/// rank-preserving state bijection mapping transitions, weights and finals
/// onto each other.
pub fn wta_isomorphic(a: &Wta, b: &Wta) -> Result<bool> {
    if a.semifield() != b.semifield() {
        return Ok(false);
    }
    Ok(canonical_form(a)? == canonical_form(b)?)
}

/// Isomorphism of deterministic accessible Boolean automata (all weights 1,
/// the weight-annotated form).
pub fn fta_isomorphic(a: &Wta, b: &Wta) -> Result<bool> {
    for m in [a, b] {
        if m.semifield() != crate::semifield::Semifield::Boolean {
            return Err(Error::Precondition(
                "isomorphism test expects Boolean automata".to_string(),
            ));
        }
    }
    wta_isomorphic(a, b)
}

fn check_same_shape(m1: &Wta, m2: &Wta) -> Result<()> {
    if m1.alphabet() != m2.alphabet() {
        return Err(Error::Precondition(
            "automata must share the ranked alphabet".to_string(),
        ));
    }
    if m1.semifield() != m2.semifield() {
        return Err(Error::SemifieldMismatch {
            expected: m1.semifield(),
            found: m2.semifield(),
        });
    }
    Ok(())
}

/// Replaces every state leaf of a context by the state's access tree,
/// yielding a ground context.
fn groundify(ctx: &Context, m: &Wta, table: &AccessTreeTable) -> Context {
    fn subst(t: &Tree, m: &Wta, table: &AccessTreeTable) -> Tree {
        match t {
            Tree::Hole => Tree::Hole,
            Tree::Leaf(name) => {
                let q = m.state_id(name).expect("leaf is a state");
                table.materialize(m, q)
            }
            Tree::Node(name, children) => Tree::Node(
                name.clone(),
                children.iter().map(|c| subst(c, m, table)).collect(),
            ),
        }
    }
    Context::new(subst(ctx.tree(), m, table)).expect("substitution preserves the hole")
}

/// Decides whether two deterministic automata over the same alphabet
/// recognize the same weighted tree language.
///
/// Both inputs are trimmed to their useful parts internally. Runs in
/// `O((|M| + |M'|) log (|Q| + |Q'|))`.
pub fn equivalent(m1: &Wta, m2: &Wta) -> Result<Equivalence> {
    check_same_shape(m1, m2)?;
    if !m1.is_deterministic() || !m2.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let a = m1.trim_useful();
    let b = m2.trim_useful();
    if a.num_states() == 0 || b.num_states() == 0 {
        if a.num_states() == b.num_states() {
            return Ok(Equivalence::Equivalent);
        }
        let nonempty = if a.num_states() > 0 { &a } else { &b };
        let witness = accepted_tree(nonempty)?;
        return Ok(Equivalence::NotEquivalent(Inequivalence {
            reason: InequivalenceReason::EmptinessMismatch,
            witness: Some(witness),
        }));
    }

    let corr = match compute_correspondence(&a, &b)? {
        CorrespondenceOutcome::Map(corr) => corr,
        CorrespondenceOutcome::Missing { state } => {
            // `a` accepts some tree through `state` that `b` rejects
            let witness = rejection_witness(&a, state)?;
            return Ok(Equivalence::NotEquivalent(Inequivalence {
                reason: InequivalenceReason::AccessTreeRejected {
                    state: a.state_name(state).to_string(),
                },
                witness,
            }));
        }
    };
    let g = &corr.state_map;

    let sim1 = coarsest_congruence(&a, &Partition::universal(a.num_states()))?;
    let sim2 = coarsest_congruence(&b, &Partition::universal(b.num_states()))?;
    let sol = compute_sol(&a, &sim1)?;

    let Some(block_map) = check_compatibility(g, &sim1, &sim2) else {
        return Ok(Equivalence::NotEquivalent(Inequivalence {
            reason: InequivalenceReason::IncompatibleCongruences,
            witness: None,
        }));
    };

    let lambda2 = match transfer_pushing_weights(&b, &sim2, &block_map, &sol, g)? {
        TransferOutcome::Weights(w) => w,
        TransferOutcome::Failed { state } => {
            return Ok(Equivalence::NotEquivalent(Inequivalence {
                reason: InequivalenceReason::SignOfLifeNotTransferable {
                    state: b.state_name(state).to_string(),
                },
                witness: None,
            }));
        }
    };
    // `b` is trimmed and the block map is a bijection, so the transfer is
    // total on its states
    let lambda2 = lambda2
        .into_iter()
        .collect::<Option<Vec<Value>>>()
        .expect("transfer covers every block");

    // Ground both weight maps: multiplying in the access-tree weights of
    // each sign of life's state leaves (taken in the respective automaton)
    // evaluates both sides on the same ground context, which makes the
    // weights of corresponding transitions equal after pushing.
    let access_weights = a.access_trees()?.weights(&a)?;
    let mut phi1: Vec<Option<Value>> = vec![None; sim1.num_blocks()];
    let mut phi2: Vec<Option<Value>> = vec![None; sim1.num_blocks()];
    for &b1 in sol.live_blocks() {
        match sol.frame(b1) {
            None => {
                phi1[b1] = Some(a.semifield().one());
                phi2[b1] = Some(a.semifield().one());
            }
            Some((frame, parent)) => {
                let mut f1 = phi1[parent].clone().expect("parent resolved first");
                let mut f2 = phi2[parent].clone().expect("parent resolved first");
                for (j, &p) in frame.sources.iter().enumerate() {
                    if j != frame.hole {
                        f1 = f1.times(&access_weights[p])?;
                        f2 = f2.times(&corr.tree_weights[p])?;
                    }
                }
                phi1[b1] = Some(f1);
                phi2[b1] = Some(f2);
            }
        }
    }
    let lambda1 = PushWeights::new(
        &a,
        (0..a.num_states())
            .map(|q| {
                sol.lambda(q)
                    .expect("trimmed automaton is live")
                    .times(phi1[sim1.block_of(q)].as_ref().expect("live block"))
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    let mut preimage = vec![usize::MAX; sim2.num_blocks()];
    for (b1, &b2) in block_map.iter().enumerate() {
        preimage[b2] = b1;
    }
    let lambda2 = PushWeights::new(
        &b,
        lambda2
            .into_iter()
            .enumerate()
            .map(|(q2, w)| {
                let b1 = preimage[sim2.block_of(q2)];
                w.times(phi2[b1].as_ref().expect("live block"))
            })
            .collect::<Result<Vec<_>>>()?,
    )?;

    let n1 = alphabetic(&push(&a, &lambda1)?)?;
    let n2 = alphabetic(&push(&b, &lambda2)?)?;
    let strong1 = coarsest_congruence(&n1, &sim1)?;
    let strong2 = coarsest_congruence(&n2, &sim2)?;
    let ones1: Vec<Option<Value>> = vec![Some(Value::Boolean(true)); n1.num_states()];
    let ones2: Vec<Option<Value>> = vec![Some(Value::Boolean(true)); n2.num_states()];
    let f1 = merge_states(&n1, &strong1, &ones1)?;
    let f2 = merge_states(&n2, &strong2, &ones2)?;

    if fta_isomorphic(&f1, &f2)? {
        Ok(Equivalence::Equivalent)
    } else {
        Ok(Equivalence::NotEquivalent(Inequivalence {
            reason: InequivalenceReason::NotIsomorphic,
            witness: None,
        }))
    }
}

/// Some tree with nonzero recognized weight, for a useful-trimmed nonempty
/// automaton.
fn accepted_tree(m: &Wta) -> Result<Tree> {
    let table = m.access_trees()?;
    let q = (0..m.num_states())
        .find(|&q| m.is_final(q))
        .expect("useful automaton has a final state");
    Ok(table.materialize(m, q))
}

/// Witness for a rejected access tree: the state's sign of life, grounded
/// through access trees, wrapped around its access tree.
fn rejection_witness(a: &Wta, state: StateId) -> Result<Option<Tree>> {
    let sim = coarsest_congruence(a, &Partition::universal(a.num_states()))?;
    let sol = compute_sol(a, &sim)?;
    let table = a.access_trees()?;
    let Some(ctx) = sol.sol_context(a, sim.block_of(state)) else {
        return Ok(None);
    };
    let ground = groundify(&ctx, a, &table);
    Ok(Some(ground.apply(&table.materialize(a, state))))
}

// ---------------------------------------------------------------------------
// Exact counterexample search on the product of the two automata.

type Pair = (Option<StateId>, Option<StateId>);

struct PairEntry {
    symbol: SymbolId,
    sources: Vec<usize>,
}

struct Edge {
    symbol: SymbolId,
    sources: Vec<usize>,
    target: usize,
    weight1: Value,
    weight2: Value,
}

struct PairGraph {
    pairs: Vec<Pair>,
    entries: Vec<PairEntry>,
    edges: Vec<Edge>,
}

fn pair_graph(a: &Wta, b: &Wta) -> Result<PairGraph> {
    let mut ids: HashMap<Pair, usize> = HashMap::new();
    let mut pairs: Vec<Pair> = Vec::new();
    let mut entries: Vec<PairEntry> = Vec::new();
    let mut by_left: Vec<Vec<usize>> = vec![Vec::new(); a.num_states()];
    let mut by_right: Vec<Vec<usize>> = vec![Vec::new(); b.num_states()];
    let mut edges: Vec<Edge> = Vec::new();
    let mut edge_seen: HashSet<(SymbolId, Vec<usize>)> = HashSet::new();

    fn add_pair(
        pair: Pair,
        entry: PairEntry,
        ids: &mut HashMap<Pair, usize>,
        pairs: &mut Vec<Pair>,
        entries: &mut Vec<PairEntry>,
        by_left: &mut [Vec<usize>],
        by_right: &mut [Vec<usize>],
    ) -> bool {
        if ids.contains_key(&pair) {
            return false;
        }
        let id = pairs.len();
        ids.insert(pair, id);
        pairs.push(pair);
        entries.push(entry);
        if let Some(l) = pair.0 {
            by_left[l].push(id);
        }
        if let Some(r) = pair.1 {
            by_right[r].push(id);
        }
        true
    }

    // Saturate to a fixpoint; each round scans the transitions of both
    // automata over the pairs discovered so far.
    loop {
        let mut grew = false;
        for t in a.transitions() {
            let candidates: Vec<&[usize]> =
                t.sources.iter().map(|&q| by_left[q].as_slice()).collect();
            for combo in cartesian(&candidates) {
                let rights: Option<Vec<StateId>> = combo.iter().map(|&p| pairs[p].1).collect();
                let step = rights
                    .as_ref()
                    .and_then(|rs| b.step_unchecked(t.symbol, rs));
                let target_pair: Pair = (Some(t.target), step.map(|(q, _)| q));
                grew |= add_pair(
                    target_pair,
                    PairEntry {
                        symbol: t.symbol,
                        sources: combo.clone(),
                    },
                    &mut ids,
                    &mut pairs,
                    &mut entries,
                    &mut by_left,
                    &mut by_right,
                );
                if let Some((_, wb)) = step {
                    if edge_seen.insert((t.symbol, combo.clone())) {
                        edges.push(Edge {
                            symbol: t.symbol,
                            sources: combo.clone(),
                            target: ids[&target_pair],
                            weight1: t.weight.clone(),
                            weight2: wb.clone(),
                        });
                    }
                }
            }
        }
        // transitions of `b` where `a` is undefined produce right-only pairs
        for t in b.transitions() {
            let candidates: Vec<&[usize]> =
                t.sources.iter().map(|&q| by_right[q].as_slice()).collect();
            for combo in cartesian(&candidates) {
                let lefts: Option<Vec<StateId>> = combo.iter().map(|&p| pairs[p].0).collect();
                if matches!(&lefts, Some(ls) if a.step_unchecked(t.symbol, ls).is_some()) {
                    continue; // covered by the first loop
                }
                grew |= add_pair(
                    (None, Some(t.target)),
                    PairEntry {
                        symbol: t.symbol,
                        sources: combo.clone(),
                    },
                    &mut ids,
                    &mut pairs,
                    &mut entries,
                    &mut by_left,
                    &mut by_right,
                );
            }
        }
        if !grew {
            break;
        }
    }
    Ok(PairGraph {
        pairs,
        entries,
        edges,
    })
}

fn materialize_pair(
    id: usize,
    alphabet: &crate::tree::RankedAlphabet,
    entries: &[PairEntry],
    cache: &mut Vec<Option<Tree>>,
) -> Tree {
    if let Some(t) = &cache[id] {
        return t.clone();
    }
    let entry = &entries[id];
    let children = entry
        .sources
        .iter()
        .map(|&src| materialize_pair(src, alphabet, entries, cache))
        .collect();
    let tree = Tree::Node(alphabet.name(entry.symbol).to_string(), children);
    cache[id] = Some(tree.clone());
    tree
}

/// Finds a ground tree on which the recognized weights differ, or `None`
/// when the automata are equivalent.
///
/// Explores the reachable pairs of states (including one-sided pairs where
/// only one automaton is defined) and checks finality agreement and weight
/// ratio consistency. Exact, in time `O(|M| * |M'|)` up to the pair joins;
/// intended for witness extraction and as an independent cross-check, not
/// as the primary decision procedure.
pub fn counterexample(m1: &Wta, m2: &Wta) -> Result<Option<Tree>> {
    check_same_shape(m1, m2)?;
    if !m1.is_deterministic() || !m2.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let a = m1.trim_accessible();
    let b = m2.trim_accessible();
    let graph = pair_graph(&a, &b)?;
    let PairGraph {
        pairs,
        entries,
        edges,
    } = graph;

    let finality = |p: &Pair| {
        (
            matches!(p.0, Some(q) if a.is_final(q)),
            matches!(p.1, Some(q) if b.is_final(q)),
        )
    };
    let mut cache: Vec<Option<Tree>> = vec![None; pairs.len()];

    // 1. Finality mismatch: the recognized weights differ on the pair's
    // access tree (one side nonzero by zero-divisor freeness).
    for (id, pair) in pairs.iter().enumerate() {
        let (f1, f2) = finality(pair);
        if f1 != f2 {
            return Ok(Some(materialize_pair(id, a.alphabet(), &entries, &mut cache)));
        }
    }

    // 2. Weight ratios. Assign each both-defined pair the ratio of its
    // first access tree; check every product transition for consistency.
    let both: Vec<usize> = (0..pairs.len())
        .filter(|&i| pairs[i].0.is_some() && pairs[i].1.is_some())
        .collect();
    let mut rho: Vec<Option<Value>> = vec![None; pairs.len()];
    for &id in &both {
        let entry = &entries[id];
        let lefts: Vec<StateId> = entry.sources.iter().map(|&p| pairs[p].0.unwrap()).collect();
        let rights: Vec<StateId> = entry.sources.iter().map(|&p| pairs[p].1.unwrap()).collect();
        let (_, wa) = a
            .step_unchecked(entry.symbol, &lefts)
            .expect("both-defined pair stems from a defined join");
        let (_, wb) = b
            .step_unchecked(entry.symbol, &rights)
            .expect("both-defined pair stems from a defined join");
        let mut ratio = wa.times(&wb.inverse()?)?;
        for &src in &entry.sources {
            ratio = ratio.times(rho[src].as_ref().expect("sources resolve earlier"))?;
        }
        rho[id] = Some(ratio);
    }

    // Backward reachability toward final-final pairs over both-defined
    // edges, remembering one step toward a final pair for context building.
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); pairs.len()];
    for (eid, edge) in edges.iter().enumerate() {
        incoming[edge.target].push(eid);
        let _ = eid;
    }
    let mut outgoing: Vec<Vec<(usize, usize)>> = vec![Vec::new(); pairs.len()]; // (edge, position)
    for (eid, edge) in edges.iter().enumerate() {
        for (pos, &src) in edge.sources.iter().enumerate() {
            outgoing[src].push((eid, pos));
        }
    }
    let mut co_accessible = vec![false; pairs.len()];
    let mut toward_final: Vec<Option<(usize, usize)>> = vec![None; pairs.len()];
    let mut queue: Vec<usize> = Vec::new();
    for &id in &both {
        let (f1, f2) = finality(&pairs[id]);
        if f1 && f2 {
            co_accessible[id] = true;
            queue.push(id);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let id = queue[head];
        head += 1;
        for eid in &incoming[id] {
            for (pos, &src) in edges[*eid].sources.iter().enumerate() {
                if !co_accessible[src] {
                    co_accessible[src] = true;
                    toward_final[src] = Some((*eid, pos));
                    queue.push(src);
                }
            }
        }
    }
    let _ = outgoing;

    // Final-final pair whose first access tree already has ratio != 1.
    for &id in &both {
        let (f1, f2) = finality(&pairs[id]);
        if f1 && f2 && !rho[id].as_ref().unwrap().is_one() {
            let t = materialize_pair(id, a.alphabet(), &entries, &mut cache);
            debug_assert_ne!(a.recognize(&t)?, b.recognize(&t)?);
            return Ok(Some(t));
        }
    }

    // Inconsistent edge whose target can still reach a final pair: two
    // access trees with different ratios reach the same pair; wrapping them
    // in a context toward a final pair exposes the difference on at least
    // one of them.
    for edge in &edges {
        if !co_accessible[edge.target] {
            continue;
        }
        let mut expected = edge.weight1.times(&edge.weight2.inverse()?)?;
        for &src in &edge.sources {
            expected = expected.times(rho[src].as_ref().unwrap())?;
        }
        if expected == *rho[edge.target].as_ref().unwrap() {
            continue;
        }
        let mut ctx = Context::hole();
        let mut cur = edge.target;
        while let Some((eid, pos)) = toward_final[cur] {
            let e = &edges[eid];
            let children: Vec<Tree> = e
                .sources
                .iter()
                .enumerate()
                .map(|(i, &src)| {
                    if i == pos {
                        Tree::Hole
                    } else {
                        materialize_pair(src, a.alphabet(), &entries, &mut cache)
                    }
                })
                .collect();
            let frame = Context::new(Tree::Node(
                a.alphabet().name(e.symbol).to_string(),
                children,
            ))
            .expect("frame has one hole");
            ctx = frame.compose(&ctx);
            cur = e.target;
        }
        let alt_children: Vec<Tree> = edge
            .sources
            .iter()
            .map(|&src| materialize_pair(src, a.alphabet(), &entries, &mut cache))
            .collect();
        let alt = Tree::Node(a.alphabet().name(edge.symbol).to_string(), alt_children);
        let first = materialize_pair(edge.target, a.alphabet(), &entries, &mut cache);
        for candidate in [ctx.apply(&alt), ctx.apply(&first)] {
            if a.recognize(&candidate)? != b.recognize(&candidate)? {
                return Ok(Some(candidate));
            }
        }
        unreachable!("one of the two candidate trees must differ");
    }
    Ok(None)
}

fn cartesian(slices: &[&[usize]]) -> Vec<Vec<usize>> {
    let mut result = vec![Vec::new()];
    for slice in slices {
        let mut next = Vec::with_capacity(result.len() * slice.len());
        for prefix in &result {
            for &item in *slice {
                let mut combo = prefix.clone();
                combo.push(item);
                next.push(combo);
            }
        }
        result = next;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{parse_automaton, print_automaton};
    use crate::random::{random_dwta, random_push_weights, DwtaConfig};
    use crate::transform::minimize;
    use crate::tree::enumerate_ground_trees;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Wta {
        parse_automaton(include_str!("../tests/fixtures/four_state.wta")).unwrap()
    }

    /// Renames every state by appending a suffix, preserving structure.
    fn renamed(m: &Wta) -> Wta {
        let rename = |q: StateId| format!("{}_x", m.state_name(q));
        let transitions = m
            .transitions()
            .iter()
            .map(|t| {
                (
                    m.alphabet().name(t.symbol).to_string(),
                    t.sources.iter().map(|&q| rename(q)).collect(),
                    rename(t.target),
                    t.weight.clone(),
                )
            })
            .collect();
        Wta::new(
            m.semifield(),
            m.alphabet().clone(),
            (0..m.num_states()).map(rename).collect(),
            (0..m.num_states())
                .filter(|&q| m.is_final(q))
                .map(rename)
                .collect(),
            transitions,
        )
        .unwrap()
    }

    #[test]
    fn correspondence_on_identical_automata_is_identity() {
        let m = sample();
        match compute_correspondence(&m, &m).unwrap() {
            CorrespondenceOutcome::Map(corr) => {
                assert_eq!(corr.state_map, (0..m.num_states()).collect::<Vec<_>>())
            }
            other => panic!("expected a map, got {other:?}"),
        }
    }

    #[test]
    fn correspondence_follows_renaming() {
        let m = sample();
        let r = renamed(&m);
        match compute_correspondence(&m, &r).unwrap() {
            CorrespondenceOutcome::Map(corr) => {
                for q in 0..m.num_states() {
                    assert_eq!(
                        r.state_name(corr.state_map[q]),
                        format!("{}_x", m.state_name(q))
                    );
                }
            }
            other => panic!("expected a map, got {other:?}"),
        }
    }

    #[test]
    fn missing_symbol_gives_early_inequivalence_with_witness() {
        let m = sample();
        // drop the beta transition from the second automaton
        let transitions: Vec<_> = m
            .transitions()
            .iter()
            .filter(|t| m.alphabet().name(t.symbol) != "beta")
            .map(|t| {
                (
                    m.alphabet().name(t.symbol).to_string(),
                    t.sources.iter().map(|&q| m.state_name(q).to_string()).collect(),
                    m.state_name(t.target).to_string(),
                    t.weight.clone(),
                )
            })
            .collect();
        let n = Wta::new(
            m.semifield(),
            m.alphabet().clone(),
            m.state_names().to_vec(),
            vec!["q_1".to_string(), "q_f".to_string()],
            transitions,
        )
        .unwrap();
        match equivalent(&m, &n).unwrap() {
            Equivalence::NotEquivalent(ineq) => {
                let witness = ineq.witness.expect("witness available");
                assert_ne!(
                    m.recognize(&witness).unwrap(),
                    n.recognize(&witness).unwrap()
                );
            }
            Equivalence::Equivalent => panic!("must be inequivalent"),
        }
    }

    #[test]
    fn compatibility_identity() {
        let m = sample();
        let sim = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
        let g: Vec<StateId> = (0..m.num_states()).collect();
        let map = check_compatibility(&g, &sim, &sim).unwrap();
        assert_eq!(map, (0..sim.num_blocks()).collect::<Vec<_>>());
    }

    #[test]
    fn compatibility_fails_on_block_count_mismatch() {
        let sim1 = Partition::from_blocks(2, vec![vec![0], vec![1]]).unwrap();
        let sim2 = Partition::universal(2);
        assert!(check_compatibility(&[0, 1], &sim1, &sim2).is_none());
    }

    #[test]
    fn finality_flip_breaks_compatibility() {
        // flipping one final flag on the corresponding state changes the
        // weak congruence, and the semantic oracle finds a differing tree
        let m = sample();
        let flipped = Wta::new(
            m.semifield(),
            m.alphabet().clone(),
            m.state_names().to_vec(),
            vec!["q_1".to_string(), "q_2".to_string(), "q_f".to_string()],
            m.transitions()
                .iter()
                .map(|t| {
                    (
                        m.alphabet().name(t.symbol).to_string(),
                        t.sources.iter().map(|&q| m.state_name(q).to_string()).collect(),
                        m.state_name(t.target).to_string(),
                        t.weight.clone(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let a = m.trim_useful();
        let b = flipped.trim_useful();
        if let CorrespondenceOutcome::Map(corr) = compute_correspondence(&a, &b).unwrap() {
            let sim1 = coarsest_congruence(&a, &Partition::universal(a.num_states())).unwrap();
            let sim2 = coarsest_congruence(&b, &Partition::universal(b.num_states())).unwrap();
            assert!(check_compatibility(&corr.state_map, &sim1, &sim2).is_none());
        }
        assert!(!equivalent(&m, &flipped).unwrap().is_equivalent());
        let witness = counterexample(&m, &flipped).unwrap().expect("flip is semantic");
        assert_ne!(
            m.recognize(&witness).unwrap(),
            flipped.recognize(&witness).unwrap()
        );
    }

    #[test]
    fn transfer_on_identity_recovers_lambda() {
        let m = sample();
        let sim = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
        let sol = compute_sol(&m, &sim).unwrap();
        let g: Vec<StateId> = (0..m.num_states()).collect();
        let block_map: Vec<usize> = (0..sim.num_blocks()).collect();
        match transfer_pushing_weights(&m, &sim, &block_map, &sol, &g).unwrap() {
            TransferOutcome::Weights(w) => {
                for q in 0..m.num_states() {
                    assert_eq!(w[q].as_ref(), sol.lambda(q));
                }
            }
            TransferOutcome::Failed { state } => {
                panic!("transfer failed for {}", m.state_name(state))
            }
        }
    }

    #[test]
    fn transfer_on_pushed_variant_satisfies_postcondition() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let base = random_dwta(&DwtaConfig::small(6), &mut rng).trim_useful();
            if base.num_states() == 0 {
                continue;
            }
            let m2 = push(&base, &random_push_weights(&base, &mut rng)).unwrap();
            let sim1 =
                coarsest_congruence(&base, &Partition::universal(base.num_states())).unwrap();
            let sim2 = coarsest_congruence(&m2, &Partition::universal(m2.num_states())).unwrap();
            let sol = compute_sol(&base, &sim1).unwrap();
            let g = match compute_correspondence(&base, &m2).unwrap() {
                CorrespondenceOutcome::Map(corr) => corr.state_map,
                _ => panic!("pushed variant accepts all access trees"),
            };
            let block_map = check_compatibility(&g, &sim1, &sim2).unwrap();
            match transfer_pushing_weights(&m2, &sim2, &block_map, &sol, &g).unwrap() {
                TransferOutcome::Weights(weights) => {
                    // postcondition: evaluating the transferred context from
                    // q' ends final with the computed weight
                    for q2 in 0..m2.num_states() {
                        let lambda = weights[q2].clone().unwrap();
                        assert!(!lambda.is_zero());
                        let b1 = block_map.iter().position(|&x| x == sim2.block_of(q2)).unwrap();
                        let ctx = sol.sol_context(&base, b1).unwrap();
                        let ctx2 = rename_context(&ctx, &base, &m2, &g);
                        let t = ctx2.apply(&Tree::leaf(m2.state_name(q2)));
                        let (state, weight) = m2.eval_det(&t).unwrap().unwrap();
                        assert!(m2.is_final(state));
                        assert_eq!(weight, lambda);
                    }
                }
                TransferOutcome::Failed { state } => {
                    panic!("transfer failed for {}", m2.state_name(state))
                }
            }
        }
    }

    #[test]
    fn isomorphism_cases() {
        let m = sample();
        let n1 = alphabetic(&m).unwrap();
        assert!(fta_isomorphic(&n1, &n1).unwrap());
        // consistent renaming stays isomorphic
        let n2 = alphabetic(&renamed(&m)).unwrap();
        assert!(fta_isomorphic(&n1, &n2).unwrap());
        // changing one annotated weight changes the transition table
        let mut swapped = m.clone();
        let transitions: Vec<_> = swapped
            .transitions()
            .iter()
            .map(|t| {
                let weight = if m.alphabet().name(t.symbol) == "beta" {
                    Value::rational(7, 1)
                } else {
                    t.weight.clone()
                };
                (
                    m.alphabet().name(t.symbol).to_string(),
                    t.sources.iter().map(|&q| m.state_name(q).to_string()).collect(),
                    m.state_name(t.target).to_string(),
                    weight,
                )
            })
            .collect();
        swapped = Wta::new(
            m.semifield(),
            m.alphabet().clone(),
            m.state_names().to_vec(),
            vec!["q_1".to_string(), "q_f".to_string()],
            transitions,
        )
        .unwrap();
        let n3 = alphabetic(&swapped).unwrap();
        assert!(!fta_isomorphic(&n1, &n3).unwrap());
    }

    #[test]
    fn equivalent_to_itself_and_to_pushed_variants() {
        let m = sample();
        assert!(equivalent(&m, &m).unwrap().is_equivalent());
        assert!(equivalent(&m, &renamed(&m)).unwrap().is_equivalent());
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let lambda = random_push_weights(&m, &mut rng);
            let pushed = push(&m, &lambda).unwrap();
            assert!(equivalent(&m, &pushed).unwrap().is_equivalent());
            assert!(counterexample(&m, &pushed).unwrap().is_none());
        }
    }

    #[test]
    fn perturbed_weight_is_detected_with_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut tested = 0;
        while tested < 15 {
            let m = random_dwta(&DwtaConfig::small(6), &mut rng).trim_useful();
            if m.num_states() == 0 || m.transitions().is_empty() {
                continue;
            }
            tested += 1;
            let idx = rng.gen_range(0..m.transitions().len());
            let transitions: Vec<_> = m
                .transitions()
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let weight = if i == idx {
                        t.weight.times(&Value::rational(2, 1)).unwrap()
                    } else {
                        t.weight.clone()
                    };
                    (
                        m.alphabet().name(t.symbol).to_string(),
                        t.sources.iter().map(|&q| m.state_name(q).to_string()).collect(),
                        m.state_name(t.target).to_string(),
                        weight,
                    )
                })
                .collect();
            let finals = (0..m.num_states())
                .filter(|&q| m.is_final(q))
                .map(|q| m.state_name(q).to_string())
                .collect();
            let perturbed = Wta::new(
                m.semifield(),
                m.alphabet().clone(),
                m.state_names().to_vec(),
                finals,
                transitions,
            )
            .unwrap();
            assert!(
                !equivalent(&m, &perturbed).unwrap().is_equivalent(),
                "automaton:\n{}",
                print_automaton(&m)
            );
            let witness = counterexample(&m, &perturbed)
                .unwrap()
                .expect("inequivalent pair has a witness");
            assert_ne!(
                m.recognize(&witness).unwrap(),
                perturbed.recognize(&witness).unwrap()
            );
        }
    }

    #[test]
    fn agrees_with_enumeration_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..25 {
            let m1 = random_dwta(&DwtaConfig::small(5), &mut rng);
            let m2 = random_dwta(&DwtaConfig::small(5), &mut rng);
            let fast = equivalent(&m1, &m2).unwrap().is_equivalent();
            let exact = counterexample(&m1, &m2).unwrap().is_none();
            assert_eq!(fast, exact, "m1:\n{}m2:\n{}", print_automaton(&m1), print_automaton(&m2));
            let enumerated = enumerate_ground_trees(m1.alphabet(), 7)
                .iter()
                .all(|t| m1.recognize(t).unwrap() == m2.recognize(t).unwrap());
            if fast {
                assert!(enumerated);
            }
        }
    }

    #[test]
    fn dead_states_do_not_affect_equivalence() {
        let m = sample();
        // add a dead sink reachable from a fresh nullary symbol
        let mut symbols: Vec<(String, usize)> = m
            .alphabet()
            .iter()
            .map(|(_, n, r)| (n.to_string(), r))
            .collect();
        symbols.push(("omega".to_string(), 0));
        let alphabet = crate::tree::RankedAlphabet::new(symbols).unwrap();
        let mut transitions: Vec<_> = m
            .transitions()
            .iter()
            .map(|t| {
                (
                    m.alphabet().name(t.symbol).to_string(),
                    t.sources.iter().map(|&q| m.state_name(q).to_string()).collect(),
                    m.state_name(t.target).to_string(),
                    t.weight.clone(),
                )
            })
            .collect();
        transitions.push((
            "omega".to_string(),
            vec![],
            "q_sink".to_string(),
            Value::rational(5, 1),
        ));
        let mut states = m.state_names().to_vec();
        states.push("q_sink".to_string());
        let with_dead = Wta::new(
            m.semifield(),
            alphabet.clone(),
            states,
            vec!["q_1".to_string(), "q_f".to_string()],
            transitions.clone(),
        )
        .unwrap();
        // same automaton without the sink, over the same alphabet
        transitions.pop();
        let without = Wta::new(
            m.semifield(),
            alphabet,
            m.state_names().to_vec(),
            vec!["q_1".to_string(), "q_f".to_string()],
            transitions,
        )
        .unwrap();
        assert!(equivalent(&with_dead, &without).unwrap().is_equivalent());
        assert!(equivalent(&without, &with_dead).unwrap().is_equivalent());
    }

    #[test]
    fn minimized_forms_certify_equivalence() {
        // the minimized pushed annotated automata of equivalent inputs are
        // isomorphic as unweighted automata
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..10 {
            let m = random_dwta(&DwtaConfig::small(6), &mut rng).trim_useful();
            if m.num_states() == 0 {
                continue;
            }
            let pushed = push(&m, &random_push_weights(&m, &mut rng)).unwrap();
            let a = minimize(&m).unwrap();
            let b = minimize(&pushed).unwrap();
            // pushing never changes the minimized annotated structure's
            // state count
            assert_eq!(a.num_states(), b.num_states());
            assert!(equivalent(&a, &b).unwrap().is_equivalent());
        }
    }

    #[test]
    fn rejects_mismatched_alphabets() {
        let m = sample();
        let other = Wta::new(
            m.semifield(),
            crate::tree::RankedAlphabet::new([("a".to_string(), 0)].into_iter()).unwrap(),
            vec!["q".to_string()],
            vec!["q".to_string()],
            vec![("a".to_string(), vec![], "q".to_string(), Value::rational(1, 1))],
        )
        .unwrap();
        assert!(matches!(
            equivalent(&m, &other),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn empty_language_cases() {
        let alphabet =
            crate::tree::RankedAlphabet::new([("a".to_string(), 0)].into_iter()).unwrap();
        let empty = Wta::new(
            crate::semifield::Semifield::Rational,
            alphabet.clone(),
            vec!["q".to_string()],
            vec![],
            vec![("a".to_string(), vec![], "q".to_string(), Value::rational(1, 1))],
        )
        .unwrap();
        let nonempty = Wta::new(
            crate::semifield::Semifield::Rational,
            alphabet,
            vec!["q".to_string()],
            vec!["q".to_string()],
            vec![("a".to_string(), vec![], "q".to_string(), Value::rational(1, 1))],
        )
        .unwrap();
        assert!(equivalent(&empty, &empty).unwrap().is_equivalent());
        match equivalent(&empty, &nonempty).unwrap() {
            Equivalence::NotEquivalent(ineq) => {
                assert_eq!(ineq.reason, InequivalenceReason::EmptinessMismatch);
                let w = ineq.witness.unwrap();
                assert_ne!(
                    empty.recognize(&w).unwrap(),
                    nonempty.recognize(&w).unwrap()
                );
            }
            _ => panic!("must differ"),
        }
    }
}
