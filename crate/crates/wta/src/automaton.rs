//! The weighted tree automaton model: evaluation, determinism and
//! accessibility checks, trimming, access trees and the unweighted
//! projection.

use std::collections::{BTreeMap, HashMap};

use crate::semifield::{Semifield, Value};
use crate::tree::{RankedAlphabet, SymbolId, Tree};
use crate::{Error, Result};

pub type StateId = usize;
pub type TransitionId = usize;

/// One transition `symbol(sources...) -> target : weight`.
///
/// Stored weights are always nonzero; an absent transition has weight zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub symbol: SymbolId,
    pub sources: Vec<StateId>,
    pub target: StateId,
    pub weight: Value,
}

/// A weighted tree automaton `(Q, Sigma, mu, F)` over one of the supported
/// semifields.
///
/// States are kept sorted by name, transitions in `(symbol, sources, target)`
/// order, so all iteration and printing is deterministic. Three transition
/// indexes are maintained: by left-hand side (deterministic stepping), by
/// target state (worklist algorithms) and by source-state occurrence
/// (partition refinement).
#[derive(Debug, Clone)]
pub struct Wta {
    semifield: Semifield,
    alphabet: RankedAlphabet,
    states: Vec<String>,
    finals: Vec<bool>,
    transitions: Vec<Transition>,
    deterministic: bool,
    lhs_index: HashMap<(SymbolId, Vec<StateId>), Vec<TransitionId>>,
    by_target: Vec<Vec<TransitionId>>,
    by_source: Vec<Vec<(TransitionId, usize)>>,
    symbol_range: Vec<(usize, usize)>,
}

impl PartialEq for Wta {
    fn eq(&self, other: &Self) -> bool {
        self.semifield == other.semifield
            && self.alphabet == other.alphabet
            && self.states == other.states
            && self.finals == other.finals
            && self.transitions == other.transitions
    }
}

impl Eq for Wta {}

impl Wta {
    /// Builds and validates an automaton from named parts.
    pub fn new(
        semifield: Semifield,
        alphabet: RankedAlphabet,
        states: Vec<String>,
        finals: Vec<String>,
        transitions: Vec<(String, Vec<String>, String, Value)>,
    ) -> Result<Wta> {
        let mut names = states;
        names.sort();
        names.dedup();
        for name in &names {
            if !crate::tree::RankedAlphabet::new([(name.clone(), 0)]).is_ok() {
                return Err(Error::InvalidAutomaton(format!(
                    "invalid state name `{name}`"
                )));
            }
            if alphabet.id(name).is_some() {
                return Err(Error::InvalidAutomaton(format!(
                    "state name `{name}` collides with a symbol"
                )));
            }
        }
        let index: HashMap<&str, StateId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut final_flags = vec![false; names.len()];
        for name in finals {
            let id = *index
                .get(name.as_str())
                .ok_or_else(|| Error::UnknownState(name.clone()))?;
            final_flags[id] = true;
        }
        let mut resolved = Vec::with_capacity(transitions.len());
        for (symbol, sources, target, weight) in transitions {
            let sym = alphabet
                .id(&symbol)
                .ok_or_else(|| Error::UnknownSymbol(symbol.clone()))?;
            let rank = alphabet.rank(sym);
            if rank != sources.len() {
                return Err(Error::RankMismatch {
                    symbol,
                    expected: rank,
                    found: sources.len(),
                });
            }
            let sources = sources
                .iter()
                .map(|s| {
                    index
                        .get(s.as_str())
                        .copied()
                        .ok_or_else(|| Error::UnknownState(s.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let target = *index
                .get(target.as_str())
                .ok_or_else(|| Error::UnknownState(target.clone()))?;
            if weight.semifield() != semifield {
                return Err(Error::SemifieldMismatch {
                    expected: semifield,
                    found: weight.semifield(),
                });
            }
            if weight.is_zero() {
                return Err(Error::InvalidAutomaton(
                    "transition weight must be nonzero".to_string(),
                ));
            }
            resolved.push(Transition {
                symbol: sym,
                sources,
                target,
                weight,
            });
        }
        Wta::from_parts(semifield, alphabet, names, final_flags, resolved)
    }

    /// Builds an automaton from id-resolved parts. States must be sorted and
    /// unique; transitions are sorted here. Duplicate `lhs -> target` pairs
    /// are rejected.
    pub(crate) fn from_parts(
        semifield: Semifield,
        alphabet: RankedAlphabet,
        states: Vec<String>,
        finals: Vec<bool>,
        mut transitions: Vec<Transition>,
    ) -> Result<Wta> {
        debug_assert!(states.windows(2).all(|w| w[0] < w[1]));
        transitions.sort_by(|a, b| {
            (a.symbol, &a.sources, a.target).cmp(&(b.symbol, &b.sources, b.target))
        });
        for w in transitions.windows(2) {
            if w[0].symbol == w[1].symbol && w[0].sources == w[1].sources && w[0].target == w[1].target
            {
                return Err(Error::InvalidAutomaton(format!(
                    "duplicate transition `{}({}) -> {}`",
                    alphabet.name(w[0].symbol),
                    w[0].sources
                        .iter()
                        .map(|&q| states[q].clone())
                        .collect::<Vec<_>>()
                        .join(","),
                    states[w[0].target],
                )));
            }
        }
        let mut lhs_index: HashMap<(SymbolId, Vec<StateId>), Vec<TransitionId>> = HashMap::new();
        let mut by_target = vec![Vec::new(); states.len()];
        let mut by_source = vec![Vec::new(); states.len()];
        let mut symbol_range = vec![(0, 0); alphabet.len()];
        let mut deterministic = true;
        for (id, t) in transitions.iter().enumerate() {
            let slot = lhs_index
                .entry((t.symbol, t.sources.clone()))
                .or_default();
            slot.push(id);
            if slot.len() > 1 {
                deterministic = false;
            }
            by_target[t.target].push(id);
            for (pos, &q) in t.sources.iter().enumerate() {
                by_source[q].push((id, pos));
            }
        }
        let mut i = 0;
        for sym in 0..alphabet.len() {
            let start = i;
            while i < transitions.len() && transitions[i].symbol == sym {
                i += 1;
            }
            symbol_range[sym] = (start, i);
        }
        Ok(Wta {
            semifield,
            alphabet,
            states,
            finals,
            transitions,
            deterministic,
            lhs_index,
            by_target,
            by_source,
            symbol_range,
        })
    }

    pub fn semifield(&self) -> Semifield {
        self.semifield
    }

    pub fn alphabet(&self) -> &RankedAlphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals[q]
    }

    pub fn final_flags(&self) -> &[bool] {
        &self.finals
    }

    pub fn num_finals(&self) -> usize {
        self.finals.iter().filter(|&&f| f).count()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transitions_into(&self, q: StateId) -> &[TransitionId] {
        &self.by_target[q]
    }

    pub fn occurrences(&self, q: StateId) -> &[(TransitionId, usize)] {
        &self.by_source[q]
    }

    /// `|M| = sum over transitions of (|lhs| + 1)` where the left-hand side
    /// `symbol(q1..qk)` is a tree of size `k + 1`.
    pub fn size(&self) -> usize {
        self.transitions
            .iter()
            .map(|t| t.sources.len() + 2)
            .sum()
    }

    /// True iff no left-hand side has two targets.
    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    /// The unique `(target, weight)` for a left-hand side of a deterministic
    /// automaton, or `None` when the transition is absent.
    pub fn dwta_step(
        &self,
        symbol: SymbolId,
        sources: &[StateId],
    ) -> Result<Option<(StateId, &Value)>> {
        if !self.deterministic {
            return Err(Error::NotDeterministic);
        }
        Ok(self.step_unchecked(symbol, sources))
    }

    pub(crate) fn step_unchecked(
        &self,
        symbol: SymbolId,
        sources: &[StateId],
    ) -> Option<(StateId, &Value)> {
        // Allocation-free probe would need a borrowed key; transitions are
        // short so the clone is acceptable.
        self.lhs_index
            .get(&(symbol, sources.to_vec()))
            .and_then(|ids| ids.first())
            .map(|&id| {
                let t = &self.transitions[id];
                (t.target, &t.weight)
            })
    }

    fn resolve_leaf(&self, name: &str) -> Result<StateId> {
        self.state_id(name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    /// The weight map `q -> h(t -> q)` restricted to its nonzero entries.
    /// State leaves evaluate as unit vectors. Nondeterministic automata sum
    /// over all runs; only source tuples present in the transition index are
    /// enumerated, since absent transitions contribute zero.
    pub fn evaluate(&self, tree: &Tree) -> Result<BTreeMap<StateId, Value>> {
        match tree {
            Tree::Hole => Err(Error::InvalidContext(
                "cannot evaluate a context; substitute first".to_string(),
            )),
            Tree::Leaf(name) => {
                let q = self.resolve_leaf(name)?;
                Ok(BTreeMap::from([(q, self.semifield.one())]))
            }
            Tree::Node(name, children) => {
                let sym = self
                    .alphabet
                    .id(name)
                    .ok_or_else(|| Error::UnknownSymbol(name.clone()))?;
                if self.alphabet.rank(sym) != children.len() {
                    return Err(Error::RankMismatch {
                        symbol: name.clone(),
                        expected: self.alphabet.rank(sym),
                        found: children.len(),
                    });
                }
                let child_maps = children
                    .iter()
                    .map(|c| self.evaluate(c))
                    .collect::<Result<Vec<_>>>()?;
                let mut result: BTreeMap<StateId, Value> = BTreeMap::new();
                let (lo, hi) = self.symbol_range[sym];
                'outer: for t in &self.transitions[lo..hi] {
                    let mut weight = t.weight.clone();
                    for (child, &q) in child_maps.iter().zip(&t.sources) {
                        match child.get(&q) {
                            Some(w) => weight = self.semifield.times(&weight, w)?,
                            None => continue 'outer,
                        }
                    }
                    match result.get_mut(&t.target) {
                        Some(acc) => *acc = self.semifield.plus(acc, &weight)?,
                        None => {
                            result.insert(t.target, weight);
                        }
                    }
                }
                result.retain(|_, w| !w.is_zero());
                Ok(result)
            }
        }
    }

    /// Deterministic evaluation `t -> (state, weight)`, `None` when the run
    /// is undefined. The tree may contain state leaves.
    pub fn eval_det(&self, tree: &Tree) -> Result<Option<(StateId, Value)>> {
        if !self.deterministic {
            return Err(Error::NotDeterministic);
        }
        self.eval_det_unchecked(tree)
    }

    pub(crate) fn eval_det_unchecked(&self, tree: &Tree) -> Result<Option<(StateId, Value)>> {
        match tree {
            Tree::Hole => Err(Error::InvalidContext(
                "cannot evaluate a context; substitute first".to_string(),
            )),
            Tree::Leaf(name) => {
                let q = self.resolve_leaf(name)?;
                Ok(Some((q, self.semifield.one())))
            }
            Tree::Node(name, children) => {
                let sym = self
                    .alphabet
                    .id(name)
                    .ok_or_else(|| Error::UnknownSymbol(name.clone()))?;
                if self.alphabet.rank(sym) != children.len() {
                    return Err(Error::RankMismatch {
                        symbol: name.clone(),
                        expected: self.alphabet.rank(sym),
                        found: children.len(),
                    });
                }
                let mut sources = Vec::with_capacity(children.len());
                let mut weight = self.semifield.one();
                for child in children {
                    match self.eval_det_unchecked(child)? {
                        Some((q, w)) => {
                            sources.push(q);
                            weight = self.semifield.times(&weight, &w)?;
                        }
                        None => return Ok(None),
                    }
                }
                match self.step_unchecked(sym, &sources) {
                    Some((target, w)) => Ok(Some((target, self.semifield.times(&weight, w)?))),
                    None => Ok(None),
                }
            }
        }
    }

    /// The recognized weight of a ground tree: the sum of `h(t -> q)` over
    /// final states `q`.
    pub fn recognize(&self, tree: &Tree) -> Result<Value> {
        if tree.hole_count() != 0 {
            return Err(Error::InvalidContext(
                "cannot recognize a context".to_string(),
            ));
        }
        if has_state_leaf(tree) {
            return Err(Error::InvalidAutomaton(
                "recognize requires a ground tree".to_string(),
            ));
        }
        let mut result = self.semifield.zero();
        for (q, w) in self.evaluate(tree)? {
            if self.finals[q] {
                result = self.semifield.plus(&result, &w)?;
            }
        }
        Ok(result)
    }

    /// The unweighted projection: same states, alphabet and finals over the
    /// Boolean semifield, every supported transition with weight 1.
    pub fn unweighted(&self) -> Wta {
        let transitions = self
            .transitions
            .iter()
            .map(|t| Transition {
                symbol: t.symbol,
                sources: t.sources.clone(),
                target: t.target,
                weight: Value::Boolean(true),
            })
            .collect();
        Wta::from_parts(
            Semifield::Boolean,
            self.alphabet.clone(),
            self.states.clone(),
            self.finals.clone(),
            transitions,
        )
        .expect("projection preserves validity")
    }

    /// Per-state reachability: `true` iff the state has an access tree.
    pub fn accessible_states(&self) -> Vec<bool> {
        let mut reachable = vec![false; self.states.len()];
        let mut missing: Vec<usize> = self.transitions.iter().map(|t| t.sources.len()).collect();
        let mut queue: Vec<StateId> = Vec::new();
        for (id, t) in self.transitions.iter().enumerate() {
            if t.sources.is_empty() && !reachable[t.target] {
                reachable[t.target] = true;
                queue.push(t.target);
            }
            let _ = id;
        }
        let mut head = 0;
        while head < queue.len() {
            let q = queue[head];
            head += 1;
            for &(tid, _) in &self.by_source[q] {
                missing[tid] -= 1;
                if missing[tid] == 0 {
                    let target = self.transitions[tid].target;
                    if !reachable[target] {
                        reachable[target] = true;
                        queue.push(target);
                    }
                }
            }
        }
        reachable
    }

    pub fn is_accessible(&self) -> bool {
        self.accessible_states().iter().all(|&r| r)
    }

    /// Per-state liveness: `true` iff some context takes the state into a
    /// final state. Backward closure from the final states: every source of
    /// a transition with a live target is live.
    pub fn live_states(&self) -> Vec<bool> {
        let mut live = self.finals.clone();
        let mut queue: Vec<StateId> = (0..self.states.len()).filter(|&q| live[q]).collect();
        let mut head = 0;
        while head < queue.len() {
            let q = queue[head];
            head += 1;
            for &tid in &self.by_target[q] {
                for &src in &self.transitions[tid].sources {
                    if !live[src] {
                        live[src] = true;
                        queue.push(src);
                    }
                }
            }
        }
        live
    }

    fn restrict(&self, keep: &[bool]) -> Wta {
        let kept: Vec<StateId> = (0..self.states.len()).filter(|&q| keep[q]).collect();
        let mut remap = vec![usize::MAX; self.states.len()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        let states = kept.iter().map(|&q| self.states[q].clone()).collect();
        let finals = kept.iter().map(|&q| self.finals[q]).collect();
        let transitions = self
            .transitions
            .iter()
            .filter(|t| keep[t.target] && t.sources.iter().all(|&q| keep[q]))
            .map(|t| Transition {
                symbol: t.symbol,
                sources: t.sources.iter().map(|&q| remap[q]).collect(),
                target: remap[t.target],
                weight: t.weight.clone(),
            })
            .collect();
        Wta::from_parts(
            self.semifield,
            self.alphabet.clone(),
            states,
            finals,
            transitions,
        )
        .expect("restriction preserves validity")
    }

    /// Removes states without an access tree and all transitions mentioning
    /// them. The recognized weighted tree language is unchanged.
    pub fn trim_accessible(&self) -> Wta {
        let reachable = self.accessible_states();
        if reachable.iter().all(|&r| r) {
            return self.clone();
        }
        self.restrict(&reachable)
    }

    /// Removes both unreachable and dead states. Access trees of live states
    /// only pass through live states, so a single accessibility pass before
    /// the liveness pass suffices.
    pub fn trim_useful(&self) -> Wta {
        let trimmed = self.trim_accessible();
        let live = trimmed.live_states();
        if live.iter().all(|&l| l) {
            return trimmed;
        }
        trimmed.restrict(&live)
    }

    /// One access-tree entry per state of a deterministic accessible
    /// automaton, computed by breadth-first search that unfolds each state
    /// at most once.
    pub fn access_trees(&self) -> Result<AccessTreeTable> {
        if !self.deterministic {
            return Err(Error::NotDeterministic);
        }
        let mut entries: Vec<Option<AccessEntry>> = vec![None; self.states.len()];
        let mut order = Vec::with_capacity(self.states.len());
        let mut missing: Vec<usize> = self.transitions.iter().map(|t| t.sources.len()).collect();
        let mut queue: Vec<StateId> = Vec::new();
        let resolve = |q: StateId,
                           tid: TransitionId,
                           entries: &mut Vec<Option<AccessEntry>>,
                           order: &mut Vec<StateId>,
                           queue: &mut Vec<StateId>| {
            if entries[q].is_none() {
                let t = &self.transitions[tid];
                entries[q] = Some(AccessEntry {
                    symbol: t.symbol,
                    sources: t.sources.clone(),
                });
                order.push(q);
                queue.push(q);
            }
        };
        for (tid, t) in self.transitions.iter().enumerate() {
            if t.sources.is_empty() {
                resolve(t.target, tid, &mut entries, &mut order, &mut queue);
            }
        }
        let mut head = 0;
        while head < queue.len() {
            let q = queue[head];
            head += 1;
            for &(tid, _) in &self.by_source[q] {
                missing[tid] -= 1;
                if missing[tid] == 0 {
                    resolve(
                        self.transitions[tid].target,
                        tid,
                        &mut entries,
                        &mut order,
                        &mut queue,
                    );
                }
            }
        }
        if let Some(q) = entries.iter().position(Option::is_none) {
            return Err(Error::NotAccessible(self.states[q].clone()));
        }
        Ok(AccessTreeTable {
            entries: entries.into_iter().map(Option::unwrap).collect(),
            order,
        })
    }
}

fn has_state_leaf(tree: &Tree) -> bool {
    match tree {
        Tree::Leaf(_) => true,
        Tree::Hole => false,
        Tree::Node(_, children) => children.iter().any(has_state_leaf),
    }
}

/// One flat `symbol(sources...)` entry per state; unfolding the entries
/// yields an access tree for each state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessEntry {
    pub symbol: SymbolId,
    pub sources: Vec<StateId>,
}

/// Access trees in flat form. `order` lists the states in resolution order;
/// each entry refers only to states resolved strictly earlier, so the chain
/// is acyclic.
#[derive(Debug, Clone)]
pub struct AccessTreeTable {
    entries: Vec<AccessEntry>,
    order: Vec<StateId>,
}

impl AccessTreeTable {
    pub fn entry(&self, q: StateId) -> &AccessEntry {
        &self.entries[q]
    }

    pub fn order(&self) -> &[StateId] {
        &self.order
    }

    /// Unfolds the entry chain into a ground tree `t` with `h(t) = q`.
    /// Shared sub-entries are duplicated, so the result can be large.
    pub fn materialize(&self, m: &Wta, q: StateId) -> Tree {
        let entry = &self.entries[q];
        Tree::Node(
            m.alphabet().name(entry.symbol).to_string(),
            entry
                .sources
                .iter()
                .map(|&src| self.materialize(m, src))
                .collect(),
        )
    }

    /// The weight `h(a(q))` of each access tree, computed along the entry
    /// chain without materializing.
    pub fn weights(&self, m: &Wta) -> Result<Vec<Value>> {
        let sf = m.semifield();
        let mut weights: Vec<Option<Value>> = vec![None; self.entries.len()];
        for &q in &self.order {
            let entry = &self.entries[q];
            let (_, w) = m
                .step_unchecked(entry.symbol, &entry.sources)
                .expect("access entry is a transition");
            let mut weight = w.clone();
            for &src in &entry.sources {
                weight = sf.times(&weight, weights[src].as_ref().expect("resolved earlier"))?;
            }
            weights[q] = Some(weight);
        }
        Ok(weights.into_iter().map(Option::unwrap).collect())
    }
}
