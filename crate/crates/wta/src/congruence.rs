//! Coarsest-congruence computation by partition refinement, plus the
//! brute-force oracles used to cross-check it.
//!
//! A congruence here is weight-blind: it only constrains the target *states*
//! of transitions, with undefinedness treated as a value that is equal to
//! itself and different from every state.

use std::collections::{HashMap, VecDeque};

use crate::automaton::{StateId, Wta};
use crate::partition::Partition;
use crate::semifield::Value;
use crate::tree::SymbolId;
use crate::{Error, Result};

/// In-place refinable partition: a permutation of the elements grouped into
/// block slices, with a marked prefix per block for pending splits.
struct Refinable {
    elems: Vec<StateId>,
    pos: Vec<usize>,
    block_of: Vec<usize>,
    start: Vec<usize>,
    end: Vec<usize>,
    marked: Vec<usize>,
}

impl Refinable {
    fn new(init: &Partition) -> Refinable {
        let n = init.num_elements();
        let mut elems = Vec::with_capacity(n);
        let mut pos = vec![0; n];
        let mut block_of = vec![0; n];
        let mut start = Vec::new();
        let mut end = Vec::new();
        for (b, block) in init.blocks().enumerate() {
            start.push(elems.len());
            for &q in block {
                pos[q] = elems.len();
                block_of[q] = b;
                elems.push(q);
            }
            end.push(elems.len());
        }
        let marked = vec![0; start.len()];
        Refinable {
            elems,
            pos,
            block_of,
            start,
            end,
            marked,
        }
    }

    fn len(&self, b: usize) -> usize {
        self.end[b] - self.start[b]
    }

    /// Moves `q` into the marked prefix of its block. Returns the block id
    /// when this is the block's first mark.
    fn mark(&mut self, q: StateId) -> Option<usize> {
        let b = self.block_of[q];
        let boundary = self.start[b] + self.marked[b];
        let p = self.pos[q];
        if p < boundary {
            return None; // already marked
        }
        self.elems.swap(p, boundary);
        self.pos[self.elems[p]] = p;
        self.pos[self.elems[boundary]] = boundary;
        self.marked[b] += 1;
        if self.marked[b] == 1 {
            Some(b)
        } else {
            None
        }
    }

    /// Splits the marked prefix off as a new block and clears the marks.
    /// Returns the new block id if the block actually split.
    fn split(&mut self, b: usize) -> Option<usize> {
        let m = self.marked[b];
        self.marked[b] = 0;
        if m == 0 || m == self.len(b) {
            return None;
        }
        let new = self.start.len();
        let cut = self.start[b] + m;
        self.start.push(self.start[b]);
        self.end.push(cut);
        self.marked.push(0);
        self.start[b] = cut;
        for i in self.start[new]..self.end[new] {
            self.block_of[self.elems[i]] = new;
        }
        Some(new)
    }

    fn into_partition(self) -> Partition {
        Partition::from_assignment(&self.block_of)
    }
}

type ObsKey = (SymbolId, usize, Vec<StateId>);

fn masked(sources: &[StateId], hole: usize) -> Vec<StateId> {
    let mut key = sources.to_vec();
    key[hole] = usize::MAX;
    key
}

/// The coarsest congruence of a deterministic automaton that refines
/// `initial` and respects the final states.
///
/// Partition refinement with a splitter queue over (block, symbol, position)
/// observations, processing the smaller half of each split. All initial
/// blocks are seeded into the queue, which keeps the computation correct for
/// partial transition maps. Runs in `O(|M| log |Q|)` up to hashing.
pub fn coarsest_congruence(m: &Wta, initial: &Partition) -> Result<Partition> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    if initial.num_elements() != m.num_states() {
        return Err(Error::InvalidPartition(
            "partition does not match the state set".to_string(),
        ));
    }
    let init = initial.respect_finals(m.final_flags());
    let mut part = Refinable::new(&init);
    let mut queue: VecDeque<usize> = (0..init.num_blocks()).collect();
    let mut in_queue = vec![true; init.num_blocks()];

    while let Some(splitter) = queue.pop_front() {
        in_queue[splitter] = false;
        let members: Vec<StateId> =
            part.elems[part.start[splitter]..part.end[splitter]].to_vec();
        // Group the predecessors of the splitter by observation: the
        // transition with one source position masked out.
        let mut touched: HashMap<ObsKey, Vec<StateId>> = HashMap::new();
        for &q in &members {
            for &tid in m.transitions_into(q) {
                let t = &m.transitions()[tid];
                for i in 0..t.sources.len() {
                    touched
                        .entry((t.symbol, i, masked(&t.sources, i)))
                        .or_default()
                        .push(t.sources[i]);
                }
            }
        }
        for (_, preds) in touched {
            let mut dirty: Vec<usize> = Vec::new();
            for &q in &preds {
                if let Some(b) = part.mark(q) {
                    dirty.push(b);
                }
            }
            for b in dirty {
                if let Some(new) = part.split(b) {
                    if in_queue[b] {
                        in_queue.push(true);
                        queue.push_back(new);
                    } else {
                        let smaller = if part.len(new) <= part.len(b) { new } else { b };
                        in_queue.push(false);
                        in_queue[smaller] = true;
                        queue.push_back(smaller);
                    }
                }
            }
        }
    }
    Ok(part.into_partition())
}

/// Moore-style refinement oracle for [`coarsest_congruence`]: recompute
/// per-state observation signatures and split until stable. `O(|M| |Q|)`.
pub fn naive_congruence_oracle(m: &Wta, initial: &Partition) -> Result<Partition> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    if initial.num_elements() != m.num_states() {
        return Err(Error::InvalidPartition(
            "partition does not match the state set".to_string(),
        ));
    }
    let mut current = initial.respect_finals(m.final_flags());
    // Stable observation ids, shared across rounds.
    let mut obs_ids: HashMap<ObsKey, usize> = HashMap::new();
    let mut obs_of: Vec<Vec<(usize, StateId)>> = vec![Vec::new(); m.num_states()];
    for t in m.transitions() {
        for i in 0..t.sources.len() {
            let key = (t.symbol, i, masked(&t.sources, i));
            let next = obs_ids.len();
            let id = *obs_ids.entry(key).or_insert(next);
            obs_of[t.sources[i]].push((id, t.target));
        }
    }
    loop {
        let mut signatures: Vec<(usize, Vec<(usize, usize)>)> = Vec::with_capacity(m.num_states());
        for q in 0..m.num_states() {
            let mut sig: Vec<(usize, usize)> = obs_of[q]
                .iter()
                .map(|&(obs, target)| (obs, current.block_of(target)))
                .collect();
            sig.sort_unstable();
            signatures.push((current.block_of(q), sig));
        }
        let mut ids: HashMap<&(usize, Vec<(usize, usize)>), usize> = HashMap::new();
        let mut assignment = Vec::with_capacity(m.num_states());
        for sig in &signatures {
            let next = ids.len();
            assignment.push(*ids.entry(sig).or_insert(next));
        }
        let refined = Partition::from_assignment(&assignment);
        if refined.num_blocks() == current.num_blocks() {
            return Ok(refined);
        }
        current = refined;
    }
}

/// A single-transition context frame `symbol(q1 .. # .. qk)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    pub symbol: SymbolId,
    pub sources: Vec<StateId>,
    pub hole: usize,
}

impl Frame {
    /// The state/weight step of the frame applied to `q`, if defined.
    pub fn step<'a>(&self, m: &'a Wta, q: StateId) -> Option<(StateId, &'a Value)> {
        let mut lhs = self.sources.clone();
        lhs[self.hole] = q;
        m.step_unchecked(self.symbol, &lhs)
    }

    pub fn to_context(&self, m: &Wta) -> crate::tree::Context {
        let children = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, &q)| {
                if i == self.hole {
                    crate::tree::Tree::Hole
                } else {
                    crate::tree::Tree::leaf(m.state_name(q))
                }
            })
            .collect();
        crate::tree::Context::new(crate::tree::Tree::node(
            m.alphabet().name(self.symbol),
            children,
        ))
        .expect("frame has exactly one hole")
    }
}

/// All frames occurring in the automaton, deduplicated.
pub(crate) fn frames(m: &Wta) -> Vec<Frame> {
    let mut seen: HashMap<ObsKey, ()> = HashMap::new();
    let mut result = Vec::new();
    for t in m.transitions() {
        for i in 0..t.sources.len() {
            let key = (t.symbol, i, masked(&t.sources, i));
            if seen.insert(key, ()).is_none() {
                result.push(Frame {
                    symbol: t.symbol,
                    sources: t.sources.clone(),
                    hole: i,
                });
            }
        }
    }
    result
}

/// Interning table for exact weights, with memoized products and inverses,
/// so the oracle's action arithmetic runs on small integer ids.
struct WeightTable {
    values: Vec<Value>,
    ids: HashMap<Value, u32>,
    products: HashMap<(u32, u32), u32>,
    inverses: HashMap<u32, u32>,
}

impl WeightTable {
    fn new(one: Value) -> WeightTable {
        let mut table = WeightTable {
            values: Vec::new(),
            ids: HashMap::new(),
            products: HashMap::new(),
            inverses: HashMap::new(),
        };
        table.intern(one);
        table
    }

    fn one(&self) -> u32 {
        0
    }

    fn intern(&mut self, v: Value) -> u32 {
        if let Some(&id) = self.ids.get(&v) {
            return id;
        }
        let id = self.values.len() as u32;
        self.values.push(v.clone());
        self.ids.insert(v, id);
        id
    }

    fn times(&mut self, a: u32, b: u32) -> Result<u32> {
        if let Some(&id) = self.products.get(&(a, b)) {
            return Ok(id);
        }
        let v = self.values[a as usize].times(&self.values[b as usize])?;
        let id = self.intern(v);
        self.products.insert((a, b), id);
        Ok(id)
    }

    fn inverse(&mut self, a: u32) -> Result<u32> {
        if let Some(&id) = self.inverses.get(&a) {
            return Ok(id);
        }
        let v = self.values[a as usize].inverse()?;
        let id = self.intern(v);
        self.inverses.insert(a, id);
        Ok(id)
    }
}

/// How a context acts on every state at once: the reached state (the state
/// count as the undefined sentinel) and the accumulated weight id per start
/// state.
///
/// Actions are kept normalized: the weight vector is divided by its first
/// defined entry. The defining equation of the strong equivalence only
/// constrains weight ratios between start states, and composition respects
/// global scaling, so normalized actions are interchangeable with raw ones
/// while deduplicating much better (powers of loop weights collapse).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Action {
    state: Vec<StateId>,
    weight: Vec<u32>,
}

/// Pairwise constraints extracted from the enumerated actions: separation
/// and the unique scaling factor, folded in on the fly.
struct PairConstraints {
    n: usize,
    separated: Vec<bool>,
    ratio: Vec<Option<u32>>,
}

impl PairConstraints {
    fn new(n: usize) -> PairConstraints {
        PairConstraints {
            n,
            separated: vec![false; n * n],
            ratio: vec![None; n * n],
        }
    }

    fn index(&self, q1: StateId, q2: StateId) -> usize {
        q1 * self.n + q2
    }

    fn fold(&mut self, m: &Wta, table: &mut WeightTable, action: &Action) -> Result<()> {
        let n = self.n;
        let is_final = |q: StateId| action.state[q] < n && m.is_final(action.state[q]);
        for q1 in 0..n {
            for q2 in q1 + 1..n {
                let idx = self.index(q1, q2);
                if self.separated[idx] {
                    continue;
                }
                let (f1, f2) = (is_final(q1), is_final(q2));
                if f1 != f2 {
                    self.separated[idx] = true;
                } else if f1 && f2 {
                    let inv = table.inverse(action.weight[q2])?;
                    let r = table.times(action.weight[q1], inv)?;
                    match self.ratio[idx] {
                        None => self.ratio[idx] = Some(r),
                        Some(existing) if existing != r => self.separated[idx] = true,
                        Some(_) => {}
                    }
                }
            }
        }
        Ok(())
    }
}

/// Result of the brute-force Myhill-Nerode oracle.
#[derive(Debug, Clone)]
pub struct MyhillNerode {
    pub partition: Partition,
    /// Per state: did some enumerated context reach a final state?
    pub live: Vec<bool>,
    /// Per state, the scaling factor relative to the least member of its
    /// block (1 for dead blocks).
    relative: Vec<Value>,
}

impl MyhillNerode {
    /// The factor `s` with `h(c[q1]) = s * h(c[q2])` over all final-reaching
    /// enumerated contexts, for states in the same block.
    pub fn factor(&self, q1: StateId, q2: StateId) -> Option<Value> {
        if !self.partition.same_block(q1, q2) {
            return None;
        }
        let s = self.relative[q1]
            .times(&self.relative[q2].inverse().ok()?)
            .ok()?;
        Some(s)
    }
}

/// Brute-force Myhill-Nerode oracle: enumerates the actions of all contexts
/// built from at most `depth` single-transition frames (deeper ground
/// co-subtrees only rescale both sides of the defining equation, so frames
/// with state leaves cover all constraints at that hole depth). States are
/// equivalent when one nonzero factor relates their weights on every
/// final-reaching enumerated context. Exact over the enumerated window.
pub fn myhill_nerode_oracle(m: &Wta, depth: usize) -> Result<MyhillNerode> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    let n = m.num_states();
    let undefined = n;
    let mut table = WeightTable::new(m.semifield().one());
    let frames = frames(m);
    // frame steps as id tables: per frame and state, (target, weight id)
    let steps: Vec<Vec<Option<(StateId, u32)>>> = frames
        .iter()
        .map(|frame| {
            (0..n)
                .map(|q| frame.step(m, q).map(|(t, w)| (t, w.clone())))
                .collect::<Vec<_>>()
                .into_iter()
                .map(|entry| entry.map(|(t, w)| (t, table.intern(w))))
                .collect()
        })
        .collect();

    let normalize = |action: &mut Action, table: &mut WeightTable| -> Result<()> {
        if let Some(first) = action.state.iter().position(|&s| s < undefined) {
            let inv = table.inverse(action.weight[first])?;
            for q in 0..action.state.len() {
                if action.state[q] < undefined {
                    action.weight[q] = table.times(action.weight[q], inv)?;
                } else {
                    action.weight[q] = table.one();
                }
            }
        }
        Ok(())
    };

    let identity = Action {
        state: (0..n).collect(),
        weight: vec![table.one(); n],
    };
    let mut constraints = PairConstraints::new(n);
    let mut live = vec![false; n];
    let fold = |action: &Action,
                    constraints: &mut PairConstraints,
                    table: &mut WeightTable,
                    live: &mut Vec<bool>|
     -> Result<()> {
        for q in 0..n {
            if action.state[q] < undefined && m.is_final(action.state[q]) {
                live[q] = true;
            }
        }
        constraints.fold(m, table, action)
    };
    fold(&identity, &mut constraints, &mut table, &mut live)?;
    let mut seen: std::collections::HashSet<Action> = std::collections::HashSet::new();
    seen.insert(identity.clone());
    let mut level = vec![identity];
    for _ in 0..depth {
        let mut next = Vec::new();
        for action in &level {
            'frames: for step in &steps {
                let mut state = vec![undefined; n];
                let mut weight = vec![table.one(); n];
                let mut any = false;
                for q in 0..n {
                    if action.state[q] < undefined {
                        if let Some((target, w)) = step[action.state[q]] {
                            state[q] = target;
                            weight[q] = table.times(action.weight[q], w)?;
                            any = true;
                        }
                    }
                }
                if !any {
                    continue 'frames;
                }
                let mut candidate = Action { state, weight };
                normalize(&mut candidate, &mut table)?;
                if seen.insert(candidate.clone()) {
                    fold(&candidate, &mut constraints, &mut table, &mut live)?;
                    next.push(candidate);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }

    // Group states: a pair is equivalent when no enumerated action separates
    // it; the folded relation is transitive, so joining against block
    // representatives suffices.
    let mut assignment = vec![usize::MAX; n];
    let mut relative = vec![m.semifield().one(); n];
    let mut reps: Vec<StateId> = Vec::new();
    for q in 0..n {
        for (b, &rep) in reps.iter().enumerate() {
            let idx = constraints.index(rep, q);
            if !constraints.separated[idx] {
                assignment[q] = b;
                // stored ratio is h(c[rep]) / h(c[q]); relative is the factor
                // against the representative, i.e. its inverse
                relative[q] = match constraints.ratio[idx] {
                    Some(r) => table.values[r as usize].inverse()?,
                    None => m.semifield().one(),
                };
                break;
            }
        }
        if assignment[q] == usize::MAX {
            assignment[q] = reps.len();
            reps.push(q);
        }
    }
    Ok(MyhillNerode {
        partition: Partition::from_assignment(&assignment),
        live,
        relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_automaton;
    use crate::random::{random_dwta, DwtaConfig};
    use crate::semifield::Semifield;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Wta {
        parse_automaton(include_str!("../tests/fixtures/four_state.wta")).unwrap()
    }

    fn blocks_by_name(m: &Wta, p: &Partition) -> Vec<Vec<String>> {
        p.blocks()
            .map(|b| b.iter().map(|&q| m.state_name(q).to_string()).collect())
            .collect()
    }

    #[test]
    fn sample_congruence_is_two_blocks() {
        let m = sample();
        let p = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
        assert_eq!(
            blocks_by_name(&m, &p),
            vec![vec!["q_1", "q_f"], vec!["q_2", "q_b"]]
        );
        assert!(p.is_congruence(&m).unwrap());
        assert!(p.respects(m.final_flags()));
    }

    #[test]
    fn discrete_initial_stays_discrete() {
        let m = sample();
        let p = coarsest_congruence(&m, &Partition::discrete(m.num_states())).unwrap();
        assert!(p.is_discrete());
    }

    #[test]
    fn oracle_trivial_cases() {
        // singleton automaton -> single block
        let alphabet =
            crate::tree::RankedAlphabet::new([("a".to_string(), 0)].into_iter()).unwrap();
        let single = Wta::new(
            Semifield::Rational,
            alphabet.clone(),
            vec!["q".to_string()],
            vec!["q".to_string()],
            vec![("a".to_string(), vec![], "q".to_string(), Value::rational(1, 1))],
        )
        .unwrap();
        let p = naive_congruence_oracle(&single, &Partition::universal(1)).unwrap();
        assert_eq!(p.num_blocks(), 1);

        // two sinks, one final one not -> split
        let two = Wta::new(
            Semifield::Rational,
            alphabet,
            vec!["q1".to_string(), "q2".to_string()],
            vec!["q1".to_string()],
            vec![("a".to_string(), vec![], "q1".to_string(), Value::rational(1, 1))],
        )
        .unwrap();
        let p = naive_congruence_oracle(&two, &Partition::universal(2)).unwrap();
        assert_eq!(p.num_blocks(), 2);
    }

    #[test]
    fn engine_matches_oracle_on_random_dwta() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let m = random_dwta(&DwtaConfig::small(8), &mut rng);
            let universal = Partition::universal(m.num_states());
            let fast = coarsest_congruence(&m, &universal).unwrap();
            let slow = naive_congruence_oracle(&m, &universal).unwrap();
            assert_eq!(fast, slow, "automaton:\n{}", crate::format::print_automaton(&m));
            assert!(fast.is_congruence(&m).unwrap());
        }
    }

    #[test]
    fn congruence_is_maximal_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let m = random_dwta(&DwtaConfig::small(5), &mut rng);
            let p = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
            // merging any two blocks breaks congruence or F-respect
            for a in 0..p.num_blocks() {
                for b in a + 1..p.num_blocks() {
                    let mut blocks: Vec<Vec<StateId>> = Vec::new();
                    let mut merged: Vec<StateId> = Vec::new();
                    for (i, block) in p.blocks().enumerate() {
                        if i == a || i == b {
                            merged.extend_from_slice(block);
                        } else {
                            blocks.push(block.to_vec());
                        }
                    }
                    blocks.push(merged);
                    let q = Partition::from_blocks(m.num_states(), blocks).unwrap();
                    assert!(
                        !q.is_congruence(&m).unwrap() || !q.respects(m.final_flags()),
                        "mergeable blocks {a} and {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn myhill_nerode_on_sample() {
        let m = sample();
        let oracle = myhill_nerode_oracle(&m, m.num_states() + 2).unwrap();
        let q_1 = m.state_id("q_1").unwrap();
        let q_2 = m.state_id("q_2").unwrap();
        let q_b = m.state_id("q_b").unwrap();
        let q_f = m.state_id("q_f").unwrap();
        assert!(oracle.partition.same_block(q_2, q_b));
        let s = oracle.factor(q_2, q_b).unwrap();
        assert!(!s.is_zero());
        // h(c[q_2]) = s * h(c[q_b]) with gamma weights 2 and 8
        assert_eq!(s, Value::rational(1, 4));
        assert!(!oracle.partition.same_block(q_1, q_f));
        assert_eq!(oracle.factor(q_1, q_1), Some(Value::rational(1, 1)));
    }

    #[test]
    fn myhill_nerode_refines_weak_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..30 {
            let m = random_dwta(&DwtaConfig::small(6), &mut rng);
            let weak = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
            let strong = myhill_nerode_oracle(&m, m.num_states() + 2).unwrap();
            assert!(
                strong.partition.refines(&weak),
                "automaton:\n{}",
                crate::format::print_automaton(&m)
            );
        }
    }
}
