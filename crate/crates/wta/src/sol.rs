//! Signs of life and pushing weights.
//!
//! A context `c` is a sign of life for a state `q` if plugging `q` into `c`
//! drives the automaton into a final state; a state with a sign of life is
//! live, otherwise dead. Signs of life are computed per block of a
//! congruence that respects the final states, because all members of such a
//! block share the same signs of life. Alongside each block's context, each
//! live state `q` receives its pushing weight `lambda(q)`, the weight of
//! running `q` through the block's sign of life.

use std::collections::VecDeque;

use crate::automaton::{StateId, Wta};
use crate::congruence::Frame;
use crate::partition::Partition;
use crate::semifield::Value;
use crate::transform::PushWeights;
use crate::tree::Context;
use crate::{Error, Result};

#[derive(Debug, Clone)]
enum BlockSol {
    /// Final block: the trivial context.
    Root,
    /// Reached by extending `parent`'s sign of life with one transition
    /// frame.
    Extend { parent: usize, frame: Frame },
}

/// Live blocks with their signs of life and per-state pushing weights.
///
/// Signs of life are stored as chains of single-transition frames, one per
/// block, so the table stays linear in the automaton size; contexts are
/// materialized on demand.
#[derive(Debug, Clone)]
pub struct SolTable {
    congruence: Partition,
    sols: Vec<Option<BlockSol>>,
    lambda: Vec<Option<Value>>,
    live_order: Vec<usize>,
}

impl SolTable {
    /// The congruence the table was computed for.
    pub fn congruence(&self) -> &Partition {
        &self.congruence
    }

    pub fn is_live_block(&self, block: usize) -> bool {
        self.sols[block].is_some()
    }

    pub fn is_live_state(&self, q: StateId) -> bool {
        self.lambda[q].is_some()
    }

    /// Pushing weight of a live state.
    pub fn lambda(&self, q: StateId) -> Option<&Value> {
        self.lambda[q].as_ref()
    }

    pub fn lambda_map(&self) -> &[Option<Value>] {
        &self.lambda
    }

    /// Live blocks in discovery order (final blocks first).
    pub fn live_blocks(&self) -> &[usize] {
        &self.live_order
    }

    pub fn num_live_states(&self) -> usize {
        self.lambda.iter().filter(|l| l.is_some()).count()
    }

    /// The frame extending the parent block's sign of life, `None` for
    /// final blocks and dead blocks.
    pub fn frame(&self, block: usize) -> Option<(&Frame, usize)> {
        match &self.sols[block] {
            Some(BlockSol::Extend { parent, frame }) => Some((frame, *parent)),
            _ => None,
        }
    }

    /// Materializes the block's sign of life as a context over state
    /// leaves.
    pub fn sol_context(&self, m: &Wta, block: usize) -> Option<Context> {
        match &self.sols[block] {
            None => None,
            Some(BlockSol::Root) => Some(Context::hole()),
            Some(BlockSol::Extend { parent, frame }) => {
                let outer = self.sol_context(m, *parent)?;
                Some(outer.compose(&frame.to_context(m)))
            }
        }
    }

    /// Total pushing weights for an automaton without dead states.
    pub fn pushing_weights(&self, m: &Wta) -> Result<PushWeights> {
        let weights = (0..m.num_states())
            .map(|q| {
                self.lambda[q].clone().ok_or_else(|| {
                    Error::Precondition(format!(
                        "state `{}` is dead and has no pushing weight",
                        m.state_name(q)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PushWeights::new(m, weights)
    }
}

/// Computes the live blocks, their signs of life and the pushing weights by
/// exploration from the final states.
///
/// `cong` must be a congruence of `m` that respects the final states. The
/// respect-of-finals requirement is checked up front; the congruence
/// property is asserted while exploring (every block sibling of a discovered
/// source state must have a defined transition into the discovered block).
/// Runs in `O(|M| + |Q|)`.
pub fn compute_sol(m: &Wta, cong: &Partition) -> Result<SolTable> {
    if !m.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    if cong.num_elements() != m.num_states() {
        return Err(Error::InvalidPartition(
            "partition does not match the state set".to_string(),
        ));
    }
    if !cong.respects(m.final_flags()) {
        return Err(Error::Precondition(
            "congruence does not respect the final states".to_string(),
        ));
    }
    let mut sols: Vec<Option<BlockSol>> = vec![None; cong.num_blocks()];
    let mut lambda: Vec<Option<Value>> = vec![None; m.num_states()];
    let mut live_order = Vec::new();
    let mut queue = VecDeque::new();

    // Final blocks are live with the trivial context and weight 1.
    for (b, block) in cong.blocks().enumerate() {
        if m.is_final(block[0]) {
            sols[b] = Some(BlockSol::Root);
            for &q in block {
                lambda[q] = Some(m.semifield().one());
            }
            live_order.push(b);
            queue.push_back(b);
        }
    }

    while let Some(b) = queue.pop_front() {
        for &q in cong.block(b) {
            for &tid in m.transitions_into(q) {
                let t = &m.transitions()[tid];
                for (i, &src) in t.sources.iter().enumerate() {
                    let sb = cong.block_of(src);
                    if sols[sb].is_some() {
                        continue;
                    }
                    let frame = Frame {
                        symbol: t.symbol,
                        sources: t.sources.clone(),
                        hole: i,
                    };
                    for &sibling in cong.block(sb) {
                        let (target, weight) = frame.step(m, sibling).ok_or_else(|| {
                            Error::Precondition(format!(
                                "not a congruence: no transition for `{}` in the frame of `{}`",
                                m.state_name(sibling),
                                m.state_name(src),
                            ))
                        })?;
                        if cong.block_of(target) != b {
                            return Err(Error::Precondition(format!(
                                "not a congruence: sibling `{}` leaves the discovered block",
                                m.state_name(sibling),
                            )));
                        }
                        let target_lambda = lambda[target]
                            .as_ref()
                            .expect("target block is live, so its weights are set");
                        lambda[sibling] = Some(target_lambda.times(weight)?);
                    }
                    sols[sb] = Some(BlockSol::Extend { parent: b, frame });
                    live_order.push(sb);
                    queue.push_back(sb);
                }
            }
        }
    }
    Ok(SolTable {
        congruence: cong.clone(),
        sols,
        lambda,
        live_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congruence::coarsest_congruence;
    use crate::format::parse_automaton;
    use crate::random::{random_dwta, DwtaConfig};
    use crate::semifield::Semifield;
    use crate::tree::{RankedAlphabet, Tree};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Wta {
        parse_automaton(include_str!("../tests/fixtures/four_state.wta")).unwrap()
    }

    #[test]
    fn worked_example() {
        let m = sample();
        let cong = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
        let sol = compute_sol(&m, &cong).unwrap();
        let lam = |name: &str| sol.lambda(m.state_id(name).unwrap()).unwrap().clone();
        assert_eq!(lam("q_1"), Value::rational(1, 1));
        assert_eq!(lam("q_f"), Value::rational(1, 1));
        assert_eq!(lam("q_2"), Value::rational(2, 1));
        assert_eq!(lam("q_b"), Value::rational(8, 1));
        let block = cong.block_of(m.state_id("q_2").unwrap());
        let ctx = sol.sol_context(&m, block).unwrap();
        assert_eq!(ctx.to_string(), "gamma(#)");
        let final_block = cong.block_of(m.state_id("q_f").unwrap());
        assert_eq!(sol.sol_context(&m, final_block).unwrap(), Context::hole());
    }

    #[test]
    fn all_final_automaton_is_trivially_live() {
        let alphabet = RankedAlphabet::new(
            [("a".to_string(), 0), ("g".to_string(), 1)].into_iter(),
        )
        .unwrap();
        let m = Wta::new(
            Semifield::Rational,
            alphabet,
            vec!["p".to_string(), "q".to_string()],
            vec!["p".to_string(), "q".to_string()],
            vec![
                ("a".to_string(), vec![], "p".to_string(), Value::rational(3, 1)),
                ("g".to_string(), vec!["p".to_string()], "q".to_string(), Value::rational(5, 1)),
            ],
        )
        .unwrap();
        let cong = Partition::discrete(2);
        let sol = compute_sol(&m, &cong).unwrap();
        for b in 0..cong.num_blocks() {
            assert_eq!(sol.sol_context(&m, b).unwrap(), Context::hole());
        }
        for q in 0..m.num_states() {
            assert!(sol.lambda(q).unwrap().is_one());
        }
    }

    #[test]
    fn dead_blocks_are_not_live() {
        // q_dead can never reach the final state
        let alphabet = RankedAlphabet::new(
            [("a".to_string(), 0), ("b".to_string(), 0), ("g".to_string(), 1)].into_iter(),
        )
        .unwrap();
        let m = Wta::new(
            Semifield::Rational,
            alphabet,
            vec!["q_dead".to_string(), "q_fin".to_string()],
            vec!["q_fin".to_string()],
            vec![
                ("a".to_string(), vec![], "q_fin".to_string(), Value::rational(1, 1)),
                ("b".to_string(), vec![], "q_dead".to_string(), Value::rational(1, 1)),
                (
                    "g".to_string(),
                    vec!["q_dead".to_string()],
                    "q_dead".to_string(),
                    Value::rational(2, 1),
                ),
            ],
        )
        .unwrap();
        let cong = Partition::discrete(2);
        let sol = compute_sol(&m, &cong).unwrap();
        let dead = m.state_id("q_dead").unwrap();
        assert!(!sol.is_live_state(dead));
        assert!(sol.sol_context(&m, cong.block_of(dead)).is_none());
        assert!(sol.is_live_state(m.state_id("q_fin").unwrap()));
        assert!(sol.pushing_weights(&m).is_err());
    }

    #[test]
    fn respect_of_finals_is_checked() {
        let m = sample();
        let bad = Partition::universal(m.num_states());
        assert!(matches!(
            compute_sol(&m, &bad),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn postcondition_on_random_dwta() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let m = random_dwta(&DwtaConfig::small(7), &mut rng);
            let cong = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
            let sol = compute_sol(&m, &cong).unwrap();
            for q in 0..m.num_states() {
                let block = cong.block_of(q);
                match sol.sol_context(&m, block) {
                    Some(ctx) => {
                        let t = ctx.apply(&Tree::leaf(m.state_name(q)));
                        let (state, weight) = m.eval_det(&t).unwrap().unwrap();
                        assert!(m.is_final(state));
                        assert_eq!(&weight, sol.lambda(q).unwrap());
                    }
                    None => assert!(sol.lambda(q).is_none()),
                }
            }
        }
    }

    #[test]
    fn liveness_matches_context_enumeration() {
        // a state is in a live block iff context enumeration to depth |Q|
        // finds a final-reaching context
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..25 {
            let m = random_dwta(&DwtaConfig::small(6), &mut rng);
            let cong = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
            let sol = compute_sol(&m, &cong).unwrap();
            let oracle = crate::congruence::myhill_nerode_oracle(&m, m.num_states()).unwrap();
            let closure = m.live_states();
            for q in 0..m.num_states() {
                assert_eq!(sol.is_live_state(q), oracle.live[q]);
                assert_eq!(sol.is_live_state(q), closure[q]);
            }
        }
    }

    #[test]
    fn shared_signs_of_life_within_blocks() {
        // any congruence respecting F: a sign of life of q works for all
        // block siblings of q
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let m = random_dwta(&DwtaConfig::small(6), &mut rng);
            let cong = coarsest_congruence(&m, &Partition::universal(m.num_states())).unwrap();
            let sol = compute_sol(&m, &cong).unwrap();
            for (b, block) in cong.blocks().enumerate() {
                if let Some(ctx) = sol.sol_context(&m, b) {
                    for &q in block {
                        let t = ctx.apply(&Tree::leaf(m.state_name(q)));
                        let (state, _) = m.eval_det(&t).unwrap().unwrap();
                        assert!(m.is_final(state));
                    }
                }
            }
        }
    }
}
