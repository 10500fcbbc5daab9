//! Partitions of the state set.

use std::fmt;

use crate::automaton::{StateId, Wta};
use crate::{Error, Result};

/// An equivalence relation on `{0, .., n-1}` represented as blocks with a
/// per-state block lookup.
///
/// The representation is canonical: members of a block are sorted and blocks
/// are ordered by their least member, so structural equality coincides with
/// equality of the represented relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<usize>,
    blocks: Vec<Vec<StateId>>,
}

impl Partition {
    /// The single-block partition of `{0, .., n-1}` (empty for `n = 0`).
    pub fn universal(n: usize) -> Partition {
        if n == 0 {
            return Partition {
                block_of: Vec::new(),
                blocks: Vec::new(),
            };
        }
        Partition {
            block_of: vec![0; n],
            blocks: vec![(0..n).collect()],
        }
    }

    /// The partition into singletons.
    pub fn discrete(n: usize) -> Partition {
        Partition {
            block_of: (0..n).collect(),
            blocks: (0..n).map(|q| vec![q]).collect(),
        }
    }

    /// Builds a partition from blocks; they must be disjoint, nonempty and
    /// cover `{0, .., n-1}`.
    pub fn from_blocks(n: usize, blocks: Vec<Vec<StateId>>) -> Result<Partition> {
        let mut block_of = vec![usize::MAX; n];
        let mut blocks: Vec<Vec<StateId>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort();
        for (i, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block".to_string()));
            }
            for &q in block {
                if q >= n {
                    return Err(Error::InvalidPartition(format!(
                        "element {q} out of range"
                    )));
                }
                if block_of[q] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "element {q} occurs twice"
                    )));
                }
                block_of[q] = i;
            }
        }
        if block_of.iter().any(|&b| b == usize::MAX) {
            return Err(Error::InvalidPartition(
                "blocks do not cover the element set".to_string(),
            ));
        }
        Ok(Partition { block_of, blocks })
    }

    /// Builds the canonical form from a block-id assignment.
    pub(crate) fn from_assignment(assignment: &[usize]) -> Partition {
        let mut first_seen: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<StateId>> = Vec::new();
        let mut block_of = vec![usize::MAX; assignment.len()];
        for (q, &raw) in assignment.iter().enumerate() {
            let canonical = *first_seen.entry(raw).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() - 1
            });
            block_of[q] = canonical;
            blocks[canonical].push(q);
        }
        Partition { block_of, blocks }
    }

    pub fn num_elements(&self) -> usize {
        self.block_of.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, q: StateId) -> usize {
        self.block_of[q]
    }

    pub fn block(&self, index: usize) -> &[StateId] {
        &self.blocks[index]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[StateId]> {
        self.blocks.iter().map(Vec::as_slice)
    }

    pub fn same_block(&self, p: StateId, q: StateId) -> bool {
        self.block_of[p] == self.block_of[q]
    }

    pub fn is_discrete(&self) -> bool {
        self.blocks.len() == self.block_of.len()
    }

    /// True iff every block lies entirely inside or entirely outside the set.
    pub fn respects(&self, set: &[bool]) -> bool {
        self.blocks
            .iter()
            .all(|b| b.iter().all(|&q| set[q]) || b.iter().all(|&q| !set[q]))
    }

    /// True iff every block of `self` is contained in a block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        self.block_of.len() == other.block_of.len()
            && self
                .blocks
                .iter()
                .all(|b| b.iter().all(|&q| other.block_of[q] == other.block_of[b[0]]))
    }

    /// The coarsest common refinement of two partitions.
    pub fn intersect(&self, other: &Partition) -> Partition {
        assert_eq!(self.block_of.len(), other.block_of.len());
        let n = self.block_of.len();
        let mut ids: Vec<usize> = Vec::with_capacity(n);
        let mut seen: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        for q in 0..n {
            let key = (self.block_of[q], other.block_of[q]);
            let next = seen.len();
            ids.push(*seen.entry(key).or_insert(next));
        }
        Partition::from_assignment(&ids)
    }

    /// Splits every block by final/non-final membership.
    pub fn respect_finals(&self, finals: &[bool]) -> Partition {
        assert_eq!(self.block_of.len(), finals.len());
        let n = self.block_of.len();
        let ids: Vec<usize> = (0..n)
            .map(|q| 2 * self.block_of[q] + usize::from(finals[q]))
            .collect();
        Partition::from_assignment(&ids)
    }

    /// True iff the relation is a congruence of `m`: replacing one source
    /// state of a defined transition by a block sibling again yields a
    /// defined transition with an equivalent target. Checking one position
    /// at a time suffices because equivalent tuples are connected by chains
    /// of single-position replacements.
    pub fn is_congruence(&self, m: &Wta) -> Result<bool> {
        if !m.is_deterministic() {
            return Err(Error::NotDeterministic);
        }
        if self.num_elements() != m.num_states() {
            return Err(Error::InvalidPartition(
                "partition does not match the state set".to_string(),
            ));
        }
        for t in m.transitions() {
            let mut lhs = t.sources.clone();
            for pos in 0..lhs.len() {
                let original = lhs[pos];
                for &sibling in self.block(self.block_of(original)) {
                    if sibling == original {
                        continue;
                    }
                    lhs[pos] = sibling;
                    match m.step_unchecked(t.symbol, &lhs) {
                        Some((target, _)) if self.same_block(target, t.target) => {}
                        _ => return Ok(false),
                    }
                }
                lhs[pos] = original;
            }
        }
        Ok(true)
    }

    /// Renders the partition using state names, one block per line.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> PartitionDisplay<'a> {
        PartitionDisplay {
            partition: self,
            names,
        }
    }
}

pub struct PartitionDisplay<'a> {
    partition: &'a Partition,
    names: &'a [String],
}

impl fmt::Display for PartitionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.partition.blocks() {
            let mut first = true;
            for &q in block {
                if !first {
                    f.write_str(" ")?;
                }
                f.write_str(&self.names[q])?;
                first = false;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}
