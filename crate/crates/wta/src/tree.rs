//! Ranked alphabets, trees indexed by states, and contexts with a hole.
//!
//! A [`Tree`] is either a state leaf or a symbol node whose arity must match
//! the symbol's rank in the governing [`RankedAlphabet`]. A [`Context`] is a
//! tree with exactly one occurrence of the hole (written `#` in the external
//! syntax) at a leaf position; plugging a tree into the hole is substitution.

use std::collections::BTreeSet;
use std::fmt;

use crate::{Error, Result};

pub type SymbolId = usize;

/// Characters that cannot occur in symbol or state names.
///
/// Whitespace separates tokens; the others are delimiters of the tree and
/// automaton grammars. `-` is allowed except immediately before `>`, so that
/// `->` is always an arrow token.
fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.contains("->")
        && name
            .chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | ',' | ':' | '#' | '>'))
}

/// A finite set of symbols, each with a fixed rank.
///
/// Symbols are stored sorted by name; a symbol's index in that order is its
/// [`SymbolId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedAlphabet {
    names: Vec<String>,
    ranks: Vec<usize>,
}

impl RankedAlphabet {
    /// Builds an alphabet from `(name, rank)` pairs. Names must be valid
    /// tokens and pairwise distinct.
    pub fn new(symbols: impl IntoIterator<Item = (String, usize)>) -> Result<Self> {
        let mut pairs: Vec<(String, usize)> = symbols.into_iter().collect();
        pairs.sort();
        for (name, _) in &pairs {
            if !valid_name(name) {
                return Err(Error::InvalidAutomaton(format!(
                    "invalid symbol name `{name}`"
                )));
            }
        }
        for window in pairs.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidAutomaton(format!(
                    "duplicate symbol `{}`",
                    window[0].0
                )));
            }
        }
        let (names, ranks) = pairs.into_iter().unzip();
        Ok(RankedAlphabet { names, ranks })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<SymbolId> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.names[id]
    }

    pub fn rank(&self, id: SymbolId) -> usize {
        self.ranks[id]
    }

    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.id(name).map(|id| self.ranks[id])
    }

    /// Symbols in name order.
    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &str, usize)> {
        self.names
            .iter()
            .zip(&self.ranks)
            .enumerate()
            .map(|(id, (name, rank))| (id, name.as_str(), *rank))
    }
}

/// A tree over a ranked alphabet, possibly with state leaves and (for
/// contexts) the hole.
///
/// Trees are immutable values with structural equality and a total order,
/// used for deterministic output everywhere.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tree {
    /// A state leaf.
    Leaf(String),
    /// A symbol node; the number of children must equal the symbol's rank.
    Node(String, Vec<Tree>),
    /// The hole of a context. Never part of an alphabet or state set.
    Hole,
}

impl Tree {
    pub fn node(name: impl Into<String>, children: Vec<Tree>) -> Tree {
        Tree::Node(name.into(), children)
    }

    pub fn leaf(name: impl Into<String>) -> Tree {
        Tree::Leaf(name.into())
    }

    /// Number of nodes, counting the hole as a leaf.
    pub fn size(&self) -> usize {
        match self {
            Tree::Leaf(_) | Tree::Hole => 1,
            Tree::Node(_, children) => 1 + children.iter().map(Tree::size).sum::<usize>(),
        }
    }

    pub fn hole_count(&self) -> usize {
        match self {
            Tree::Hole => 1,
            Tree::Leaf(_) => 0,
            Tree::Node(_, children) => children.iter().map(Tree::hole_count).sum(),
        }
    }

    /// Checks symbol arities against `alphabet`; when `states` is given,
    /// leaf names must be members. Holes are rejected.
    pub fn validate(&self, alphabet: &RankedAlphabet, states: Option<&BTreeSet<String>>) -> Result<()> {
        match self {
            Tree::Hole => Err(Error::InvalidContext(
                "hole not allowed in a tree".to_string(),
            )),
            Tree::Leaf(name) => match states {
                Some(set) if !set.contains(name) => Err(Error::UnknownState(name.clone())),
                _ => Ok(()),
            },
            Tree::Node(name, children) => {
                let rank = alphabet
                    .rank_of(name)
                    .ok_or_else(|| Error::UnknownSymbol(name.clone()))?;
                if rank != children.len() {
                    return Err(Error::RankMismatch {
                        symbol: name.clone(),
                        expected: rank,
                        found: children.len(),
                    });
                }
                children.iter().try_for_each(|c| c.validate(alphabet, states))
            }
        }
    }

    fn replace_hole(&self, filler: &Tree) -> Tree {
        match self {
            Tree::Hole => filler.clone(),
            Tree::Leaf(_) => self.clone(),
            Tree::Node(name, children) => Tree::Node(
                name.clone(),
                children.iter().map(|c| c.replace_hole(filler)).collect(),
            ),
        }
    }

    /// Applies `rename` to every state leaf.
    pub fn rename_leaves(&self, rename: &impl Fn(&str) -> String) -> Tree {
        match self {
            Tree::Hole => Tree::Hole,
            Tree::Leaf(name) => Tree::Leaf(rename(name)),
            Tree::Node(name, children) => Tree::Node(
                name.clone(),
                children.iter().map(|c| c.rename_leaves(rename)).collect(),
            ),
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(name) => f.write_str(name),
            Tree::Hole => f.write_str("#"),
            Tree::Node(name, children) => {
                f.write_str(name)?;
                if !children.is_empty() {
                    f.write_str("(")?;
                    for (i, child) in children.iter().enumerate() {
                        if i > 0 {
                            f.write_str(",")?;
                        }
                        write!(f, "{child}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// A tree with exactly one hole at a leaf position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Context(Tree);

impl Context {
    pub fn new(tree: Tree) -> Result<Self> {
        match tree.hole_count() {
            1 => Ok(Context(tree)),
            n => Err(Error::InvalidContext(format!(
                "expected exactly one hole, found {n}"
            ))),
        }
    }

    /// The trivial context consisting of just the hole.
    pub fn hole() -> Self {
        Context(Tree::Hole)
    }

    pub fn tree(&self) -> &Tree {
        &self.0
    }

    pub fn into_tree(self) -> Tree {
        self.0
    }

    /// Substitutes `tree` for the hole. The argument must not itself
    /// contain a hole; use [`Context::compose`] for that case.
    pub fn apply(&self, tree: &Tree) -> Tree {
        debug_assert_eq!(tree.hole_count(), 0);
        self.0.replace_hole(tree)
    }

    /// Substitutes another context for the hole; the result again has
    /// exactly one hole.
    pub fn compose(&self, inner: &Context) -> Context {
        Context(self.0.replace_hole(&inner.0))
    }

    /// Size of the underlying tree, counting the hole as a leaf.
    pub fn size(&self) -> usize {
        self.0.size()
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Recursive-descent parser for the tree literal grammar
/// `TREE := NAME | NAME "(" TREE ("," TREE)* ")"`, with `#` for the hole.
/// Positions in errors are byte columns starting at 1.
struct TreeParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> TreeParser<'a> {
    fn new(text: &'a str) -> Self {
        TreeParser { text, pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::parse(1, self.pos + 1, message)
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn name(&mut self) -> Result<&'a str> {
        let rest = self.rest();
        let mut end = 0;
        for (i, c) in rest.char_indices() {
            if c.is_whitespace() || matches!(c, '(' | ')' | ',' | ':' | '#' | '>') {
                break;
            }
            if c == '-' && rest[i + 1..].starts_with('>') {
                break;
            }
            end = i + c.len_utf8();
        }
        if end == 0 {
            return Err(self.error("expected a name"));
        }
        let name = &rest[..end];
        self.pos += end;
        Ok(name)
    }

    fn tree(&mut self) -> Result<Tree> {
        self.skip_ws();
        if self.peek() == Some('#') {
            self.pos += 1;
            return Ok(Tree::Hole);
        }
        let name = self.name()?.to_string();
        self.skip_ws();
        if self.peek() != Some('(') {
            return Ok(Tree::Leaf(name));
        }
        self.pos += 1;
        self.skip_ws();
        let mut children = Vec::new();
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(Tree::Node(name, children));
        }
        loop {
            children.push(self.tree()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                }
                Some(')') => {
                    self.pos += 1;
                    return Ok(Tree::Node(name, children));
                }
                _ => return Err(self.error("expected `,` or `)`")),
            }
        }
    }

    fn finish(mut self, tree: Tree) -> Result<Tree> {
        self.skip_ws();
        if self.pos != self.text.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(tree)
    }
}

/// Resolves bare names: alphabet symbols become nodes, everything else is a
/// state leaf (checked against `states` when provided).
fn resolve(tree: Tree, alphabet: &RankedAlphabet, states: Option<&BTreeSet<String>>) -> Result<Tree> {
    match tree {
        Tree::Hole => Ok(Tree::Hole),
        Tree::Leaf(name) => {
            if alphabet.id(&name).is_some() {
                let resolved = Tree::Node(name, Vec::new());
                resolved.validate(alphabet, states)?;
                Ok(resolved)
            } else {
                if let Some(set) = states {
                    if !set.contains(&name) {
                        return Err(Error::UnknownState(name));
                    }
                }
                Ok(Tree::Leaf(name))
            }
        }
        Tree::Node(name, children) => {
            let rank = alphabet
                .rank_of(&name)
                .ok_or_else(|| Error::UnknownSymbol(name.clone()))?;
            if rank != children.len() {
                return Err(Error::RankMismatch {
                    symbol: name,
                    expected: rank,
                    found: children.len(),
                });
            }
            let children = children
                .into_iter()
                .map(|c| resolve(c, alphabet, states))
                .collect::<Result<_>>()?;
            Ok(Tree::Node(name, children))
        }
    }
}

/// Parses a tree literal. Symbols are checked against `alphabet`; leaf names
/// against `states` when provided. Holes are rejected.
pub fn parse_tree(
    text: &str,
    alphabet: &RankedAlphabet,
    states: Option<&BTreeSet<String>>,
) -> Result<Tree> {
    let mut parser = TreeParser::new(text);
    let raw = parser.tree()?;
    let raw = parser.finish(raw)?;
    if raw.hole_count() != 0 {
        return Err(Error::InvalidContext("hole not allowed in a tree".into()));
    }
    resolve(raw, alphabet, states)
}

/// Parses a ground tree literal: every name must be an alphabet symbol.
pub fn parse_ground_tree(text: &str, alphabet: &RankedAlphabet) -> Result<Tree> {
    let tree = parse_tree(text, alphabet, Some(&BTreeSet::new()))?;
    Ok(tree)
}

/// Parses a context literal with exactly one `#`.
pub fn parse_context(
    text: &str,
    alphabet: &RankedAlphabet,
    states: Option<&BTreeSet<String>>,
) -> Result<Context> {
    let mut parser = TreeParser::new(text);
    let raw = parser.tree()?;
    let raw = parser.finish(raw)?;
    let resolved = resolve(raw, alphabet, states)?;
    Context::new(resolved)
}

/// All ground trees over `alphabet` of size at most `max_size`, in
/// (size, term order) — the brute-force enumeration oracle.
pub fn enumerate_ground_trees(alphabet: &RankedAlphabet, max_size: usize) -> Vec<Tree> {
    // by_size[s] holds all trees of size exactly s.
    let mut by_size: Vec<Vec<Tree>> = vec![Vec::new(); max_size + 1];
    for size in 1..=max_size {
        let mut level = Vec::new();
        for (_, name, rank) in alphabet.iter() {
            if rank == 0 {
                if size == 1 {
                    level.push(Tree::node(name, Vec::new()));
                }
                continue;
            }
            if size < rank + 1 {
                continue;
            }
            let mut chosen = Vec::new();
            build_children(&by_size, rank, size - 1, &mut chosen, &mut |children| {
                level.push(Tree::node(name, children.to_vec()));
            });
        }
        by_size[size] = level;
    }
    let mut all = Vec::new();
    for mut trees in by_size {
        trees.sort();
        all.append(&mut trees);
    }
    all
}

// Enumerates all ways to pick `slots` children with total size `size` from
// previously computed levels.
fn build_children(
    by_size: &[Vec<Tree>],
    slots: usize,
    size: usize,
    chosen: &mut Vec<Tree>,
    emit: &mut impl FnMut(&[Tree]),
) {
    if slots == 0 {
        if size == 0 {
            emit(chosen);
        }
        return;
    }
    let min_rest = slots - 1;
    if size < 1 + min_rest {
        return;
    }
    for s in 1..=size - min_rest {
        for t in &by_size[s] {
            chosen.push(t.clone());
            build_children(by_size, slots - 1, size - s, chosen, emit);
            chosen.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet() -> RankedAlphabet {
        RankedAlphabet::new(
            [("alpha", 0), ("beta", 0), ("gamma", 1), ("sigma", 2)]
                .map(|(n, r)| (n.to_string(), r)),
        )
        .unwrap()
    }

    fn states() -> BTreeSet<String> {
        ["q_1", "q_2", "q_b", "q_f"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn parse_unary_over_state_leaf() {
        let t = parse_tree("gamma(q_b)", &alphabet(), Some(&states())).unwrap();
        assert_eq!(t, Tree::node("gamma", vec![Tree::leaf("q_b")]));
        assert_eq!(t.size(), 2);
    }

    #[test]
    fn parse_binary() {
        let t = parse_tree("sigma(q_b,q_1)", &alphabet(), Some(&states())).unwrap();
        assert_eq!(
            t,
            Tree::node("sigma", vec![Tree::leaf("q_b"), Tree::leaf("q_1")])
        );
        assert_eq!(t.size(), 3);
    }

    #[test]
    fn rank_mismatch_is_rejected() {
        let err = parse_tree("sigma(q_b)", &alphabet(), Some(&states()));
        assert!(matches!(err, Err(Error::RankMismatch { .. })));
    }

    #[test]
    fn nullary_symbols_may_omit_parens() {
        let a = parse_tree("alpha", &alphabet(), Some(&states())).unwrap();
        let b = parse_tree("alpha()", &alphabet(), Some(&states())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, Tree::node("alpha", vec![]));
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(
            parse_tree("delta(q_1)", &alphabet(), Some(&states())),
            Err(Error::UnknownSymbol(_))
        ));
        assert!(matches!(
            parse_tree("gamma(q_x)", &alphabet(), Some(&states())),
            Err(Error::UnknownState(_))
        ));
    }

    #[test]
    fn parse_error_has_position() {
        match parse_tree("sigma(q_b q_1)", &alphabet(), Some(&states())) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 11),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn state_leaf_size() {
        assert_eq!(Tree::leaf("q").size(), 1);
        let t = Tree::node("sigma", vec![Tree::leaf("q_b"), Tree::leaf("q_1")]);
        assert_eq!(t.size(), 3);
    }

    #[test]
    fn trivial_substitution() {
        let t = Tree::node("alpha", vec![]);
        assert_eq!(Context::hole().apply(&t), t);
    }

    #[test]
    fn substitute_state_into_unary_context() {
        let c = parse_context("gamma(#)", &alphabet(), Some(&states())).unwrap();
        assert_eq!(
            c.apply(&Tree::leaf("q_b")),
            Tree::node("gamma", vec![Tree::leaf("q_b")])
        );
    }

    #[test]
    fn context_in_context_keeps_one_hole() {
        let outer = parse_context("gamma(#)", &alphabet(), Some(&states())).unwrap();
        let inner = parse_context("sigma(q_1,#)", &alphabet(), Some(&states())).unwrap();
        let composed = outer.compose(&inner);
        assert_eq!(composed.tree().hole_count(), 1);
        assert_eq!(composed.to_string(), "gamma(sigma(q_1,#))");
    }

    #[test]
    fn display_round_trip() {
        let text = "sigma(gamma(alpha),q_f)";
        let t = parse_tree(text, &alphabet(), Some(&states())).unwrap();
        assert_eq!(t.to_string(), text);
        let again = parse_tree(&t.to_string(), &alphabet(), Some(&states())).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn enumerate_small_trees() {
        let trees = enumerate_ground_trees(&alphabet(), 3);
        // size 1: alpha, beta; size 2: gamma(alpha), gamma(beta);
        // size 3: gamma(gamma(..)) x2 + sigma over {alpha,beta}^2 = 4
        assert_eq!(trees.iter().filter(|t| t.size() == 1).count(), 2);
        assert_eq!(trees.iter().filter(|t| t.size() == 2).count(), 2);
        assert_eq!(trees.iter().filter(|t| t.size() == 3).count(), 6);
        for t in &trees {
            assert!(t.validate(&alphabet(), Some(&BTreeSet::new())).is_ok());
        }
    }

    #[test]
    fn alphabet_lookup() {
        let a = alphabet();
        assert_eq!(a.rank_of("sigma"), Some(2));
        assert_eq!(a.name(a.id("gamma").unwrap()), "gamma");
        assert!(a.id("delta").is_none());
    }

    #[test]
    fn invalid_symbol_names_rejected() {
        for bad in ["", "a b", "a(b", "x,y", "a:b", "a#b", "a->b", "a>b"] {
            assert!(
                RankedAlphabet::new([(bad.to_string(), 0)]).is_err(),
                "{bad:?} should be rejected"
            );
        }
        // `@`, `/`, `-` and `.` are fine (synthesized names use them).
        for good in ["sigma@4", "sigma@-1/2", "a.b", "x-y"] {
            assert!(RankedAlphabet::new([(good.to_string(), 0)]).is_ok());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_tree(depth: u32) -> impl Strategy<Value = Tree> {
            let leaf = prop_oneof![
                Just(Tree::node("alpha", vec![])),
                Just(Tree::node("beta", vec![])),
                Just(Tree::leaf("q_1")),
                Just(Tree::leaf("q_b")),
            ];
            leaf.prop_recursive(depth, 64, 2, |inner| {
                prop_oneof![
                    inner.clone().prop_map(|t| Tree::node("gamma", vec![t])),
                    (inner.clone(), inner).prop_map(|(a, b)| Tree::node("sigma", vec![a, b])),
                ]
            })
        }

        fn arb_context() -> impl Strategy<Value = Context> {
            // A context is a chain of frames around the hole.
            (arb_tree(3), any::<u8>()).prop_map(|(t, flip)| {
                let inner = Context::hole();
                let frame = if flip % 2 == 0 {
                    Context::new(Tree::node("sigma", vec![t, Tree::Hole])).unwrap()
                } else {
                    Context::new(Tree::node("gamma", vec![Tree::Hole])).unwrap()
                };
                frame.compose(&inner)
            })
        }

        proptest! {
            #[test]
            fn substitution_preserves_hole_count(c in arb_context(), inner in arb_context(), t in arb_tree(3)) {
                let composed = c.compose(&inner);
                prop_assert_eq!(composed.tree().hole_count(), 1);
                prop_assert_eq!(composed.apply(&t).hole_count(), 0);
            }

            #[test]
            fn substitution_size_identity(c in arb_context(), t in arb_tree(3)) {
                // |c[t]| = |c| + |t| - 1 with the hole counted as a leaf
                prop_assert_eq!(c.apply(&t).size(), c.size() + t.size() - 1);
            }

            #[test]
            fn print_parse_round_trip(t in arb_tree(3)) {
                let alphabet = alphabet();
                let states = states();
                let printed = t.to_string();
                let parsed = parse_tree(&printed, &alphabet, Some(&states)).unwrap();
                prop_assert_eq!(parsed, t);
            }
        }
    }
}
