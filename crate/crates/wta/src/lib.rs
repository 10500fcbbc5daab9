//! Bottom-up weighted tree automata over commutative semifields.
//!
//! The crate provides the wta/dwta data model with exact weights (arbitrary
//! precision rationals, the Viterbi semifield and the Boolean semifield),
//! weight pushing, pushing-based minimization and a fast equivalence test,
//! together with brute-force oracles used to cross-check the fast algorithms.
//!
//! The main entry points are:
//!
//! * [`Wta`](automaton::Wta) — the automaton model, evaluation and trimming,
//! * [`coarsest_congruence`](congruence::coarsest_congruence) — partition
//!   refinement on the state set,
//! * [`compute_sol`](sol::compute_sol) — signs of life and pushing weights,
//! * [`push`](transform::push), [`alphabetic`](transform::alphabetic),
//!   [`minimize`](transform::minimize) — the transformation pipeline,
//! * [`equivalent`](equivalence::equivalent) — the equivalence test,
//! * [`parse_automaton`](format::parse_automaton) /
//!   [`print_automaton`](format::print_automaton) — the `.wta` text format.

pub mod automaton;
pub mod cli;
pub mod congruence;
pub mod equivalence;
pub mod format;
pub mod partition;
pub mod random;
pub mod semifield;
pub mod sol;
pub mod transform;
pub mod tree;

mod error;

pub use error::{Error, Result};
