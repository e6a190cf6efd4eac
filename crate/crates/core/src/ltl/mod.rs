//! Linear temporal logic intents: parsing, negation normal form, tableau
//! translation to Büchi automata and a lasso-word semantic evaluator.

mod buchi;
mod formula;
mod intent;
mod lasso;
mod parser;

pub use buchi::{accepts_lasso, to_buchi, to_buchi_with_cap, BuchiAutomaton, DEFAULT_STATE_CAP};
pub use formula::{negate, to_nnf, Formula};
pub use intent::{BindingTable, Comparator, Intent, PropositionBinding};
pub use lasso::{evaluate_on_lasso, LassoWord, Symbol};
pub use parser::{parse_formula, parse_intent};

/// Upper bound on the propositions of one intent; the alphabet is explicit.
pub const MAX_PROPOSITIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LtlError {
    #[error("syntax error at {position}: expected {}, found {found}", expected.join(" | "))]
    Syntax { position: usize, expected: Vec<String>, found: String },
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("automaton exceeds state cap of {cap}")]
    CapacityExceeded { cap: usize },
    #[error("invalid binding: {0}")]
    InvalidBinding(String),
    #[error("intent file: {0}")]
    IntentFile(String),
    #[error("malformed automaton: {0}")]
    MalformedAutomaton(String),
}
