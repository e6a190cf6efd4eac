use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// LTL abstract syntax over named atomic propositions.
///
/// `false` has no node of its own and is written `Not(True)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
    Always(Box<Formula>),
    Eventually(Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    pub fn falsum() -> Self {
        Formula::Not(Box::new(Formula::True))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Formula, b: Formula) -> Self {
        Formula::Release(Box::new(a), Box::new(b))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::or(Formula::not(a), b)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::Not(inner) if **inner == Formula::True)
    }

    /// Atom names in first-occurrence order.
    pub fn atoms(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Atom(name) = f {
                if seen.insert(name.clone()) {
                    out.push(name.clone());
                }
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Formula)) {
        f(self);
        match self {
            Formula::True | Formula::Atom(_) => {}
            Formula::Not(a) | Formula::Next(a) | Formula::Always(a) | Formula::Eventually(a) => a.visit(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) | Formula::Release(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// True when the formula has no temporal operator.
    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) => true,
            Formula::Not(a) => a.is_propositional(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_propositional() && b.is_propositional(),
            _ => false,
        }
    }

    /// Top-level conjuncts, flattening nested `And`.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other],
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(a) | Formula::Next(a) | Formula::Always(a) | Formula::Eventually(a) => 1 + a.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) | Formula::Release(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// Evaluates a propositional formula against a set of true atoms.
    /// Temporal operators evaluate their operand at the same position.
    pub fn holds_now(&self, truth: &impl Fn(&str) -> bool) -> bool {
        match self {
            Formula::True => true,
            Formula::Atom(n) => truth(n),
            Formula::Not(a) => !a.holds_now(truth),
            Formula::And(a, b) => a.holds_now(truth) && b.holds_now(truth),
            Formula::Or(a, b) => a.holds_now(truth) || b.holds_now(truth),
            Formula::Next(a) | Formula::Always(a) | Formula::Eventually(a) => a.holds_now(truth),
            Formula::Until(_, b) => b.holds_now(truth),
            Formula::Release(_, b) => b.holds_now(truth),
        }
    }
}

/// Canonical ASCII rendering. Binary operators are always parenthesized,
/// so the output re-parses to the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            x if x.is_false() => f.write_str("false"),
            Formula::Atom(n) => f.write_str(n),
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::Next(a) => write!(f, "X {a}"),
            Formula::Always(a) => write!(f, "G {a}"),
            Formula::Eventually(a) => write!(f, "F {a}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Until(a, b) => write!(f, "({a} U {b})"),
            Formula::Release(a, b) => write!(f, "({a} R {b})"),
        }
    }
}

/// Pushes negations to the atoms. With `expand`, `G`/`F` are rewritten to
/// their `R`/`U` forms as well.
fn push(f: &Formula, positive: bool, expand: bool) -> Formula {
    use Formula as L;
    let p = |g: &Formula| push(g, positive, expand);
    let n = |g: &Formula| push(g, !positive, expand);
    match f {
        L::True => {
            if positive {
                L::True
            } else {
                L::falsum()
            }
        }
        L::Atom(_) => {
            if positive {
                f.clone()
            } else {
                L::not(f.clone())
            }
        }
        L::Not(a) => n(a),
        L::And(a, b) => {
            if positive {
                L::and(p(a), p(b))
            } else {
                L::or(p(a), p(b))
            }
        }
        L::Or(a, b) => {
            if positive {
                L::or(p(a), p(b))
            } else {
                L::and(p(a), p(b))
            }
        }
        L::Next(a) => L::next(p(a)),
        L::Until(a, b) => {
            if positive {
                L::until(p(a), p(b))
            } else {
                L::release(p(a), p(b))
            }
        }
        L::Release(a, b) => {
            if positive {
                L::release(p(a), p(b))
            } else {
                L::until(p(a), p(b))
            }
        }
        L::Always(a) => match (positive, expand) {
            (true, false) => L::always(p(a)),
            (false, false) => L::eventually(p(a)),
            (true, true) => L::release(L::falsum(), p(a)),
            (false, true) => L::until(L::True, p(a)),
        },
        L::Eventually(a) => match (positive, expand) {
            (true, false) => L::eventually(p(a)),
            (false, false) => L::always(p(a)),
            (true, true) => L::until(L::True, p(a)),
            (false, true) => L::release(L::falsum(), p(a)),
        },
    }
}

/// `¬f` with negations pushed down to the atoms. `G`/`F` are kept and
/// dualized.
pub fn negate(f: &Formula) -> Formula {
    push(f, false, false)
}

/// Negation normal form over `true`, atoms, `!`, `&`, `|`, `X`, `U`, `R`.
pub fn to_nnf(f: &Formula) -> Formula {
    push(f, true, true)
}
