use std::fmt;

use serde::{Deserialize, Serialize};

use super::Formula;

/// A truth assignment to an ordered proposition list, bit `i` for
/// proposition `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Symbol(pub u32);

impl Symbol {
    pub fn holds(self, prop: usize) -> bool {
        self.0 >> prop & 1 == 1
    }

    pub fn with(self, prop: usize, value: bool) -> Symbol {
        if value {
            Symbol(self.0 | 1 << prop)
        } else {
            Symbol(self.0 & !(1 << prop))
        }
    }

    /// Renders as a set of proposition names.
    pub fn display<'a>(self, props: &'a [String]) -> impl fmt::Display + 'a {
        struct D<'a>(Symbol, &'a [String]);
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let names: Vec<&str> =
                    self.1.iter().enumerate().filter(|(i, _)| self.0.holds(*i)).map(|(_, n)| n.as_str()).collect();
                write!(f, "{{{}}}", names.join(","))
            }
        }
        D(self, props)
    }
}

/// Ultimately periodic word `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoWord {
    pub prefix: Vec<Symbol>,
    pub cycle: Vec<Symbol>,
}

impl LassoWord {
    /// # Panics
    /// If `cycle` is empty.
    pub fn new(prefix: Vec<Symbol>, cycle: Vec<Symbol>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
        LassoWord { prefix, cycle }
    }

    /// Number of distinct positions (prefix positions plus cycle phases).
    pub fn positions(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn symbol_at(&self, pos: usize) -> Symbol {
        if pos < self.prefix.len() {
            self.prefix[pos]
        } else {
            self.cycle[pos - self.prefix.len()]
        }
    }

    /// Position identity of the successor: the last cycle phase wraps.
    pub fn successor(&self, pos: usize) -> usize {
        if pos + 1 < self.positions() {
            pos + 1
        } else {
            self.prefix.len()
        }
    }
}

/// Truth of `f` on `w` at position 0, with atoms resolved by their index in
/// `props`. Atoms missing from `props` are false.
///
/// Every subformula is evaluated over the finitely many position
/// identities; `U`/`F` are least and `R`/`G` greatest fixpoints of their
/// one-step unfolding along the successor map.
pub fn evaluate_on_lasso(f: &Formula, props: &[String], w: &LassoWord) -> bool {
    eval(f, props, w)[0]
}

fn eval(f: &Formula, props: &[String], w: &LassoWord) -> Vec<bool> {
    let n = w.positions();
    let succ: Vec<usize> = (0..n).map(|i| w.successor(i)).collect();
    match f {
        Formula::True => vec![true; n],
        Formula::Atom(name) => match props.iter().position(|p| p == name) {
            Some(k) => (0..n).map(|i| w.symbol_at(i).holds(k)).collect(),
            None => vec![false; n],
        },
        Formula::Not(a) => eval(a, props, w).into_iter().map(|x| !x).collect(),
        Formula::And(a, b) => {
            let (x, y) = (eval(a, props, w), eval(b, props, w));
            x.iter().zip(&y).map(|(p, q)| *p && *q).collect()
        }
        Formula::Or(a, b) => {
            let (x, y) = (eval(a, props, w), eval(b, props, w));
            x.iter().zip(&y).map(|(p, q)| *p || *q).collect()
        }
        Formula::Next(a) => {
            let x = eval(a, props, w);
            succ.iter().map(|&j| x[j]).collect()
        }
        Formula::Until(a, b) => {
            let (x, y) = (eval(a, props, w), eval(b, props, w));
            fixpoint(false, n, |v, i| y[i] || (x[i] && v[succ[i]]))
        }
        Formula::Release(a, b) => {
            let (x, y) = (eval(a, props, w), eval(b, props, w));
            fixpoint(true, n, |v, i| y[i] && (x[i] || v[succ[i]]))
        }
        Formula::Always(a) => {
            let x = eval(a, props, w);
            fixpoint(true, n, |v, i| x[i] && v[succ[i]])
        }
        Formula::Eventually(a) => {
            let x = eval(a, props, w);
            fixpoint(false, n, |v, i| x[i] || v[succ[i]])
        }
    }
}

fn fixpoint(start: bool, n: usize, step: impl Fn(&[bool], usize) -> bool) -> Vec<bool> {
    let mut v = vec![start; n];
    loop {
        let next: Vec<bool> = (0..n).map(|i| step(&v, i)).collect();
        if next == v {
            return v;
        }
        v = next;
    }
}
