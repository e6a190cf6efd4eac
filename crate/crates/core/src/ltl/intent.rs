use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{parse_intent, Formula, LtlError, MAX_PROPOSITIONS};
use crate::feature::Feature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

impl Comparator {
    pub fn compare(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::AtLeast => value >= threshold,
            Comparator::Below => value < threshold,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::AtLeast => ">=",
            Comparator::Below => "<",
        })
    }
}

impl FromStr for Comparator {
    type Err = LtlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            ">=" | "≥" => Ok(Comparator::AtLeast),
            "<" => Ok(Comparator::Below),
            other => Err(LtlError::InvalidBinding(format!("unsupported comparator `{other}`"))),
        }
    }
}

/// Binds a proposition name to a threshold test on one feature, in
/// normalized units (see [`Feature::orientation`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionBinding {
    pub name: String,
    pub feature: Feature,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl PropositionBinding {
    pub fn new(
        name: impl Into<String>,
        feature: Feature,
        comparator: Comparator,
        threshold: f64,
    ) -> Result<Self, LtlError> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(LtlError::InvalidBinding(format!("`{name}` is not an identifier")));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(LtlError::InvalidBinding(format!("threshold {threshold} of `{name}` outside [0, 1]")));
        }
        Ok(PropositionBinding { name, feature, comparator, threshold })
    }

    pub fn holds(&self, value: f64) -> bool {
        self.comparator.compare(value, self.threshold)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "G" | "F" | "X" | "U" | "R" | "true" | "false")
}

/// Ordered proposition table of one intent. Its order fixes the bit layout
/// of [`super::Symbol`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BindingTable {
    bindings: Vec<PropositionBinding>,
}

impl BindingTable {
    pub fn new(bindings: Vec<PropositionBinding>) -> Result<Self, LtlError> {
        if bindings.len() > MAX_PROPOSITIONS {
            return Err(LtlError::InvalidBinding(format!(
                "{} propositions, at most {MAX_PROPOSITIONS} supported",
                bindings.len()
            )));
        }
        for (i, b) in bindings.iter().enumerate() {
            if bindings[..i].iter().any(|o| o.name == b.name) {
                return Err(LtlError::InvalidBinding(format!("duplicate proposition `{}`", b.name)));
            }
        }
        Ok(BindingTable { bindings })
    }

    /// Table of bare names bound to a dummy feature; for formulas whose
    /// propositions have no KPI meaning (tests, automaton inspection).
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, LtlError> {
        let bindings = names
            .iter()
            .map(|n| PropositionBinding::new(n.as_ref(), Feature::Coverage, Comparator::AtLeast, 0.5))
            .collect::<Result<Vec<_>, _>>()?;
        BindingTable::new(bindings)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PropositionBinding> {
        self.bindings.iter()
    }

    pub fn get(&self, name: &str) -> Option<&PropositionBinding> {
        self.bindings.iter().find(|b| b.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.bindings.iter().position(|b| b.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.bindings.iter().map(|b| b.name.clone()).collect()
    }

    pub fn features(&self) -> Vec<Feature> {
        self.bindings.iter().map(|b| b.feature).collect()
    }
}

/// A parsed intent file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub name: Option<String>,
    pub text: String,
    pub formula: Formula,
    pub bindings: BindingTable,
}

impl Intent {
    pub fn new(name: Option<String>, text: &str, bindings: BindingTable) -> Result<Self, LtlError> {
        let formula = parse_intent(text, &bindings)?;
        Ok(Intent { name, text: text.to_string(), formula, bindings })
    }

    /// Parses the intent file format:
    ///
    /// ```text
    /// name: phi1                      # optional
    /// formula: G(!sinrLow & quaHigh & covHigh)
    /// propositions:
    ///   sinrLow  sinr     <   0.4
    ///   quaHigh  quality  >=  0.5
    /// ```
    ///
    /// `#` starts a comment.
    pub fn from_file_text(src: &str) -> Result<Self, LtlError> {
        let mut name = None;
        let mut formula = None;
        let mut rows = Vec::new();
        let mut in_props = false;
        for (lineno, raw) in src.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| LtlError::IntentFile(format!("line {}: {msg}", lineno + 1));
            if let Some(rest) = line.strip_prefix("formula:") {
                formula = Some(rest.trim().to_string());
                in_props = false;
            } else if let Some(rest) = line.strip_prefix("name:") {
                name = Some(rest.trim().to_string());
                in_props = false;
            } else if let Some(rest) = line.strip_prefix("propositions:") {
                if !rest.trim().is_empty() {
                    return Err(err("propositions must start on the next line".into()));
                }
                in_props = true;
            } else if in_props {
                let cols: Vec<&str> = line.split_whitespace().collect();
                let [n, feat, cmp, thr] = cols[..] else {
                    return Err(err(format!("expected `name feature comparator threshold`, got `{line}`")));
                };
                let feature = feat.parse::<Feature>().map_err(|e| err(e.to_string()))?;
                let threshold = thr.parse::<f64>().map_err(|e| err(format!("threshold: {e}")))?;
                rows.push(PropositionBinding::new(n, feature, cmp.parse()?, threshold)?);
            } else {
                return Err(err(format!("unexpected `{line}`")));
            }
        }
        let text = formula.ok_or_else(|| LtlError::IntentFile("missing `formula:` line".into()))?;
        Intent::new(name, &text, BindingTable::new(rows)?)
    }

    pub fn to_file_text(&self) -> String {
        let mut s = String::new();
        if let Some(n) = &self.name {
            s.push_str(&format!("name: {n}\n"));
        }
        s.push_str(&format!("formula: {}\npropositions:\n", self.text));
        for b in self.bindings.iter() {
            s.push_str(&format!("  {} {} {} {}\n", b.name, b.feature, b.comparator, b.threshold));
        }
        s
    }
}
