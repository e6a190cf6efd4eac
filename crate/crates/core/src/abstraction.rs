//! Companion MDP: intent-relevant features, equal-width binning, frequency
//! estimates of the transition model, and proposition labels per bin tuple.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::agent::ExperienceBuffer;
use crate::feature::Feature;
use crate::ltl::{BindingTable, Comparator, Symbol};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AbstractionError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature selection must be nonempty and duplicate-free")]
    InvalidSelection,
    #[error("value {value} of feature {feature} outside [0, 1]")]
    OutOfRange { feature: Feature, value: f64 },
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("experience buffer is empty")]
    EmptyBuffer,
    #[error("proposition `{name}` uses feature {feature}, which is not selected")]
    PropositionOutsideSelection { name: String, feature: Feature },
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// Ordered, duplicate-free subset of the feature schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSelection(Vec<Feature>);

impl FeatureSelection {
    pub fn new(features: Vec<Feature>) -> Result<Self, AbstractionError> {
        let unique: BTreeSet<_> = features.iter().collect();
        if features.is_empty() || unique.len() != features.len() {
            return Err(AbstractionError::InvalidSelection);
        }
        Ok(FeatureSelection(features))
    }

    pub fn features(&self) -> &[Feature] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, f: Feature) -> Option<usize> {
        self.0.iter().position(|&x| x == f)
    }

    /// Picks the selected features out of a full schema-order vector.
    pub fn project<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.0.iter().map(|f| full[f.index()]).collect()
    }
}

/// Matches an intent to its features: the propositions' features,
/// deduplicated, in `schema` order.
pub fn select_features(bindings: &BindingTable, schema: &[Feature]) -> Result<FeatureSelection, AbstractionError> {
    let mut wanted = BTreeSet::new();
    for b in bindings.iter() {
        if !schema.contains(&b.feature) {
            return Err(AbstractionError::UnknownFeature(b.feature.to_string()));
        }
        wanted.insert(b.feature);
    }
    let ordered = schema.iter().copied().filter(|f| wanted.contains(f)).collect();
    FeatureSelection::new(ordered)
}

/// Bin tuple, one index per selected feature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiscreteState(pub Vec<u16>);

impl fmt::Display for DiscreteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|b| b.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Equal-width bins over [0, 1] for each selected feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer<T = f64> {
    features: Vec<Feature>,
    edges: Vec<Vec<T>>,
}

impl<T: Scalar> Discretizer<T> {
    pub fn uniform(selection: &FeatureSelection, bins: usize) -> Result<Self, AbstractionError> {
        if bins < 2 {
            return Err(AbstractionError::TooFewBins(bins));
        }
        let edges: Vec<T> = (0..=bins).map(|i| T::of(i as f64) / T::of(bins as f64)).collect();
        Ok(Discretizer { features: selection.features().to_vec(), edges: vec![edges; selection.len()] })
    }

    pub fn bins(&self, feature: usize) -> usize {
        self.edges[feature].len() - 1
    }

    pub fn edges(&self, feature: usize) -> &[T] {
        &self.edges[feature]
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Bin of each value; `edges[i] <= v < edges[i+1]`, with 1.0 in the top bin.
    pub fn discretize(&self, values: &[T]) -> Result<DiscreteState, AbstractionError> {
        assert_eq!(values.len(), self.edges.len(), "value count != selected features");
        values
            .iter()
            .zip(&self.edges)
            .zip(&self.features)
            .map(|((&v, edges), &feature)| {
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(AbstractionError::OutOfRange { feature, value: v.as_f64() });
                }
                let top = edges.len() - 2;
                let bin = (0..=top).find(|&i| v < edges[i + 1]).unwrap_or(top);
                Ok(bin as u16)
            })
            .collect::<Result<Vec<_>, _>>()
            .map(DiscreteState)
    }

    pub fn midpoint(&self, feature: usize, bin: u16) -> T {
        let e = &self.edges[feature];
        (e[bin as usize] + e[bin as usize + 1]) / T::of(2.0)
    }

    /// Mixed-radix id of a bin tuple.
    pub fn state_id(&self, s: &DiscreteState) -> u64 {
        s.0.iter().enumerate().rev().fold(0u64, |acc, (i, &b)| acc * self.bins(i) as u64 + b as u64)
    }

    pub fn num_states(&self) -> u64 {
        (0..self.edges.len()).map(|i| self.bins(i) as u64).product()
    }

    /// Nearest bin edge to `x`; ties (within rounding) go to the lower edge.
    pub fn snap(&self, feature: usize, x: T) -> T {
        let tol = T::of(1e-9);
        let mut best = self.edges[feature][0];
        for &e in &self.edges[feature] {
            if (e - x).abs() < (best - x).abs() - tol {
                best = e;
            }
        }
        best
    }
}

/// A proposition threshold moved onto a bin edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSnap {
    pub proposition: String,
    pub original: f64,
    pub snapped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LabelRule<T> {
    feature: usize,
    comparator: Comparator,
    threshold: T,
}

/// Maps observations to bin tuples and bin tuples to proposition labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abstraction<T = f64> {
    selection: FeatureSelection,
    discretizer: Discretizer<T>,
    rules: Vec<LabelRule<T>>,
    snaps: Vec<ThresholdSnap>,
}

impl<T: Scalar> Abstraction<T> {
    pub fn new(selection: FeatureSelection, bins: usize, bindings: &BindingTable) -> Result<Self, AbstractionError> {
        let discretizer = Discretizer::uniform(&selection, bins)?;
        let mut rules = Vec::new();
        let mut snaps = Vec::new();
        for b in bindings.iter() {
            let feature = selection.position(b.feature).ok_or_else(|| {
                AbstractionError::PropositionOutsideSelection { name: b.name.clone(), feature: b.feature }
            })?;
            let snapped = discretizer.snap(feature, T::of(b.threshold));
            if (snapped.as_f64() - b.threshold).abs() > 1e-12 {
                snaps.push(ThresholdSnap {
                    proposition: b.name.clone(),
                    original: b.threshold,
                    snapped: snapped.as_f64(),
                });
            }
            rules.push(LabelRule { feature, comparator: b.comparator, threshold: snapped });
        }
        Ok(Abstraction { selection, discretizer, rules, snaps })
    }

    pub fn selection(&self) -> &FeatureSelection {
        &self.selection
    }

    pub fn discretizer(&self) -> &Discretizer<T> {
        &self.discretizer
    }

    pub fn snaps(&self) -> &[ThresholdSnap] {
        &self.snaps
    }

    /// Bin tuple of a full schema-order feature vector.
    pub fn encode(&self, features: &[T]) -> Result<DiscreteState, AbstractionError> {
        self.discretizer.discretize(&self.selection.project(features))
    }

    /// Propositions holding at the bin midpoints of `s`.
    pub fn label(&self, s: &DiscreteState) -> Symbol {
        self.rules.iter().enumerate().fold(Symbol(0), |sym, (i, r)| {
            let mid = self.discretizer.midpoint(r.feature, s.0[r.feature]);
            sym.with(i, r.comparator.compare(mid.as_f64(), r.threshold.as_f64()))
        })
    }
}

/// Estimated model of one (state, action) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionModel<T = f64> {
    pub count: u64,
    /// (target state, observations, probability), by target index.
    pub successors: Vec<(usize, u64, T)>,
    pub mean_reward: T,
}

impl<T: Scalar> Default for ActionModel<T> {
    fn default() -> Self {
        ActionModel { count: 0, successors: Vec::new(), mean_reward: T::zero() }
    }
}

/// Labeled Markov decision process estimated from experience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cmdp<T = f64> {
    propositions: Vec<String>,
    abstraction: Option<Abstraction<T>>,
    states: Vec<DiscreteState>,
    labels: Vec<Symbol>,
    models: Vec<[ActionModel<T>; 3]>,
    initial: Vec<(usize, T)>,
    #[serde(skip)]
    index: HashMap<DiscreteState, usize>,
}

impl<T: Scalar> Cmdp<T> {
    /// Model from explicit counts: `counts[s][a]` lists `(target, observations)`.
    /// State `i` is represented by the tuple `(i)`. Initial states are
    /// weighted equally.
    pub fn from_counts(
        propositions: Vec<String>,
        labels: Vec<Symbol>,
        counts: Vec<[Vec<(usize, u64)>; 3]>,
        initial: Vec<usize>,
    ) -> Result<Self, AbstractionError> {
        let n = labels.len();
        if counts.len() != n {
            return Err(AbstractionError::Malformed("one count row per state".into()));
        }
        if initial.iter().any(|&s| s >= n) || counts.iter().flatten().flatten().any(|&(t, _)| t >= n) {
            return Err(AbstractionError::Malformed("state index out of range".into()));
        }
        let models = counts
            .into_iter()
            .map(|row| {
                row.map(|succ| {
                    let mut merged: BTreeMap<usize, u64> = BTreeMap::new();
                    for (t, c) in succ {
                        if c > 0 {
                            *merged.entry(t).or_default() += c;
                        }
                    }
                    model_from(merged, T::zero())
                })
            })
            .collect();
        let init: BTreeSet<usize> = initial.into_iter().collect();
        let w = T::one() / T::of(init.len().max(1) as f64);
        let mut cmdp = Cmdp {
            propositions,
            abstraction: None,
            states: (0..n).map(|i| DiscreteState(vec![i as u16])).collect(),
            labels,
            models,
            initial: init.into_iter().map(|s| (s, w)).collect(),
            index: HashMap::new(),
        };
        cmdp.reindex();
        Ok(cmdp)
    }

    fn reindex(&mut self) {
        self.index = self.states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    }

    /// Restores the lookup index after deserialization.
    pub fn from_json(src: &str) -> Result<Self, serde_json::Error> {
        let mut c: Cmdp<T> = serde_json::from_str(src)?;
        c.reindex();
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn propositions(&self) -> &[String] {
        &self.propositions
    }

    pub fn abstraction(&self) -> Option<&Abstraction<T>> {
        self.abstraction.as_ref()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &DiscreteState {
        &self.states[i]
    }

    pub fn states(&self) -> &[DiscreteState] {
        &self.states
    }

    pub fn index_of(&self, s: &DiscreteState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn label(&self, i: usize) -> Symbol {
        self.labels[i]
    }

    pub fn model(&self, s: usize, a: Action) -> &ActionModel<T> {
        &self.models[s][a.index()]
    }

    pub fn count(&self, s: usize, a: Action) -> u64 {
        self.models[s][a.index()].count
    }

    /// `(target, probability)` with positive probability.
    pub fn successors(&self, s: usize, a: Action) -> impl Iterator<Item = (usize, T)> + '_ {
        self.models[s][a.index()].successors.iter().map(|&(t, _, p)| (t, p))
    }

    pub fn probability(&self, s: usize, a: Action, target: usize) -> T {
        self.successors(s, a).find(|&(t, _)| t == target).map_or(T::zero(), |(_, p)| p)
    }

    pub fn initial(&self) -> &[(usize, T)] {
        &self.initial
    }

    pub fn snaps(&self) -> &[ThresholdSnap] {
        self.abstraction.as_ref().map_or(&[], |a| a.snaps())
    }

    /// Graphviz rendering; nodes carry the label set, edges `action: p`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph cmdp {\n  node [shape=box];\n");
        for (i, st) in self.states.iter().enumerate() {
            let init = if self.initial.iter().any(|&(k, _)| k == i) { ", peripheries=2" } else { "" };
            let _ = writeln!(s, "  s{i} [label=\"{st}\\n{}\"{init}];", self.labels[i].display(&self.propositions));
        }
        for i in 0..self.states.len() {
            for a in Action::ALL {
                for (t, p) in self.successors(i, a) {
                    let _ = writeln!(s, "  s{i} -> s{t} [label=\"{a}: {:.3}\"];", p.as_f64());
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

fn model_from<T: Scalar>(counts: BTreeMap<usize, u64>, mean_reward: T) -> ActionModel<T> {
    let total: u64 = counts.values().sum();
    let successors = counts.into_iter().map(|(t, c)| (t, c, T::of(c as f64) / T::of(total as f64))).collect();
    ActionModel { count: total, successors, mean_reward }
}

/// Builds the labeled model from experience.
///
/// States are all bin tuples observed before or after a transition, in
/// sorted order. Initial states are those observed at the start of an
/// episode (`t == 0`), weighted by frequency.
pub fn build_cmdp<T: Scalar>(
    buffer: &ExperienceBuffer<T>,
    selection: &FeatureSelection,
    bins: usize,
    bindings: &BindingTable,
) -> Result<Cmdp<T>, AbstractionError> {
    if buffer.is_empty() {
        return Err(AbstractionError::EmptyBuffer);
    }
    let abstraction = Abstraction::new(selection.clone(), bins, bindings)?;
    let mut encoded = Vec::with_capacity(buffer.len());
    let mut states = BTreeSet::new();
    for e in buffer.iter() {
        let s = abstraction.encode(&e.features)?;
        let s2 = abstraction.encode(&e.next_features)?;
        states.insert(s.clone());
        states.insert(s2.clone());
        encoded.push((s, e.action, e.reward, s2, e.t));
    }
    let states: Vec<DiscreteState> = states.into_iter().collect();
    let index: HashMap<&DiscreteState, usize> = states.iter().enumerate().map(|(i, s)| (s, i)).collect();

    let mut counts: Vec<[BTreeMap<usize, u64>; 3]> = vec![Default::default(); states.len()];
    let mut reward_sums: Vec<[T; 3]> = vec![[T::zero(); 3]; states.len()];
    let mut starts: BTreeMap<usize, u64> = BTreeMap::new();
    for (s, a, r, s2, t) in &encoded {
        let (i, j) = (index[s], index[s2]);
        *counts[i][a.index()].entry(j).or_default() += 1;
        reward_sums[i][a.index()] += *r;
        if *t == 0 {
            *starts.entry(i).or_default() += 1;
        }
    }
    if starts.is_empty() {
        for (s, ..) in &encoded {
            *starts.entry(index[s]).or_default() += 1;
        }
    }
    let total_starts: u64 = starts.values().sum();
    let initial = starts.into_iter().map(|(s, c)| (s, T::of(c as f64) / T::of(total_starts as f64))).collect();

    let models = counts
        .into_iter()
        .zip(reward_sums)
        .map(|(row, sums)| {
            let mut k = 0;
            row.map(|c| {
                let total: u64 = c.values().sum();
                let mean = if total > 0 { sums[k] / T::of(total as f64) } else { T::zero() };
                k += 1;
                model_from(c, mean)
            })
        })
        .collect();
    let labels = states.iter().map(|s| abstraction.label(s)).collect();
    let mut cmdp = Cmdp {
        propositions: bindings.names(),
        abstraction: Some(abstraction),
        states,
        labels,
        models,
        initial,
        index: HashMap::new(),
    };
    cmdp.reindex();
    Ok(cmdp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::Experience;
    use crate::ltl::PropositionBinding;

    fn cov_high() -> BindingTable {
        BindingTable::new(
            vec![PropositionBinding::new("covHigh", Feature::Coverage, Comparator::AtLeast, 0.5).unwrap()],
        )
        .unwrap()
    }

    fn sel(f: &[Feature]) -> FeatureSelection {
        FeatureSelection::new(f.to_vec()).unwrap()
    }

    #[test]
    fn selects_in_schema_order() {
        let b = BindingTable::new(vec![
            PropositionBinding::new("sinrLow", Feature::Sinr, Comparator::Below, 0.4).unwrap(),
            PropositionBinding::new("quaHigh", Feature::Quality, Comparator::AtLeast, 0.5).unwrap(),
            PropositionBinding::new("covHigh", Feature::Coverage, Comparator::AtLeast, 0.5).unwrap(),
        ])
        .unwrap();
        let s = select_features(&b, &Feature::ALL).unwrap();
        assert_eq!(s.features(), &[Feature::Coverage, Feature::Quality, Feature::Sinr]);
        assert_eq!(select_features(&cov_high(), &Feature::ALL).unwrap().len(), 1);
        assert!(matches!(
            select_features(&b, &[Feature::Coverage, Feature::Quality]),
            Err(AbstractionError::UnknownFeature(_))
        ));
    }

    #[test]
    fn selection_rejects_duplicates() {
        assert!(FeatureSelection::new(vec![]).is_err());
        assert!(FeatureSelection::new(vec![Feature::Sinr, Feature::Sinr]).is_err());
    }

    #[test]
    fn bin_edges() {
        let d = Discretizer::<f64>::uniform(&sel(&[Feature::Coverage]), 3).unwrap();
        assert_eq!(d.discretize(&[0.5]).unwrap(), DiscreteState(vec![1]));
        assert_eq!(d.discretize(&[1.0]).unwrap(), DiscreteState(vec![2]));
        assert_eq!(d.discretize(&[0.0]).unwrap(), DiscreteState(vec![0]));
        assert!(matches!(d.discretize(&[1.01]), Err(AbstractionError::OutOfRange { .. })));
        assert!(matches!(d.discretize(&[f64::NAN]), Err(AbstractionError::OutOfRange { .. })));
        assert!(Discretizer::<f64>::uniform(&sel(&[Feature::Coverage]), 1).is_err());
    }

    #[test]
    fn state_ids_are_dense() {
        let d = Discretizer::<f32>::uniform(&sel(&[Feature::Coverage, Feature::Sinr]), 3).unwrap();
        let mut ids = BTreeSet::new();
        for a in 0..3 {
            for b in 0..3 {
                ids.insert(d.state_id(&DiscreteState(vec![a, b])));
            }
        }
        assert_eq!(ids.into_iter().collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
        assert_eq!(d.num_states(), 9);
    }

    #[test]
    fn midpoint_labels_and_snapping() {
        let a = Abstraction::<f64>::new(sel(&[Feature::Coverage]), 3, &cov_high()).unwrap();
        // 0.5 sits between edges 1/3 and 2/3 and snaps down
        assert_eq!(a.snaps().len(), 1);
        assert!((a.snaps()[0].snapped - 1.0 / 3.0).abs() < 1e-12);
        assert!(a.label(&DiscreteState(vec![2])).holds(0));
        assert!(a.label(&DiscreteState(vec![1])).holds(0));
        assert!(!a.label(&DiscreteState(vec![0])).holds(0));

        let below =
            BindingTable::new(vec![PropositionBinding::new("low", Feature::Sinr, Comparator::Below, 0.5).unwrap()])
                .unwrap();
        let b = Abstraction::<f64>::new(sel(&[Feature::Sinr]), 4, &below).unwrap();
        assert!(b.snaps().is_empty());
        assert!(b.label(&DiscreteState(vec![1])).holds(0));
        assert!(!b.label(&DiscreteState(vec![2])).holds(0));
    }

    #[test]
    fn proposition_must_be_selected() {
        assert!(matches!(
            Abstraction::<f64>::new(sel(&[Feature::Sinr]), 3, &cov_high()),
            Err(AbstractionError::PropositionOutsideSelection { .. })
        ));
    }

    fn exp(cov_from: f64, action: Action, cov_to: f64, t: u64) -> Experience<f64> {
        let mut f = vec![0.5; 7];
        let mut g = vec![0.5; 7];
        f[Feature::Coverage.index()] = cov_from;
        g[Feature::Coverage.index()] = cov_to;
        Experience { s: 0, action, reward: -0.1, s_next: 0, cell_id: 0, t, features: f, next_features: g }
    }

    #[test]
    fn frequency_estimates() {
        let buf = ExperienceBuffer::from(vec![
            exp(0.1, Action::Stay, 0.5, 0),
            exp(0.1, Action::Stay, 0.5, 1),
            exp(0.1, Action::Stay, 0.9, 2),
        ]);
        let c = build_cmdp(&buf, &sel(&[Feature::Coverage]), 3, &cov_high()).unwrap();
        assert_eq!(c.num_states(), 3);
        let s0 = c.index_of(&DiscreteState(vec![0])).unwrap();
        let s1 = c.index_of(&DiscreteState(vec![1])).unwrap();
        let s2 = c.index_of(&DiscreteState(vec![2])).unwrap();
        assert!((c.probability(s0, Action::Stay, s1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.probability(s0, Action::Stay, s2) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.count(s0, Action::Up), 0);
        assert_eq!(c.initial(), &[(s0, 1.0)]);
        assert!(c.label(s2).holds(0));
        assert!((c.model(s0, Action::Stay).mean_reward + 0.1).abs() < 1e-12);
        assert_eq!(c, build_cmdp(&buf, &sel(&[Feature::Coverage]), 3, &cov_high()).unwrap());
    }

    #[test]
    fn empty_buffer_rejected() {
        let buf = ExperienceBuffer::<f64>::default();
        assert_eq!(build_cmdp(&buf, &sel(&[Feature::Coverage]), 3, &cov_high()), Err(AbstractionError::EmptyBuffer));
    }

    #[test]
    fn json_and_dot_exports() {
        let buf = ExperienceBuffer::from(vec![exp(0.1, Action::Up, 0.9, 0), exp(0.9, Action::Down, 0.1, 1)]);
        let c = build_cmdp(&buf, &sel(&[Feature::Coverage]), 3, &cov_high()).unwrap();
        let back = Cmdp::<f64>::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.index_of(&DiscreteState(vec![2])), c.index_of(&DiscreteState(vec![2])));
        let dot = c.to_dot();
        assert!(dot.contains("+a: 1.000"));
        assert!(dot.contains("{covHigh}"));
    }

    #[test]
    fn synthetic_counts() {
        let c = Cmdp::<f64>::from_counts(
            vec!["p".into()],
            vec![Symbol(0), Symbol(1)],
            vec![[vec![(1, 3), (0, 1)], vec![], vec![]], [vec![], vec![(1, 2)], vec![]]],
            vec![0],
        )
        .unwrap();
        assert_eq!(c.probability(0, Action::Down, 1), 0.75);
        assert_eq!(c.successors(1, Action::Stay).collect::<Vec<_>>(), vec![(1, 1.0)]);
        assert!(
            Cmdp::<f64>::from_counts(vec![], vec![Symbol(0)], vec![[vec![(3, 1)], vec![], vec![]]], vec![0]).is_err()
        );
    }
}
