//! Random instances and exhaustive oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;

use rand::Rng;
use retshield::abstraction::Cmdp;
use retshield::ltl::{BuchiAutomaton, Formula, LassoWord, Symbol};
use retshield::modelcheck::{build_complete_product, build_product, classify_unsafe, find_violating_lassos};

pub const PROPS: [&str; 3] = ["p", "q", "r"];

pub fn prop_names(n: usize) -> Vec<String> {
    PROPS[..n].iter().map(|s| s.to_string()).collect()
}

/// Formula of depth at most `depth` over `PROPS[..nprops]`.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, nprops: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..10) {
            0 => Formula::True,
            1 => Formula::falsum(),
            _ => Formula::atom(PROPS[rng.gen_range(0..nprops)]),
        };
    }
    let sub = |rng: &mut R| random_formula(rng, depth - 1, nprops);
    match rng.gen_range(0..8) {
        0 => Formula::not(sub(rng)),
        1 => Formula::next(sub(rng)),
        2 => Formula::always(sub(rng)),
        3 => Formula::eventually(sub(rng)),
        4 => Formula::and(sub(rng), sub(rng)),
        5 => Formula::or(sub(rng), sub(rng)),
        6 => Formula::until(sub(rng), sub(rng)),
        _ => Formula::release(sub(rng), sub(rng)),
    }
}

/// Prefix of length 0..=3, cycle of length 1..=3.
pub fn random_lasso<R: Rng>(rng: &mut R, nprops: usize) -> LassoWord {
    let sym = |rng: &mut R| Symbol(rng.gen_range(0..1u32 << nprops));
    let prefix = (0..rng.gen_range(0..=3)).map(|_| sym(rng)).collect();
    let cycle = (0..rng.gen_range(1..=3)).map(|_| sym(rng)).collect();
    LassoWord::new(prefix, cycle)
}

/// Raw ingredients of a synthetic model, kept so tests can perturb them.
#[derive(Debug, Clone)]
pub struct CmdpSpec {
    pub nprops: usize,
    pub labels: Vec<Symbol>,
    pub counts: Vec<[Vec<(usize, u64)>; 3]>,
    pub initial: Vec<usize>,
}

impl CmdpSpec {
    /// Up to 6 states over 1 or 2 propositions; each (s, a) is observed
    /// with probability 0.6, with 1 or 2 successors.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let n = rng.gen_range(1..=6);
        let nprops = rng.gen_range(1..=2);
        let labels = (0..n).map(|_| Symbol(rng.gen_range(0..1u32 << nprops))).collect();
        let counts = (0..n)
            .map(|_| {
                std::array::from_fn(|_| {
                    if !rng.gen_bool(0.6) {
                        return Vec::new();
                    }
                    (0..rng.gen_range(1..=2)).map(|_| (rng.gen_range(0..n), rng.gen_range(1..=4))).collect()
                })
            })
            .collect();
        let initial = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(0..n)).collect();
        CmdpSpec { nprops, labels, counts, initial }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn build(&self) -> Cmdp<f64> {
        Cmdp::from_counts(prop_names(self.nprops), self.labels.clone(), self.counts.clone(), self.initial.clone())
            .expect("well-formed counts")
    }
}

pub fn random_cmdp<R: Rng>(rng: &mut R) -> Cmdp<f64> {
    CmdpSpec::random(rng).build()
}

/// Up to 3 states, each transition present with probability 0.35.
pub fn random_ba<R: Rng>(rng: &mut R, props: Vec<String>) -> BuchiAutomaton {
    let m = rng.gen_range(1..=3);
    let symbols = 1usize << props.len();
    let accepting = (0..m).map(|_| rng.gen_bool(0.5)).collect();
    let transitions =
        (0..m).map(|_| (0..symbols).map(|_| (0..m).filter(|_| rng.gen_bool(0.35)).collect()).collect()).collect();
    let mut initial: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.5)).collect();
    if initial.is_empty() {
        initial.push(rng.gen_range(0..m));
    }
    BuchiAutomaton::new(props, initial, accepting, transitions).expect("well-formed automaton")
}

/// Product graph over all `s * m + q` pairs, written from the definitions.
pub struct BruteProduct {
    pub m: usize,
    pub succ: Vec<BTreeSet<usize>>,
    pub initial: BTreeSet<usize>,
    pub accepting: Vec<bool>,
}

impl BruteProduct {
    pub fn new(cmdp: &Cmdp<f64>, ba: &BuchiAutomaton) -> Self {
        let (n, m) = (cmdp.num_states(), ba.num_states());
        let mut succ = vec![BTreeSet::new(); n * m];
        for s in 0..n {
            for q in 0..m {
                for a in retshield::action::Action::ALL {
                    for (s2, p) in cmdp.successors(s, a) {
                        assert!(p > 0.0);
                        for &q2 in ba.successors(q, cmdp.label(s2)) {
                            succ[s * m + q].insert(s2 * m + q2);
                        }
                    }
                }
            }
        }
        let mut initial = BTreeSet::new();
        for &(s0, _) in cmdp.initial() {
            for &q0 in ba.initial() {
                for &q in ba.successors(q0, cmdp.label(s0)) {
                    initial.insert(s0 * m + q);
                }
            }
        }
        let accepting = (0..n * m).map(|v| ba.is_accepting(v % m)).collect();
        BruteProduct { m, succ, initial, accepting }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn id(&self, (s, q): (usize, usize)) -> usize {
        s * self.m + q
    }

    /// Every simple cycle, each reported once from its smallest node.
    pub fn simple_cycles(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for start in 0..self.len() {
            let mut path = vec![start];
            let mut on_path = vec![false; self.len()];
            on_path[start] = true;
            self.extend(start, &mut path, &mut on_path, &mut out);
        }
        out
    }

    fn extend(&self, start: usize, path: &mut Vec<usize>, on_path: &mut [bool], out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        for &w in &self.succ[v] {
            if w == start {
                out.push(path.clone());
            } else if w > start && !on_path[w] {
                on_path[w] = true;
                path.push(w);
                self.extend(start, path, on_path, out);
                path.pop();
                on_path[w] = false;
            }
        }
    }

    /// Some simple cycle contains an accepting node reachable from an initial pair.
    pub fn has_reachable_accepting_cycle(&self) -> bool {
        let reachable = self.reachable_from_initial();
        self.simple_cycles().iter().any(|c| reachable[c[0]] && c.iter().any(|&v| self.accepting[v]))
    }

    /// Nodes on a closed walk through an accepting node: `v ->+ a ->+ v`.
    pub fn on_accepting_cycle(&self) -> Vec<bool> {
        let n = self.len();
        let plus: Vec<Vec<bool>> = (0..n)
            .map(|v| {
                let mut hit = vec![false; n];
                for &w in &self.succ[v] {
                    for (u, r) in hit.iter_mut().enumerate() {
                        *r |= u == w || self.reaches(w, &one_hot(n, u));
                    }
                }
                hit
            })
            .collect();
        (0..n).map(|v| (0..n).any(|a| self.accepting[a] && plus[v][a] && plus[a][v])).collect()
    }

    pub fn reaches(&self, from: usize, targets: &[bool]) -> bool {
        let mut seen = vec![false; self.len()];
        let mut work = vec![from];
        seen[from] = true;
        while let Some(v) = work.pop() {
            if targets[v] {
                return true;
            }
            for &w in &self.succ[v] {
                if !seen[w] {
                    seen[w] = true;
                    work.push(w);
                }
            }
        }
        false
    }

    pub fn reachable_from_initial(&self) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut work: Vec<usize> = self.initial.iter().copied().collect();
        for &v in &work {
            seen[v] = true;
        }
        while let Some(v) = work.pop() {
            for &w in &self.succ[v] {
                if !seen[w] {
                    seen[w] = true;
                    work.push(w);
                }
            }
        }
        seen
    }
}

/// Compares emptiness, witnesses and classification of both the reachable
/// and the complete product against [`BruteProduct`].
pub fn check_against_brute_force(cmdp: &Cmdp<f64>, ba: &BuchiAutomaton) -> Result<(), String> {
    let brute = BruteProduct::new(cmdp, ba);
    let on_cycle = brute.on_accepting_cycle();
    let violating: Vec<bool> = (0..brute.len()).map(|v| brute.reaches(v, &on_cycle)).collect();
    let reachable = brute.reachable_from_initial();
    let nonempty = brute.has_reachable_accepting_cycle();
    if nonempty != brute.initial.iter().any(|&v| violating[v]) {
        return Err("oracle disagrees with itself".into());
    }

    let p = build_product(cmdp, ba).map_err(|e| e.to_string())?;
    let got: BTreeSet<usize> = p.pairs().iter().map(|&pair| brute.id(pair)).collect();
    let want: BTreeSet<usize> = (0..brute.len()).filter(|&v| reachable[v]).collect();
    if got != want {
        return Err(format!("reachable pairs differ: got {got:?}, want {want:?}"));
    }
    let init: BTreeSet<usize> = p.initial().iter().map(|&i| brute.id(p.pair(i))).collect();
    if init != brute.initial {
        return Err(format!("initial pairs differ: got {init:?}, want {:?}", brute.initial));
    }

    let witnesses = find_violating_lassos(&p, 100);
    if witnesses.is_empty() == nonempty {
        return Err(format!(
            "emptiness: nested DFS found {} witnesses, brute force nonempty = {nonempty}",
            witnesses.len()
        ));
    }
    for w in &witnesses {
        let ids: Vec<usize> = w.prefix.iter().chain(&w.cycle).map(|&i| brute.id(p.pair(i))).collect();
        let start = ids[0];
        if !brute.initial.contains(&start) {
            return Err(format!("witness does not start at an initial pair: {w:?}"));
        }
        let cyc: Vec<usize> = w.cycle.iter().map(|&i| brute.id(p.pair(i))).collect();
        let closed = ids.windows(2).all(|e| brute.succ[e[0]].contains(&e[1]))
            && brute.succ[*cyc.last().unwrap()].contains(&cyc[0]);
        if !closed {
            return Err(format!("witness uses a missing edge: {w:?}"));
        }
        if !cyc.iter().any(|&v| brute.accepting[v]) {
            return Err(format!("witness cycle has no accepting state: {w:?}"));
        }
    }

    let c = classify_unsafe(&p, witnesses);
    for (i, &pair) in p.pairs().iter().enumerate() {
        let v = brute.id(pair);
        if c.on_accepting_cycle[i] != on_cycle[v] || c.violating[i] != violating[v] {
            return Err(format!(
                "pair {pair:?}: got cycle={} violating={}, want cycle={} violating={}",
                c.on_accepting_cycle[i], c.violating[i], on_cycle[v], violating[v]
            ));
        }
    }

    let full = build_complete_product(cmdp, ba).map_err(|e| e.to_string())?;
    if full.num_states() != brute.len() {
        return Err(format!("complete product has {} of {} pairs", full.num_states(), brute.len()));
    }
    let cf = classify_unsafe(&full, Vec::new());
    for (i, &pair) in full.pairs().iter().enumerate() {
        if cf.violating[i] != violating[brute.id(pair)] {
            return Err(format!("complete product disagrees at {pair:?}"));
        }
    }
    Ok(())
}

fn one_hot(n: usize, i: usize) -> Vec<bool> {
    let mut v = vec![false; n];
    v[i] = true;
    v
}

/// `P(s' | s, Stay)` of the two-state generator; state 0 has coverage 0.25,
/// state 1 has coverage 0.75.
pub const TWO_STATE_P: [[f64; 2]; 2] = [[0.3, 0.7], [0.4, 0.6]];

fn coverage_features(s: usize) -> Vec<f64> {
    let mut f = vec![0.5; retshield::feature::Feature::ALL.len()];
    f[retshield::feature::Feature::Coverage.index()] = [0.25, 0.75][s];
    f
}

/// `n` transitions in episodes of 20 steps, each starting in state 0.
pub fn two_state_samples(n: usize, seed: u64) -> retshield::agent::ExperienceBuffer<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut s = 0;
    for i in 0..n {
        let t = (i % 20) as u64;
        if t == 0 {
            s = 0;
        }
        let s2 = usize::from(rng.gen::<f64>() < TWO_STATE_P[s][1]);
        out.push(retshield::agent::Experience {
            s: s as u64,
            action: retshield::action::Action::Stay,
            reward: 0.0,
            s_next: s2 as u64,
            cell_id: 0,
            t,
            features: coverage_features(s),
            next_features: coverage_features(s2),
        });
        s = s2;
    }
    out.into()
}

/// Max-norm error of the estimated transition matrix from `n` samples.
pub fn two_state_error(n: usize, seed: u64) -> f64 {
    use retshield::abstraction::{build_cmdp, select_features, DiscreteState};
    use retshield::ltl::{BindingTable, Comparator, PropositionBinding};
    let bindings = BindingTable::new(vec![PropositionBinding::new(
        "covHigh",
        retshield::feature::Feature::Coverage,
        Comparator::AtLeast,
        0.5,
    )
    .unwrap()])
    .unwrap();
    let selection = select_features(&bindings, &retshield::feature::Feature::ALL).unwrap();
    let cmdp = build_cmdp(&two_state_samples(n, seed), &selection, 2, &bindings).unwrap();
    let id = |b: u16| cmdp.index_of(&DiscreteState(vec![b])).expect("both states observed");
    let mut err: f64 = 0.0;
    for s in 0..2 {
        for s2 in 0..2 {
            let p = cmdp.probability(id(s as u16), retshield::action::Action::Stay, id(s2 as u16));
            err = err.max((p - TWO_STATE_P[s][s2]).abs());
        }
    }
    err
}

/// Three states, actions `Down` and `Up`, stochastic transitions.
pub struct SmallMdp {
    /// `p[s][a][s']` with `a` 0 for Down and 1 for Up.
    pub p: [[[f64; 3]; 2]; 3],
    pub r: [[f64; 2]; 3],
    pub gamma: f64,
}

pub const SMALL_MDP_ACTIONS: [retshield::action::Action; 2] =
    [retshield::action::Action::Down, retshield::action::Action::Up];

impl SmallMdp {
    pub fn fixed() -> Self {
        SmallMdp {
            p: [
                [[0.8, 0.2, 0.0], [0.1, 0.6, 0.3]],
                [[0.5, 0.5, 0.0], [0.0, 0.3, 0.7]],
                [[0.2, 0.0, 0.8], [0.6, 0.0, 0.4]],
            ],
            r: [[0.1, 0.0], [0.3, 0.2], [1.0, 0.5]],
            gamma: 0.9,
        }
    }

    /// Same rewards, each action leads to one fixed successor.
    pub fn deterministic() -> Self {
        SmallMdp {
            p: [
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
                [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
            ],
            ..SmallMdp::fixed()
        }
    }

    /// Optimal action values by value iteration to machine precision.
    pub fn value_iteration(&self) -> [[f64; 2]; 3] {
        let mut q = [[0.0f64; 2]; 3];
        loop {
            let v: Vec<f64> = q.iter().map(|row| row[0].max(row[1])).collect();
            let mut next = [[0.0; 2]; 3];
            for s in 0..3 {
                for a in 0..2 {
                    next[s][a] = self.r[s][a] + self.gamma * (0..3).map(|t| self.p[s][a][t] * v[t]).sum::<f64>();
                }
            }
            let delta = (0..3).flat_map(|s| (0..2).map(move |a| (s, a))).map(|(s, a)| (next[s][a] - q[s][a]).abs());
            let done = delta.fold(0.0, f64::max) < 1e-14;
            q = next;
            if done {
                return q;
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, s: usize, a: usize) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for t in 0..3 {
            acc += self.p[s][a][t];
            if u < acc {
                return t;
            }
        }
        2
    }
}

/// Tabular Q-learning on `mdp` for `updates` steps along ε-greedy
/// trajectories restarted every 50 steps; ε decays linearly from 1 to 0.1
/// and `step(visits)` gives the step size of a pair's next update.
pub fn q_learning(
    mdp: &SmallMdp,
    updates: usize,
    seed: u64,
    step: impl Fn(u64) -> f64,
) -> retshield::agent::QTable<f64> {
    use rand::SeedableRng;
    use retshield::agent::{select_action, update_q, Experience, QTable};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let allowed: retshield::action::ActionSet = SMALL_MDP_ACTIONS.into_iter().collect();
    let mut q = QTable::new();
    let mut visits = [[0u64; 3]; 3];
    let mut s = 0;
    for k in 0..updates {
        if k % 50 == 0 {
            s = rng.gen_range(0..3);
        }
        let eps = 1.0 - 0.9 * k as f64 / updates as f64;
        let action = select_action(&q, s as u64, eps, allowed, &mut rng).unwrap();
        let a = usize::from(action == retshield::action::Action::Up);
        let s2 = mdp.sample(&mut rng, s, a);
        visits[s][action.index()] += 1;
        let eta = step(visits[s][action.index()]);
        let e = Experience {
            s: s as u64,
            action,
            reward: mdp.r[s][a],
            s_next: s2 as u64,
            cell_id: 0,
            t: k as u64,
            features: Vec::new(),
            next_features: Vec::new(),
        };
        update_q(&mut q, &e, mdp.gamma, eta);
        s = s2;
    }
    q
}

/// Max-norm distance between learned and optimal values over the two used actions.
pub fn q_error(mdp: &SmallMdp, q: &retshield::agent::QTable<f64>) -> f64 {
    let opt = mdp.value_iteration();
    let mut err: f64 = 0.0;
    for s in 0..3 {
        for (a, &act) in SMALL_MDP_ACTIONS.iter().enumerate() {
            err = err.max((q.get(s as u64, act) - opt[s][a]).abs());
        }
    }
    err
}
