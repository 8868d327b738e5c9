//! Zero-error block codes and staged feedback codes.
//!
//! Block codes are maximum independent sets of the confusability graph
//! (inputs adjacent iff their difference sequence is walkable on the
//! coupled graph). Feedback codes follow a two-phase scheme: send the
//! message raw, then use the remaining symbols to tell the decoder which
//! admissible noise sequence corrupted the raw phase, protected by a
//! searched block code. Decoding runs backwards from the protected stage.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coupled::{coupled_graph, is_walkable};
use crate::fsm::{ChannelSpecDoc, NoiseFsm, Start, ENUM_GUARD_DEFAULT};
use crate::{Error, Result};

pub const CONFUSABILITY_VERTEX_GUARD: usize = 4096;
pub const EXACT_SEARCH_VERTEX_GUARD: usize = 256;

/// Confusability graph over all q^n input words, indexed lexicographically.
#[derive(Debug, Clone)]
pub struct ConfusabilityGraph {
    pub q: u32,
    pub n: usize,
    pub num_words: usize,
    /// Adjacency bitsets, one row of 64-bit words per vertex.
    rows: Vec<Vec<u64>>,
    words_per_row: usize,
}

impl ConfusabilityGraph {
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.rows[a][b / 64] >> (b % 64) & 1 == 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.rows[v].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn num_edges(&self) -> usize {
        (0..self.num_words).map(|v| self.degree(v)).sum::<usize>() / 2
    }

    pub fn word(&self, idx: usize) -> Vec<u32> {
        index_to_word(idx, self.q, self.n)
    }
}

pub fn index_to_word(mut idx: usize, q: u32, n: usize) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for i in (0..n).rev() {
        w[i] = (idx % q as usize) as u32;
        idx /= q as usize;
    }
    w
}

pub fn word_to_index(w: &[u32], q: u32) -> usize {
    w.iter().fold(0usize, |acc, &d| acc * q as usize + d as usize)
}

fn word_diff(a: &[u32], b: &[u32], q: u32) -> Vec<u32> {
    a.iter().zip(b).map(|(&x, &y)| (x + q - y) % q).collect()
}

pub fn confusability_graph(fsm: &NoiseFsm, n: usize) -> Result<ConfusabilityGraph> {
    if n == 0 {
        return Err(Error::Invalid("blocklength must be positive".into()));
    }
    let q = fsm.q;
    let num_words = (q as usize)
        .checked_pow(n as u32)
        .filter(|&v| v <= CONFUSABILITY_VERTEX_GUARD)
        .ok_or_else(|| {
            Error::Guard(format!(
                "q^n = {}^{} exceeds the {CONFUSABILITY_VERTEX_GUARD}-vertex guard",
                q, n
            ))
        })?;
    let cg = coupled_graph(fsm)?;
    // adjacency depends only on the difference word, so test each residue once
    let mut diff_walkable = vec![false; num_words];
    for (d, walkable) in diff_walkable.iter_mut().enumerate() {
        *walkable = is_walkable(&cg, &index_to_word(d, q, n));
    }
    let words_per_row = num_words.div_ceil(64);
    let mut rows = vec![vec![0u64; words_per_row]; num_words];
    for a in 0..num_words {
        let wa = index_to_word(a, q, n);
        for b in a + 1..num_words {
            let d = word_diff(&wa, &index_to_word(b, q, n), q);
            if diff_walkable[word_to_index(&d, q)] {
                rows[a][b / 64] |= 1 << (b % 64);
                rows[b][a / 64] |= 1 << (a % 64);
            }
        }
    }
    Ok(ConfusabilityGraph {
        q,
        n,
        num_words,
        rows,
        words_per_row,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    ExactClique,
    Greedy,
    Repetition,
    Concatenation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZeroErrorCode {
    pub n: usize,
    pub codewords: Vec<Vec<u32>>,
    pub method: SearchMethod,
}

impl ZeroErrorCode {
    pub fn rate(&self) -> f64 {
        (self.codewords.len() as f64).log2() / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    Exact,
    Greedy,
}

struct Bnb<'g> {
    g: &'g ConfusabilityGraph,
    /// branching order (descending degree, index tie-break), and its inverse
    order: Vec<usize>,
    best: Vec<usize>,
}

impl<'g> Bnb<'g> {
    fn run(&mut self, cand: &[u64], current: &mut Vec<usize>) {
        let remaining: usize = cand.iter().map(|w| w.count_ones() as usize).sum();
        if current.len() + remaining <= self.best.len() {
            return;
        }
        // first candidate in branching order
        let mut pick = None;
        for &u in &self.order {
            if cand[u / 64] >> (u % 64) & 1 == 1 {
                pick = Some(u);
                break;
            }
        }
        let Some(v) = pick else {
            if current.len() > self.best.len() {
                self.best = current.clone();
            }
            return;
        };
        // include v: drop v and its neighbors from the candidates
        let mut with_v: Vec<u64> = cand
            .iter()
            .zip(&self.g.rows[v])
            .map(|(&c, &adj)| c & !adj)
            .collect();
        with_v[v / 64] &= !(1 << (v % 64));
        current.push(v);
        self.run(&with_v, current);
        current.pop();
        // exclude v
        let mut without = cand.to_vec();
        without[v / 64] &= !(1 << (v % 64));
        self.run(&without, current);
    }
}

fn greedy_independent_set(g: &ConfusabilityGraph) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for v in 0..g.num_words {
        if chosen.iter().all(|&u| !g.adjacent(u, v)) {
            chosen.push(v);
        }
    }
    chosen
}

pub fn search_zero_error_code(fsm: &NoiseFsm, n: usize, mode: SearchMode) -> Result<ZeroErrorCode> {
    if mode == SearchMode::Exact {
        let vertices = (fsm.q as usize).checked_pow(n as u32).unwrap_or(usize::MAX);
        if vertices > EXACT_SEARCH_VERTEX_GUARD {
            return Err(Error::Guard(format!(
                "{vertices} vertices exceed the exact-search cap {EXACT_SEARCH_VERTEX_GUARD}"
            )));
        }
    }
    let g = confusability_graph(fsm, n)?;
    let mut set = match mode {
        SearchMode::Greedy => greedy_independent_set(&g),
        SearchMode::Exact => {
            let mut order: Vec<usize> = (0..g.num_words).collect();
            order.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
            let mut bnb = Bnb {
                g: &g,
                order,
                best: greedy_independent_set(&g),
            };
            let mut full = vec![0u64; g.words_per_row];
            for v in 0..g.num_words {
                full[v / 64] |= 1 << (v % 64);
            }
            bnb.run(&full.clone(), &mut Vec::new());
            bnb.best
        }
    };
    set.sort_unstable();
    Ok(ZeroErrorCode {
        n,
        codewords: set.iter().map(|&v| g.word(v)).collect(),
        method: match mode {
            SearchMode::Exact => SearchMethod::ExactClique,
            SearchMode::Greedy => SearchMethod::Greedy,
        },
    })
}

/// Brute-force check: output sets (over every initial state and admissible
/// noise) of distinct codewords never intersect.
pub fn verify_zero_error_code(fsm: &NoiseFsm, code: &ZeroErrorCode) -> Result<bool> {
    let q = fsm.q;
    for c in &code.codewords {
        if c.len() != code.n || c.iter().any(|&d| d >= q) {
            return Err(Error::Invalid("malformed codeword".into()));
        }
    }
    let noise = fsm.enumerate_noise_sequences(Start::All, code.n, ENUM_GUARD_DEFAULT)?;
    let mut owner: HashMap<Vec<u32>, usize> = HashMap::new();
    for (i, c) in code.codewords.iter().enumerate() {
        for z in &noise {
            let y: Vec<u32> = c.iter().zip(z).map(|(&x, &e)| (x + e) % q).collect();
            if let Some(&j) = owner.get(&y) {
                if j != i {
                    return Ok(false);
                }
            } else {
                owner.insert(y, i);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    Raw,
    BaseBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage {
    pub kind: StageKind,
    pub length: usize,
    pub index_set_size: usize,
}

/// A fully specified feedback code, self-contained enough to replay:
/// carries the channel, the stage layout, the canonical noise enumeration
/// for the raw stage, and the protecting block code.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeedbackCodeSpec {
    pub channel: ChannelSpecDoc,
    pub message_count: usize,
    pub stages: Vec<Stage>,
    pub base_code: Option<ZeroErrorCode>,
    /// Lexicographic list of the admissible noise sequences of each raw
    /// stage, as seen from an unknown initial state.
    pub noise_enumerations: Vec<Vec<Vec<u32>>>,
    pub total_length: usize,
}

impl FeedbackCodeSpec {
    pub fn rate(&self) -> f64 {
        (self.message_count as f64).log2() / self.total_length as f64
    }
}

const BASE_LEN_GUARD: usize = 12;
const MESSAGE_GUARD: usize = 1 << 20;

fn raw_length(q: u32, count: usize) -> usize {
    // ceil(log_q count), at least 1
    let mut len = 1usize;
    let mut cap = q as usize;
    while cap < count {
        cap *= q as usize;
        len += 1;
    }
    len
}

/// Find a block code with at least `count` codewords, growing the
/// blocklength as needed; falls back to self-concatenation past the
/// exact/greedy guards (sound because non-confusability here is
/// walkability from every coupled vertex, which concatenates).
fn base_code_for(fsm: &NoiseFsm, count: usize) -> Result<ZeroErrorCode> {
    let q = fsm.q as usize;
    let mut best: Option<ZeroErrorCode> = None;
    for len in 1..=BASE_LEN_GUARD {
        let vertices = match q.checked_pow(len as u32) {
            Some(v) if v <= CONFUSABILITY_VERTEX_GUARD => v,
            _ => break,
        };
        let mode = if vertices <= EXACT_SEARCH_VERTEX_GUARD {
            SearchMode::Exact
        } else {
            SearchMode::Greedy
        };
        let code = search_zero_error_code(fsm, len, mode)?;
        if code.codewords.len() >= count {
            let mut code = code;
            code.codewords.truncate(count);
            return Ok(code);
        }
        if best
            .as_ref()
            .map(|b| code.codewords.len() > b.codewords.len())
            .unwrap_or(true)
        {
            best = Some(code);
        }
    }
    let seed = best.ok_or_else(|| Error::Guard("no base code within the blocklength guard".into()))?;
    if seed.codewords.len() < 2 {
        return Err(Error::Guard(
            "channel admits no nontrivial block code within the guard".into(),
        ));
    }
    let mut code = seed.clone();
    while code.codewords.len() < count {
        if code.n + seed.n > 8 * BASE_LEN_GUARD {
            return Err(Error::Guard("concatenated base code grew past the guard".into()));
        }
        let mut concatenated = Vec::with_capacity(code.codewords.len() * seed.codewords.len());
        for a in &code.codewords {
            for b in &seed.codewords {
                let mut w = a.clone();
                w.extend_from_slice(b);
                concatenated.push(w);
            }
        }
        concatenated.sort();
        code = ZeroErrorCode {
            n: code.n + seed.n,
            codewords: concatenated,
            method: SearchMethod::Concatenation,
        };
    }
    code.codewords.truncate(count);
    Ok(code)
}

pub fn build_feedback_code(fsm: &NoiseFsm, message_count: usize) -> Result<FeedbackCodeSpec> {
    if message_count < 2 {
        return Err(Error::Invalid("need at least 2 messages".into()));
    }
    if message_count > MESSAGE_GUARD {
        return Err(Error::Guard(format!(
            "message count {message_count} exceeds guard {MESSAGE_GUARD}"
        )));
    }
    let report = crate::capacity::analyze(fsm, None)?;
    if report.is_zero {
        return Err(Error::Refusal(
            "zero-error capacities of this channel are zero; no feedback code exists".into(),
        ));
    }
    let q = fsm.q;
    let k0 = raw_length(q, message_count);
    let noise: Vec<Vec<u32>> = fsm
        .enumerate_noise_sequences(Start::All, k0, ENUM_GUARD_DEFAULT)?
        .into_iter()
        .collect();
    let mut stages = vec![Stage {
        kind: StageKind::Raw,
        length: k0,
        index_set_size: message_count,
    }];
    let mut base_code = None;
    let mut total = k0;
    if noise.len() > 1 {
        let code = base_code_for(fsm, noise.len())?;
        stages.push(Stage {
            kind: StageKind::BaseBlock,
            length: code.n,
            index_set_size: noise.len(),
        });
        total += code.n;
        base_code = Some(code);
    }
    let noise_enumerations = vec![noise];
    Ok(FeedbackCodeSpec {
        channel: fsm.to_doc(),
        message_count,
        stages,
        base_code,
        noise_enumerations,
        total_length: total,
    })
}

fn message_digits(m: usize, q: u32, len: usize) -> Vec<u32> {
    index_to_word(m, q, len)
}

/// Encode message `m`, drawing channel noise from `labels` (one label per
/// symbol). Returns (inputs, outputs). Feedback is consumed only at the
/// raw/base stage boundary: the encoder recovers the raw-stage noise as
/// y - x and selects the base codeword indexing it.
pub fn encode_with_noise(
    spec: &FeedbackCodeSpec,
    m: usize,
    labels: &[u32],
) -> Result<(Vec<u32>, Vec<u32>)> {
    let q = spec.channel.q;
    if labels.len() != spec.total_length {
        return Err(Error::Invalid("noise length mismatch".into()));
    }
    let k0 = spec.stages[0].length;
    let mut inputs = message_digits(m, q, k0);
    let mut outputs: Vec<u32> = inputs
        .iter()
        .zip(labels)
        .map(|(&x, &z)| (x + z) % q)
        .collect();
    if let Some(base) = &spec.base_code {
        let raw_noise: Vec<u32> = labels[..k0].to_vec();
        let idx = spec.noise_enumerations[0]
            .binary_search(&raw_noise)
            .map_err(|_| Error::Contract("realized noise missing from enumeration".into()))?;
        let codeword = &base.codewords[idx];
        for (i, &x) in codeword.iter().enumerate() {
            inputs.push(x);
            outputs.push((x + labels[k0 + i]) % q);
        }
    }
    Ok((inputs, outputs))
}

/// Decode from the channel outputs alone: identify the base codeword as
/// the unique one compatible with some admissible base-stage noise, map it
/// back to the raw-stage noise, strip that noise from the raw outputs.
pub fn decode(spec: &FeedbackCodeSpec, fsm: &NoiseFsm, outputs: &[u32]) -> Result<usize> {
    let q = spec.channel.q;
    if outputs.len() != spec.total_length {
        return Err(Error::Invalid("output length mismatch".into()));
    }
    let k0 = spec.stages[0].length;
    let raw_noise: Vec<u32> = if let Some(base) = &spec.base_code {
        let tail = &outputs[k0..];
        let admissible = fsm.enumerate_noise_sequences(Start::All, base.n, ENUM_GUARD_DEFAULT)?;
        let mut found: Option<usize> = None;
        for (idx, c) in base.codewords.iter().enumerate() {
            let d: Vec<u32> = tail.iter().zip(c).map(|(&y, &x)| (y + q - x) % q).collect();
            if admissible.contains(&d) {
                if found.is_some() {
                    return Err(Error::Contract(
                        "two base codewords compatible with the received block".into(),
                    ));
                }
                found = Some(idx);
            }
        }
        let idx =
            found.ok_or_else(|| Error::Contract("no base codeword compatible with output".into()))?;
        spec.noise_enumerations[0][idx].clone()
    } else {
        // deterministic raw stage: exactly one admissible noise sequence
        spec.noise_enumerations[0][0].clone()
    };
    let digits: Vec<u32> = outputs[..k0]
        .iter()
        .zip(&raw_noise)
        .map(|(&y, &z)| (y + q - z) % q)
        .collect();
    Ok(word_to_index(&digits, q))
}

/// Exhaustively simulate encoder and decoder for every initial state,
/// every admissible noise walk, and every message.
pub fn verify_feedback_code(fsm: &NoiseFsm, spec: &FeedbackCodeSpec) -> Result<bool> {
    verify_from_states(fsm, spec, &(0..fsm.num_states()).collect::<Vec<_>>())
}

fn verify_from_states(fsm: &NoiseFsm, spec: &FeedbackCodeSpec, starts: &[usize]) -> Result<bool> {
    let n = spec.total_length;
    let m_count = spec.message_count;
    for &s in starts {
        let walks = fsm.enumerate_noise_sequences(Start::State(s), n, ENUM_GUARD_DEFAULT)?;
        let total = walks.len() as u64 * m_count as u64;
        if total > ENUM_GUARD_DEFAULT {
            return Err(Error::Guard(format!(
                "{total} verification cases exceed the guard"
            )));
        }
        for labels in &walks {
            for m in 0..m_count {
                let (_, outputs) = encode_with_noise(spec, m, labels)?;
                match decode(spec, fsm, &outputs) {
                    Ok(decoded) if decoded == m => {}
                    _ => return Ok(false),
                }
            }
        }
    }
    Ok(true)
}

/// Decoding must survive an arbitrary channel history: replay the full
/// verification from every state reachable by a noise walk of length <= 3.
/// (Distinct priming walks landing on the same state are equivalent, so we
/// verify once per reachable state.)
pub fn verify_uniformity(fsm: &NoiseFsm, spec: &FeedbackCodeSpec) -> Result<bool> {
    let mut reachable = vec![false; fsm.num_states()];
    for s in 0..fsm.num_states() {
        let mut frontier = vec![s];
        reachable[s] = true;
        for _ in 0..3 {
            let mut next = Vec::new();
            for &u in &frontier {
                for e in fsm.outgoing(u) {
                    if !reachable[e.to] {
                        reachable[e.to] = true;
                    }
                    next.push(e.to);
                }
            }
            next.sort_unstable();
            next.dedup();
            frontier = next;
        }
    }
    let starts: Vec<usize> = (0..fsm.num_states()).filter(|&s| reachable[s]).collect();
    verify_from_states(fsm, spec, &starts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configs;
    use crate::fsm::NoiseFsm;

    fn fig3_q3() -> NoiseFsm {
        NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE)
            .unwrap()
            .with_alphabet(3)
            .unwrap()
    }

    fn pentagon() -> NoiseFsm {
        NoiseFsm::parse(configs::PENTAGON_MEMORYLESS).unwrap()
    }

    #[test]
    fn pentagon_n1_is_five_cycle() {
        let g = confusability_graph(&pentagon(), 1).unwrap();
        assert_eq!(g.num_words, 5);
        assert_eq!(g.num_edges(), 5);
        for v in 0..5usize {
            assert!(g.adjacent(v, (v + 1) % 5));
            assert!(!g.adjacent(v, (v + 2) % 5));
        }
    }

    #[test]
    fn noiseless_graph_edgeless() {
        let fsm = NoiseFsm::parse(configs::NOISELESS).unwrap();
        for n in 1..=4 {
            let g = confusability_graph(&fsm, n).unwrap();
            assert_eq!(g.num_edges(), 0);
        }
    }

    #[test]
    fn fig3_q3_n2_adjacency_matches_walkability() {
        let fsm = fig3_q3();
        let g = confusability_graph(&fsm, 2).unwrap();
        // non-adjacent exactly when the difference is (1,1) or (2,2)
        for a in 0..9usize {
            for b in 0..9usize {
                if a == b {
                    continue;
                }
                let d = word_diff(&g.word(a), &g.word(b), 3);
                let expected = !(d == vec![1, 1] || d == vec![2, 2]);
                assert_eq!(g.adjacent(a, b), expected, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pentagon_exact_codes() {
        let c1 = search_zero_error_code(&pentagon(), 1, SearchMode::Exact).unwrap();
        assert_eq!(c1.codewords.len(), 2);
        let c2 = search_zero_error_code(&pentagon(), 2, SearchMode::Exact).unwrap();
        assert_eq!(c2.codewords.len(), 5);
        assert!(verify_zero_error_code(&pentagon(), &c2).unwrap());
    }

    #[test]
    fn fig3_q3_n2_code() {
        let fsm = fig3_q3();
        let code = search_zero_error_code(&fsm, 2, SearchMode::Exact).unwrap();
        assert_eq!(code.codewords.len(), 3);
        let repetition = ZeroErrorCode {
            n: 2,
            codewords: vec![vec![0, 0], vec![1, 1], vec![2, 2]],
            method: SearchMethod::Repetition,
        };
        assert!(verify_zero_error_code(&fsm, &repetition).unwrap());
    }

    #[test]
    fn confusable_pair_rejected() {
        let fsm = fig3_q3();
        let bad = ZeroErrorCode {
            n: 2,
            codewords: vec![vec![0, 0], vec![0, 1]],
            method: SearchMethod::Repetition,
        };
        assert!(!verify_zero_error_code(&fsm, &bad).unwrap());
    }

    #[test]
    fn single_codeword_always_passes() {
        for doc in configs::ALL {
            let fsm = NoiseFsm::parse(doc.json).unwrap();
            let code = ZeroErrorCode {
                n: 2,
                codewords: vec![vec![0, 0]],
                method: SearchMethod::Repetition,
            };
            assert!(verify_zero_error_code(&fsm, &code).unwrap(), "{}", doc.name);
        }
    }

    #[test]
    fn greedy_never_beats_exact() {
        for (doc, n) in [
            (configs::PENTAGON_MEMORYLESS, 2usize),
            (configs::FIG3_NO_CONSECUTIVE, 4),
            (configs::NOISELESS, 4),
        ] {
            let fsm = NoiseFsm::parse(doc).unwrap();
            let exact = search_zero_error_code(&fsm, n, SearchMode::Exact).unwrap();
            let greedy = search_zero_error_code(&fsm, n, SearchMode::Greedy).unwrap();
            assert!(greedy.codewords.len() <= exact.codewords.len());
            assert!(verify_zero_error_code(&fsm, &exact).unwrap());
            assert!(verify_zero_error_code(&fsm, &greedy).unwrap());
        }
    }

    #[test]
    fn exact_search_guard() {
        let fsm = pentagon();
        assert!(matches!(
            search_zero_error_code(&fsm, 4, SearchMode::Exact),
            Err(Error::Guard(_))
        ));
    }

    #[test]
    fn feedback_code_m3_structure() {
        let fsm = fig3_q3();
        let spec = build_feedback_code(&fsm, 3).unwrap();
        assert_eq!(spec.stages.len(), 2);
        assert_eq!(spec.stages[0].length, 1);
        assert_eq!(spec.stages[1].index_set_size, 2);
        assert_eq!(spec.total_length, 3);
        let base = spec.base_code.as_ref().unwrap();
        assert_eq!(base.codewords, vec![vec![0, 0], vec![1, 1]]);
        assert!(spec.rate() <= 3f64.log2() - ((1.0 + 5f64.sqrt()) / 2.0).log2() + 1e-9);
    }

    #[test]
    fn feedback_code_m3_verifies() {
        let fsm = fig3_q3();
        let spec = build_feedback_code(&fsm, 3).unwrap();
        assert!(verify_feedback_code(&fsm, &spec).unwrap());
        assert!(verify_uniformity(&fsm, &spec).unwrap());
    }

    #[test]
    fn feedback_code_m81_structure_and_verify() {
        let fsm = fig3_q3();
        let spec = build_feedback_code(&fsm, 81).unwrap();
        assert_eq!(spec.stages[0].length, 4);
        assert_eq!(spec.stages[1].index_set_size, 8);
        assert_eq!(spec.total_length, 8);
        assert!(spec.base_code.as_ref().unwrap().codewords.len() == 8);
        assert!(verify_feedback_code(&fsm, &spec).unwrap());
        assert!(verify_uniformity(&fsm, &spec).unwrap());
    }

    #[test]
    fn noiseless_single_raw_stage() {
        let fsm = NoiseFsm::parse(configs::NOISELESS).unwrap();
        let spec = build_feedback_code(&fsm, 2).unwrap();
        assert_eq!(spec.stages.len(), 1);
        assert_eq!(spec.total_length, 1);
        assert!(spec.base_code.is_none());
        assert!(verify_feedback_code(&fsm, &spec).unwrap());
        assert!(verify_uniformity(&fsm, &spec).unwrap());
    }

    #[test]
    fn zero_channel_refused() {
        let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE).unwrap();
        assert!(matches!(
            build_feedback_code(&fsm, 3),
            Err(Error::Refusal(_))
        ));
    }

    #[test]
    fn fault_injected_spec_fails() {
        let fsm = fig3_q3();
        let mut spec = build_feedback_code(&fsm, 3).unwrap();
        // replace the base code with a confusable pair
        spec.base_code.as_mut().unwrap().codewords = vec![vec![0, 0], vec![0, 1]];
        assert!(!verify_feedback_code(&fsm, &spec).unwrap());
        assert!(!verify_uniformity(&fsm, &spec).unwrap());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let fsm = fig3_q3();
        let spec = build_feedback_code(&fsm, 3).unwrap();
        let json = serde_json::to_string_pretty(&spec).unwrap();
        let back: FeedbackCodeSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.total_length, spec.total_length);
        let fsm2 = NoiseFsm::from_doc(&back.channel).unwrap();
        assert!(verify_feedback_code(&fsm2, &back).unwrap());
    }

    #[test]
    fn rates_respect_capacity() {
        let fsm = fig3_q3();
        let c0f = crate::capacity::analyze(&fsm, None).unwrap().c0f;
        for m in [2usize, 3, 9, 27, 81] {
            let spec = build_feedback_code(&fsm, m).unwrap();
            assert!(verify_feedback_code(&fsm, &spec).unwrap(), "M={m}");
            assert!(spec.rate() <= c0f + 1e-9, "M={m} rate {}", spec.rate());
        }
    }

    #[test]
    fn sliding_window_feedback_code() {
        let fsm = NoiseFsm::parse(configs::SLIDING_WINDOW_3_1).unwrap();
        let spec = build_feedback_code(&fsm, 4).unwrap();
        assert!(verify_feedback_code(&fsm, &spec).unwrap());
        let c0f = crate::capacity::analyze(&fsm, None).unwrap().c0f;
        assert!(spec.rate() <= c0f + 1e-9);
    }

    #[test]
    fn word_index_round_trip() {
        for q in [2u32, 3, 5] {
            for idx in 0..(q as usize).pow(3) {
                let w = index_to_word(idx, q, 3);
                assert_eq!(word_to_index(&w, q), idx);
            }
        }
    }
}
