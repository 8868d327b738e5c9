//! State estimation and stabilization of diagonal linear plants over a
//! noisy finite-state channel.
//!
//! Both schemes run in epochs of r steps. At each epoch start the encoder
//! quantizes the scaled innovation (state minus the shared prediction,
//! divided by a contracting bound delta), ships the quantizer index
//! through a zero-error feedback code, and both ends update the prediction
//! and shrink delta. Estimation uses explicit channel-output feedback; in
//! the stabilization loop the controller echoes each received symbol back
//! through a "communication control" offset, which the encoder reads off
//! the plant's own transition, and cancels the accumulated offsets in the
//! last n_x slots of the epoch so they never perturb the epoch boundary.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::capacity;
use crate::codes::{self, FeedbackCodeSpec};
use crate::fsm::NoiseFsm;
use crate::spectral;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct LtiSystem {
    /// Diagonal of the dynamics matrix, one entry per axis.
    pub a: Vec<f64>,
    /// Input gains, same shape.
    pub b: Vec<f64>,
    /// Bound on the initial state (max-norm).
    pub d_x: f64,
    /// Per-step disturbance bound (max-norm).
    pub d: f64,
}

impl LtiSystem {
    pub fn scalar(a: f64, b: f64, d_x: f64, d: f64) -> Result<LtiSystem> {
        LtiSystem::diagonal(vec![a], vec![b], d_x, d)
    }

    pub fn diagonal(a: Vec<f64>, b: Vec<f64>, d_x: f64, d: f64) -> Result<LtiSystem> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Invalid("dynamics and gain shapes differ".into()));
        }
        if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite plant coefficients".into()));
        }
        if !d_x.is_finite() || !d.is_finite() || d_x <= 0.0 || d < 0.0 {
            return Err(Error::Invalid("need D_x > 0 and D >= 0".into()));
        }
        Ok(LtiSystem { a, b, d_x, d })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// max-norm of the diagonal dynamics matrix
    pub fn a_norm(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Sum of log2|a_i| over the unstable axes.
pub fn lin_topological_entropy(sys: &LtiSystem) -> f64 {
    sys.a
        .iter()
        .filter(|v| v.abs() >= 1.0)
        .map(|v| v.abs().log2())
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct Quantizer {
    /// Propagation exponent the contraction is taken against.
    pub exponent: usize,
    pub rho_target: f64,
    /// Level count per axis (1 on stable axes).
    pub levels: Vec<usize>,
    pub total_levels: usize,
    /// max_i |a_i|^exponent / levels_i
    pub achieved_rho: f64,
}

pub fn build_contracted_quantizer(sys: &LtiSystem, r: usize, rho_target: f64) -> Result<Quantizer> {
    if !(rho_target > 0.0 && rho_target < 1.0) {
        return Err(Error::Invalid("contraction rate must lie in (0,1)".into()));
    }
    if r == 0 {
        return Err(Error::Invalid("epoch exponent must be positive".into()));
    }
    let mut levels = Vec::with_capacity(sys.dim());
    let mut achieved: f64 = 0.0;
    for &a in &sys.a {
        let growth = a.abs().powi(r as i32);
        let m = if a.abs() >= 1.0 {
            (growth / rho_target).ceil() as usize
        } else {
            1
        };
        achieved = achieved.max(growth / m as f64);
        levels.push(m);
    }
    let total: usize = levels.iter().product();
    // strictly more levels than the r-step volume growth on unstable axes
    let min_levels = (2f64).powf(r as f64 * lin_topological_entropy(sys));
    if (total as f64) < min_levels {
        return Err(Error::Contract(format!(
            "{total} levels do not exceed the volume growth {min_levels}"
        )));
    }
    Ok(Quantizer {
        exponent: r,
        rho_target,
        levels,
        total_levels: total,
        achieved_rho: achieved,
    })
}

impl Quantizer {
    /// Map a point of the unit max-norm ball to (cell index, centroid).
    pub fn quantize(&self, eps: &[f64]) -> Result<(usize, Vec<f64>)> {
        if eps.len() != self.levels.len() {
            return Err(Error::Invalid("dimension mismatch".into()));
        }
        let mut index = 0usize;
        let mut centroid = Vec::with_capacity(eps.len());
        for (&e, &m) in eps.iter().zip(&self.levels) {
            if e.abs() > 1.0 + 1e-9 {
                return Err(Error::Contract(format!(
                    "quantizer input {e} escaped the unit ball"
                )));
            }
            let width = 2.0 / m as f64;
            let cell = (((e + 1.0) / width).floor() as isize).clamp(0, m as isize - 1) as usize;
            index = index * m + cell;
            centroid.push(-1.0 + (cell as f64 + 0.5) * width);
        }
        Ok((index, centroid))
    }

    pub fn centroid_of(&self, mut index: usize) -> Result<Vec<f64>> {
        if index >= self.total_levels {
            return Err(Error::Invalid("quantizer index out of range".into()));
        }
        let mut cells = vec![0usize; self.levels.len()];
        for (slot, &m) in cells.iter_mut().zip(&self.levels).rev() {
            *slot = index % m;
            index /= m;
        }
        Ok(cells
            .iter()
            .zip(&self.levels)
            .map(|(&c, &m)| -1.0 + (c as f64 + 0.5) * (2.0 / m as f64))
            .collect())
    }
}

/// Control sequence (one vector per step, n_x steps) driving the noise-free
/// plant from `xhat` to the origin. Diagonal dynamics decouple, so the
/// whole correction lands in the first step.
pub fn deadbeat_program(sys: &LtiSystem, xhat: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = sys.dim();
    let mut first = vec![0.0; n];
    for i in 0..n {
        if sys.b[i] == 0.0 {
            if sys.a[i].abs() >= 1.0 && xhat[i] != 0.0 {
                return Err(Error::Invalid(format!(
                    "axis {i} is unstable but has zero input gain"
                )));
            }
            continue;
        }
        first[i] = -sys.a[i] / sys.b[i] * xhat[i];
    }
    let mut program = vec![vec![0.0; n]; n];
    program[0] = first;
    Ok(program)
}

pub const SIGNALING_MARGIN_DEFAULT: f64 = 0.5;
/// Spacing floor for disturbance-free plants, comfortably above float
/// round-off at simulation scales.
const SIGNALING_FLOOR: f64 = 1e-6;

/// Offsets u(y), one per channel output letter, separated on the first
/// axis so that the induced state jumps differ by more than 2D.
pub fn signaling_alphabet(sys: &LtiSystem, y_count: usize) -> Result<Vec<f64>> {
    let b = sys.b[0];
    if b == 0.0 {
        return Err(Error::Invalid("signaling axis has zero input gain".into()));
    }
    let spacing = (2.0 * sys.d * (1.0 + SIGNALING_MARGIN_DEFAULT)).max(SIGNALING_FLOOR);
    Ok((0..y_count).map(|y| y as f64 * spacing / b).collect())
}

/// Invert one plant transition to the output letter that was signaled:
/// the unique offset whose residual is within the disturbance bound.
pub fn recover_y(
    sys: &LtiSystem,
    x_next: f64,
    x: f64,
    u_basic: f64,
    offsets: &[f64],
) -> Result<usize> {
    let scale = 1.0f64.max(x.abs()).max(x_next.abs());
    let tol = sys.d + 1e-9 * scale;
    let mut hit = None;
    for (y, &off) in offsets.iter().enumerate() {
        let residual = (x_next - sys.a[0] * x - sys.b[0] * (u_basic + off)).abs();
        if residual <= tol {
            if hit.is_some() {
                return Err(Error::Contract(format!(
                    "ambiguous signaling recovery at x = {x}"
                )));
            }
            hit = Some(y);
        }
    }
    hit.ok_or_else(|| Error::Contract(format!("no signaling offset explains transition at x = {x}")))
}

#[derive(Debug, Clone)]
pub struct CoderConfig {
    pub r: usize,
    pub quantizer: Quantizer,
    pub feedback_code: FeedbackCodeSpec,
    /// Per-epoch contraction rate of the innovation (quantizer rate times
    /// the leftover propagation when the quantizer exponent is r - n_x).
    pub rho_delta: f64,
    pub delta_star: f64,
    pub delta_1: f64,
    pub gamma: f64,
    /// Present only for the stabilization loop.
    pub signaling: Option<Vec<f64>>,
}

fn disturbance_accumulation(sys: &LtiSystem, r: usize) -> f64 {
    let a = sys.a_norm();
    sys.d * (0..r).map(|t| a.powi(t as i32)).sum::<f64>()
}

fn config_common(
    sys: &LtiSystem,
    fsm: &NoiseFsm,
    r: usize,
    rho_target: f64,
    exponent: usize,
    signaling: Option<Vec<f64>>,
) -> Result<CoderConfig> {
    let quantizer = build_contracted_quantizer(sys, exponent, rho_target)?;
    let leftover = sys.a_norm().powi((r - exponent) as i32).max(1.0);
    let rho_delta = quantizer.achieved_rho * leftover;
    if rho_delta >= 1.0 {
        return Err(Error::Invalid(format!(
            "effective contraction {rho_delta} is not below 1; lower rho or raise r"
        )));
    }
    let messages = quantizer.total_levels.max(2);
    let feedback_code = codes::build_feedback_code(fsm, messages)?;
    let limit = if signaling.is_some() { r - sys.dim() } else { r };
    if feedback_code.total_length > limit {
        return Err(Error::Guard(format!(
            "feedback code needs {} symbols but the epoch offers {limit}",
            feedback_code.total_length
        )));
    }
    let gamma = 1.01 * sys.a_norm();
    // delta_star must dominate both the classical slack D*gamma^r and the
    // worst-case disturbance accumulated across one epoch, else the scaled
    // innovation can escape the quantizer domain
    let d_acc = disturbance_accumulation(sys, r);
    let delta_star = 1.01 * (sys.d * gamma.powi(r as i32)).max(d_acc);
    Ok(CoderConfig {
        r,
        quantizer,
        feedback_code,
        rho_delta,
        delta_star,
        delta_1: 1.01 * sys.d_x,
        gamma,
        signaling,
    })
}

pub fn estimation_config(
    sys: &LtiSystem,
    fsm: &NoiseFsm,
    r: usize,
    rho_target: f64,
) -> Result<CoderConfig> {
    check_estimation_feasible(sys, fsm)?;
    config_common(sys, fsm, r, rho_target, r, None)
}

pub fn stabilization_config(
    sys: &LtiSystem,
    fsm: &NoiseFsm,
    r: usize,
    rho_target: f64,
) -> Result<CoderConfig> {
    check_stabilization_feasible(sys, fsm)?;
    if sys.dim() != 1 {
        return Err(Error::Invalid(
            "the stabilization loop is implemented for scalar plants".into(),
        ));
    }
    if r <= sys.dim() {
        return Err(Error::Invalid("epoch too short for the reserved slots".into()));
    }
    let signaling = signaling_alphabet(sys, fsm.q as usize)?;
    config_common(sys, fsm, r, rho_target, r - sys.dim(), Some(signaling))
}

fn check_estimation_feasible(sys: &LtiSystem, fsm: &NoiseFsm) -> Result<()> {
    let h_lin = lin_topological_entropy(sys);
    let c0f = capacity::analyze(fsm, None)?.c0f;
    if c0f <= h_lin {
        return Err(Error::Refusal(format!(
            "feedback capacity {c0f:.4} does not exceed the plant entropy {h_lin:.4} \
             (margin {:.4})",
            c0f - h_lin
        )));
    }
    Ok(())
}

fn check_stabilization_feasible(sys: &LtiSystem, fsm: &NoiseFsm) -> Result<()> {
    let h_lin = lin_topological_entropy(sys);
    let margin = capacity::small_entropy_margin(h_lin, fsm)?;
    if margin <= 0.0 {
        return Err(Error::Refusal(format!(
            "entropy margin log2(q) - h_ch - h_lin = {margin:.4} is not positive; \
             bounded stabilization over this channel is impossible"
        )));
    }
    for i in 0..sys.dim() {
        if sys.a[i].abs() >= 1.0 && sys.b[i] == 0.0 {
            return Err(Error::Invalid(format!(
                "axis {i} is unstable but has zero input gain"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// D times the epoch propagation sum for theta = 1..r-1.
    pub d_r: f64,
    /// Worst-case disturbance accumulated over one epoch (theta = 0..r-1).
    pub d_acc: f64,
    pub delta_ceiling: f64,
    /// Ceiling on the innovation at epoch boundaries.
    pub est_error_ceiling: f64,
    /// Ceiling on the estimation error anywhere inside an epoch.
    pub est_intra_ceiling: f64,
    /// Ceiling on the state at epoch boundaries (stabilization).
    pub state_boundary_ceiling: f64,
    /// Ceiling on the state anywhere inside an epoch (stabilization).
    pub state_intra_ceiling: f64,
}

pub fn theoretical_bounds(sys: &LtiSystem, cfg: &CoderConfig) -> BoundReport {
    let a = sys.a_norm();
    let r = cfg.r as i32;
    let d_r = sys.d * (1..cfg.r).map(|t| a.powi(t as i32)).sum::<f64>();
    let d_acc = disturbance_accumulation(sys, cfg.r);
    let delta_ceiling = cfg.delta_1 + cfg.delta_star / (1.0 - cfg.rho_delta);
    let est_error_ceiling = cfg.rho_delta * delta_ceiling + d_r;
    let est_intra_ceiling = a.powi(r) * delta_ceiling + d_acc;
    let comm_acc = match &cfg.signaling {
        Some(offsets) => {
            let b = sys.b[0].abs();
            let u_sig = offsets.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let xi = (0..cfg.r - sys.dim())
                .map(|t| a.powi(t as i32))
                .sum::<f64>()
                * b
                * u_sig;
            let cancel = a.powi(sys.dim() as i32) * xi / b.max(f64::MIN_POSITIVE);
            let u_max = u_sig.max(cancel);
            (0..cfg.r.saturating_sub(1))
                .map(|t| a.powi(t as i32))
                .sum::<f64>()
                * b
                * u_max
        }
        None => 0.0,
    };
    BoundReport {
        d_r,
        d_acc,
        delta_ceiling,
        est_error_ceiling,
        est_intra_ceiling,
        state_boundary_ceiling: a.powi(r) * delta_ceiling + d_acc,
        state_intra_ceiling: a.powi(r) * delta_ceiling + comm_acc + d_acc,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimPolicy {
    Random { seed: u64 },
    Replay { labels: Vec<u32> },
    Greedy,
}

struct ChannelDriver<'a> {
    fsm: &'a NoiseFsm,
    state: usize,
    kind: DriverKind,
}

enum DriverKind {
    Rng(Box<ChaCha20Rng>),
    Replay { labels: Vec<u32>, pos: usize },
    /// Prefers successors with the richest set of future noise walks.
    Greedy { scores: Vec<f64> },
}

impl<'a> ChannelDriver<'a> {
    fn new(fsm: &'a NoiseFsm, policy: &SimPolicy, horizon: usize) -> Result<Self> {
        let (state, kind) = match policy {
            SimPolicy::Random { seed } => {
                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                let state = rng.gen_range(0..fsm.num_states());
                (state, DriverKind::Rng(Box::new(rng)))
            }
            SimPolicy::Replay { labels } => (
                0,
                DriverKind::Replay {
                    labels: labels.clone(),
                    pos: 0,
                },
            ),
            SimPolicy::Greedy => {
                let scores = walk_scores(fsm, horizon)?;
                let state = (0..fsm.num_states())
                    .max_by(|&x, &y| scores[x].total_cmp(&scores[y]))
                    .unwrap_or(0);
                (state, DriverKind::Greedy { scores })
            }
        };
        Ok(ChannelDriver {
            fsm,
            state,
            kind,
        })
    }

    /// Transmit one symbol. `prefer` lets the adversarial policy score
    /// each candidate noise label (higher wins) when it has plant context.
    fn step(&mut self, input: u32, prefer: Option<&dyn Fn(u32) -> f64>) -> Result<(u32, u32)> {
        let out = self.fsm.outgoing(self.state);
        let pick = match &mut self.kind {
            DriverKind::Rng(rng) => rng.gen_range(0..out.len()),
            DriverKind::Replay { labels, pos } => {
                let z = *labels.get(*pos).ok_or_else(|| {
                    Error::Invalid("replay noise exhausted before the horizon".into())
                })?;
                *pos += 1;
                out.iter()
                    .position(|e| e.z == z)
                    .ok_or_else(|| Error::Invalid(format!("replay label {z} not available")))?
            }
            DriverKind::Greedy { scores } => {
                let key = |e: &crate::fsm::Edge| match prefer {
                    Some(f) => (f(e.z), e.z),
                    None => (scores[e.to], e.z),
                };
                (0..out.len())
                    .max_by(|&x, &y| {
                        let (sx, zx) = key(&out[x]);
                        let (sy, zy) = key(&out[y]);
                        sx.total_cmp(&sy).then(zx.cmp(&zy))
                    })
                    .unwrap()
            }
        };
        let edge = out[pick];
        self.state = edge.to;
        Ok(((input + edge.z) % self.fsm.q, edge.z))
    }
}

fn walk_scores(fsm: &NoiseFsm, horizon: usize) -> Result<Vec<f64>> {
    use num_traits::ToPrimitive;
    let mut scores = Vec::with_capacity(fsm.num_states());
    for s in 0..fsm.num_states() {
        let count = spectral::count_walks(fsm, crate::fsm::Start::State(s), horizon.max(1));
        scores.push(count.to_f64().unwrap_or(f64::MAX));
    }
    Ok(scores)
}

struct Disturbance {
    kind: DisturbanceKind,
    d: f64,
}

enum DisturbanceKind {
    Rng(Box<ChaCha20Rng>),
    /// Pushes in the direction of the supplied error signal.
    Aligned,
    Zero,
}

impl Disturbance {
    fn new(policy: &SimPolicy, d: f64) -> Self {
        let kind = match policy {
            SimPolicy::Random { seed } => {
                DisturbanceKind::Rng(Box::new(ChaCha20Rng::seed_from_u64(
                    seed.wrapping_add(0x9e3779b9),
                )))
            }
            SimPolicy::Greedy => DisturbanceKind::Aligned,
            SimPolicy::Replay { .. } => DisturbanceKind::Zero,
        };
        Disturbance { kind, d }
    }

    fn draw(&mut self, direction: f64) -> f64 {
        if self.d == 0.0 {
            return 0.0;
        }
        match &mut self.kind {
            DisturbanceKind::Rng(rng) => rng.gen_range(-self.d..=self.d),
            DisturbanceKind::Aligned => {
                if direction >= 0.0 {
                    self.d
                } else {
                    -self.d
                }
            }
            DisturbanceKind::Zero => 0.0,
        }
    }
}

fn initial_state(sys: &LtiSystem, policy: &SimPolicy) -> Vec<f64> {
    match policy {
        SimPolicy::Random { seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(0x517cc1b7));
            (0..sys.dim())
                .map(|_| rng.gen_range(-sys.d_x..=sys.d_x))
                .collect()
        }
        _ => vec![0.9 * sys.d_x; sys.dim()],
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub epoch: usize,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub delta: f64,
    pub q_in: u32,
    pub y_out: u32,
    pub z: u32,
    pub s_channel: usize,
    pub u_basic: f64,
    pub u_comm: f64,
    pub decode_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub tau: usize,
    pub delta: f64,
    pub quantizer_index: usize,
    pub decode_ok: bool,
    pub eps_norm: f64,
    /// Innovation norm right after the boundary update.
    pub boundary_error: f64,
    pub state_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub mode: String,
    pub steps: usize,
    pub epochs: usize,
    pub sup_est_error_boundary: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_est_error_intra: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_state_boundary: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_state_intra: Option<f64>,
    pub max_delta: f64,
    pub decode_failures: usize,
    pub signaling_ambiguities: usize,
    pub max_cancellation_residual: f64,
    pub bounds: BoundReport,
    pub within_bounds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimTrace {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    pub summary: SimSummary,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Transmit one quantizer index through the feedback code, stepping the
/// channel via `driver`. `feedback(y, slot)` supplies the channel output to
/// the encoder (directly for estimation, via signaling recovery for
/// stabilization); slots past the code length carry input 0. Returns the
/// per-slot (input, output, noise) transcript.
fn transmit_index(
    spec: &FeedbackCodeSpec,
    index: usize,
    driver: &mut ChannelDriver,
    r: usize,
    mut on_slot: impl FnMut(usize, u32, &mut ChannelDriver) -> Result<(u32, u32)>,
) -> Result<Vec<(u32, u32, u32)>> {
    let q = spec.channel.q;
    let k0 = spec.stages[0].length;
    let mut transcript: Vec<(u32, u32, u32)> = Vec::with_capacity(r);
    let raw_inputs = codes::index_to_word(index, q, k0);
    let mut tail: Vec<u32> = Vec::new();
    for slot in 0..r {
        let input = if slot < k0 {
            raw_inputs[slot]
        } else if slot < spec.total_length {
            if slot == k0 {
                // stage boundary: the encoder now knows the raw outputs and
                // recovers the raw noise to pick the parity codeword
                let raw_noise: Vec<u32> = transcript[..k0]
                    .iter()
                    .map(|(x, y, _)| (y + q - x) % q)
                    .collect();
                let idx = spec.noise_enumerations[0]
                    .binary_search(&raw_noise)
                    .map_err(|_| {
                        Error::Contract("observed noise missing from the enumeration".into())
                    })?;
                tail = spec.base_code.as_ref().unwrap().codewords[idx].clone();
            }
            tail[slot - k0]
        } else {
            0
        };
        let (y, z) = on_slot(slot, input, driver)?;
        transcript.push((input, y, z));
    }
    Ok(transcript)
}

pub fn run_estimation(
    sys: &LtiSystem,
    fsm: &NoiseFsm,
    cfg: &CoderConfig,
    policy: &SimPolicy,
    horizon: usize,
) -> Result<SimTrace> {
    check_estimation_feasible(sys, fsm)?;
    let r = cfg.r;
    let code_len = cfg.feedback_code.total_length;
    if code_len > r {
        return Err(Error::Invalid("feedback code longer than the epoch".into()));
    }
    let num_epochs = horizon / r;
    if num_epochs == 0 {
        return Err(Error::Invalid("horizon shorter than one epoch".into()));
    }
    let bounds = theoretical_bounds(sys, cfg);
    let mut driver = ChannelDriver::new(fsm, policy, r)?;
    let mut disturbance = Disturbance::new(policy, sys.d);
    let mut x = initial_state(sys, policy);
    // The estimation error is propagated directly: for an uncontrolled
    // unstable plant |x| grows like |a|^t and forming x - xhat from two
    // huge floats would destroy the error long before it matters (and
    // overflow f64 on long horizons). The raw state is carried only for
    // the trace and may saturate to infinity there.
    let mut err = x.clone();
    let mut delta = cfg.delta_1;

    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut decode_failures = 0usize;
    let mut sup_boundary: f64 = 0.0;
    let mut sup_intra: f64 = 0.0;
    let mut max_delta: f64 = 0.0;

    for epoch in 0..num_epochs {
        let tau = epoch * r + 1;
        max_delta = max_delta.max(delta);
        let eps: Vec<f64> = err.iter().map(|&e| e / delta).collect();
        let (index, _) = cfg.quantizer.quantize(&eps)?;

        // (input, output, noise, state, prediction, channel state) per slot
        type SlotRecord = (u32, u32, u32, Vec<f64>, Vec<f64>, usize);
        let mut slot_records: Vec<SlotRecord> = Vec::new();
        let transcript = transmit_index(&cfg.feedback_code, index, &mut driver, r, |_, input, drv| {
            let (y, z) = drv.step(input, None)?;
            // plant and error advance one step per slot (same disturbance)
            for i in 0..sys.dim() {
                let v = disturbance.draw(err[i]);
                x[i] = sys.a[i] * x[i] + v;
                err[i] = sys.a[i] * err[i] + v;
            }
            let xhat_t: Vec<f64> = x.iter().zip(&err).map(|(xs, e)| xs - e).collect();
            slot_records.push((input, y, z, x.clone(), xhat_t, drv.state));
            Ok((y, z))
        })?;

        // decoder sees only the coded slots
        let outputs: Vec<u32> = transcript[..code_len].iter().map(|&(_, y, _)| y).collect();
        let decoded = codes::decode(&cfg.feedback_code, fsm, &outputs);
        let decode_ok = matches!(decoded, Ok(d) if d == index);
        if !decode_ok {
            decode_failures += 1;
        }
        let centroid = cfg.quantizer.centroid_of(index)?;
        for (slot, (input, y, z, xs, xh, st)) in slot_records.iter().enumerate() {
            steps.push(StepRecord {
                t: tau + slot,
                epoch,
                x: xs.clone(),
                xhat: xh.clone(),
                delta,
                q_in: *input,
                y_out: *y,
                z: *z,
                s_channel: *st,
                u_basic: 0.0,
                u_comm: 0.0,
                decode_ok: if slot == r - 1 { Some(decode_ok) } else { None },
            });
        }
        // worst error inside this epoch: the quantizer correction only
        // lands at the boundary, so the intra-epoch error is the stepped
        // epoch-start error, maximal just before the boundary
        sup_intra = sup_intra.max(inf_norm(&err));
        // boundary update shared by encoder and decoder: the prediction
        // absorbs a^r * delta * centroid, i.e. the error loses it
        for i in 0..sys.dim() {
            err[i] -= sys.a[i].powi(r as i32) * delta * centroid[i];
        }
        delta = delta * cfg.rho_delta + cfg.delta_star;
        let boundary_err = inf_norm(&err);
        sup_boundary = sup_boundary.max(boundary_err);
        epochs.push(EpochRecord {
            epoch,
            tau,
            delta,
            quantizer_index: index,
            decode_ok,
            eps_norm: inf_norm(&eps),
            boundary_error: boundary_err,
            state_norm: inf_norm(&x),
        });
    }

    let within = decode_failures == 0
        && sup_boundary <= bounds.est_error_ceiling
        && sup_intra <= bounds.est_intra_ceiling
        && max_delta <= bounds.delta_ceiling;
    let summary = SimSummary {
        mode: "estimation".into(),
        steps: steps.len(),
        epochs: epochs.len(),
        sup_est_error_boundary: sup_boundary,
        sup_est_error_intra: Some(sup_intra),
        sup_state_boundary: None,
        sup_state_intra: None,
        max_delta,
        decode_failures,
        signaling_ambiguities: 0,
        max_cancellation_residual: 0.0,
        bounds,
        within_bounds: within,
    };
    Ok(SimTrace {
        steps,
        epochs,
        summary,
    })
}

pub fn run_stabilization(
    sys: &LtiSystem,
    fsm: &NoiseFsm,
    cfg: &CoderConfig,
    policy: &SimPolicy,
    horizon: usize,
) -> Result<SimTrace> {
    check_stabilization_feasible(sys, fsm)?;
    if sys.dim() != 1 {
        return Err(Error::Invalid(
            "the stabilization loop is implemented for scalar plants".into(),
        ));
    }
    let offsets = cfg
        .signaling
        .as_ref()
        .ok_or_else(|| Error::Invalid("config lacks a signaling alphabet".into()))?;
    let r = cfg.r;
    let n_x = sys.dim();
    let code_len = cfg.feedback_code.total_length;
    if code_len > r - n_x {
        return Err(Error::Invalid(
            "feedback code does not leave room for the cancellation slots".into(),
        ));
    }
    let num_epochs = horizon / r;
    if num_epochs == 0 {
        return Err(Error::Invalid("horizon shorter than one epoch".into()));
    }
    let a = sys.a[0];
    let b = sys.b[0];
    let bounds = theoretical_bounds(sys, cfg);
    let mut driver = ChannelDriver::new(fsm, policy, r)?;
    let mut disturbance = Disturbance::new(policy, sys.d);
    let mut x = initial_state(sys, policy)[0];
    // prediction of x at the current epoch start, shared by both ends
    let mut xhat = 0.0f64;
    let mut delta = cfg.delta_1;
    // basic control program for the current epoch (one value per slot)
    let mut u_basic_epoch = vec![0.0f64; r];

    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut decode_failures = 0usize;
    let mut ambiguities = 0usize;
    let mut max_residual: f64 = 0.0;
    let mut sup_state_boundary: f64 = 0.0;
    let mut sup_state_intra: f64 = 0.0;
    let mut sup_est_boundary: f64 = 0.0;
    let mut max_delta: f64 = 0.0;

    for epoch in 0..num_epochs {
        let tau = epoch * r + 1;
        max_delta = max_delta.max(delta);
        sup_state_boundary = sup_state_boundary.max(x.abs());
        let eps = vec![(x - xhat) / delta];
        let (index, _) = cfg.quantizer.quantize(&eps)?;
        let eps_norm = inf_norm(&eps);

        // the encoder reconstructs y from the plant transition each
        // signaled slot; it needs the raw-stage outputs before the parity
        // stage starts, which recovery provides with unit delay
        let mut recovered: Vec<u32> = Vec::with_capacity(code_len);
        let mut comm_hist: Vec<f64> = Vec::with_capacity(r);
        let mut slot_records: Vec<(u32, u32, u32, f64, f64, f64, usize)> = Vec::new();
        let q = fsm.q;
        let transcript = {
            let k0 = cfg.feedback_code.stages[0].length;
            let mut tail: Vec<u32> = Vec::new();
            let mut transcript: Vec<(u32, u32, u32)> = Vec::with_capacity(r);
            for slot in 0..r {
                let input = if slot < k0 {
                    codes::index_to_word(index, q, k0)[slot]
                } else if slot < code_len {
                    if slot == k0 {
                        let raw_noise: Vec<u32> = transcript[..k0]
                            .iter()
                            .zip(&recovered)
                            .map(|(&(xin, _, _), &y)| (y + q - xin) % q)
                            .collect();
                        let idx = cfg.feedback_code.noise_enumerations[0]
                            .binary_search(&raw_noise)
                            .map_err(|_| {
                                Error::Contract(
                                    "recovered noise missing from the enumeration".into(),
                                )
                            })?;
                        tail = cfg.feedback_code.base_code.as_ref().unwrap().codewords[idx]
                            .clone();
                    }
                    tail[slot - k0]
                } else {
                    0
                };
                let u_b = u_basic_epoch[slot];
                let (y, z) = if slot < code_len {
                    // adversary sees how each label would steer the plant
                    let score = |zc: u32| {
                        let yc = (input + zc) % q;
                        (a * x + b * (u_b + offsets[yc as usize])).abs()
                    };
                    driver.step(input, Some(&score))?
                } else {
                    driver.step(input, None)?
                };
                // controller action for this slot
                let u_c = if slot < code_len {
                    offsets[y as usize]
                } else if slot >= r - n_x {
                    // canceling tail: wipe the accumulated signaling influence
                    let influence: f64 = comm_hist
                        .iter()
                        .enumerate()
                        .map(|(s, &u)| a.powi((r - 1 - s) as i32) * b * u)
                        .sum();
                    -influence / b
                } else {
                    0.0
                };
                comm_hist.push(u_c);
                let x_prev = x;
                x = a * x + b * (u_b + u_c) + disturbance.draw(x);
                sup_state_intra = sup_state_intra.max(x.abs());
                if slot < code_len {
                    // encoder-side virtual feedback
                    match recover_y(sys, x, x_prev, u_b, offsets) {
                        Ok(nu) => {
                            if nu as u32 != y {
                                ambiguities += 1;
                            }
                            recovered.push(nu as u32);
                        }
                        Err(_) => {
                            ambiguities += 1;
                            recovered.push(y);
                        }
                    }
                }
                slot_records.push((input, y, z, u_b, u_c, x, driver.state));
                transcript.push((input, y, z));
            }
            transcript
        };
        // the communication controls must sum to nothing at the boundary
        let residual: f64 = comm_hist
            .iter()
            .enumerate()
            .map(|(s, &u)| a.powi((r - 1 - s) as i32) * b * u)
            .sum();
        let scale = comm_hist
            .iter()
            .enumerate()
            .map(|(s, &u)| (a.powi((r - 1 - s) as i32) * b * u).abs())
            .sum::<f64>()
            .max(1.0);
        max_residual = max_residual.max(residual.abs() / scale);

        let outputs: Vec<u32> = transcript[..code_len].iter().map(|&(_, y, _)| y).collect();
        let decoded = codes::decode(&cfg.feedback_code, fsm, &outputs);
        let decode_ok = matches!(decoded, Ok(d) if d == index);
        if !decode_ok {
            decode_failures += 1;
        }

        for (slot, (input, y, z, u_b, u_c, xs, st)) in slot_records.iter().enumerate() {
            steps.push(StepRecord {
                t: tau + slot,
                epoch,
                x: vec![*xs],
                xhat: vec![xhat],
                delta,
                q_in: *input,
                y_out: *y,
                z: *z,
                s_channel: *st,
                u_basic: *u_b,
                u_comm: *u_c,
                decode_ok: if slot == r - 1 { Some(decode_ok) } else { None },
            });
        }

        // boundary update: refresh the shared prediction, plan the next
        // epoch's basic control as a deadbeat on it
        let centroid = cfg.quantizer.centroid_of(index)?[0];
        let control_sum: f64 = u_basic_epoch
            .iter()
            .enumerate()
            .map(|(s, &u)| a.powi((r - 1 - s) as i32) * b * u)
            .sum();
        xhat = a.powi(r as i32) * (xhat + delta * centroid) + control_sum;
        delta = delta * cfg.rho_delta + cfg.delta_star;
        u_basic_epoch = vec![0.0; r];
        u_basic_epoch[0] = -a / b * xhat;

        let boundary_err = (x - xhat).abs();
        sup_est_boundary = sup_est_boundary.max(boundary_err);
        epochs.push(EpochRecord {
            epoch,
            tau,
            delta,
            quantizer_index: index,
            decode_ok,
            eps_norm,
            boundary_error: boundary_err,
            state_norm: x.abs(),
        });
    }

    let within = decode_failures == 0
        && ambiguities == 0
        && max_residual < 1e-9
        && sup_state_boundary <= bounds.state_boundary_ceiling
        && sup_state_intra <= bounds.state_intra_ceiling
        && max_delta <= bounds.delta_ceiling;
    let summary = SimSummary {
        mode: "stabilization".into(),
        steps: steps.len(),
        epochs: epochs.len(),
        sup_est_error_boundary: sup_est_boundary,
        sup_est_error_intra: None,
        sup_state_boundary: Some(sup_state_boundary),
        sup_state_intra: Some(sup_state_intra),
        max_delta,
        decode_failures,
        signaling_ambiguities: ambiguities,
        max_cancellation_residual: max_residual,
        bounds,
        within_bounds: within,
    };
    Ok(SimTrace {
        steps,
        epochs,
        summary,
    })
}

/// Branch the first epoch over every admissible noise walk from every
/// initial state and require exact decoding in each branch.
pub fn exhaustive_epoch_check(sys: &LtiSystem, fsm: &NoiseFsm, cfg: &CoderConfig) -> Result<bool> {
    let x1 = vec![0.9 * sys.d_x; sys.dim()];
    let eps: Vec<f64> = x1.iter().map(|&v| v / cfg.delta_1).collect();
    let (index, _) = cfg.quantizer.quantize(&eps)?;
    let n = cfg.feedback_code.total_length;
    for s in 0..fsm.num_states() {
        let walks = fsm.enumerate_noise_sequences(
            crate::fsm::Start::State(s),
            n,
            crate::fsm::ENUM_GUARD_DEFAULT,
        )?;
        for labels in &walks {
            let (_, outputs) = codes::encode_with_noise(&cfg.feedback_code, index, labels)?;
            match codes::decode(&cfg.feedback_code, fsm, &outputs) {
                Ok(d) if d == index => {}
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}
