//! Capacity reports: feedback capacity, the no-feedback lower bound,
//! memoryless closed forms, and stochastic-capacity cross-checks.

use serde::{Deserialize, Serialize};

use crate::coupled::{coupled_graph, zero_capacity_test};
use crate::fsm::NoiseFsm;
use crate::spectral::topological_entropy;
use crate::{Error, Result};

/// Everything the analyzer can say about one channel. All rates in bits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityReport {
    pub q: u32,
    /// log2 of the Perron value of the noise graph.
    pub h_ch: f64,
    /// Zero-error feedback capacity: 0 when the zero test holds, else
    /// log2(q) - h_ch.
    pub c0f: f64,
    /// log2(q) - 2*h_ch; may be negative, reported verbatim.
    pub c0_lower_raw: f64,
    /// The raw lower bound clamped at zero.
    pub c0_lower: f64,
    pub is_zero: bool,
    /// Shortest unwalkable difference sequence when capacity is nonzero.
    pub witness: Option<Vec<u32>>,
    /// log2(q) - h_ch - h_lin when a plant entropy was supplied.
    pub margin: Option<f64>,
    /// Set when the zero test says nonzero but log2(q) - h_ch vanishes
    /// numerically; c0f is then reported as 0 rather than a tiny residue.
    pub boundary: bool,
}

const BOUNDARY_EPS: f64 = 1e-9;

pub fn analyze(fsm: &NoiseFsm, h_lin: Option<f64>) -> Result<CapacityReport> {
    let h_ch = topological_entropy(fsm)?;
    let log_q = f64::from(fsm.q).log2();
    let zt = zero_capacity_test(&coupled_graph(fsm)?);
    let raw_c0f = log_q - h_ch;
    let boundary = !zt.is_zero && raw_c0f.abs() <= BOUNDARY_EPS;
    let c0f = if zt.is_zero || boundary { 0.0 } else { raw_c0f };
    let c0_lower_raw = log_q - 2.0 * h_ch;
    let c0_lower = if zt.is_zero {
        0.0
    } else {
        c0_lower_raw.max(0.0)
    };
    Ok(CapacityReport {
        q: fsm.q,
        h_ch,
        c0f,
        c0_lower_raw,
        c0_lower,
        is_zero: zt.is_zero,
        witness: zt.witness,
        margin: h_lin.map(|h| log_q - h_ch - h),
        boundary,
    })
}

/// log2(q) - h_ch - h_lin; positive means bounded stabilization is
/// achievable, negative means provably not.
pub fn small_entropy_margin(h_lin: f64, fsm: &NoiseFsm) -> Result<f64> {
    Ok(f64::from(fsm.q).log2() - topological_entropy(fsm)? - h_lin)
}

/// Closed-form feedback capacity of the memoryless channel whose noise is
/// {0, ..., z_size-1}: log2(x_size / z_size) whenever nonzero.
pub fn memoryless_c0f(x_size: u32, z_size: u32) -> Result<f64> {
    if x_size < 2 || z_size == 0 || z_size > x_size {
        return Err(Error::Invalid(format!(
            "memoryless sizes ({x_size}, {z_size}) out of range"
        )));
    }
    // differences span 2*z_size - 1 residues, so capacity is zero iff they
    // cover the whole alphabet
    if 2 * z_size > x_size {
        return Ok(0.0);
    }
    Ok((f64::from(x_size) / f64::from(z_size)).log2())
}

#[derive(Debug, Clone, Serialize)]
pub struct MemorylessLpResult {
    pub value: f64,
    /// Conservative over-estimate of how far below the true optimum the
    /// grid point may sit.
    pub grid_error_bound: f64,
    pub argmax: Vec<f64>,
}

/// Brute-force check of the closed form: maximize
/// -log2 max_y sum_z P(y - z) over a simplex grid of input distributions.
pub fn memoryless_lp_oracle(x_size: u32, z_size: u32, grid: u32) -> Result<MemorylessLpResult> {
    if x_size < 2 || z_size == 0 || z_size > x_size {
        return Err(Error::Invalid(format!(
            "memoryless sizes ({x_size}, {z_size}) out of range"
        )));
    }
    if grid < 10 {
        return Err(Error::Invalid("grid must have at least 10 divisions".into()));
    }
    if x_size > 7 {
        return Err(Error::Guard(format!(
            "lp oracle limited to alphabets of size 7, got {x_size}"
        )));
    }
    let x = x_size as usize;
    let z = z_size as usize;
    let mut counts = vec![0u32; x];
    let mut best_obj = f64::NEG_INFINITY;
    let mut best = vec![0.0; x];
    // iterate all compositions of `grid` into x parts
    fn rec(
        counts: &mut Vec<u32>,
        idx: usize,
        remaining: u32,
        grid: u32,
        z: usize,
        best_obj: &mut f64,
        best: &mut Vec<f64>,
    ) {
        let x = counts.len();
        if idx == x - 1 {
            counts[idx] = remaining;
            // worst output mass: max over y of the window sum of z cells
            let mut worst = 0u32;
            for y in 0..x {
                let mut s = 0u32;
                for d in 0..z {
                    s += counts[(y + x - d % x) % x];
                }
                worst = worst.max(s);
            }
            let obj = -(f64::from(worst) / f64::from(grid)).log2();
            if obj > *best_obj {
                *best_obj = obj;
                for (b, &c) in best.iter_mut().zip(counts.iter()) {
                    *b = f64::from(c) / f64::from(grid);
                }
            }
            return;
        }
        for c in 0..=remaining {
            counts[idx] = c;
            rec(counts, idx + 1, remaining - c, grid, z, best_obj, best);
        }
    }
    rec(&mut counts, 0, grid, grid, z, &mut best_obj, &mut best);
    Ok(MemorylessLpResult {
        value: best_obj,
        grid_error_bound: (1.0 + f64::from(x_size) / f64::from(grid)).log2(),
        argmax: best,
    })
}

pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Ordinary feedback capacity of the two-state channel under a Markov noise
/// model with error probability p out of the quiet state.
pub fn stochastic_cf_two_state(q: u32, p: f64) -> Result<f64> {
    check_prob("p", p)?;
    Ok(f64::from(q).log2() - binary_entropy(p) / (1.0 + p))
}

/// Ordinary feedback capacity of the three-state channel (runs of at most
/// two errors) under a Markov model: entropy rate of the chain with
/// transition probabilities p (enter error) and r (extend the run).
pub fn stochastic_cf_three_state(q: u32, p: f64, r: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("r", r)?;
    let denom = 1.0 + p + r * p;
    Ok(f64::from(q).log2() - (binary_entropy(p) + p * binary_entropy(r)) / denom)
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::Invalid(format!("{name} must lie in (0,1), got {v}")));
    }
    Ok(())
}

const GOLDEN_INV: f64 = 0.618_033_988_749_894_9;

fn golden_section_min(mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> f64) -> (f64, f64) {
    let mut c = hi - GOLDEN_INV * (hi - lo);
    let mut d = lo + GOLDEN_INV * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..120 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - GOLDEN_INV * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + GOLDEN_INV * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Grid scan plus golden-section refinement of the two-state C_f over p.
pub fn minimize_cf_two_state(q: u32) -> f64 {
    let f = |p: f64| f64::from(q).log2() - binary_entropy(p) / (1.0 + p);
    let mut best_p = 0.5;
    let mut best = f(best_p);
    let mut p = 0.001;
    while p < 0.999 {
        let v = f(p);
        if v < best {
            best = v;
            best_p = p;
        }
        p += 0.001;
    }
    let (_, v) = golden_section_min((best_p - 0.002).max(1e-9), (best_p + 0.002).min(1.0 - 1e-9), &f);
    v.min(best)
}

/// Grid scan plus alternating golden-section refinement of the three-state
/// C_f over (p, r).
pub fn minimize_cf_three_state(q: u32) -> f64 {
    let f = |p: f64, r: f64| {
        f64::from(q).log2() - (binary_entropy(p) + p * binary_entropy(r)) / (1.0 + p + r * p)
    };
    let mut best = (0.5, 0.5, f(0.5, 0.5));
    let steps = 200;
    for i in 1..steps {
        let p = f64::from(i) / f64::from(steps);
        for j in 1..steps {
            let r = f64::from(j) / f64::from(steps);
            let v = f(p, r);
            if v < best.2 {
                best = (p, r, v);
            }
        }
    }
    let (mut p, mut r, mut v) = best;
    for _ in 0..6 {
        let (np, _) = golden_section_min(
            (p - 0.01).max(1e-9),
            (p + 0.01).min(1.0 - 1e-9),
            &|x| f(x, r),
        );
        p = np;
        let (nr, nv) = golden_section_min(
            (r - 0.01).max(1e-9),
            (r + 0.01).min(1.0 - 1e-9),
            &|x| f(p, x),
        );
        r = nr;
        v = nv;
    }
    v.min(best.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configs;
    use crate::fsm::NoiseFsm;

    fn parse(json: &str) -> NoiseFsm {
        NoiseFsm::parse(json).unwrap()
    }

    #[test]
    fn ex2_q3_feedback_capacity() {
        let rep = analyze(&parse(configs::EX2_THREE_STATE), None).unwrap();
        assert!(!rep.is_zero);
        assert!((rep.c0f - 0.7058).abs() < 5e-4, "c0f = {}", rep.c0f);
    }

    #[test]
    fn sliding_window_numbers() {
        let rep = analyze(&parse(configs::SLIDING_WINDOW_3_1), None).unwrap();
        assert!(!rep.is_zero);
        assert!((rep.c0f - 0.449).abs() < 5e-4, "c0f = {}", rep.c0f);
        assert!(
            (rep.c0_lower_raw - (-0.103)).abs() < 5e-4,
            "raw = {}",
            rep.c0_lower_raw
        );
        assert_eq!(rep.c0_lower, 0.0);
    }

    #[test]
    fn gilbert_elliott_closed_form() {
        let rep = analyze(&parse(configs::GILBERT_ELLIOTT_Q5), None).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let expected = 5f64.log2() - phi.log2();
        assert!((rep.c0f - expected).abs() < 1e-6, "c0f = {}", rep.c0f);
        assert!((expected - 1.627_686_2).abs() < 1e-6);
    }

    #[test]
    fn fig3_q2_zero() {
        let rep = analyze(&parse(configs::FIG3_NO_CONSECUTIVE), None).unwrap();
        assert!(rep.is_zero);
        assert_eq!(rep.c0f, 0.0);
        assert_eq!(rep.c0_lower, 0.0);
        assert!(rep.witness.is_none());
        assert!(!rep.boundary);
    }

    #[test]
    fn fig3_q3_witness_and_capacity() {
        let fsm = parse(configs::FIG3_NO_CONSECUTIVE).with_alphabet(3).unwrap();
        let rep = analyze(&fsm, None).unwrap();
        assert!(!rep.is_zero);
        assert_eq!(rep.witness, Some(vec![1, 1]));
        let expected = 3f64.log2() - ((1.0 + 5f64.sqrt()) / 2.0).log2();
        assert!((rep.c0f - expected).abs() < 1e-9);
    }

    #[test]
    fn noiseless_full_rate() {
        let rep = analyze(&parse(configs::NOISELESS), None).unwrap();
        assert!(!rep.is_zero);
        assert_eq!(rep.c0f, 1.0);
        assert_eq!(rep.c0_lower, 1.0);
    }

    #[test]
    fn lower_bound_invariants() {
        for doc in configs::ALL {
            let rep = analyze(&parse(doc.json), None).unwrap();
            assert!(rep.c0_lower <= rep.c0f + 1e-12, "{}", doc.name);
            assert!(
                (rep.c0_lower_raw - (f64::from(rep.q).log2() - 2.0 * rep.h_ch)).abs() < 1e-12
            );
            if rep.c0_lower_raw > 0.0 {
                assert!(!rep.is_zero, "{}", doc.name);
            }
            assert!(rep.h_ch >= -1e-12 && rep.h_ch <= f64::from(rep.q).log2() + 1e-12);
        }
    }

    #[test]
    fn margin_values() {
        let fig3_q3 = parse(configs::FIG3_NO_CONSECUTIVE).with_alphabet(3).unwrap();
        let m = small_entropy_margin(1.5f64.log2(), &fig3_q3).unwrap();
        assert!((m - 0.306).abs() < 1e-3, "m = {m}");
        let sw = parse(configs::SLIDING_WINDOW_3_1);
        let m2 = small_entropy_margin(1.0, &sw).unwrap();
        assert!((m2 - (-0.551)).abs() < 5e-4, "m2 = {m2}");
        // with no plant entropy the margin equals c0f on nonzero channels
        let rep = analyze(&fig3_q3, Some(0.0)).unwrap();
        assert!((rep.margin.unwrap() - rep.c0f).abs() < 1e-12);
    }

    #[test]
    fn memoryless_closed_form() {
        assert!((memoryless_c0f(5, 2).unwrap() - 1.321_928_1).abs() < 1e-6);
        assert!((memoryless_c0f(7, 2).unwrap() - 3.5f64.log2()).abs() < 1e-12);
        assert_eq!(memoryless_c0f(4, 4).unwrap(), 0.0);
        assert_eq!(memoryless_c0f(3, 2).unwrap(), 0.0);
        assert_eq!(memoryless_c0f(4, 2).unwrap(), 1.0);
        assert!(memoryless_c0f(1, 1).is_err());
        assert!(memoryless_c0f(3, 4).is_err());
    }

    #[test]
    fn memoryless_matches_analyzer() {
        for (x, z) in [(5u32, 2u32), (4, 2), (7, 3), (3, 2), (2, 1)] {
            let fsm = NoiseFsm::memoryless(x, z, "m").unwrap();
            let rep = analyze(&fsm, None).unwrap();
            let cf = memoryless_c0f(x, z).unwrap();
            assert!((rep.c0f - cf).abs() < 1e-9, "({x},{z})");
        }
    }

    #[test]
    fn lp_oracle_pentagon() {
        let res = memoryless_lp_oracle(5, 2, 50).unwrap();
        let closed = memoryless_c0f(5, 2).unwrap();
        assert!(res.value <= closed + 1e-12);
        assert!((res.value - closed).abs() < 1e-2, "value = {}", res.value);
        // grid divisible by 5 hits the uniform optimum exactly
        assert!((res.value - closed).abs() < 1e-12);
    }

    #[test]
    fn lp_oracle_noiseless_and_half() {
        let res = memoryless_lp_oracle(3, 1, 12).unwrap();
        assert!((res.value - 3f64.log2()).abs() < 1e-12);
        let res = memoryless_lp_oracle(4, 2, 50).unwrap();
        assert!((res.value - 1.0).abs() < 1e-2);
    }

    #[test]
    fn lp_oracle_guards() {
        assert!(matches!(
            memoryless_lp_oracle(8, 2, 50),
            Err(crate::Error::Guard(_))
        ));
        assert!(memoryless_lp_oracle(5, 2, 5).is_err());
    }

    #[test]
    fn stochastic_formula_spot_values() {
        // q=2, p=0.5: 1 - 1/1.5
        let v = stochastic_cf_two_state(2, 0.5).unwrap();
        assert!((v - (1.0 - 1.0 / 1.5)).abs() < 1e-12);
        assert!(stochastic_cf_two_state(2, 0.0).is_err());
        assert!(stochastic_cf_three_state(3, 0.5, 1.0).is_err());
    }

    #[test]
    fn variational_match_q3() {
        let fig3_q3 = parse(configs::FIG3_NO_CONSECUTIVE).with_alphabet(3).unwrap();
        let c0f = analyze(&fig3_q3, None).unwrap().c0f;
        let inf = minimize_cf_two_state(3);
        assert!((inf - c0f).abs() < 1e-3, "inf = {inf}, c0f = {c0f}");

        let ex2_q3 = parse(configs::EX2_THREE_STATE);
        let c0f2 = analyze(&ex2_q3, None).unwrap().c0f;
        let inf2 = minimize_cf_three_state(3);
        assert!((inf2 - c0f2).abs() < 1e-3, "inf = {inf2}, c0f = {c0f2}");
    }

    #[test]
    fn variational_fails_q2() {
        // the stochastic infimum stays strictly positive while the
        // zero-error feedback capacity is 0
        let inf1 = minimize_cf_two_state(2);
        assert!(inf1 > 0.1, "inf = {inf1}");
        let inf2 = minimize_cf_three_state(2);
        assert!(inf2 > 0.1, "inf = {inf2}");
        let fig3 = parse(configs::FIG3_NO_CONSECUTIVE);
        assert_eq!(analyze(&fig3, None).unwrap().c0f, 0.0);
        let ex2_q2 = parse(configs::EX2_THREE_STATE).with_alphabet(2).unwrap();
        assert_eq!(analyze(&ex2_q2, None).unwrap().c0f, 0.0);
    }

    #[test]
    fn two_state_infimum_is_golden_entropy() {
        let inf = minimize_cf_two_state(3);
        let expected = 3f64.log2() - ((1.0 + 5f64.sqrt()) / 2.0).log2();
        assert!((inf - expected).abs() < 1e-6, "inf = {inf}");
    }
}
