//! State estimation of an unstable scalar plant over a noisy channel.
//!
//! x_{t+1} = 1.5 x_t + v_t, |v| <= 0.01, estimated over the q=3
//! no-consecutive-errors channel. The estimation error stays uniformly
//! bounded even though the state itself blows up.

use zec::control::{estimation_config, run_estimation, LtiSystem, SimPolicy};
use zec::{configs, NoiseFsm};

fn main() -> Result<(), zec::Error> {
    let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE)?.with_alphabet(3)?;
    let sys = LtiSystem::scalar(1.5, 1.0, 1.0, 0.01)?;
    let cfg = estimation_config(&sys, &fsm, 9, 0.5)?;
    println!(
        "quantizer levels {:?}, feedback code length {}, per-epoch contraction {:.4}",
        cfg.quantizer.levels, cfg.feedback_code.total_length, cfg.rho_delta
    );

    let trace = run_estimation(&sys, &fsm, &cfg, &SimPolicy::Random { seed: 1 }, 30 * 9)?;
    for e in trace.epochs.iter().step_by(5) {
        println!(
            "epoch {:>2}: |x| = {:>12.2}  est err = {:.4}  delta = {:.4}  decode ok: {}",
            e.epoch, e.state_norm, e.boundary_error, e.delta, e.decode_ok
        );
    }
    let s = &trace.summary;
    println!(
        "\nsup boundary error {:.4} <= ceiling {:.4}; decode failures: {}",
        s.sup_est_error_boundary, s.bounds.est_error_ceiling, s.decode_failures
    );
    assert!(s.within_bounds);
    Ok(())
}
