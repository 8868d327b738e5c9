//! Closed-loop stabilization over a noisy channel, and the entropy margin
//! that decides when it is possible.
//!
//! The controller has no dedicated feedback link: it echoes each received
//! channel symbol back to the encoder through tiny control offsets that the
//! encoder reads off the plant's own transitions, then cancels them before
//! the epoch boundary.

use zec::control::{run_stabilization, stabilization_config, LtiSystem, SimPolicy};
use zec::{configs, Error, NoiseFsm};

fn main() -> Result<(), Error> {
    let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE)?.with_alphabet(3)?;
    let sys = LtiSystem::scalar(1.5, 1.0, 1.0, 0.01)?;
    let cfg = stabilization_config(&sys, &fsm, 9, 0.5)?;

    for policy in [SimPolicy::Random { seed: 11 }, SimPolicy::Greedy] {
        let trace = run_stabilization(&sys, &fsm, &cfg, &policy, 60 * 9)?;
        let s = &trace.summary;
        println!(
            "{:?}: sup |x| = {:.2} (ceiling {:.2}), decode failures {}, \
             signaling ambiguities {}, cancellation residual {:.1e}",
            policy,
            s.sup_state_intra.unwrap(),
            s.bounds.state_intra_ceiling,
            s.decode_failures,
            s.signaling_ambiguities,
            s.max_cancellation_residual
        );
        assert!(s.within_bounds);
    }

    // a=2 needs 1 bit per step, but the sliding-window channel only offers
    // c0f = 0.449 — the library refuses rather than pretending
    let fast = LtiSystem::scalar(2.0, 1.0, 1.0, 0.01)?;
    let sw = NoiseFsm::parse(configs::SLIDING_WINDOW_3_1)?;
    match stabilization_config(&fast, &sw, 9, 0.5) {
        Err(Error::Refusal(msg)) => println!("\nrefused as expected: {msg}"),
        other => panic!("expected a refusal, got {other:?}"),
    }
    Ok(())
}
