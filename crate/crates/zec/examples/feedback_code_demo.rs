//! Build a staged zero-error feedback code and push a message through it.
//!
//! Stage 1 sends the message digits raw. The channel corrupts them, but
//! thanks to feedback the encoder knows exactly which admissible noise
//! sequence occurred, and stage 2 communicates that sequence's index with a
//! zero-error base code. The decoder works backwards.

use zec::codes::{build_feedback_code, decode, encode_with_noise, verify_feedback_code};
use zec::fsm::Start;
use zec::{configs, NoiseFsm};

fn main() -> Result<(), zec::Error> {
    let fsm = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE)?.with_alphabet(3)?;

    for messages in [3usize, 81] {
        let spec = build_feedback_code(&fsm, messages)?;
        println!(
            "M={messages}: stages {:?}, total length {}, rate {:.4}",
            spec.stages
                .iter()
                .map(|s| (format!("{:?}", s.kind), s.length))
                .collect::<Vec<_>>(),
            spec.total_length,
            spec.rate()
        );
        assert!(verify_feedback_code(&fsm, &spec)?);
    }

    let spec = build_feedback_code(&fsm, 81)?;
    let message = 57usize;
    // pick some admissible noise walk for the whole transmission
    let noise = fsm
        .enumerate_noise_sequences(Start::State(0), spec.total_length, 1 << 20)?
        .into_iter()
        .nth(7)
        .unwrap();
    let (inputs, outputs) = encode_with_noise(&spec, message, &noise)?;
    let decoded = decode(&spec, &fsm, &outputs)?;
    println!("\nmessage {message} -> inputs {inputs:?}");
    println!("noise   {noise:?}");
    println!("outputs {outputs:?} -> decoded {decoded}");
    assert_eq!(decoded, message);
    Ok(())
}
