//! Capacity report for every bundled channel.
//!
//! ```bash
//! cargo run --example capacity_tour
//! ```

use zec::{capacity, configs, NoiseFsm};

fn main() -> Result<(), zec::Error> {
    println!(
        "{:<24} {:>2} {:>9} {:>9} {:>12} {:>6}",
        "channel", "q", "h_ch", "c0f", "c0_lower_raw", "zero?"
    );
    for c in configs::ALL {
        let fsm = NoiseFsm::parse(c.json)?;
        let rep = capacity::analyze(&fsm, None)?;
        println!(
            "{:<24} {:>2} {:>9.5} {:>9.5} {:>12.5} {:>6}",
            c.name, rep.q, rep.h_ch, rep.c0f, rep.c0_lower_raw, rep.is_zero
        );
    }

    // the same noise machine can have zero or positive capacity depending
    // on the alphabet it rides on
    let base = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE)?;
    for q in [2u32, 3, 4, 5] {
        let rep = capacity::analyze(&base.with_alphabet(q)?, None)?;
        println!("no-consecutive-errors @ q={q}: c0f = {:.5}", rep.c0f);
    }
    Ok(())
}
