//! Zero-error block codes from the confusability graph.

use zec::codes::{search_zero_error_code, verify_zero_error_code, SearchMode};
use zec::{configs, NoiseFsm};

fn main() -> Result<(), zec::Error> {
    // the pentagon: 5 codewords at blocklength 2 (the classic sqrt(5)
    // construction found here by exact branch-and-bound)
    let pentagon = NoiseFsm::parse(configs::PENTAGON_MEMORYLESS)?;
    let code = search_zero_error_code(&pentagon, 2, SearchMode::Exact)?;
    println!(
        "pentagon n=2: {} codewords, rate {:.4}",
        code.codewords.len(),
        code.rate()
    );
    for w in &code.codewords {
        println!("  {w:?}");
    }
    assert!(verify_zero_error_code(&pentagon, &code)?);

    // growth of the best code on the sliding-window channel
    let sw = NoiseFsm::parse(configs::SLIDING_WINDOW_3_1)?;
    for n in 1..=6 {
        let code = search_zero_error_code(&sw, n, SearchMode::Exact)?;
        println!(
            "sliding-window n={n}: {:>3} codewords  rate {:.4}",
            code.codewords.len(),
            code.rate()
        );
    }
    Ok(())
}
