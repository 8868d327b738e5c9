//! Bundled channel configs used in tests, docs, and `zec examples`.

/// Two-state machine where no two consecutive errors can happen
/// (the (1,inf)-RLL noise constraint), q=2.
pub const FIG3_NO_CONSECUTIVE: &str = include_str!("../configs/fig3_no_consecutive.json");

/// Three-state machine with no more than two consecutive errors, q=3.
pub const EX2_THREE_STATE: &str = include_str!("../configs/ex2_three_state.json");

/// Memoryless channel with q=5 and noise in {0,1}; its 1-letter
/// confusability graph is the pentagon.
pub const PENTAGON_MEMORYLESS: &str = include_str!("../configs/pentagon_memoryless.json");

/// Two-state burst-noise machine (Gilbert-Elliott structure) with q=5.
pub const GILBERT_ELLIOTT_Q5: &str = include_str!("../configs/gilbert_elliott_q5.json");

/// Binary (3,1) sliding-window channel: at most one error per window of 3.
pub const SLIDING_WINDOW_3_1: &str = include_str!("../configs/sliding_window_3_1.json");

/// Single-state noiseless channel, q=2.
pub const NOISELESS: &str = include_str!("../configs/noiseless.json");

pub struct BundledConfig {
    pub name: &'static str,
    pub file_name: &'static str,
    pub json: &'static str,
}

pub const ALL: &[BundledConfig] = &[
    BundledConfig {
        name: "fig3_no_consecutive",
        file_name: "fig3_no_consecutive.json",
        json: FIG3_NO_CONSECUTIVE,
    },
    BundledConfig {
        name: "ex2_three_state",
        file_name: "ex2_three_state.json",
        json: EX2_THREE_STATE,
    },
    BundledConfig {
        name: "pentagon_memoryless",
        file_name: "pentagon_memoryless.json",
        json: PENTAGON_MEMORYLESS,
    },
    BundledConfig {
        name: "gilbert_elliott_q5",
        file_name: "gilbert_elliott_q5.json",
        json: GILBERT_ELLIOTT_Q5,
    },
    BundledConfig {
        name: "sliding_window_3_1",
        file_name: "sliding_window_3_1.json",
        json: SLIDING_WINDOW_3_1,
    },
    BundledConfig {
        name: "noiseless",
        file_name: "noiseless.json",
        json: NOISELESS,
    },
];
