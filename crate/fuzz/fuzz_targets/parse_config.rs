#![no_main]

use libfuzzer_sys::fuzz_target;
use lqgame::harness::config::{parse_config, ExperimentConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(exp) = parse_config(text) else { return };
    // Anything accepted must survive a serialise/parse round trip unchanged.
    let doc = ExperimentConfig {
        preset: None,
        experiment: Some(exp.clone()),
        scheme: None,
        seed: None,
        require_convergence: None,
    };
    let text = serde_json::to_string(&doc).expect("experiment serialises");
    assert_eq!(parse_config(&text).expect("round trip parses"), exp);
});
