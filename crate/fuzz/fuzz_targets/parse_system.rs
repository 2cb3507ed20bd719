#![no_main]

use libfuzzer_sys::fuzz_target;
use lqgame::harness::config::{parse_system, SystemSpec};
use lqgame::lq_core::CompactGame;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(sys) = parse_system(text) else { return };
    let game = CompactGame::new(&sys.game);
    assert_eq!(game.horizon(), sys.game.horizon());
    if sys.formulation.is_none() {
        let again = serde_json::to_string(&SystemSpec::from_game(&sys.game)).unwrap();
        assert_eq!(parse_system(&again).expect("round trip parses").game, sys.game);
    }
});
