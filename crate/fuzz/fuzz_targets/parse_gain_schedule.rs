#![no_main]

use libfuzzer_sys::fuzz_target;
use lqgame::harness::config::parse_gain_schedule;
use lqgame::lq_core::Player;

// First byte: horizon (low 3 bits + 1) and player (bit 3); the rest is JSON.
fuzz_target!(|data: &[u8]| {
    let Some((&head, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let horizon = usize::from(head & 7) + 1;
    let player = if head & 8 == 0 { Player::Controller } else { Player::Disturbance };
    if let Ok(g) = parse_gain_schedule(text, player, horizon) {
        assert_eq!(g.horizon(), horizon);
        assert_eq!(g.player(), player);
        assert!(g.is_finite());
    }
});
