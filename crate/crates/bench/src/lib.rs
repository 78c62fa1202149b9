//! Shared fixtures for the simulator benchmarks.

use busboy_core::config::Config;
use busboy_core::harness::plan_scene;
use busboy_core::tableware::{SceneState, Tier};

/// The first `n` scenes of a tier under the default configuration.
pub fn scenes(tier: Tier, n: usize) -> Vec<SceneState> {
    let cfg = Config::default();
    (0..n)
        .map(|k| plan_scene(&cfg, 0, tier, k).expect("standard tiers generate"))
        .collect()
}
