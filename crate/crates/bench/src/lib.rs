//! Shared fixtures for the benchmark suite.

use osd_core::data::synth::{synth_generate, SynthConfig, SynthScene};

/// Deterministic scene plus the config that produced it: the first generated
/// scene containing an unknown object, so the pipeline benchmark stays on its
/// expensive clustering path. Density is dialed for benchmark turnaround
/// rather than fidelity.
pub fn bench_scene() -> (SynthConfig, SynthScene) {
    let cfg = SynthConfig {
        seed: 7,
        scenes: 8,
        azimuth_step_deg: 0.4,
        elevation_step_deg: 0.5,
        ..SynthConfig::default()
    };
    let scene = synth_generate(&cfg)
        .unwrap()
        .into_iter()
        .find(|sc| {
            sc.scene
                .gt_boxes
                .iter()
                .any(|b| b.label == osd_core::UNKNOWN_LABEL)
        })
        .expect("a scene with an unknown object");
    (cfg, scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use osd_core::UNKNOWN_LABEL;

    #[test]
    fn fixture_has_points_and_an_unknown_object() {
        let (_, sc) = bench_scene();
        assert!(!sc.scene.points.is_empty());
        assert!(sc.scene.gt_boxes.iter().any(|b| b.label == UNKNOWN_LABEL));
    }
}
