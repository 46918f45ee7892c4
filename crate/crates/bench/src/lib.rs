//! Fixtures shared by the pipeline benchmarks.

use scenegraph_core::extraction::extract_dataset;
use scenegraph_core::synth::{generate, SynthConfig};
use scenegraph_core::{Dataset, ExtractionConfig, SceneGraphDataset};

/// Synthetic clips with `frames` frames each and up to four vehicles.
pub fn clips(count: usize, frames: usize) -> Dataset {
    let cfg = SynthConfig {
        clips: count,
        frames,
        max_background: 3,
        ..SynthConfig::default()
    };
    generate(&cfg, 11).expect("valid synth config")
}

pub fn scene_graphs(count: usize, frames: usize) -> SceneGraphDataset {
    extract_dataset(&clips(count, frames), &ExtractionConfig::default(), None)
        .expect("synthetic clips extract")
        .0
}
