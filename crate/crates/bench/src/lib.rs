//! Fixtures shared by the post-processing benchmarks.

use snaketext::dataio::{random_spec, synth_maps, SynthKind};
use snaketext::tsr::compare::{random_candidates, CandidateSet};
use snaketext::{GeometryMaps, ShapingConfig};

/// Candidate counts swept by the FPS-versus-NMS benchmark.
pub const CANDIDATE_SWEEP: [usize; 4] = [100, 500, 1000, 2000];

/// `k` random candidates with the default rectangle width.
pub fn candidates(k: usize) -> CandidateSet {
    random_candidates(k, ShapingConfig::default().rect_width, k as u64).expect("k within capacity")
}

/// Clean synthetic head maps of the given family.
pub fn synthetic_maps(kind: SynthKind, seed: u64) -> GeometryMaps {
    synth_maps(&random_spec(kind, seed), seed)
        .expect("random specs are valid")
        .maps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        assert_eq!(candidates(50).pixels, candidates(50).pixels);
        assert_eq!(
            synthetic_maps(SynthKind::TwoBand, 3),
            synthetic_maps(SynthKind::TwoBand, 3)
        );
    }
}
