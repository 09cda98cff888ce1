use donor_memory::sequence::{build_memory_sequence, PulseSequence, SequenceConfig, Stage};
use donor_memory::spin::DonorParams;

const GOLDEN: &str = include_str!("data/memory_timeline.txt");

fn default_memory() -> PulseSequence {
    let cfg = SequenceConfig {
        tomography_phase: Some(90.0),
        ..SequenceConfig::default()
    };
    build_memory_sequence(&cfg, &DonorParams::default()).unwrap()
}

#[test]
fn default_memory_sequence_matches_golden_timeline() {
    assert_eq!(default_memory().to_timeline(), GOLDEN);
}

#[test]
fn golden_timeline_parses_back() {
    let seq = PulseSequence::from_timeline(GOLDEN).unwrap();
    assert_eq!(seq, default_memory());
    // 2.5 µs π/2, 50 µs + 5 µs transfer, 196 µs storage, 5 µs + 50 µs
    // recovery, 2.5 µs tomography pulse.
    assert!((seq.total_duration() - 311e-6).abs() < 1e-12);
    assert!((seq.stage_duration(Stage::Storage) - 196e-6).abs() < 1e-12);
    assert!((seq.free_time(Stage::Storage) - (196e-6 - 2.0 * 97.4e-6)).abs() < 1e-12);
}
