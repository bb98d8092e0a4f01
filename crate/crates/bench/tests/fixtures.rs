use snaketext::tsr::compare::{run_fps_path, run_nms_path};
use snaketext::ShapingConfig;
use snaketext_bench::{candidates, CANDIDATE_SWEEP};

#[test]
fn sweep_fixtures_exercise_both_paths() {
    let cfg = ShapingConfig::default();
    for k in CANDIDATE_SWEEP {
        let set = candidates(k);
        assert_eq!(set.rects.len(), k);
        assert_eq!(run_fps_path(&set, &cfg).unwrap().overlap_ops, 0);
        assert!(run_nms_path(&set, &cfg, 0.5).unwrap().overlap_ops > 0);
    }
}
