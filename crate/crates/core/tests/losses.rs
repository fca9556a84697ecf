use maskforge::losses::check::{loss_vectors, LossVectors, LOSS_VECTOR_SEEDS};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/loss_vectors.json");

#[test]
fn loss_vectors_match_the_golden_file() {
    let fresh = loss_vectors(LOSS_VECTOR_SEEDS, false);
    if std::env::var_os("MASKFORGE_BLESS").is_some() {
        std::fs::write(GOLDEN, serde_json::to_string_pretty(&fresh).unwrap() + "\n").unwrap();
    }
    let golden: LossVectors =
        serde_json::from_str(&std::fs::read_to_string(GOLDEN).unwrap()).unwrap();
    assert_eq!(golden.checks.len(), fresh.checks.len());
    assert!(golden.all_passed());
    for (g, f) in golden.checks.iter().zip(&fresh.checks) {
        assert_eq!((&g.loss, g.seed), (&f.loss, f.seed));
        assert_eq!(g.pred_sha256, f.pred_sha256, "{} seed {}", g.loss, g.seed);
        assert_eq!(g.gt_sha256, f.gt_sha256);
        assert!(
            (g.value - f.value).abs() <= 1e-12 * g.value.abs().max(1.0),
            "{} seed {}",
            g.loss,
            g.seed
        );
        assert!(f.passed, "{} seed {}: {}", f.loss, f.seed, f.max_rel_error);
    }
}

#[test]
fn twenty_seed_check_is_fast() {
    let t = std::time::Instant::now();
    let v = loss_vectors(LOSS_VECTOR_SEEDS, false);
    assert!(v.all_passed());
    assert!(t.elapsed().as_secs_f64() < 10.0);
}
