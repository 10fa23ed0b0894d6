//! End-to-end matching on the 16-image toy set, checked against brute-force
//! inner products computed here from pixel values alone.

use qmatch_core::encoding::EncodingScheme;
use qmatch_core::matcher::{run_pipeline, Iterations, MatchConfig};
use qmatch_core::aae::Estimator;
use qmatch_core::toy;

fn bits(h: u8) -> [f64; 4] {
    std::array::from_fn(|j| ((h >> j) & 1) as f64)
}

/// `<d|q>` for FRQI with binary pixels mapped to angles 0 and pi/2.
fn overlap(d: u8, q: u8) -> f64 {
    let (d, q) = (bits(d), bits(q));
    d.iter().zip(&q).map(|(a, b)| if a == b { 0.25 } else { 0.0 }).sum()
}

fn reference_probabilities(q: u8) -> Vec<f64> {
    toy::TOY_DATABASE_HEX
        .iter()
        .map(|&d| overlap(d, q).powi(2) / 8.0)
        .collect()
}

#[test]
fn every_query_matches_brute_force_at_t0() {
    for q in 0..16u8 {
        let r = run_pipeline(&toy::database(), &toy::image(q).unwrap(), &MatchConfig::default()).unwrap();
        let expected = reference_probabilities(q);
        for (p, e) in r.report.probabilities.iter().zip(&expected) {
            assert!((p - e).abs() < 1e-12, "query {q:X}: {p} vs {e}");
        }
        assert_eq!(r.report.match_index(), toy::index_of(q));
        if toy::index_of(q).is_none() {
            assert!(r.report.closest_index().is_some());
        }
    }
}

#[test]
fn odd_queries_pick_the_nearest_entry() {
    // 1h is one pixel from 0h and at least two from every other entry
    let r = run_pipeline(&toy::database(), &toy::image(0x1).unwrap(), &MatchConfig::default()).unwrap();
    assert_eq!(r.report.argmax, 0);
    assert!(!r.report.tie);
    assert!(!r.report.exact_match);

    let r = run_pipeline(&toy::database(), &toy::image(0x7).unwrap(), &MatchConfig::default()).unwrap();
    assert_eq!(r.report.argmax, toy::index_of(0x6).unwrap());
}

#[test]
fn auto_iterations_amplify_the_match() {
    let config = MatchConfig {
        iterations: Iterations::Auto { m: 1 },
        ..MatchConfig::default()
    };
    let r = run_pipeline(&toy::database(), &toy::image(0x0).unwrap(), &config).unwrap();
    assert_eq!(r.report.iterations, 5);
    assert!((r.report.probabilities[0] - 0.2831).abs() < 5e-5);
    assert!(r.report.others < 0.5625);
    assert_eq!(r.report.hamming_distance.as_deref(), Some(&[0, 1, 1, 2, 1, 2, 2, 3][..]));
    assert_eq!(r.candidates, vec![0]);
}

#[test]
fn threshold_widens_candidates_by_hamming_class() {
    let config = MatchConfig {
        threshold: 0.7,
        ..MatchConfig::default()
    };
    let r = run_pipeline(&toy::database(), &toy::image(0x0).unwrap(), &config).unwrap();
    assert_eq!(r.candidates, vec![0, 1, 2, 4]);
}

#[test]
fn shot_mode_is_seeded() {
    let config = |seed| MatchConfig {
        estimator: Estimator::Shots { shots: 512, seed },
        iterations: Iterations::Fixed(2),
        ..MatchConfig::default()
    };
    let run = |seed| run_pipeline(&toy::database(), &toy::image(0x0).unwrap(), &config(seed)).unwrap().report;
    assert_eq!(run(9), run(9));
    assert_ne!(run(9).probabilities, run(10).probabilities);
    let r = run(9);
    let total: f64 = r.probabilities.iter().sum::<f64>() + r.others;
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn neqr_agrees_with_frqi_on_binary_images() {
    // with two levels both encodings give the same per-pixel overlaps
    for q in [0x0u8, 0x5, 0xB] {
        let frqi = run_pipeline(&toy::database(), &toy::image(q).unwrap(), &MatchConfig::default()).unwrap();
        let neqr = run_pipeline(
            &toy::database(),
            &toy::image(q).unwrap(),
            &MatchConfig {
                scheme: EncodingScheme::Neqr,
                ..MatchConfig::default()
            },
        )
        .unwrap();
        for (a, b) in frqi.report.probabilities.iter().zip(&neqr.report.probabilities) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
