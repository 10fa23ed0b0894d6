use qmatch_core::dataset::DigitsSet;
use qmatch_core::encoding::{Database, EncodingScheme};
use qmatch_core::noise::{run_noise_study, NoiseConfig, NoiseReport};

fn digits() -> Database {
    DigitsSet::builtin().database(&[0, 1, 2, 3, 4, 5, 6, 7]).unwrap()
}

fn study(scheme: EncodingScheme, seeds: u64) -> NoiseReport {
    let db = digits();
    run_noise_study(&db, db.images(), &NoiseConfig::new(scheme, (0..seeds).collect())).unwrap()
}

#[test]
fn fidelity_falls_with_noise_and_frqi_is_more_robust() {
    let frqi = study(EncodingScheme::Frqi, 8);
    let neqr = study(EncodingScheme::Neqr, 8);
    for w in frqi.summary.windows(2).chain(neqr.summary.windows(2)) {
        assert!(w[0].mean_fidelity > w[1].mean_fidelity);
    }
    for (f, n) in frqi.summary.iter().zip(&neqr.summary) {
        assert_eq!(f.sigma0, n.sigma0);
        assert!(f.mean_fidelity >= n.mean_fidelity, "sigma0 {}", f.sigma0);
    }
}

#[test]
fn low_noise_keeps_the_right_match() {
    let r = study(EncodingScheme::Frqi, 4);
    assert_eq!(r.summary[0].argmax_accuracy, 1.0);
}

#[test]
fn reports_are_reproducible() {
    let a = study(EncodingScheme::Neqr, 3);
    let b = study(EncodingScheme::Neqr, 3);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ca).unwrap();
    b.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(a.summary_json().unwrap(), b.summary_json().unwrap());
}

#[test]
fn zero_noise_is_lossless() {
    let db = digits();
    let config = NoiseConfig {
        sigma0: vec![0.0],
        ..NoiseConfig::new(EncodingScheme::Frqi, vec![0, 1])
    };
    let r = run_noise_study(&db, db.images(), &config).unwrap();
    assert!((r.summary[0].mean_fidelity - 1.0).abs() < 1e-12);
    assert_eq!(r.summary[0].argmax_accuracy, 1.0);
}
