mod support;

use support::*;

const NOISELESS_TOLERANCE: f64 = 1e-6;

fn mean_errors(sigma_deg: f64, seeds: u64) -> (f64, f64) {
    let (mut p, mut r) = (0.0, 0.0);
    for seed in 0..seeds {
        let (dp, dr) = hand_eye_error(seed, 12, sigma_deg.to_radians(), false).unwrap();
        p += dp;
        r += dr;
    }
    (p / seeds as f64, r / seeds as f64)
}

#[test]
fn noiseless_recovery() {
    for seed in 0..100 {
        let (p, r) = hand_eye_error(seed, 12, 0.0, false).unwrap();
        assert!(p < NOISELESS_TOLERANCE && r < NOISELESS_TOLERANCE, "seed {seed}: {p:e} m, {r:e} rad");
    }
}

#[test]
fn error_grows_with_noise() {
    let levels: Vec<(f64, f64)> = [0.0, 0.1, 0.5].iter().map(|s| mean_errors(*s, 50)).collect();
    for w in levels.windows(2) {
        assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1, "{levels:?}");
    }
}

#[test]
fn more_pairs_do_not_hurt() {
    let (mut few, mut many) = (0.0, 0.0);
    for seed in 0..50 {
        few += hand_eye_error(seed, 5, 0.2f64.to_radians(), false).unwrap().1;
        many += hand_eye_error(seed, 21, 0.2f64.to_radians(), false).unwrap().1;
    }
    assert!(many <= few, "{many} > {few}");
}

#[test]
fn synthetic_pairs_satisfy_the_constraint() {
    let mut rng = rng(3);
    let x = random_pose(&mut rng, 0.8);
    for (a, b) in synthetic_hand_eye(&mut rng, &x, 6, 0.0, true) {
        let l = matrix(&a) * matrix(&x);
        let r = matrix(&x) * matrix(&b);
        assert!((l - r).abs().max() < 1e-9);
    }
}
