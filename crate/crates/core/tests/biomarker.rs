use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use seadbs::biomarker::{
    periodogram, relative_beta_power, BandConfig, BetaPower, BetaTracker, ObservationWindow, Periodogram,
};
use seadbs::Error;

const FS: f64 = 2000.0;
const N: usize = 256;

fn sine(freq: f64, amp: f64, phase: f64) -> Vec<f64> {
    (0..N)
        .map(|i| amp * (TAU * freq * i as f64 / FS + phase).sin())
        .collect()
}

/// O(N²) one-sided periodogram straight from the DFT definition.
fn naive_psd(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = (0..n)
        .map(|i| (x[i] - mean) * (0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()))
        .collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in w.iter().enumerate() {
                let ph = -TAU * (k * i) as f64 / n as f64;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            let fold = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            fold * (re * re + im * im) / (n as f64 * fs)
        })
        .collect()
}

#[test]
fn matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..N).map(|_| StandardNormal.sample(&mut rng)).collect();
    let spec = periodogram(&x, FS).unwrap();
    let oracle = naive_psd(&x, FS);
    assert_eq!(spec.power.len(), N / 2 + 1);
    for (a, b) in spec.power.iter().zip(&oracle) {
        assert_relative_eq!(*a, *b, epsilon = 1e-12, max_relative = 1e-9);
    }
}

#[test]
fn bin_spacing_is_fs_over_n() {
    let spec = periodogram(&vec![0.0; N], FS).unwrap();
    assert_relative_eq!(spec.df, 7.8125);
    assert_relative_eq!(spec.freqs[1], 7.8125);
    assert_relative_eq!(*spec.freqs.last().unwrap(), 1000.0);
}

#[test]
fn zero_signal_has_zero_power() {
    let spec = periodogram(&vec![0.0; N], FS).unwrap();
    assert!(spec.power.iter().all(|p| *p == 0.0));
    // constant offset is removed by detrending
    let spec = periodogram(&vec![-65.0; N], FS).unwrap();
    assert!(spec.power.iter().all(|p| p.abs() < 1e-20));
    let est = Periodogram::new(N, FS).unwrap();
    let b = relative_beta_power(&[vec![0.0; N]], &est, &BandConfig::default()).unwrap();
    assert_eq!(b.value(), 0.0);
}

#[test]
fn short_signal_is_rejected() {
    assert!(matches!(
        periodogram(&[1.0; 32], FS),
        Err(Error::SignalTooShort { len: 32, .. })
    ));
    let est = Periodogram::<f64>::new(N, FS).unwrap();
    assert!(matches!(est.estimate(&[0.0; 100]), Err(Error::Dimension { .. })));
}

#[test]
fn twenty_hz_sine_power_lies_in_the_main_lobe() {
    let spec = periodogram(&sine(20.0, 1.0, 0.3), FS).unwrap();
    let k0 = 20.0 / spec.df;
    // Hann main lobe: |f - f0| < 2 bins
    let lobe: f64 = spec
        .power
        .iter()
        .enumerate()
        .filter(|(k, _)| (*k as f64 - k0).abs() < 2.0)
        .map(|(_, p)| p)
        .sum();
    let total: f64 = spec.power.iter().sum();
    assert!(lobe / total > 0.9, "main lobe holds {:.3}", lobe / total);
    assert!((spec.freqs[spec.peak_bin()] - 20.0).abs() <= spec.df);
}

#[test]
fn bin_centred_sine_matches_closed_form() {
    // f0 on bin 4: the periodic Hann spreads power over bins 3, 4, 5 in
    // proportion 1/16 : 1/4 : 1/16 of A²N/(fs) before folding.
    let k0 = 4usize;
    let f0 = k0 as f64 * FS / N as f64;
    let amp = 2.0;
    let spec = periodogram(&sine(f0, amp, 0.0), FS).unwrap();
    let centre = 2.0 * (amp * N as f64 / 4.0).powi(2) / (N as f64 * FS);
    assert_relative_eq!(spec.power[k0], centre, max_relative = 1e-9);
    assert_relative_eq!(spec.power[k0 - 1], centre / 4.0, max_relative = 1e-9);
    assert_relative_eq!(spec.power[k0 + 1], centre / 4.0, max_relative = 1e-9);
    for k in (0..=N / 2).filter(|k| k.abs_diff(k0) > 1) {
        assert!(spec.power[k] < centre * 1e-20, "leak at bin {k}");
    }
}

#[test]
fn white_noise_level_matches_expectation() {
    // E[P_k] = 2σ² Σw² / (N fs) for interior bins.
    let sigma = 1.5;
    let sum_w2: f64 = (0..N)
        .map(|i| (0.5 - 0.5 * (TAU * i as f64 / N as f64).cos()).powi(2))
        .sum();
    let expected = 2.0 * sigma * sigma * sum_w2 / (N as f64 * FS);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let est = Periodogram::new(N, FS).unwrap();
    let trials = 400;
    let mut acc = vec![0.0; N / 2 + 1];
    for _ in 0..trials {
        let x: Vec<f64> = (0..N)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect();
        for (a, p) in acc.iter_mut().zip(est.estimate(&x).unwrap().power) {
            *a += p / trials as f64;
        }
    }
    let interior: f64 = acc[5..N / 2 - 5].iter().sum::<f64>() / (N / 2 - 10) as f64;
    assert_relative_eq!(interior, expected, max_relative = 0.03);
}

#[test]
fn relative_beta_separates_beta_from_gamma() {
    let est = Periodogram::new(N, FS).unwrap();
    let bands = BandConfig::default();
    let beta = relative_beta_power(&[sine(20.0, 1.0, 0.0)], &est, &bands).unwrap();
    let gamma = relative_beta_power(&[sine(50.0, 1.0, 0.0)], &est, &bands).unwrap();
    assert!(beta.value() > 0.9, "20 Hz: {}", beta.value());
    assert!(gamma.value() < 0.1, "50 Hz: {}", gamma.value());
}

#[test]
fn relative_beta_averages_channels() {
    let est = Periodogram::new(N, FS).unwrap();
    let bands = BandConfig::default();
    let a = relative_beta_power(&[sine(20.0, 1.0, 0.0)], &est, &bands)
        .unwrap()
        .value();
    let b = relative_beta_power(&[sine(50.0, 3.0, 1.0)], &est, &bands)
        .unwrap()
        .value();
    let both = relative_beta_power(&[sine(20.0, 1.0, 0.0), sine(50.0, 3.0, 1.0)], &est, &bands)
        .unwrap()
        .value();
    assert_relative_eq!(both, (a + b) / 2.0, epsilon = 1e-12);
}

#[test]
fn tracker_needs_a_full_window() {
    let mut t = BetaTracker::new(128.0, FS, 2, BandConfig::default()).unwrap();
    assert_eq!(t.capacity(), 256);
    for i in 0..255 {
        t.push_row(&[(i as f64).sin(), 0.0]);
    }
    assert!(matches!(
        t.beta_power(),
        Err(Error::InsufficientHistory { have: 255, need: 256 })
    ));
    t.push_row(&[0.0, 0.0]);
    assert!(t.is_warm());
    assert!(t.beta_power().is_ok());
    for _ in 0..50 {
        t.push_row(&[0.0, 0.0]);
    }
    assert_eq!(t.len(), 256);
    t.clear();
    assert!(t.is_empty());
}

#[test]
fn tracker_agrees_with_direct_computation() {
    let mut t = BetaTracker::new(128.0, FS, 1, BandConfig::default()).unwrap();
    let x: Vec<f64> = (0..400)
        .map(|i| (TAU * 22.0 * i as f64 / FS).sin() + 0.2 * (i as f64 * 0.7).cos())
        .collect();
    for v in &x {
        t.push_row(&[*v]);
    }
    let est = Periodogram::new(N, FS).unwrap();
    let direct = relative_beta_power(&[x[400 - N..].to_vec()], &est, &BandConfig::default()).unwrap();
    assert_eq!(t.beta_power().unwrap(), direct);
}

#[test]
fn observation_window_pads_and_rolls() {
    let mut w = ObservationWindow::new(5);
    assert!(w.state().is_empty());
    assert_eq!(w.mean_beta(), 0.0);
    assert_eq!(w.push_and_build_state(BetaPower(0.4)), vec![0.4; 5]);
    w.push(0.6);
    assert_eq!(w.state(), vec![0.4, 0.4, 0.4, 0.4, 0.6]);
    assert_relative_eq!(w.mean_beta(), 0.44);
    let w = ObservationWindow::from_values(5, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    assert_eq!(w.state(), vec![0.3, 0.4, 0.5, 0.6, 0.7]);
    assert_relative_eq!(w.mean_beta(), 0.5);
}

#[test]
fn f32_estimate_tracks_f64() {
    let x = sine(25.0, 1.0, 0.1);
    let x32: Vec<f32> = x.iter().map(|v| *v as f32).collect();
    let a = periodogram(&x, FS).unwrap();
    let b = periodogram(&x32, FS as f32).unwrap();
    let peak = a.power[a.peak_bin()];
    for (p, q) in a.power.iter().zip(&b.power) {
        assert!((p - *q as f64).abs() < 1e-5 * peak);
    }
}

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, N)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(x in signal()) {
        let est = Periodogram::new(N, FS).unwrap();
        let spec = est.estimate(&x).unwrap();
        let w = est.windowed(&x).unwrap();
        let mean_sq = w.iter().map(|v| v * v).sum::<f64>() / N as f64;
        prop_assert!((spec.total_power() - mean_sq).abs() <= 1e-9 * mean_sq.max(1e-12));
    }

    #[test]
    fn psd_is_non_negative(x in signal()) {
        prop_assert!(periodogram(&x, FS).unwrap().power.iter().all(|p| *p >= 0.0));
    }

    #[test]
    fn relative_beta_is_scale_invariant(x in signal(), scale in 0.01f64..100.0, offset in -80.0f64..80.0) {
        let est = Periodogram::new(N, FS).unwrap();
        let bands = BandConfig::default();
        let a = relative_beta_power(std::slice::from_ref(&x), &est, &bands).unwrap().value();
        let y: Vec<f64> = x.iter().map(|v| v * scale + offset).collect();
        let b = relative_beta_power(&[y], &est, &bands).unwrap().value();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn relative_beta_ignores_channel_order(chans in prop::collection::vec(signal(), 2..5), rot in 0usize..5) {
        let est = Periodogram::new(N, FS).unwrap();
        let bands = BandConfig::default();
        let a = relative_beta_power(&chans, &est, &bands).unwrap().value();
        let mut r = chans.clone();
        let len = r.len();
        r.rotate_left(rot % len);
        let b = relative_beta_power(&r, &est, &bands).unwrap().value();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn sine_power_is_half_amplitude_squared(f in 60.0f64..400.0, amp in 0.1f64..10.0, phase in 0.0f64..PI) {
        // Away from DC the windowed mean square of a sine is A²/2 · mean(w²).
        let spec = periodogram(&sine(f, amp, phase), FS).unwrap();
        let mean_w2 = 3.0 / 8.0;
        prop_assert!((spec.total_power() / (amp * amp / 2.0 * mean_w2) - 1.0).abs() < 0.02);
    }
}
