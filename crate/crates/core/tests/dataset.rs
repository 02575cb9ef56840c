//! Statistical and structural checks of the synthetic ground truth.

use tgan_core::channel::io::{format_samples, parse_samples, SampleList};
use tgan_core::channel::{ChannelSample, Scaler};
use tgan_core::dataset::{generate_dataset, generate_sample, generate_samples, GeneratorConfig, SPEED_OF_LIGHT};
use tgan_core::metrics::{angular_spread, delay_spread, mean_of};
use tgan_core::rng;

fn config(n: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        sample_count: n,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn scattered_excess_delays_follow_the_exponential_mean() {
    let cfg = GeneratorConfig::default();
    let mut r = rng::stream(17, 0);
    let mut total = 0.0;
    let mut draws = 0usize;
    while draws < 100_000 {
        let s = generate_sample(&cfg, 12.0, &mut r).unwrap();
        let los = s.line_of_sight().delay;
        for m in &s.mpcs()[1..] {
            total += m.delay - los;
            draws += 1;
        }
    }
    let mean = total / draws as f64;
    assert!((mean / 20e-9 - 1.0).abs() <= 0.01, "mean excess delay {mean:e}");
}

#[test]
fn large_datasets_have_seed_stable_spreads() {
    let means: Vec<(f64, f64)> = [1u64, 2, 3]
        .iter()
        .map(|&seed| {
            let s = generate_samples(&config(10_000, seed)).unwrap();
            (mean_of(&s, delay_spread).unwrap(), mean_of(&s, angular_spread).unwrap())
        })
        .collect();
    for a in &means {
        for b in &means {
            assert!((a.0 / b.0 - 1.0).abs() <= 0.05, "{means:?}");
            assert!((a.1 / b.1 - 1.0).abs() <= 0.05, "{means:?}");
        }
    }
}

#[test]
fn line_of_sight_gain_falls_with_distance() {
    let cfg = GeneratorConfig::default();
    let mut r = rng::stream(4, 0);
    let mut prev = f64::INFINITY;
    for i in 0..=58 {
        let d = 1.0 + 0.5 * i as f64;
        // Averaged over draws although the gain itself is deterministic.
        let mean: f64 = (0..20)
            .map(|_| generate_sample(&cfg, d, &mut r).unwrap().line_of_sight().gain)
            .sum::<f64>()
            / 20.0;
        assert!(mean < prev, "{d} m");
        prev = mean;
    }
    let s5 = generate_sample(&cfg, 5.0, &mut r).unwrap();
    let s10 = generate_sample(&cfg, 10.0, &mut r).unwrap();
    let ratio = 20.0 * (s10.line_of_sight().gain / s5.line_of_sight().gain).log10();
    assert!((ratio + 6.0206).abs() < 1e-3);
    assert!((s5.line_of_sight().delay - 5.0 / SPEED_OF_LIGHT).abs() < 1e-18);
}

#[test]
fn scaler_matches_training_extrema() {
    let ds = generate_dataset(&config(500, 8)).unwrap();
    let mut lo = [f64::INFINITY; 5];
    let mut hi = [f64::NEG_INFINITY; 5];
    for s in &ds.train {
        let mut visit = |k: usize, v: f64| {
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        };
        visit(4, s.distance());
        for m in s.mpcs() {
            visit(0, 20.0 * m.gain.log10());
            visit(1, m.phase);
            visit(2, m.delay);
            visit(3, m.aoa);
        }
    }
    let sc = ds.scaler;
    let got = [sc.gain_db, sc.phase, sc.delay, sc.aoa, sc.distance];
    for k in 0..5 {
        assert_eq!((got[k].min, got[k].max), (lo[k], hi[k]), "feature {k}");
    }
    // Training samples normalize onto the full unit interval.
    let flat: Vec<Vec<f64>> = ds.train.iter().map(|s| sc.normalize(s).unwrap().0).collect();
    for f in 0..4 {
        let col = flat.iter().flat_map(|v| v.chunks(4).map(move |c| c[f]));
        let (mn, mx) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        assert_eq!((mn, mx), (0.0, 1.0), "feature {f}");
    }
}

#[test]
fn split_is_eighty_twenty_and_disjoint() {
    let ds = generate_dataset(&config(100, 5)).unwrap();
    assert_eq!((ds.train.len(), ds.test.len()), (80, 20));
    let all = generate_samples(&config(100, 5)).unwrap();
    let key = |s: &ChannelSample| s.distance().to_bits();
    let mut seen: Vec<u64> = ds.train.iter().chain(&ds.test).map(key).collect();
    seen.sort();
    let mut expected: Vec<u64> = all.iter().map(key).collect();
    expected.sort();
    assert_eq!(seen, expected);
}

#[test]
fn same_seed_gives_identical_files() {
    let a = generate_dataset(&config(300, 12)).unwrap();
    let b = generate_dataset(&config(300, 12)).unwrap();
    assert_eq!(a, b);
    let text = |d: &tgan_core::dataset::Dataset| {
        let mut samples = d.train.clone();
        samples.extend(d.test.iter().cloned());
        format_samples(&SampleList { samples, train_count: Some(d.train.len()) })
    };
    assert_eq!(text(&a), text(&b));
    let c = generate_dataset(&config(300, 13)).unwrap();
    assert_ne!(a.train, c.train);

    let parsed = parse_samples(&text(&a)).unwrap();
    assert_eq!(parsed.train(), &a.train[..]);
    assert_eq!(parsed.test(), &a.test[..]);
    assert_eq!(Scaler::fit(parsed.train()).unwrap(), a.scaler);
}

#[test]
fn every_generated_sample_is_valid() {
    let cfg = GeneratorConfig {
        sample_count: 2000,
        distance_range: (0.5, 80.0),
        angle_scale: 170.0,
        ..GeneratorConfig::default()
    };
    for s in generate_samples(&cfg).unwrap() {
        assert!(ChannelSample::new(s.mpcs().to_vec(), s.distance()).is_ok());
        assert_eq!(s.line_of_sight().aoa, 0.0);
    }
}
