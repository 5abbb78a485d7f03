mod common;

use common::{max_abs_diff, oracle_est, oracle_tie, random_events, random_stream, rng};
use evkit::event::window_by_time;
use evkit::repr::{
    est_tensor, event_frame, percentiles, tie_tensor, tie_to_rgb, Measurement, TieTensor, TieVariant, TimeNorm,
};
use evkit::{Event, EventStream, SensorGeometry};
use proptest::prelude::*;
use rand::Rng;

fn g32() -> SensorGeometry {
    SensorGeometry::new(32, 32).unwrap()
}

fn norm_of(m: Measurement) -> Option<TimeNorm> {
    match m {
        Measurement::Count => None,
        Measurement::Time(n) => Some(n),
        Measurement::Polarity => unreachable!(),
    }
}

#[test]
fn est_matches_brute_force() {
    let g = g32();
    let mut r = rng(11);
    for _ in 0..6 {
        let count = r.random_range(1..=1000);
        let t0 = r.random_range(0..50_000);
        let s = random_stream(&mut r, count, g, t0, 200_000);
        let (t_lo, t_hi) = (s.first_time().unwrap(), s.last_time().unwrap());
        for m in [Measurement::Count, Measurement::Time(TimeNorm::Tau), Measurement::Time(TimeNorm::TauHat)] {
            for k in [TimeNorm::Tau, TimeNorm::TauHat] {
                let got = est_tensor(&s.as_window(), g, 9, m, k, None).unwrap();
                let want = oracle_est(s.events(), g, 9, norm_of(m), k, t_lo, t_hi);
                assert!(max_abs_diff(&got.values, &want) < 1e-9);
            }
        }
    }
}

#[test]
fn tie_matches_brute_force_all_variants() {
    let g = g32();
    let mut r = rng(12);
    for _ in 0..4 {
        let s = random_stream(&mut r, 800, g, 10_000, 90_000);
        for v in TieVariant::ALL {
            let got = tie_tensor(&s.as_window(), g, 9, v).unwrap();
            let want = oracle_tie(s.events(), g, 9, v.measurement, v.kernel_time);
            assert!(max_abs_diff(&got.channels, &want) < 1e-9, "variant {v}");
        }
    }
}

#[test]
fn empty_window_gives_zero_tie() {
    let g = g32();
    let s = EventStream::empty(g);
    let t = tie_tensor(&s.as_window(), g, 9, TieVariant::THT).unwrap();
    assert!(t.channels.iter().all(|&v| v == 0.0));
}

#[test]
fn co_located_opposite_events_cancel() {
    let g = SensorGeometry::new(4, 4).unwrap();
    let s = EventStream::new(
        g,
        vec![
            Event::new(100, 1, 1, -1),
            Event::new(100, 1, 1, 1),
            Event::new(400, 2, 3, -1),
            Event::new(400, 2, 3, 1),
        ],
    )
    .unwrap();
    for v in TieVariant::ALL {
        let t = tie_tensor(&s.as_window(), g, 9, v).unwrap();
        assert!(t.channels.iter().all(|&c| c == 0.0));
    }
}

#[test]
fn tau_equals_tau_hat_when_stream_starts_at_zero() {
    let g = g32();
    let mut events = random_events(&mut rng(3), 300, g, 1, 50_000);
    events.insert(0, Event::new(0, 0, 0, 1));
    let s = EventStream::new(g, events).unwrap();
    let a = tie_tensor(&s.as_window(), g, 9, TieVariant::TT).unwrap();
    let b = tie_tensor(&s.as_window(), g, 9, TieVariant::THT).unwrap();
    assert!(max_abs_diff(&a.channels, &b.channels) < 1e-12);
}

fn transformed(s: &EventStream, a: u64, b: u64) -> EventStream {
    let events = s.events().iter().map(|e| Event::new(a * e.t + b, e.x, e.y, e.p)).collect();
    EventStream::new(s.geometry(), events).unwrap()
}

#[test]
fn tau_variant_is_scale_invariant() {
    let g = g32();
    let s = random_stream(&mut rng(5), 500, g, 1_000, 80_000);
    let base = tie_tensor(&s.as_window(), g, 9, TieVariant::TT).unwrap();
    for a in [2, 3, 10] {
        let t = tie_tensor(&transformed(&s, a, 0).as_window(), g, 9, TieVariant::TT).unwrap();
        assert!(max_abs_diff(&base.channels, &t.channels) < 1e-9);
    }
}

#[test]
fn tau_hat_variant_is_affine_invariant() {
    let g = g32();
    let s = random_stream(&mut rng(6), 500, g, 1_000, 80_000);
    let base = tie_tensor(&s.as_window(), g, 9, TieVariant::THH).unwrap();
    for a in [2, 3] {
        for b in [1_000, 7_777] {
            let t = tie_tensor(&transformed(&s, a, b).as_window(), g, 9, TieVariant::THH).unwrap();
            assert!(max_abs_diff(&base.channels, &t.channels) < 1e-9);
        }
    }
}

#[test]
fn tau_variant_is_shift_sensitive() {
    let g = g32();
    let s = random_stream(&mut rng(7), 200, g, 1_000, 80_000);
    let base = tie_tensor(&s.as_window(), g, 9, TieVariant::TT).unwrap();
    let shifted = tie_tensor(&transformed(&s, 1, 50_000).as_window(), g, 9, TieVariant::TT).unwrap();
    assert!(max_abs_diff(&base.channels, &shifted.channels) > 1e-3);
}

#[test]
fn counting_est_conserves_mass_per_event() {
    let g = SensorGeometry::new(8, 8).unwrap();
    let mut r = rng(8);
    for _ in 0..200 {
        let t = r.random_range(1..100_000);
        let e = [Event::new(0, 0, 0, 1), Event::new(t, 3, 4, -1), Event::new(100_000, 0, 0, 1)];
        let s = EventStream::new(g, e.to_vec()).unwrap();
        for k in [TimeNorm::Tau, TimeNorm::TauHat] {
            let grid = est_tensor(&s.as_window(), g, 9, Measurement::Count, k, None).unwrap();
            let mass: f64 = (0..9).map(|b| grid.get(1, b, 3, 4)).sum();
            assert!((mass - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn est_is_additive_over_disjoint_streams() {
    let g = g32();
    let mut r = rng(9);
    let all = random_events(&mut r, 900, g, 0, 100_000);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for e in &all {
        if r.random_bool(0.4) { a.push(*e) } else { b.push(*e) }
    }
    let range = Some((0, 100_000));
    let m = Measurement::Time(TimeNorm::TauHat);
    let grid = |ev: Vec<Event>| {
        let s = EventStream::new(g, ev).unwrap();
        est_tensor(&s.as_window(), g, 9, m, TimeNorm::Tau, range).unwrap().values
    };
    let ga = grid(a);
    let gb = grid(b);
    let sum: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x + y).collect();
    assert!(max_abs_diff(&grid(all), &sum) <= 1e-12);
}

#[test]
fn same_timestamp_reordering_is_invisible() {
    let g = SensorGeometry::new(6, 6).unwrap();
    let a = vec![Event::new(10, 1, 1, 1), Event::new(50, 2, 2, 1), Event::new(50, 5, 0, -1), Event::new(90, 3, 3, -1)];
    let mut b = a.clone();
    b.swap(1, 2);
    let sa = EventStream::from_raw(g, a);
    let sb = EventStream::from_raw(g, b);
    for v in TieVariant::ALL {
        let ta = tie_tensor(&sa.as_window(), g, 9, v).unwrap();
        let tb = tie_tensor(&sb.as_window(), g, 9, v).unwrap();
        assert_eq!(ta.channels, tb.channels);
    }
    assert_eq!(event_frame(&sa.as_window(), g), event_frame(&sb.as_window(), g));
}

#[test]
fn rgb_percentiles_on_uniform_entries() {
    let g = SensorGeometry::new(1000, 1).unwrap();
    let mut channels = vec![0.0; 9 * 1000];
    // Only the first channel group is nonzero, so two thirds of the entries are 0.
    for x in 0..1000 {
        channels[x] = x as f64;
    }
    let t = TieTensor::from_channels(g, 9, TieVariant::THT, channels).unwrap();
    let img = tie_to_rgb(&t).unwrap();
    let mut grouped: Vec<f64> = (0..1000).map(f64::from).collect();
    grouped.extend(std::iter::repeat_n(0.0, 2000));
    assert_eq!(percentiles(&grouped, 0.01, 0.99).unwrap(), (img.z_lo, img.z_hi));

    let direct: Vec<f64> = (0..1000).map(f64::from).collect();
    let (lo, hi) = percentiles(&direct, 0.01, 0.99).unwrap();
    assert!((lo - 9.99).abs() < 1e-9 && (hi - 989.01).abs() < 1e-9);
}

#[test]
fn windows_partition_every_event() {
    let g = g32();
    let s = random_stream(&mut rng(10), 1000, g, 5_000, 333_333);
    let w = window_by_time(&s, 100_000, 3).unwrap();
    assert_eq!(w.len(), 12);
    assert_eq!(w.iter().map(|w| w.len()).sum::<usize>(), s.len());
}

proptest! {
    #[test]
    fn rgb_bytes_cover_range(values in prop::collection::vec(-1e6f64..1e6, 9 * 16)) {
        let g = SensorGeometry::new(4, 4).unwrap();
        let t = TieTensor::from_channels(g, 9, TieVariant::THT, values).unwrap();
        let img = tie_to_rgb(&t).unwrap();
        prop_assert!(img.z_lo <= img.z_hi);
        prop_assert_eq!(img.rgb.len(), 3 * 16);
    }

    #[test]
    fn oracle_agreement_small(seed in 0u64..1000, count in 1usize..60) {
        let g = SensorGeometry::new(5, 4).unwrap();
        let mut r = rng(seed);
        let s = random_stream(&mut r, count, g, 0, 5_000);
        for v in TieVariant::ALL {
            let got = tie_tensor(&s.as_window(), g, 6, v).unwrap();
            let want = oracle_tie(s.events(), g, 6, v.measurement, v.kernel_time);
            prop_assert!(max_abs_diff(&got.channels, &want) < 1e-9);
        }
    }
}
