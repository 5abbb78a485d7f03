mod common;

use common::{random_frame, random_stream, rng};
use evkit::emulator::{EmulatorConfig, GrayFrame};
use evkit::io::events::{decode_events, encode_events, HEADER_LEN};
use evkit::io::pnm::{decode_pgm, decode_ppm, encode_pgm, encode_ppm};
use evkit::io::tensor::{decode_tensor, encode_tensor};
use evkit::io::{
    generate_synthetic, load_dataset, read_events, read_events_csv, read_frame_pgm, read_manifest, write_events,
    write_events_csv, write_frame_pgm, MotionClass, Split, SyntheticSpec, TensorF32, WindowConfig,
};
use evkit::repr::{TieImage, TieVariant};
use evkit::toyml::{init_model, read_checkpoint, write_checkpoint, Checkpoint, ModelDims};
use evkit::{Error, EventStream, SensorGeometry};
use rand::Rng;

#[test]
fn event_binary_round_trip() {
    let g = SensorGeometry::new(346, 260).unwrap();
    let s = random_stream(&mut rng(31), 1000, g, 0, 1_000_000);
    let bytes = encode_events(&s);
    assert_eq!(bytes.len(), HEADER_LEN + 13 * 1000);
    let back = decode_events(&bytes).unwrap();
    assert_eq!(back.events(), s.events());
    assert_eq!(encode_events(&back), bytes);

    let empty = EventStream::empty(g);
    let bytes = encode_events(&empty);
    assert_eq!(bytes.len(), HEADER_LEN);
    assert!(decode_events(&bytes).unwrap().is_empty());
}

#[test]
fn event_binary_errors_are_distinct() {
    let g = SensorGeometry::new(16, 16).unwrap();
    let bytes = encode_events(&random_stream(&mut rng(32), 10, g, 0, 1000));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_events(&bad), Err(Error::BadMagic { .. })));
    assert!(matches!(decode_events(&bytes[..bytes.len() - 5]), Err(Error::Truncated(_))));
    let mut extra = bytes.clone();
    extra.extend_from_slice(&bytes[HEADER_LEN..HEADER_LEN + 13]);
    assert!(matches!(decode_events(&extra), Err(Error::CountMismatch { .. })));
}

#[test]
fn event_files_and_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = SensorGeometry::new(40, 30).unwrap();
    let s = random_stream(&mut rng(33), 500, g, 10, 90_000);
    let path = dir.path().join("a.evst");
    write_events(&path, &s).unwrap();
    assert_eq!(read_events(&path).unwrap().events(), s.events());

    let mut csv = Vec::new();
    write_events_csv(&s, &mut csv).unwrap();
    assert!(csv.starts_with(b"t_us,x,y,p\n"));
    let back = read_events_csv(csv.as_slice(), Some(g)).unwrap();
    assert_eq!(back.events(), s.events());

    assert!(matches!(read_events(dir.path().join("missing.evst")), Err(Error::MissingFile(_))));
}

#[test]
fn pgm_round_trip_and_header_rules() {
    let f = random_frame(&mut rng(34), 13, 7);
    let bytes = encode_pgm(&f);
    assert_eq!(decode_pgm(&bytes).unwrap(), f);

    let mut commented = b"P5\n# made by hand\n3 # width\n2\n# depth next\n255\n".to_vec();
    commented.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
    let parsed = decode_pgm(&commented).unwrap();
    assert_eq!((parsed.width, parsed.height, parsed.data.clone()), (3, 2, vec![1, 2, 3, 4, 5, 6]));

    let mut deep = b"P5\n1 1\n65535\n".to_vec();
    deep.extend_from_slice(&[0, 0]);
    assert!(matches!(decode_pgm(&deep), Err(Error::UnsupportedDepth(65535))));
    assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0"), Err(Error::MalformedHeader(_))));

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.pgm");
    write_frame_pgm(&p, &f).unwrap();
    assert_eq!(read_frame_pgm(&p).unwrap(), f);
}

#[test]
fn ppm_round_trip() {
    let mut r = rng(35);
    let data: Vec<u8> = (0..3 * 9 * 5).map(|_| r.random()).collect();
    let img = TieImage::from_interleaved(9, 5, &data).unwrap();
    let bytes = encode_ppm(&img);
    assert!(bytes.starts_with(b"P6\n9 5\n255\n"));
    let back = decode_ppm(&bytes).unwrap();
    assert_eq!(back.rgb, img.rgb);
    assert_eq!(encode_ppm(&back), bytes);
}

#[test]
fn tensor_round_trip() {
    let data: Vec<f32> = (0..2 * 3 * 4).map(|i| i as f32 * 0.37 - 2.0).collect();
    let t = TensorF32::new(vec![2, 3, 4], data).unwrap();
    let bytes = encode_tensor(&t);
    assert_eq!(decode_tensor(&bytes).unwrap(), t);
    assert!(TensorF32::new(vec![2, 2], vec![0.0; 3]).is_err());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dims = ModelDims {
        image_side: 8,
        feature: 6,
        decoder_hidden: vec![5],
        discriminator_hidden: vec![4],
        lstm_hidden: 6,
        classes: 3,
        ..ModelDims::default()
    };
    let ck = Checkpoint { model: init_model(3, &dims).unwrap(), meta: [("kind".to_string(), "test".to_string())].into() };
    let mut bytes = Vec::new();
    write_checkpoint(&ck, &mut bytes).unwrap();
    let back = read_checkpoint(bytes.as_slice()).unwrap();
    let mut again = Vec::new();
    write_checkpoint(&back, &mut again).unwrap();
    assert_eq!(bytes, again);
    assert_eq!(back.meta, ck.meta);
}

fn small_spec(samples: usize) -> SyntheticSpec {
    SyntheticSpec { samples_per_class: samples, ..SyntheticSpec::default() }
}

#[test]
fn synthetic_corpus_layout() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_synthetic(&small_spec(40), &EmulatorConfig::default(), dir.path()).unwrap();
    assert_eq!(m.samples.len(), 280);
    assert_eq!(m.split_counts(), (224, 56));
    for class in 0..7 {
        let (tr, va) = m.samples.iter().filter(|s| s.label == class).fold((0, 0), |acc, s| match s.split {
            Split::Train => (acc.0 + 1, acc.1),
            Split::Val => (acc.0, acc.1 + 1),
        });
        assert_eq!((tr, va), (32, 8));
    }
    let reread = read_manifest(dir.path().join("manifest.json")).unwrap();
    assert_eq!(reread.samples, m.samples);
    reread.check_files().unwrap();
}

#[test]
fn synthetic_generation_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { classes: vec![MotionClass::Expand, MotionClass::Blink], ..small_spec(2) };
    let ma = generate_synthetic(&spec, &EmulatorConfig::default(), a.path()).unwrap();
    generate_synthetic(&spec, &EmulatorConfig::default(), b.path()).unwrap();
    for s in &ma.samples {
        for f in s.frames.iter().chain([&s.events]) {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        }
    }
}

#[test]
fn expansion_and_contraction_have_opposite_polarity_balance() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { classes: vec![MotionClass::Expand, MotionClass::Contract], ..small_spec(10) };
    let m = generate_synthetic(&spec, &EmulatorConfig::default(), dir.path()).unwrap();
    let mut net = [0i64; 2];
    for s in &m.samples {
        let events = read_events(m.resolve(&s.events)).unwrap();
        net[s.label] += events.events().iter().map(|e| e.p as i64).sum::<i64>();
    }
    assert!(net[0] > 0, "expand net polarity {}", net[0]);
    assert!(net[1] < 0, "contract net polarity {}", net[1]);
}

#[test]
fn dataset_windows_and_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { classes: vec![MotionClass::RotateCw, MotionClass::Blink], ..small_spec(5) };
    generate_synthetic(&spec, &EmulatorConfig::default(), dir.path()).unwrap();
    let ds = load_dataset(dir.path().join("manifest.json"), &WindowConfig::default()).unwrap();
    assert_eq!(ds.samples.len(), 10);
    for s in &ds.samples {
        assert_eq!(s.windows.len(), 9);
        assert_eq!(s.triplets().len(), 7);
        assert!(!s.padded);
    }
    assert_eq!(ds.class_samples(Split::Train, 32).len(), 8 * 7);
    assert_eq!(ds.recon_pairs(Split::Val, 32).len(), 2 * 9);

    // A single block of three windows gives one triplet.
    let one = WindowConfig { delta_t: 300_000, n: 3, variant: TieVariant::TT, channels: 9 };
    let ds = load_dataset(dir.path().join("manifest.json"), &one).unwrap();
    assert!(ds.samples.iter().all(|s| s.windows.len() == 3 && s.triplets().len() == 1));
}

#[test]
fn silent_sample_is_padded_with_degenerate_images() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { classes: vec![MotionClass::Expand, MotionClass::Blink], ..small_spec(1) };
    let mut m = generate_synthetic(&spec, &EmulatorConfig::default(), dir.path()).unwrap();
    // Replace the first sample with a still scene and no events.
    let still = GrayFrame::filled(64, 64, 80);
    let entry = &mut m.samples[0];
    entry.frames.truncate(2);
    entry.frame_times_us.truncate(2);
    for f in &entry.frames {
        write_frame_pgm(dir.path().join(f), &still).unwrap();
    }
    write_events(dir.path().join(&entry.events), &EventStream::empty(SensorGeometry::new(64, 64).unwrap())).unwrap();
    let cfg = WindowConfig { n: 1, ..WindowConfig::default() };
    let ds = evkit::io::load_from_manifest(&m, &cfg).unwrap();
    let s = &ds.samples[0];
    assert!(s.padded);
    assert_eq!(s.windows.len(), 3);
    assert!(s.windows.iter().all(|w| w.degenerate && w.rgb.iter().all(|&b| b == 0)));
    assert_eq!(s.triplets().len(), 1);
}

#[test]
fn missing_sample_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec { classes: vec![MotionClass::Expand, MotionClass::Blink], ..small_spec(1) };
    let m = generate_synthetic(&spec, &EmulatorConfig::default(), dir.path()).unwrap();
    std::fs::remove_file(m.resolve(&m.samples[1].events)).unwrap();
    let err = load_dataset(dir.path().join("manifest.json"), &WindowConfig::default()).unwrap_err();
    assert!(matches!(err, Error::MissingFile(_)));
}
