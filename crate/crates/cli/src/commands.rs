use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use evkit::emulator::{emulate_sequence, FrameSequence};
use evkit::event::{window_ranges, EventStream, TimeWindow};
use evkit::io::tensor::TensorF32;
use evkit::io::{
    generate_synthetic, load_dataset, read_events, read_frame_pgm, read_image_ppm, read_manifest,
    read_tensor, write_events, write_image_ppm, write_tensor, LoadedDataset, MotionClass, Split,
    SyntheticSpec, WindowConfig,
};
use evkit::repr::{tie_tensor, tie_to_rgb, TieVariant};
use evkit::toyml::{
    evaluate, load_checkpoint, pretrain, reconstruction_error, save_checkpoint, train, Checkpoint,
    ModelDims,
};

use crate::output::{confusion_table, csv_escape, Report};
use crate::{
    Cli, Command, EmulateArgs, EvalArgs, Format, InfoArgs, PretrainArgs, RepresentArgs, SplitChoice,
    SynthArgs, TrainArgs,
};

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<evkit::Error> for CliError {
    fn from(e: evkit::Error) -> Self {
        use evkit::Error as E;
        match &e {
            E::Io(io) if io.kind() != std::io::ErrorKind::NotFound => Self::internal(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            std::io::ErrorKind::NotFound => Self::usage(e.to_string()),
            _ => Self::internal(e.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Emulate(a) => emulate(a, cli.format),
        Command::Represent(a) => represent(a, cli.format),
        Command::Synth(a) => synth(a, cli.format),
        Command::Pretrain(a) => pretrain_cmd(a, cli.format),
        Command::Train(a) => train_cmd(a, cli.format),
        Command::Eval(a) => eval(a, cli.format),
        Command::Info(a) => info(a, cli.format),
    }
}

fn print(report: &Report, format: Format) {
    print!("{}", report.render(format));
}

/// Resolved configuration and seed, always on stderr.
fn echo_config(command: &str, config: &Value, seed: Option<u64>) {
    eprintln!("{command} config: {config}");
    if let Some(seed) = seed {
        eprintln!("seed: {seed}");
    }
}

fn emulate(a: &EmulateArgs, format: Format) -> CliResult {
    let cfg = a.emulator.config(a.seed);
    cfg.validate()?;
    echo_config("emulate", &json!({ "emulator": cfg, "interval_us": a.interval_us }), Some(a.seed));
    if !a.frames.is_dir() {
        return Err(CliError::usage(format!("frame directory {} not found", a.frames.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.frames)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if a.interval_us == 0 {
        return Err(CliError::usage("--interval-us must be positive"));
    }
    let frames = paths.iter().map(read_frame_pgm).collect::<evkit::Result<Vec<_>>>()?;
    let seq = FrameSequence::uniform(frames, a.interval_us)?;
    let stream = emulate_sequence(&seq, &cfg)?;
    write_events(&a.out, &stream)?;
    let sidecar = sidecar_path(&a.out);
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let doc = json!({
        "events": a.out.file_name().map(|n| n.to_string_lossy().into_owned()),
        "emulator": cfg,
        "frames": names,
        "frame_times_us": seq.timestamps(),
        "event_count": stream.len(),
        "width": stream.geometry().width,
        "height": stream.geometry().height,
    });
    let mut w = BufWriter::new(File::create(&sidecar)?);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::internal(e.to_string()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    let stats = stream.stats();
    let mut r = Report::new();
    r.add("events_path", a.out.display().to_string())
        .add("sidecar_path", sidecar.display().to_string())
        .add("frames", names.len())
        .add("count", stats.count)
        .add("positive", stats.positive)
        .add("negative", stats.negative)
        .add("duration_us", stats.duration_us);
    print(&r, format);
    Ok(())
}

fn sidecar_path(events: &Path) -> PathBuf {
    let mut s = events.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn represent(a: &RepresentArgs, format: Format) -> CliResult {
    echo_config(
        "represent",
        &json!({
            "variant": a.variant.code(),
            "channels": a.channels,
            "window": a.window,
            "delta_t_us": a.delta_t_us,
            "n": a.n,
        }),
        None,
    );
    let stream = read_events(&a.events)?;
    let geometry = stream.geometry();
    let image_and_tensor = |w: &TimeWindow<'_>| -> CliResult<_> {
        let t = tie_tensor(w, geometry, a.channels, a.variant)?;
        Ok((tie_to_rgb(&t)?, t))
    };
    let (image, tensor, count) = match (a.window, a.delta_t_us) {
        (Some(i), Some(dt)) => {
            let (first, last) = match (stream.first_time(), stream.last_time()) {
                (Some(f), Some(l)) => (f, l),
                _ => return Err(CliError::usage("cannot select a window of an empty stream")),
            };
            let ranges = window_ranges(stream.events(), first, last, dt, a.n)?;
            let r = ranges.get(i).ok_or_else(|| {
                CliError::usage(format!("window {i} out of range ({} windows)", ranges.len()))
            })?;
            let w = TimeWindow {
                t_start: r.t_start,
                t_end: r.t_end,
                end_inclusive: r.end_inclusive,
                events: &stream.events()[r.events.clone()],
            };
            let (img, t) = image_and_tensor(&w)?;
            (img, t, w.len())
        }
        _ => {
            let (img, t) = image_and_tensor(&stream.as_window())?;
            (img, t, stream.len())
        }
    };
    if count == 0 {
        log::warn!("no events in the selected range; writing a zero image");
    } else if image.degenerate {
        log::warn!("percentile range collapsed; writing a zero image");
    }
    write_image_ppm(&a.out, &image)?;
    if let Some(path) = &a.dump_tensor {
        write_tensor(path, &TensorF32::new(tensor.shape().to_vec(), tensor.to_f32())?)?;
    }
    let mut r = Report::new();
    r.add("image_path", a.out.display().to_string())
        .add("width", image.width)
        .add("height", image.height)
        .add("events", count)
        .add("z_lo", image.z_lo)
        .add("z_hi", image.z_hi)
        .add("degenerate", image.degenerate);
    print(&r, format);
    Ok(())
}

fn synth(a: &SynthArgs, format: Format) -> CliResult {
    let classes = a
        .classes
        .iter()
        .map(|c| c.trim().parse::<MotionClass>())
        .collect::<evkit::Result<Vec<_>>>()?;
    let spec = SyntheticSpec {
        classes,
        samples_per_class: a.samples_per_class,
        width: a.width,
        height: a.height,
        frames: a.frames,
        frame_interval_us: a.interval_us,
        noise: a.noise,
        val_fraction: a.val_fraction,
        seed: a.seed,
    };
    let emu = a.emulator.config(a.emulator_seed);
    echo_config("synth", &json!({ "spec": spec, "emulator": emu }), Some(a.seed));
    spec.validate()?;
    let manifest = generate_synthetic(&spec, &emu, &a.out)?;
    let (train, val) = manifest.split_counts();
    let mut r = Report::new();
    r.add("manifest", a.out.join("manifest.json").display().to_string())
        .add("samples", manifest.samples.len())
        .add("train", train)
        .add("val", val)
        .add("classes", manifest.classes.join(" "));
    print(&r, format);
    Ok(())
}

fn window_meta(meta: &mut BTreeMap<String, String>, w: &WindowConfig) {
    meta.insert("variant".into(), w.variant.code().into());
    meta.insert("channels".into(), w.channels.to_string());
    meta.insert("delta_t_us".into(), w.delta_t.to_string());
    meta.insert("n".into(), w.n.to_string());
}

fn window_from_meta(meta: &BTreeMap<String, String>) -> CliResult<WindowConfig> {
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| CliError::usage(format!("checkpoint metadata lacks '{k}'")))
    };
    let bad = |k: &str| CliError::usage(format!("checkpoint metadata '{k}' is malformed"));
    Ok(WindowConfig {
        variant: get("variant")?.parse::<TieVariant>().map_err(|_| bad("variant"))?,
        channels: get("channels")?.parse().map_err(|_| bad("channels"))?,
        delta_t: get("delta_t_us")?.parse().map_err(|_| bad("delta_t_us"))?,
        n: get("n")?.parse().map_err(|_| bad("n"))?,
    })
}

fn write_metrics(path: Option<&Path>, rows: &[evkit::toyml::MetricRow]) -> CliResult {
    if let Some(p) = path {
        evkit::toyml::train::write_metrics_csv(rows, BufWriter::new(File::create(p)?))?;
    }
    Ok(())
}

fn load(manifest: &Path, w: &WindowConfig) -> CliResult<LoadedDataset> {
    let ds = load_dataset(manifest, w)?;
    let padded = ds.samples.iter().filter(|s| s.padded).count();
    if padded > 0 {
        log::warn!("{padded} samples had fewer than 3 windows and were zero-padded");
    }
    Ok(ds)
}

fn pretrain_cmd(a: &PretrainArgs, format: Format) -> CliResult {
    let cfg = a.config();
    let window = a.window.config();
    echo_config("pretrain", &json!({ "train": cfg, "window": window }), Some(cfg.seed));
    cfg.validate()?;
    let ds = load(&a.manifest, &window)?;
    let dims = ModelDims {
        classes: ds.classes.len().max(2),
        ..ModelDims::default()
    };
    let side = dims.image_side;
    let pairs = ds.recon_pairs(Split::Train, side);
    let val = ds.recon_pairs(Split::Val, side);
    let (model, history) = pretrain(&pairs, Some(&val), &dims, &cfg)?;
    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), "pretrained".into());
    meta.insert("loss".into(), format!("{:?}", cfg.loss));
    meta.insert("seed".into(), cfg.seed.to_string());
    meta.insert("classes".into(), ds.classes.join(","));
    window_meta(&mut meta, &window);
    save_checkpoint(&a.out, &Checkpoint { model: model.clone(), meta })?;
    write_metrics(a.metrics.as_deref(), &history)?;
    let mut r = Report::new();
    r.add("checkpoint", a.out.display().to_string())
        .add("train_pairs", pairs.len())
        .add("val_pairs", val.len());
    if !val.is_empty() {
        r.add("val_reconstruction_mse", reconstruction_error(&model, &val)?);
    }
    print(&r, format);
    Ok(())
}

fn train_cmd(a: &TrainArgs, format: Format) -> CliResult {
    let cfg = a.config();
    let window = a.window.config();
    echo_config("train", &json!({ "train": cfg, "window": window, "ckpt": a.ckpt }), Some(cfg.seed));
    cfg.validate()?;
    let pretrained = a.ckpt.as_ref().map(load_checkpoint).transpose()?;
    if let Some(p) = &pretrained {
        if let Ok(w) = window_from_meta(&p.meta) {
            if w != window {
                log::warn!("window settings differ from the pretrained checkpoint's");
            }
        }
    }
    let ds = load(&a.manifest, &window)?;
    let dims = match &pretrained {
        Some(p) => ModelDims {
            classes: ds.classes.len().max(2),
            ..p.model.dims.clone()
        },
        None => ModelDims {
            classes: ds.classes.len().max(2),
            ..ModelDims::default()
        },
    };
    let side = dims.image_side;
    let train_set = ds.class_samples(Split::Train, side);
    let val_set = ds.class_samples(Split::Val, side);
    let (model, history) = train(
        &train_set,
        Some(&val_set),
        &dims,
        &cfg,
        pretrained.as_ref().map(|p| &p.model),
    )?;
    let mut meta = BTreeMap::new();
    meta.insert("kind".into(), "classifier".into());
    meta.insert("regime".into(), cfg.encoder_mode.to_string());
    meta.insert("seed".into(), cfg.seed.to_string());
    meta.insert("classes".into(), ds.classes.join(","));
    window_meta(&mut meta, &window);
    save_checkpoint(&a.out, &Checkpoint { model, meta })?;
    write_metrics(a.metrics.as_deref(), &history)?;
    let mut r = Report::new();
    r.add("checkpoint", a.out.display().to_string())
        .add("regime", cfg.encoder_mode.to_string())
        .add("lstm", cfg.use_lstm)
        .add("train_sequences", train_set.len())
        .add("val_sequences", val_set.len());
    if let Some(last) = history.iter().rev().find(|h| h.split == "val") {
        r.add("val_accuracy", last.accuracy.unwrap_or(f64::NAN));
        r.add("val_loss", last.loss);
    }
    print(&r, format);
    Ok(())
}

fn eval(a: &EvalArgs, format: Format) -> CliResult {
    let ckpt = load_checkpoint(&a.model)?;
    let window = window_from_meta(&ckpt.meta)?;
    echo_config(
        "eval",
        &json!({ "model": a.model, "split": format!("{:?}", a.split).to_lowercase(), "window": window }),
        ckpt.meta.get("seed").and_then(|s| s.parse().ok()),
    );
    let ds = load(&a.manifest, &window)?;
    let split = match a.split {
        SplitChoice::Train => Split::Train,
        SplitChoice::Val => Split::Val,
    };
    let samples = ds.class_samples(split, ckpt.model.dims.image_side);
    if ds.classes.len() > ckpt.model.dims.classes {
        return Err(CliError::usage(format!(
            "manifest has {} classes but the model predicts {}",
            ds.classes.len(),
            ckpt.model.dims.classes
        )));
    }
    let e = evaluate(&ckpt.model, &samples)?;
    let mut names = ds.classes.clone();
    while names.len() < e.confusion.len() {
        names.push(format!("class{}", names.len()));
    }
    eprint!("{}", confusion_table(&names, &e.confusion));
    match format {
        Format::Json => {
            let doc = json!({
                "accuracy": e.accuracy,
                "loss": e.loss,
                "sequences": samples.len(),
                "classes": names,
                "confusion": e.confusion,
                "counts": e.counts,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("plain values"));
        }
        Format::Csv => {
            println!("accuracy,{}", e.accuracy);
            println!("sequences,{}", samples.len());
            let header: Vec<String> = names.iter().map(|n| csv_escape(n)).collect();
            println!("true\\pred,{}", header.join(","));
            for (name, row) in names.iter().zip(&e.confusion) {
                let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                println!("{},{}", csv_escape(name), cells.join(","));
            }
        }
    }
    Ok(())
}

fn info(a: &InfoArgs, format: Format) -> CliResult {
    echo_config("info", &json!({ "path": a.path }), None);
    let mut head = [0u8; 4];
    let n = File::open(&a.path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::usage(format!("{} not found", a.path.display())),
            _ => e.into(),
        })?
        .read(&mut head)?;
    let head = &head[..n];
    let mut r = Report::new();
    if head.starts_with(b"EVST") {
        let stream: EventStream = read_events(&a.path)?;
        let s = stream.stats();
        r.add("kind", "events")
            .add("width", stream.geometry().width)
            .add("height", stream.geometry().height)
            .add("count", s.count)
            .add("duration_us", s.duration_us)
            .add("mean_rate_hz", s.mean_rate_hz)
            .add("positive", s.positive)
            .add("negative", s.negative)
            .add("polarity_balance", s.polarity_balance);
    } else if head.starts_with(b"EVTK") {
        let c = load_checkpoint(&a.path)?;
        r.add("kind", "checkpoint")
            .add("parameters", c.model.num_params())
            .add("use_lstm", c.model.use_lstm)
            .add("classes", c.model.dims.classes)
            .add("feature", c.model.dims.feature)
            .add("image_side", c.model.dims.image_side);
        for (k, v) in &c.meta {
            r.add(&format!("meta.{k}"), v.clone());
        }
    } else if head.starts_with(b"EVTN") {
        let t = read_tensor(&a.path)?;
        let (lo, hi) = t
            .data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        r.add("kind", "tensor").add("shape", shape.join("x")).add("values", t.data.len());
        if !t.data.is_empty() {
            r.add("min", lo as f64).add("max", hi as f64);
        }
    } else if head.starts_with(b"P5") {
        let f = read_frame_pgm(&a.path)?;
        let mean = f.data.iter().map(|&v| v as f64).sum::<f64>() / f.data.len() as f64;
        r.add("kind", "pgm").add("width", f.width).add("height", f.height).add("mean", mean);
    } else if head.starts_with(b"P6") {
        let im = read_image_ppm(&a.path)?;
        r.add("kind", "ppm").add("width", im.width).add("height", im.height);
    } else if head.first() == Some(&b'{') {
        let m = read_manifest(&a.path)?;
        let (train, val) = m.split_counts();
        r.add("kind", "manifest")
            .add("samples", m.samples.len())
            .add("train", train)
            .add("val", val)
            .add("classes", m.classes.join(" "));
    } else {
        return Err(CliError::usage(format!("{}: unrecognized file format", a.path.display())));
    }
    print(&r, format);
    Ok(())
}
