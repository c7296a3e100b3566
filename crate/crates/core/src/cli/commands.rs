use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;

use super::manifest::{Manifest, Source, SplitTag};
use super::{
    CliError, DiarizeArgs, DumpFormat, FeaturesArgs, InspectArgs, ScoreArgs, SynthArgs, TrainArgs, MODEL_DIR_ENV,
};
use crate::audio::{load_wav, resample, save_wav, segment_stream, AudioBuffer, ANALYSIS_RATE, SEGMENT_SECONDS};
use crate::features::{normalize, read_binary, write_binary, write_csv, FeatureExtractor, FeatureKind};
use crate::metrics::{der_totals, format_rttm, read_rttm, parse_rttm, write_rttm, DerTotals};
use crate::model::{Dataset, RcnnConfig, RcnnModel, TrainOptions};
use crate::nn::Layer;
use crate::pipeline::{diarize as run_pipeline, PipelineConfig, Timeline, Turn};
use crate::synth::{make_dialogue, make_speakers, render};

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("cannot {what} {}: {e}", path.display()))
}

/// Reads a WAV file as 16 kHz mono, optionally reinterpreting its rate first.
fn load_audio(path: &Path, rate_override: Option<u32>) -> Result<AudioBuffer, CliError> {
    let mut audio = load_wav(path)?;
    if let Some(rate) = rate_override {
        if rate == 0 {
            return Err(CliError::Usage("--sample-rate must be positive".into()));
        }
        audio = AudioBuffer::interleaved(audio.samples().to_vec(), rate, audio.channels())?;
    }
    let mono = audio.to_mono();
    Ok(if mono.sample_rate() == ANALYSIS_RATE { mono } else { resample(&mono, ANALYSIS_RATE) })
}

fn too_short(path: &Path, audio: &AudioBuffer) -> CliError {
    CliError::Data(format!(
        "{}: {:.3} s of audio is shorter than one {SEGMENT_SECONDS} s window; no segments",
        path.display(),
        audio.duration()
    ))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "stream".into())
}

pub fn features(a: FeaturesArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let audio = load_audio(&a.input, a.sample_rate)?;
    let windows = segment_stream(&audio)?;
    if windows.is_empty() {
        return Err(too_short(&a.input, &audio));
    }
    let window = windows.get(a.segment).ok_or_else(|| {
        CliError::Usage(format!("segment {} out of range; the stream has {} windows", a.segment, windows.len()))
    })?;
    let mut feat = FeatureExtractor::new(a.kind).extract(window.samples);
    if !a.raw {
        feat = normalize(&feat)?;
    }
    let mut sink: Box<dyn Write + '_> = match &a.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err("create", p, e))?)),
        None => Box::new(&mut *out),
    };
    match a.format {
        DumpFormat::Bin => write_binary(&feat, &mut sink)?,
        DumpFormat::Csv => write_csv(&feat, &mut sink)?,
    }
    sink.flush().map_err(|e| CliError::Io(e.to_string()))?;
    drop(sink);
    if a.out.is_some() {
        writeln!(
            out,
            "kind={} rows={} cols={} segment={} start={:.3} normalized={}",
            feat.kind(),
            feat.rows(),
            feat.cols(),
            a.segment,
            window.start_time,
            feat.is_normalized()
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

/// One labeled stretch of training audio.
struct Chunk {
    audio: AudioBuffer,
    label: String,
    split: Option<SplitTag>,
}

fn manifest_chunks(manifest: &Manifest) -> Result<Vec<Chunk>, CliError> {
    let mut chunks = Vec::new();
    for r in &manifest.records {
        let audio = load_audio(&r.wav, None)?;
        match &r.source {
            Source::Label(label) => chunks.push(Chunk { audio, label: label.clone(), split: r.split }),
            Source::Rttm(path) => {
                let timelines = read_rttm(path)?;
                let stem = file_stem(&r.wav);
                let timeline = match timelines.iter().find(|t| t.file_id() == stem) {
                    Some(t) => t,
                    None if timelines.len() == 1 => &timelines[0],
                    None => {
                        return Err(CliError::Data(format!(
                            "line {}: {} has no file '{stem}'",
                            r.line,
                            path.display()
                        )))
                    }
                };
                for t in timeline.turns() {
                    let end = t.end.min(audio.duration());
                    if end > t.start {
                        chunks.push(Chunk {
                            audio: audio.slice_seconds(t.start, end),
                            label: t.speaker.clone(),
                            split: r.split,
                        });
                    }
                }
            }
        }
    }
    Ok(chunks)
}

pub fn train(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.split > 0.0 && a.split < 1.0) {
        return Err(CliError::Usage(format!("--split must lie strictly between 0 and 1, got {}", a.split)));
    }
    if !(a.hop > 0.0) || a.epochs == 0 || a.batch == 0 {
        return Err(CliError::Usage("--hop, --epochs and --batch must be positive".into()));
    }
    let manifest = Manifest::load(&a.manifest)?;
    let chunks = manifest_chunks(&manifest)?;
    let labels: Vec<String> = chunks.iter().map(|c| c.label.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if labels.len() < 2 {
        return Err(CliError::Data(format!("need ≥ 2 classes, the manifest has {}", labels.len())));
    }
    let extractor = FeatureExtractor::new(a.kind);
    let (mut train_set, mut test_set) = (Dataset::default(), Dataset::default());
    for c in &chunks {
        let index = labels.binary_search(&c.label).expect("label collected above");
        let d = Dataset::from_audio(&c.audio, index, &extractor, a.hop)?;
        match c.split {
            Some(SplitTag::Test) => test_set.extend(d),
            _ => train_set.extend(d),
        }
    }
    if !manifest.is_tagged() {
        let all = std::mem::take(&mut train_set);
        (train_set, test_set) = all.split(a.split, a.seed)?;
    }
    if train_set.is_empty() {
        return Err(CliError::Data("no training window of 3.072 s could be cut from the manifest audio".into()));
    }
    info!("{} training and {} held-out windows over {} classes", train_set.len(), test_set.len(), labels.len());

    let config = RcnnConfig { head: a.head, ..RcnnConfig::new(labels.len(), a.kind) };
    let mut model = RcnnModel::build(config, a.seed)?;
    let opts = TrainOptions {
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        target_accuracy: a.target_accuracy,
        ..Default::default()
    };
    let heldout = (!test_set.is_empty()).then_some(&test_set);
    let report = model.train(&train_set, heldout, &opts)?;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    for e in &report.epochs {
        let held = e.heldout_accuracy.map_or("-".to_string(), |h| format!("{:.4}", h));
        writeln!(out, "epoch {:>3}  loss {:.5}  train {:.4}  held-out {held}  {:.1}s", e.epoch, e.loss, e.train_accuracy, e.seconds)
            .map_err(w)?;
    }
    model.save(&a.out)?;
    let last = report.epochs.last().expect("at least one epoch ran");
    writeln!(
        out,
        "classes={} train_segments={} heldout_segments={} epochs={} loss={:.6} train_accuracy={:.6} heldout_accuracy={} seconds={:.3} checkpoint={}",
        labels.len(),
        train_set.len(),
        test_set.len(),
        report.epochs.len(),
        last.loss,
        last.train_accuracy,
        last.heldout_accuracy.map_or("nan".to_string(), |h| format!("{h:.6}")),
        report.wall_clock_seconds,
        a.out.display()
    )
    .map_err(w)?;
    if let Some(path) = &a.report {
        let doc = json!({
            "labels": labels,
            "features": a.kind.name(),
            "checkpoint": a.out.display().to_string(),
            "train_segments": train_set.len(),
            "heldout_segments": test_set.len(),
            "stopped_early": report.stopped_early,
            "wall_clock_seconds": report.wall_clock_seconds,
            "final_heldout_accuracy": last.heldout_accuracy,
            "epochs": report.epochs.iter().map(|e| json!({
                "epoch": e.epoch,
                "loss": e.loss,
                "train_accuracy": e.train_accuracy,
                "heldout_accuracy": e.heldout_accuracy,
                "seconds": e.seconds,
            })).collect::<Vec<_>>(),
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(path, text).map_err(|e| io_err("write", path, e))?;
    }
    Ok(())
}

fn model_path(a: &DiarizeArgs) -> Result<PathBuf, CliError> {
    match (&a.model, std::env::var_os(MODEL_DIR_ENV)) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => Ok(PathBuf::from(dir).join("model.ckpt")),
        (None, None) => Err(CliError::Usage(format!("no --model given and {MODEL_DIR_ENV} is not set"))),
    }
}

fn turn_table(timeline: &Timeline) -> String {
    let mut s = format!("{:>10} {:>10} {:>9}  speaker\n", "start", "end", "duration");
    for t in timeline.turns() {
        s.push_str(&format!("{:>10.3} {:>10.3} {:>9.3}  {}\n", t.start, t.end, t.duration(), t.speaker));
    }
    s
}

pub fn diarize(a: DiarizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let path = model_path(&a)?;
    if !path.is_file() {
        return Err(CliError::Io(format!("model file not found: {}", path.display())));
    }
    let model = RcnnModel::load(&path)?;
    let audio = load_audio(&a.input, a.sample_rate)?;
    if segment_stream(&audio)?.is_empty() {
        return Err(too_short(&a.input, &audio));
    }
    let config = PipelineConfig {
        feature_kind: a.kind,
        threshold: a.threshold,
        threshold_mode: a.threshold_mode,
        smoothing: a.smoothing,
        min_turn: a.min_turn,
        vad_threshold_db: a.vad_db,
        jobs: a.jobs,
        ..Default::default()
    };
    let file_id = a.file_id.clone().unwrap_or_else(|| file_stem(&a.input));
    let result = run_pipeline(&file_id, &audio, &model, &config)?;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    let table = turn_table(&result.timeline);
    match &a.out {
        Some(p) => {
            write_rttm(&result.timeline, p)?;
            write!(out, "{table}").map_err(w)?;
            writeln!(out, "speakers={} turns={} rttm={}", result.timeline.speakers().len(), result.timeline.len(), p.display())
                .map_err(w)?;
        }
        None => {
            write!(out, "{}", format_rttm(&result.timeline)).map_err(w)?;
            eprint!("{table}");
        }
    }
    Ok(())
}

pub fn score(a: ScoreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.collar >= 0.0) {
        return Err(CliError::Usage(format!("--collar must be non-negative, got {}", a.collar)));
    }
    let refs = read_rttm(&a.reference)?;
    let hyps = read_rttm(&a.hyp)?;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    let mut total = DerTotals::default();
    let mut mapping = Vec::new();
    for r in &refs {
        let empty = Timeline::empty(r.file_id());
        let h = hyps.iter().find(|h| h.file_id() == r.file_id()).unwrap_or(&empty);
        let (t, m) = der_totals(r, h, a.collar);
        total.add(&t);
        mapping.extend(m);
    }
    for h in hyps.iter().filter(|h| !refs.iter().any(|r| r.file_id() == h.file_id())) {
        log::warn!("hypothesis file '{}' has no reference and is ignored", h.file_id());
    }
    let report = total.report(mapping)?;
    writeln!(out, "E_Spk  {:6.2}%", 100.0 * report.e_spk).map_err(w)?;
    writeln!(out, "E_FA   {:6.2}%", 100.0 * report.e_fa).map_err(w)?;
    writeln!(out, "E_Miss {:6.2}%", 100.0 * report.e_miss).map_err(w)?;
    writeln!(out, "DER {:.2}%", 100.0 * report.der).map_err(w)?;
    writeln!(
        out,
        "der={:.6} e_spk={:.6} e_fa={:.6} e_miss={:.6} scored_time={:.3} files={} collar={}",
        report.der,
        report.e_spk,
        report.e_fa,
        report.e_miss,
        report.scored_time,
        refs.len(),
        a.collar
    )
    .map_err(w)?;
    Ok(())
}

pub fn synth(a: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.duration > 0.0) || !(a.turn_seconds > 0.0) {
        return Err(CliError::Usage("--duration and --turn-seconds must be positive".into()));
    }
    fs::create_dir_all(&a.out).map_err(|e| io_err("create", &a.out, e))?;
    let speakers = make_speakers(a.speakers, a.seed)?;
    let mut manifest = String::from("# wav\tlabel\n");
    for s in &speakers {
        let label = s.label();
        let audio = render(s, a.duration, a.seed);
        save_wav(&audio, a.out.join(format!("{label}.wav")))?;
        let timeline = Timeline::new(label.clone(), vec![Turn::new(0.0, audio.duration(), label.clone())])
            .expect("one positive-length turn");
        write_rttm(&timeline, a.out.join(format!("{label}.rttm")))?;
        manifest.push_str(&format!("{label}.wav\t{label}\n"));
    }
    let manifest_path = a.out.join("manifest.tsv");
    fs::write(&manifest_path, manifest).map_err(|e| io_err("write", &manifest_path, e))?;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    if let Some(rounds) = a.dialogue_rounds.filter(|&r| r > 0) {
        let plan: Vec<(usize, f64)> =
            (0..rounds).flat_map(|_| (0..speakers.len()).map(|i| (i, a.turn_seconds))).collect();
        let (audio, reference) = make_dialogue(&speakers, &plan, a.seed)?;
        save_wav(&audio, a.out.join(format!("{}.wav", reference.file_id())))?;
        write_rttm(&reference, a.out.join(format!("{}.rttm", reference.file_id())))?;
        writeln!(out, "dialogue={} turns={} seconds={:.3}", reference.file_id(), reference.len(), audio.duration())
            .map_err(w)?;
    }
    writeln!(out, "speakers={} seed={} seconds_each={} dir={}", speakers.len(), a.seed, a.duration, a.out.display())
        .map_err(w)?;
    Ok(())
}

pub fn inspect(a: InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    File::open(&a.path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err("read", &a.path, e))?;
    let w = |e: std::io::Error| CliError::Io(e.to_string());
    if bytes.starts_with(b"DIARKIT\0") {
        let model = RcnnModel::from_bytes(&bytes)?;
        let params: usize = model.network().params().iter().map(|p| p.value.len()).sum();
        let config = serde_json::to_string_pretty(model.config()).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(out, "checkpoint {}\n{config}", a.path.display()).map_err(w)?;
        writeln!(
            out,
            "type=checkpoint classes={} features={} steps={} parameters={} learnable_layers={}",
            model.n_classes(),
            model.feature_kind(),
            model.steps(),
            params,
            model.learnable_layers()
        )
        .map_err(w)?;
        return Ok(());
    }
    if bytes.starts_with(b"RIFF") {
        let audio = load_wav(&a.path)?;
        let peak = audio.samples().iter().fold(0f32, |m, &x| m.max(x.abs()));
        writeln!(
            out,
            "type=wav sample_rate={} channels={} frames={} seconds={:.3} peak={:.4}",
            audio.sample_rate(),
            audio.channels(),
            audio.frames(),
            audio.duration(),
            peak
        )
        .map_err(w)?;
        return Ok(());
    }
    if bytes.first().is_some_and(|&c| FeatureKind::from_code(c).is_some()) {
        if let Ok(feat) = read_binary(bytes.as_slice()) {
            let v = feat.values();
            let (lo, hi) = v.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
            let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len().max(1) as f64;
            writeln!(
                out,
                "type=features kind={} rows={} cols={} min={lo:.4} max={hi:.4} mean={mean:.4}",
                feat.kind(),
                feat.rows(),
                feat.cols()
            )
            .map_err(w)?;
            return Ok(());
        }
    }
    if let Ok(text) = std::str::from_utf8(&bytes) {
        if let Ok(timelines) = parse_rttm(text) {
            if !timelines.is_empty() {
                for t in &timelines {
                    writeln!(out, "file {}\n{}", t.file_id(), turn_table(t)).map_err(w)?;
                }
                let turns: usize = timelines.iter().map(Timeline::len).sum();
                writeln!(out, "type=rttm files={} turns={turns}", timelines.len()).map_err(w)?;
                return Ok(());
            }
        }
    }
    Err(CliError::Data(format!("{}: not a checkpoint, WAV, feature dump or RTTM file", a.path.display())))
}
