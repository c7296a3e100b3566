use std::fs;
use std::path::Path;

use super::*;

fn run_args(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["diarkit"];
    full.extend_from_slice(args);
    let code = main_with_args(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn split_fixture(dir: &Path) -> (String, String) {
    let r = dir.join("ref.rttm");
    let h = dir.join("hyp.rttm");
    fs::write(&r, "SPEAKER f 1 0.000 10.000 <NA> <NA> A <NA> <NA>\n").unwrap();
    fs::write(&h, "SPEAKER f 1 0.000 5.000 <NA> <NA> x <NA> <NA>\nSPEAKER f 1 5.000 5.000 <NA> <NA> y <NA> <NA>\n")
        .unwrap();
    (p(&r).to_string(), p(&h).to_string())
}

#[test]
fn score_reports_the_split_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = split_fixture(dir.path());
    let (code, out, _) = run_args(&["score", "--ref", &r, "--hyp", &h]);
    assert_eq!(code, 0);
    assert!(out.contains("DER 50.00%"), "{out}");
    assert!(out.contains("der=0.500000"), "{out}");

    let (code, out, _) = run_args(&["score", "--ref", &r, "--hyp", &h, "--collar", "0"]);
    assert_eq!(code, 0);
    assert!(out.contains("scored_time=10.000"), "{out}");

    let (code, out, _) = run_args(&["score", "--ref", &r, "--hyp", &r]);
    assert_eq!(code, 0);
    assert!(out.contains("DER 0.00%"), "{out}");
}

#[test]
fn rttm_parse_errors_are_data_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let (r, _) = split_fixture(dir.path());
    let bad = dir.path().join("bad.rttm");
    fs::write(&bad, "SPEAKER f 1 0.0 1.0 <NA> <NA> A <NA> <NA>\nSPEAKER f 1 zero 1.0 <NA> <NA> B <NA> <NA>\n").unwrap();
    let (code, _, err) = run_args(&["score", "--ref", &r, "--hyp", p(&bad)]);
    assert_eq!(code, 3);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn usage_and_io_exit_codes() {
    let (code, _, _) = run_args(&["score", "--ref", "only.rttm"]);
    assert_eq!(code, 1);
    let (code, _, _) = run_args(&["frobnicate"]);
    assert_eq!(code, 1);
    let (code, out, _) = run_args(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("diarize"));

    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("x.wav");
    crate::audio::save_wav(&crate::audio::AudioBuffer::mono(vec![0.1; 60_000], 16_000).unwrap(), &wav).unwrap();
    let missing = dir.path().join("nope.ckpt");
    let (code, _, err) = run_args(&["diarize", p(&wav), "--model", p(&missing)]);
    assert_eq!(code, 2);
    assert!(err.contains("nope.ckpt"), "{err}");
}

#[test]
fn synth_features_train_diarize_inspect_round() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let (code, out, err) = run_args(&[
        "synth", "--speakers", "2", "--seed", "3", "--duration", "8", "--dialogue-rounds", "1", "--turn-seconds", "4",
        "--out", p(&corpus),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("speakers=2"), "{out}");
    let manifest = fs::read_to_string(corpus.join("manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().filter(|l| !l.starts_with('#')).count(), 2);

    let wav = corpus.join("spk0.wav");
    let dump = dir.path().join("f.bin");
    let (code, out, _) = run_args(&["features", p(&wav), "--features", "gammatone", "--out", p(&dump)]);
    assert_eq!(code, 0);
    assert!(out.contains("rows=96 cols=191"), "{out}");
    let (code, out, _) = run_args(&["inspect", p(&dump)]);
    assert_eq!(code, 0);
    assert!(out.contains("type=features kind=gammatone rows=96 cols=191"), "{out}");

    let model = dir.path().join("m.ckpt");
    let report = dir.path().join("r.json");
    let (code, out, err) = run_args(&[
        "train", p(&corpus.join("manifest.tsv")), "--epochs", "1", "--hop", "1", "--seed", "2", "--out", p(&model),
        "--report", p(&report),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("classes=2"), "{out}");
    assert!(out.contains("heldout_accuracy="), "{out}");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["labels"], serde_json::json!(["spk0", "spk1"]));

    let (code, out, _) = run_args(&["inspect", p(&model)]);
    assert_eq!(code, 0);
    assert!(out.contains("type=checkpoint classes=2 features=cqt"), "{out}");
    assert!(out.contains("learnable_layers=11"), "{out}");

    let dialogue = corpus.join("dialogue3.wav");
    let hyp = dir.path().join("hyp.rttm");
    let (code, out, err) = run_args(&["diarize", p(&dialogue), "--model", p(&model), "--out", p(&hyp), "--jobs", "2"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("rttm="), "{out}");
    let (code, out, _) = run_args(&["score", "--ref", p(&corpus.join("dialogue3.rttm")), "--hyp", p(&hyp)]);
    assert_eq!(code, 0);
    assert!(out.contains("der="), "{out}");

    let (code, _, err) = run_args(&["diarize", p(&dialogue), "--model", p(&model), "--features", "logmel"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn single_class_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let speakers = crate::synth::make_speakers(1, 1).unwrap();
    crate::audio::save_wav(&crate::synth::render(&speakers[0], 4.0, 1), dir.path().join("a.wav")).unwrap();
    let m = dir.path().join("m.tsv");
    fs::write(&m, "a.wav\tonly\n").unwrap();
    let (code, _, err) = run_args(&["train", p(&m), "--out", p(&dir.path().join("x.ckpt"))]);
    assert_eq!(code, 3);
    assert!(err.contains("need ≥ 2 classes"), "{err}");
}

#[test]
fn short_stream_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("s.wav");
    crate::audio::save_wav(&crate::audio::AudioBuffer::mono(vec![0.1; 16_000], 16_000).unwrap(), &wav).unwrap();
    let (code, _, err) = run_args(&["features", p(&wav)]);
    assert_eq!(code, 3);
    assert!(err.contains("shorter than one"), "{err}");
}
