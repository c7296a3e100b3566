//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.
//!
//! Tests hold a shared lock so the wall-clock budgets are measured without
//! competing for the CPU. The classifier trained for criterion 6 is reused by
//! criterion 7.

use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use diarkit::features::{
    cqt_center, pre_emphasis, stft_magnitude, FeatureExtractor, FeatureKind, BINS, N_BANDS, PRE_EMPHASIS,
};
use diarkit::metrics::{assignment_weight, der, format_rttm, max_weight_assignment, parse_rttm};
use diarkit::model::{Dataset, Head, Rcnn, RcnnConfig, RcnnModel, TrainOptions, TrainReport};
use diarkit::nn::{
    glorot_uniform, grad_check, BatchNorm, Conv2d, Dense, Dropout, Elu, Gru, Layer, MaxPool2d, NnRng, Readout,
    SequenceReadout, Tensor, ToSequence,
};
use diarkit::pipeline::{analyze, track, PipelineConfig, Timeline, Turn, WindowOutputs};
use diarkit::synth::{make_dialogue, make_speakers, render};
use diarkit::tracker::{aggregate, Embedding, SpeakerRegistry, ThresholdMode};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} ({name}): {} | {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------- criterion 1

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    glorot_uniform(shape, 1, 1, &mut NnRng::seed_from_u64(seed))
}

#[test]
fn criterion_1_gradient_correctness() {
    let _g = serial();
    let t = Instant::now();
    let eps = 1e-4;
    let mut results: Vec<(String, f64)> = Vec::new();
    let mut check = |name: &str, layer: &mut dyn Layer<f64>, x: &Tensor<f64>, training: bool| {
        let r = grad_check(layer, x, eps, training).unwrap();
        results.push((name.to_string(), r.max_rel_error));
    };

    let mut rng = NnRng::seed_from_u64(1);
    let mut dense = Dense::<f64>::new(5, 4, &mut rng);
    dense.bias.value = random(&[4], 2);
    check("dense", &mut dense, &random(&[3, 5], 3), false);

    let mut conv = Conv2d::<f64>::new(2, 3, 3, &mut rng);
    conv.bias.value = random(&[3], 5);
    check("conv2d", &mut conv, &random(&[2, 2, 3, 5], 6), false);

    let mut gru = Gru::<f64>::new(4, 3, &mut rng);
    gru.b.value = random(&[9], 9);
    check("gru", &mut gru, &random(&[2, 3, 4], 10), false);

    let mut bn = BatchNorm::<f64>::new(3);
    bn.gamma.value = random(&[3], 11).map(|g| g + 1.0);
    bn.beta.value = random(&[3], 12);
    let x = random(&[2, 3, 2, 3], 13).map(|v| 3.0 * v);
    check("batchnorm (batch statistics)", &mut bn, &x, true);
    check("batchnorm (running statistics)", &mut bn, &x, false);

    let x = random(&[2, 2, 4, 6], 14).map(|v| 4.0 * v);
    check("elu", &mut Elu::new(), &x, false);
    check("maxpool", &mut MaxPool2d::new(2, 3), &x, false);
    check("dropout", &mut Dropout::new(0.3).unwrap(), &x, true);
    check("to_sequence", &mut ToSequence::new(), &random(&[2, 3, 1, 4], 15), false);
    check("readout", &mut SequenceReadout::new(Readout::Last), &random(&[2, 4, 3], 16), false);

    for (head, training) in [(Head::Sigmoid, false), (Head::Softmax, true)] {
        let config = RcnnConfig { head, ..RcnnConfig::tiny(2) };
        let mut net = Rcnn::<f64>::build(&config, &mut NnRng::seed_from_u64(21), true).unwrap();
        // batch norm shifts start at zero; give every parameter a nonzero value
        for (i, p) in net.params_mut().into_iter().enumerate() {
            if p.value.data().iter().all(|&v| v == 0.0) {
                p.value = random(p.value.shape(), 100 + i as u64).map(|v| 0.5 * v);
            }
        }
        let x = random(&[2, 1, 96, 24], 22).map(|v| 2.0 * v);
        let name = format!("tiny rcnn ({head:?}, {})", if training { "train" } else { "eval" });
        check(&name, &mut net, &x, training);
    }

    let elapsed = t.elapsed();
    for (name, err) in &results {
        println!("  {name:<32} max relative error {err:.2e}");
    }
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    verdict(
        1,
        "gradient correctness",
        worst < 1e-5 && elapsed < Duration::from_secs(60),
        &format!("worst {worst:.2e} < 1e-5 over {} checks, {:.1} s < 60 s", results.len(), elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------- criterion 2

/// Random timeline with up to `speakers` labels over at most `span` seconds;
/// `grid` snaps every boundary to multiples of that step.
fn random_timeline(rng: &mut ChaCha8Rng, id: &str, speakers: usize, span: f64, grid: Option<f64>) -> Timeline {
    let snap = |t: f64| grid.map_or(t, |g| (t / g).round() * g);
    let span = snap(span);
    let mut turns = Vec::new();
    for s in 0..speakers {
        let mut t = snap(rng.gen_range(0.0..4.0));
        loop {
            let end = snap(t + rng.gen_range(0.3..9.0)).min(span);
            if end <= t {
                break;
            }
            turns.push(Turn::new(t, end, format!("{id}{s}")));
            t = snap(end + rng.gen_range(0.05..6.0));
            if t >= span {
                break;
            }
        }
    }
    Timeline::from_unsorted("f", turns).unwrap()
}

/// Independent frame-level DER: frames scored by center, collars tested
/// directly against every reference boundary, mapping by exhaustive search.
/// Returns `(error seconds, scored seconds)`.
fn frame_oracle(reference: &Timeline, hypothesis: &Timeline, collar: f64, frame: f64) -> (f64, f64) {
    let refs = reference.speakers();
    let hyps = hypothesis.speakers();
    let end = reference.end().max(hypothesis.end()) + frame;
    let n = (end / frame).ceil() as usize;
    let active = |t: &Timeline, who: &str, c: f64| t.turns().iter().any(|u| u.speaker == who && u.start <= c && c < u.end);
    let bounds: Vec<f64> = reference.turns().iter().flat_map(|u| [u.start, u.end]).collect();
    let mut frames: Vec<(Vec<bool>, Vec<bool>)> = Vec::new();
    for i in 0..n {
        let c = (i as f64 + 0.5) * frame;
        if bounds.iter().any(|&b| c >= b - collar && c < b + collar) {
            continue;
        }
        frames.push((refs.iter().map(|r| active(reference, r, c)).collect(), hyps.iter().map(|h| active(hypothesis, h, c)).collect()));
    }
    let mut best_correct = 0usize;
    let mut assign = vec![None; hyps.len()];
    fn search(h: usize, used: &mut Vec<bool>, assign: &mut Vec<Option<usize>>, frames: &[(Vec<bool>, Vec<bool>)], best: &mut usize) {
        if h == assign.len() {
            let correct = frames.iter().map(|(r, hy)| (0..assign.len()).filter(|&j| hy[j] && assign[j].is_some_and(|k| r[k])).count()).sum();
            *best = (*best).max(correct);
            return;
        }
        assign[h] = None;
        search(h + 1, used, assign, frames, best);
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                assign[h] = Some(k);
                search(h + 1, used, assign, frames, best);
                used[k] = false;
            }
        }
        assign[h] = None;
    }
    search(0, &mut vec![false; refs.len()], &mut assign, &frames, &mut best_correct);
    let mut errors = 0usize;
    let mut scored = 0usize;
    for (r, h) in &frames {
        let nr = r.iter().filter(|&&x| x).count();
        let nh = h.iter().filter(|&&x| x).count();
        scored += nr;
        errors += nr.max(nh);
    }
    // miss + fa + (min − correct) = max(nr, nh) − correct
    ((errors - best_correct) as f64 * frame, scored as f64 * frame)
}

/// Seconds the frame raster may misattribute: one frame per turn boundary,
/// and per collar edge one frame weighted by the labels active there.
fn quantization_budget(reference: &Timeline, hypothesis: &Timeline, collar: f64, frame: f64) -> f64 {
    let active_at = |p: f64| {
        reference.turns().iter().chain(hypothesis.turns()).filter(|u| u.start <= p + frame && p - frame < u.end).count()
    };
    let turn_points = 2 * (reference.len() + hypothesis.len());
    let collar_weight: usize = reference
        .turns()
        .iter()
        .flat_map(|u| [u.start, u.end])
        .flat_map(|b| [b - collar, b + collar])
        .map(active_at)
        .sum();
    frame * (turn_points + collar_weight) as f64
}

#[test]
fn criterion_2_der_oracle_equivalence() {
    let _g = serial();
    let t = Instant::now();
    let (collar, frame) = (0.25, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let mut worst_grid = 0.0f64;
    let mut worst_ratio = 0.0f64;
    let mut pairs = 0;
    for case in 0..120 {
        let grid = (case % 2 == 0).then_some(frame);
        let span = rng.gen_range(10.0..60.0);
        let (nr, nh) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let r = random_timeline(&mut rng, "r", nr, span, grid);
        let h = random_timeline(&mut rng, "h", nh, span, grid);
        if r.is_empty() {
            continue;
        }
        let (err_f, scored_f) = frame_oracle(&r, &h, collar, frame);
        let Ok(report) = der(&r, &h, collar) else {
            if scored_f > 0.0 {
                failures.push(format!("case {case}: scorer rejected a scorable pair"));
            }
            continue;
        };
        if scored_f == 0.0 {
            continue;
        }
        pairs += 1;
        let der_f = err_f / scored_f;
        let diff = (report.der - der_f).abs();
        if grid.is_some() {
            worst_grid = worst_grid.max(diff);
            if diff > 1e-9 {
                failures.push(format!("case {case} (grid): interval {} vs frame {der_f}", report.der));
            }
        } else {
            let budget = quantization_budget(&r, &h, collar, frame);
            let tol = budget * (1.0 + der_f) / (report.scored_time - budget).max(1e-9);
            worst_ratio = worst_ratio.max(diff / tol);
            if diff > tol {
                failures.push(format!("case {case}: |{} − {der_f}| > {tol}", report.der));
            }
        }
        // identity and relabeling
        if der(&r, &r, collar).unwrap().der != 0.0 {
            failures.push(format!("case {case}: DER(t, t) ≠ 0"));
        }
        let renamed_h = h.relabeled(|s| format!("q{}", s.chars().rev().collect::<String>()));
        let renamed_r = r.relabeled(|s| format!("z{s}"));
        let again = der(&renamed_r, &renamed_h, collar).unwrap().der;
        if (again - report.der).abs() > 1e-12 {
            failures.push(format!("case {case}: relabeling changed DER {} → {again}", report.der));
        }
    }
    let elapsed = t.elapsed();
    verdict(
        2,
        "DER oracle equivalence",
        failures.is_empty() && pairs >= 100 && elapsed < Duration::from_secs(30),
        &format!(
            "{pairs} pairs; grid-aligned max |Δ| {worst_grid:.1e}; off-grid max |Δ|/quantization bound {worst_ratio:.3}; {:.1} s < 30 s; failures {:?}",
            elapsed.as_secs_f64(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

// ---------------------------------------------------------------- criterion 3

fn brute_force_best(w: &[Vec<f64>]) -> f64 {
    fn go(i: usize, w: &[Vec<f64>], used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if i == w.len() {
            *best = best.max(acc);
            return;
        }
        go(i + 1, w, used, acc, best);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(i + 1, w, used, acc + w[i][j], best);
                used[j] = false;
            }
        }
    }
    let cols = w.first().map_or(0, Vec::len);
    let mut best = 0.0;
    go(0, w, &mut vec![false; cols], 0.0, &mut best);
    best
}

#[test]
fn criterion_3_optimal_mapping() {
    let _g = serial();
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut cases = 0;
    let mut worst = 0.0f64;
    let mut invalid = 0;
    for rows in 1..=6 {
        for cols in 1..=6 {
            for rep in 0..40 {
                let w: Vec<Vec<f64>> = (0..rows)
                    .map(|_| {
                        (0..cols)
                            .map(|_| match rep % 3 {
                                0 => rng.gen_range(0.0..100.0),
                                1 => rng.gen_range(0..4) as f64,
                                _ => if rng.gen_bool(0.4) { rng.gen_range(0.0..30.0) } else { 0.0 },
                            })
                            .collect()
                    })
                    .collect();
                let a = max_weight_assignment(&w);
                let mut seen = vec![false; cols];
                for j in a.iter().flatten() {
                    if std::mem::replace(&mut seen[*j], true) {
                        invalid += 1;
                    }
                }
                let got = assignment_weight(&w, &a);
                worst = worst.max((got - brute_force_best(&w)).abs());
                cases += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    verdict(
        3,
        "optimal mapping",
        worst < 1e-9 && invalid == 0 && elapsed < Duration::from_secs(10),
        &format!("{cases} matrices up to 6×6, max |hungarian − brute force| {worst:.1e}, {invalid} non-injective, {:.2} s < 10 s", elapsed.as_secs_f64()),
    );
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_hand_computed_fixture() {
    let _g = serial();
    // reference A on [0, 10]; hypothesis x on [0, 5], y on [5, 10]; collar 0.25
    // scored: [0.25, 9.75] = 9.5 s; x ↦ A correct on [0.25, 5], y wrong on [5, 9.75]
    // DER = 4.75 / 9.5 = 50 %
    let r = Timeline::new("f", vec![Turn::new(0.0, 10.0, "A")]).unwrap();
    let h = Timeline::new("f", vec![Turn::new(0.0, 5.0, "x"), Turn::new(5.0, 10.0, "y")]).unwrap();
    let rep = der(&r, &h, 0.25).unwrap();
    let pct = 100.0 * rep.der;
    verdict(
        4,
        "hand-computed DER fixture",
        (pct - 50.0).abs() <= 0.01,
        &format!("DER {pct:.4}% (E_Spk {:.4}, scored {:.3} s)", rep.e_spk, rep.scored_time),
    );
}

// ---------------------------------------------------------------- criterion 5

#[test]
fn criterion_5_feature_correctness() {
    let _g = serial();
    let mut notes = Vec::new();
    let mut ok = true;

    let speakers = make_speakers(1, 5).unwrap();
    let audio = render(&speakers[0], 3.072, 1);
    assert_eq!(audio.samples().len(), 49_152);
    for kind in FeatureKind::ALL {
        let f = FeatureExtractor::new(kind).extract_normalized(audio.samples()).unwrap();
        let shape_ok = f.rows() == N_BANDS && f.rows() == 96 && f.cols() == 191;
        ok &= shape_ok;
        notes.push(format!("{kind} {}×{}", f.rows(), f.cols()));
    }

    let bank = FeatureKind::Cqt.bank();
    let worst_center = (0..96)
        .map(|k| (bank.centers()[k] - 80.0 * 2f64.powf(k as f64 / 24.0)).abs().max((cqt_center(k) - 80.0 * 2f64.powf(k as f64 / 24.0)).abs()))
        .fold(0.0, f64::max);
    ok &= worst_center <= 1e-9 && bank.centers().len() == 96;
    notes.push(format!("CQT center max |Δ| {worst_center:.1e}"));

    let sine: Vec<f32> = (0..16_000).map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin() as f32).collect();
    let spec = stft_magnitude(&sine);
    let mut totals = vec![0.0f64; BINS];
    for frame in 0..spec.frames() {
        for (b, t) in totals.iter_mut().enumerate() {
            *t += spec.get(b, frame) as f64;
        }
    }
    let peak = (0..BINS).max_by(|&a, &b| totals[a].total_cmp(&totals[b])).unwrap();
    let every_frame = (0..spec.frames()).all(|fr| (0..BINS).max_by(|&a, &b| spec.get(a, fr).total_cmp(&spec.get(b, fr))) == Some(32));
    ok &= peak == 32 && every_frame;
    notes.push(format!("1 kHz sine peaks at bin {peak} (every frame: {every_frame})"));

    let impulse = pre_emphasis(&[1.0, 0.0, 0.0, 0.0], PRE_EMPHASIS);
    let impulse_ok = impulse == vec![1.0, -0.97, 0.0, 0.0];
    ok &= impulse_ok;
    notes.push(format!("pre-emphasis impulse {:?}", impulse));

    verdict(5, "feature correctness", ok, &notes.join("; "));
}

// ---------------------------------------------------------- criteria 6 and 7

const TRAIN_SPEAKERS: usize = 8;
const SPEAKER_SEED: u64 = 7;
const MATERIAL_SECONDS: f64 = 90.0;
/// Each speaker's first 70 % trains, the last 30 % is held out.
const TRAIN_SHARE: f64 = 0.7;
const TRAIN_HOP: f64 = 1.0;
const TRAIN_BATCH: usize = 32;

struct Trained {
    model: RcnnModel,
    report: TrainReport,
    data_seconds: f64,
    train_segments: usize,
    heldout_segments: usize,
}

fn trained() -> &'static Trained {
    static MODEL: OnceLock<Trained> = OnceLock::new();
    MODEL.get_or_init(|| {
        let t = Instant::now();
        let speakers = make_speakers(TRAIN_SPEAKERS + 4, SPEAKER_SEED).unwrap();
        let extractor = FeatureExtractor::new(FeatureKind::Cqt);
        let (mut train, mut held) = (Dataset::default(), Dataset::default());
        let cut = MATERIAL_SECONDS * TRAIN_SHARE;
        for s in &speakers[..TRAIN_SPEAKERS] {
            let audio = render(s, MATERIAL_SECONDS, 1);
            train.extend(Dataset::from_audio(&audio.slice_seconds(0.0, cut), s.id, &extractor, TRAIN_HOP).unwrap());
            held.extend(Dataset::from_audio(&audio.slice_seconds(cut, MATERIAL_SECONDS), s.id, &extractor, TRAIN_HOP).unwrap());
        }
        let data_seconds = t.elapsed().as_secs_f64();
        let mut model = RcnnModel::build(RcnnConfig::new(TRAIN_SPEAKERS, FeatureKind::Cqt), 1).unwrap();
        let opts = TrainOptions { epochs: 20, batch_size: TRAIN_BATCH, seed: 3, target_accuracy: Some(0.95), ..Default::default() };
        let report = model.train(&train, Some(&held), &opts).unwrap();
        Trained { model, report, data_seconds, train_segments: train.len(), heldout_segments: held.len() }
    })
}

#[test]
fn criterion_6_synthetic_classification() {
    let _g = serial();
    let tr = trained();
    for e in &tr.report.epochs {
        println!(
            "  epoch {:>2} loss {:.4} train {:.3} held-out {:.3} ({:.1} s)",
            e.epoch,
            e.loss,
            e.train_accuracy,
            e.heldout_accuracy.unwrap_or(f64::NAN),
            e.seconds
        );
    }
    let best = tr.report.epochs.iter().filter_map(|e| e.heldout_accuracy).fold(0.0, f64::max);
    let total = tr.data_seconds + tr.report.wall_clock_seconds;
    verdict(
        6,
        "synthetic classification",
        best >= 0.95 && tr.report.epochs.len() <= 20 && total < 600.0,
        &format!(
            "held-out accuracy {best:.4} ≥ 0.95 after {} epochs; {} train / {} held-out segments; {:.1} s < 600 s",
            tr.report.epochs.len(),
            tr.train_segments,
            tr.heldout_segments,
            total
        ),
    );
}

const TURN_SECONDS: f64 = 15.0;
const DEV_SEEDS: [u64; 4] = [21, 22, 23, 24];

fn four_speaker_plan() -> Vec<(usize, f64)> {
    [0, 1, 2, 3, 0, 1, 2, 3].iter().map(|&i| (i, TURN_SECONDS)).collect()
}

/// Pipeline settings chosen on development dialogues whose speakers are
/// disjoint from both the training and the test identities.
fn calibrate(model: &RcnnModel) -> (PipelineConfig, f64) {
    let dev: Vec<(WindowOutputs, Timeline)> = DEV_SEEDS
        .iter()
        .map(|&seed| {
            let speakers = make_speakers(4, seed).unwrap();
            let (audio, reference) = make_dialogue(&speakers, &four_speaker_plan(), seed).unwrap();
            (analyze(&audio, model, &PipelineConfig::default()).unwrap(), reference)
        })
        .collect();
    let mut best: Option<(PipelineConfig, f64)> = None;
    for step in 1..=8 {
        for smoothing in [2, 4, 8] {
            for min_turn in [0.5, 1.0, 2.0, 3.0] {
                let cfg = PipelineConfig { threshold: step as f64 * 0.025, smoothing, min_turn, ..Default::default() };
                let mean = dev
                    .iter()
                    .map(|(w, r)| der(r, &track(r.file_id(), w, &cfg).unwrap().timeline, 0.25).unwrap().der)
                    .sum::<f64>()
                    / dev.len() as f64;
                if best.as_ref().map_or(true, |b| mean < b.1) {
                    best = Some((cfg, mean));
                }
            }
        }
    }
    best.unwrap()
}

#[test]
fn criterion_7_synthetic_diarization() {
    let _g = serial();
    let model = &trained().model;
    let t = Instant::now();
    let (config, dev_der) = calibrate(model);
    let speakers = make_speakers(TRAIN_SPEAKERS + 4, SPEAKER_SEED).unwrap();
    let unseen = &speakers[TRAIN_SPEAKERS..];
    let (audio, reference) = make_dialogue(unseen, &four_speaker_plan(), 11).unwrap();
    let windows = analyze(&audio, model, &config).unwrap();
    let hyp = track(reference.file_id(), &windows, &config).unwrap().timeline;
    let elapsed = t.elapsed();
    let rep = der(&reference, &hyp, 0.25).unwrap();
    let single = Timeline::new(reference.file_id(), vec![Turn::new(0.0, audio.duration(), "all")]).unwrap();
    let base = der(&reference, &single, 0.25).unwrap();
    let relative = 1.0 - rep.der / base.der;
    println!(
        "  calibrated θ = {:.3} ({}), smoothing ±{}, min turn {} s; mean dev DER {:.2}%",
        config.threshold, config.threshold_mode, config.smoothing, config.min_turn, 100.0 * dev_der
    );
    println!("  hypothesis: {} speakers, {} turns", hyp.speakers().len(), hyp.len());
    verdict(
        7,
        "synthetic diarization",
        rep.der <= 0.25 && relative >= 0.30 && elapsed < Duration::from_secs(120),
        &format!(
            "DER {:.2}% ≤ 25% (E_Spk {:.2}%, E_FA {:.2}%, E_Miss {:.2}%); single-speaker DER {:.2}%, relative reduction {:.1}% ≥ 30%; {:.1} s < 120 s",
            100.0 * rep.der,
            100.0 * rep.e_spk,
            100.0 * rep.e_fa,
            100.0 * rep.e_miss,
            100.0 * base.der,
            100.0 * relative,
            elapsed.as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------- criterion 8

fn small_dataset() -> Dataset {
    let speakers = make_speakers(2, 4).unwrap();
    let extractor = FeatureExtractor::new(FeatureKind::LogMel);
    let mut d = Dataset::default();
    for s in &speakers {
        d.extend(Dataset::from_audio(&render(s, 6.0, 2), s.id, &extractor, 0.5).unwrap());
    }
    d
}

fn small_config() -> RcnnConfig {
    RcnnConfig { conv_channels: vec![4, 4, 8, 8], gru_hidden: 8, ..RcnnConfig::new(2, FeatureKind::LogMel) }
}

#[test]
fn criterion_8_determinism_and_persistence() {
    let _g = serial();
    let data = small_dataset();
    let opts = TrainOptions { epochs: 2, batch_size: 8, seed: 5, ..Default::default() };
    let run = || {
        let mut m = RcnnModel::build(small_config(), 9).unwrap();
        m.train(&data, None, &opts).unwrap();
        m
    };
    let (a, b) = (run(), run());
    let identical_checkpoints = a.to_bytes() == b.to_bytes();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    a.save(&path).unwrap();
    let loaded = RcnnModel::load(&path).unwrap();
    let feats: Vec<_> = data.items().iter().map(|s| &s.features).collect();
    let before = a.predict(&feats).unwrap();
    let after = loaded.predict(&feats).unwrap();
    let bitwise = before.iter().flatten().zip(after.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits())
        && before.len() == after.len();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut rttm_ok = true;
    let mut worst_shift = 0.0f64;
    for _ in 0..50 {
        let t = random_timeline(&mut rng, "s", 3, 60.0, None).with_file_id("rt");
        let text = format_rttm(&t);
        let parsed = parse_rttm(&text).unwrap();
        rttm_ok &= parsed.len() == 1 && format_rttm(&parsed[0]) == text && parsed[0].len() == t.len();
        for (x, y) in t.turns().iter().zip(parsed[0].turns()) {
            worst_shift = worst_shift.max((x.start - y.start).abs()).max((x.end - y.end).abs());
            rttm_ok &= x.speaker == y.speaker;
        }
    }
    rttm_ok &= worst_shift <= 0.0005 + 1e-9;

    verdict(
        8,
        "determinism and persistence",
        identical_checkpoints && bitwise && rttm_ok,
        &format!(
            "same-seed checkpoints identical: {identical_checkpoints}; reload forward bitwise equal: {bitwise}; RTTM round trip stable, max boundary shift {:.3} ms",
            worst_shift * 1e3
        ),
    );
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_tracker_semantics() {
    let _g = serial();
    let agg = aggregate(&[vec![0.2f32, 0.8], vec![0.6, 0.4]]).unwrap();
    let agg_ok = (agg.values()[0] - 2.0 / 3.0).abs() < 1e-6 && agg.values()[1] == 1.0;

    let mut reg = SpeakerRegistry::new(0.4, ThresholdMode::Distance);
    reg.assign(&Embedding::from_values(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
    let second = reg.assign(&Embedding::from_values(vec![0.0, 1.0, 0.0]).unwrap()).unwrap();
    let orthogonal_ok = second.enrolled && reg.len() == 2 && second.similarity == Some(0.0);

    let mut constant = SpeakerRegistry::new(0.4, ThresholdMode::Distance);
    let e = Embedding::from_values(vec![0.3, 1.0, 0.1, 0.7]).unwrap();
    for _ in 0..50 {
        constant.assign(&e).unwrap();
    }
    let registry_constant_ok = constant.len() == 1;

    // a 1 kHz tone repeats every 16 samples, so every hop-aligned window is identical
    let tone: Vec<f32> = (0..16_000 * 8).map(|i| 0.5 * (2.0 * std::f32::consts::PI * (i % 16) as f32 / 16.0).sin()).collect();
    let audio = diarkit::audio::AudioBuffer::mono(tone, 16_000).unwrap();
    let model = RcnnModel::build(small_config(), 3).unwrap();
    let cfg = PipelineConfig { feature_kind: FeatureKind::LogMel, ..Default::default() };
    let d = diarkit::pipeline::diarize("tone", &audio, &model, &cfg).unwrap();
    let stream_constant_ok = d.timeline.speakers().len() == 1 && d.timeline.len() == 1;

    verdict(
        9,
        "tracker semantics",
        agg_ok && orthogonal_ok && registry_constant_ok && stream_constant_ok,
        &format!(
            "aggregate ({:.6}, {:.6}); orthogonal enrolls new speaker: {orthogonal_ok}; constant embeddings → {} speaker(s); constant stream → {} speaker(s) in {} turn(s)",
            agg.values()[0],
            agg.values()[1],
            constant.len(),
            d.timeline.speakers().len(),
            d.timeline.len()
        ),
    );
}
