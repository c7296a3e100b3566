use super::hungarian::max_weight_assignment;
use super::MetricsError;
use crate::pipeline::Timeline;

/// Error components as fractions of scored reference speech time.
#[derive(Debug, Clone, PartialEq)]
pub struct DerReport {
    pub e_spk: f64,
    pub e_fa: f64,
    pub e_miss: f64,
    pub der: f64,
    /// Reference speech time left after removing the collars, in seconds.
    pub scored_time: f64,
    /// `(hypothesis, reference)` label pairs.
    pub mapping: Vec<(String, String)>,
}

/// Error times in seconds before normalization; summable across files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerTotals {
    pub spk: f64,
    pub fa: f64,
    pub miss: f64,
    pub scored: f64,
}

impl DerTotals {
    pub fn add(&mut self, other: &DerTotals) {
        self.spk += other.spk;
        self.fa += other.fa;
        self.miss += other.miss;
        self.scored += other.scored;
    }

    pub fn report(&self, mapping: Vec<(String, String)>) -> Result<DerReport, MetricsError> {
        if self.scored <= 0.0 {
            return Err(MetricsError::EmptyReference);
        }
        let (e_spk, e_fa, e_miss) = (self.spk / self.scored, self.fa / self.scored, self.miss / self.scored);
        Ok(DerReport { e_spk, e_fa, e_miss, der: e_spk + e_fa + e_miss, scored_time: self.scored, mapping })
    }
}

/// Merged `[start, end)` intervals within `collar` of any reference boundary.
pub(crate) fn collar_zones(reference: &Timeline, collar: f64) -> Vec<(f64, f64)> {
    let mut zones: Vec<(f64, f64)> = Vec::new();
    if collar <= 0.0 {
        return zones;
    }
    let mut points: Vec<f64> = reference.turns().iter().flat_map(|t| [t.start, t.end]).collect();
    points.sort_by(f64::total_cmp);
    for p in points {
        let (a, b) = ((p - collar).max(0.0), p + collar);
        match zones.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => zones.push((a, b)),
        }
    }
    zones
}

/// Elementary pieces of the scored time line with the speakers active in each.
struct Piece {
    len: f64,
    refs: Vec<usize>,
    hyps: Vec<usize>,
}

fn labels(t: &Timeline) -> Vec<String> {
    t.speakers().into_iter().map(str::to_string).collect()
}

fn pieces(reference: &Timeline, hypothesis: &Timeline, collar: f64) -> (Vec<Piece>, Vec<String>, Vec<String>) {
    let ref_labels = labels(reference);
    let hyp_labels = labels(hypothesis);
    let zones = collar_zones(reference, collar);
    let mut cuts: Vec<f64> = vec![0.0];
    cuts.extend(reference.turns().iter().flat_map(|t| [t.start, t.end]));
    cuts.extend(hypothesis.turns().iter().flat_map(|t| [t.start, t.end]));
    cuts.extend(zones.iter().flat_map(|z| [z.0, z.1]));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let index = |labels: &[String], s: &str| labels.iter().position(|l| l == s).expect("label collected");
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if zones.iter().any(|z| z.0 <= mid && mid < z.1) {
            continue;
        }
        let active = |t: &Timeline, labels: &[String]| -> Vec<usize> {
            t.turns().iter().filter(|x| x.start <= mid && mid < x.end).map(|x| index(labels, &x.speaker)).collect()
        };
        let refs = active(reference, &ref_labels);
        let hyps = active(hypothesis, &hyp_labels);
        if refs.is_empty() && hyps.is_empty() {
            continue;
        }
        out.push(Piece { len: b - a, refs, hyps });
    }
    (out, ref_labels, hyp_labels)
}

/// Time, within scored regions, that each hypothesis speaker overlaps each reference speaker.
pub fn overlap_matrix(reference: &Timeline, hypothesis: &Timeline, collar: f64) -> (Vec<Vec<f64>>, Vec<String>, Vec<String>) {
    let (pieces, ref_labels, hyp_labels) = pieces(reference, hypothesis, collar);
    let mut m = vec![vec![0.0; ref_labels.len()]; hyp_labels.len()];
    for p in &pieces {
        for &h in &p.hyps {
            for &r in &p.refs {
                m[h][r] += p.len;
            }
        }
    }
    (m, hyp_labels, ref_labels)
}

/// Hypothesis→reference one-to-one mapping maximizing scored overlap; pairs
/// without overlap are left out.
pub fn optimal_mapping(reference: &Timeline, hypothesis: &Timeline, collar: f64) -> Vec<(String, String)> {
    let (m, hyp_labels, ref_labels) = overlap_matrix(reference, hypothesis, collar);
    max_weight_assignment(&m)
        .into_iter()
        .enumerate()
        .filter_map(|(h, r)| r.filter(|&r| m[h][r] > 0.0).map(|r| (hyp_labels[h].clone(), ref_labels[r].clone())))
        .collect()
}

/// Unnormalized error times for one file.
pub fn der_totals(reference: &Timeline, hypothesis: &Timeline, collar: f64) -> (DerTotals, Vec<(String, String)>) {
    let mapping = optimal_mapping(reference, hypothesis, collar);
    let (pieces, ref_labels, hyp_labels) = pieces(reference, hypothesis, collar);
    let mapped: Vec<Option<usize>> = hyp_labels
        .iter()
        .map(|h| mapping.iter().find(|(mh, _)| mh == h).map(|(_, r)| ref_labels.iter().position(|l| l == r).unwrap()))
        .collect();
    let mut totals = DerTotals::default();
    for p in &pieces {
        let (nr, nh) = (p.refs.len(), p.hyps.len());
        let correct = p.hyps.iter().filter(|&&h| mapped[h].is_some_and(|r| p.refs.contains(&r))).count();
        totals.scored += nr as f64 * p.len;
        totals.miss += nr.saturating_sub(nh) as f64 * p.len;
        totals.fa += nh.saturating_sub(nr) as f64 * p.len;
        totals.spk += (nr.min(nh) - correct) as f64 * p.len;
    }
    (totals, mapping)
}

/// Diarization error rate of `hypothesis` against `reference`, ignoring time
/// within `collar` seconds of every reference boundary.
pub fn der(reference: &Timeline, hypothesis: &Timeline, collar: f64) -> Result<DerReport, MetricsError> {
    if !(collar >= 0.0) {
        return Err(MetricsError::Collar(collar));
    }
    if reference.file_id() != hypothesis.file_id() {
        return Err(MetricsError::FileMismatch {
            reference: reference.file_id().to_string(),
            hypothesis: hypothesis.file_id().to_string(),
        });
    }
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let (totals, mapping) = der_totals(reference, hypothesis, collar);
    totals.report(mapping)
}
