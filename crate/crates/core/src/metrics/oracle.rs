use super::der::{collar_zones, DerTotals};
use super::{DerReport, MetricsError};
use crate::pipeline::Timeline;

/// Largest speaker count per side the exhaustive mapping search accepts.
pub const ORACLE_MAX_SPEAKERS: usize = 8;

/// Frame-level DER: both timelines rasterized at `frame` seconds (a frame is
/// active when its center lies in a turn), the mapping found by exhaustive
/// search. Independent of the interval scorer; meant for cross-checking it.
pub fn frame_der_oracle(reference: &Timeline, hypothesis: &Timeline, collar: f64, frame: f64) -> Result<DerReport, MetricsError> {
    let refs = reference.speakers();
    let hyps = hypothesis.speakers();
    if refs.len() > ORACLE_MAX_SPEAKERS || hyps.len() > ORACLE_MAX_SPEAKERS {
        return Err(MetricsError::TooManySpeakers(refs.len().max(hyps.len())));
    }
    let end = reference.end().max(hypothesis.end());
    let n_frames = (end / frame).ceil() as usize + 1;
    let zones = collar_zones(reference, collar);
    let raster = |t: &Timeline, labels: &[&str]| -> Vec<Vec<bool>> {
        let mut grid = vec![vec![false; n_frames]; labels.len()];
        for turn in t.turns() {
            let s = labels.iter().position(|l| *l == turn.speaker).unwrap();
            for (i, cell) in grid[s].iter_mut().enumerate() {
                let c = (i as f64 + 0.5) * frame;
                if turn.start <= c && c < turn.end {
                    *cell = true;
                }
            }
        }
        grid
    };
    let r = raster(reference, &refs);
    let h = raster(hypothesis, &hyps);
    let scored: Vec<bool> = (0..n_frames)
        .map(|i| {
            let c = (i as f64 + 0.5) * frame;
            !zones.iter().any(|z| z.0 <= c && c < z.1)
        })
        .collect();

    let mut overlap = vec![vec![0usize; refs.len()]; hyps.len()];
    for (hi, hrow) in h.iter().enumerate() {
        for (ri, rrow) in r.iter().enumerate() {
            overlap[hi][ri] = (0..n_frames).filter(|&i| scored[i] && hrow[i] && rrow[i]).count();
        }
    }
    let best = best_injection(&overlap, refs.len());

    let mut totals = DerTotals::default();
    for i in (0..n_frames).filter(|&i| scored[i]) {
        let nr = r.iter().filter(|row| row[i]).count();
        let nh = h.iter().filter(|row| row[i]).count();
        let correct = (0..hyps.len()).filter(|&hi| h[hi][i] && best[hi].is_some_and(|ri| r[ri][i])).count();
        totals.scored += nr as f64 * frame;
        totals.miss += nr.saturating_sub(nh) as f64 * frame;
        totals.fa += nh.saturating_sub(nr) as f64 * frame;
        totals.spk += (nr.min(nh) - correct) as f64 * frame;
    }
    let mapping = best
        .iter()
        .enumerate()
        .filter_map(|(hi, ri)| ri.filter(|&ri| overlap[hi][ri] > 0).map(|ri| (hyps[hi].to_string(), refs[ri].to_string())))
        .collect();
    totals.report(mapping)
}

/// Exhaustive search over partial injections hypothesis → reference.
fn best_injection(overlap: &[Vec<usize>], n_refs: usize) -> Vec<Option<usize>> {
    fn go(h: usize, overlap: &[Vec<usize>], used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, score: usize, best: &mut (usize, Vec<Option<usize>>)) {
        if h == overlap.len() {
            if score > best.0 || best.1.is_empty() {
                *best = (score, cur.clone());
            }
            return;
        }
        cur.push(None);
        go(h + 1, overlap, used, cur, score, best);
        cur.pop();
        for r in 0..used.len() {
            if !used[r] {
                used[r] = true;
                cur.push(Some(r));
                go(h + 1, overlap, used, cur, score + overlap[h][r], best);
                cur.pop();
                used[r] = false;
            }
        }
    }
    let mut best = (0, Vec::new());
    go(0, overlap, &mut vec![false; n_refs], &mut Vec::new(), 0, &mut best);
    best.1
}
