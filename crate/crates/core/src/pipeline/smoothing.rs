use std::collections::BTreeMap;

/// Majority vote over `±k` neighbours of each labeled window.
///
/// Unlabeled windows stay unlabeled and do not vote. On a tie the window keeps
/// its own label if tied, else the previous smoothed label if tied, else the
/// tied label seen first in the neighbourhood. Output labels are a subset of
/// the input labels.
pub fn majority_smooth(raw: &[Option<usize>], k: usize) -> Vec<Option<usize>> {
    let mut out: Vec<Option<usize>> = Vec::with_capacity(raw.len());
    for (i, &own) in raw.iter().enumerate() {
        let Some(own) = own else {
            out.push(None);
            continue;
        };
        let lo = i.saturating_sub(k);
        let hi = (i + k + 1).min(raw.len());
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        let mut order = Vec::new();
        for label in raw[lo..hi].iter().flatten() {
            let c = counts.entry(*label).or_insert(0);
            if *c == 0 {
                order.push(*label);
            }
            *c += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        let tied = |l: usize| counts.get(&l) == Some(&top);
        let previous = out.last().copied().flatten();
        let choice = if tied(own) {
            own
        } else if let Some(p) = previous.filter(|&p| tied(p)) {
            p
        } else {
            *order.iter().find(|&&l| tied(l)).expect("own label votes")
        };
        out.push(Some(choice));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start: f64,
    pub end: f64,
    pub label: usize,
}

fn merge_touching(spans: Vec<Span>) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if last.label == s.label && last.end == s.start => last.end = s.end,
            _ => out.push(s),
        }
    }
    out
}

/// Merges touching same-label spans, then repeatedly folds the shortest span
/// under `min_duration` into its longer touching neighbour.
///
/// Spans with no touching neighbour are kept whatever their length. Input must
/// be sorted and non-overlapping.
pub fn consolidate(spans: Vec<Span>, min_duration: f64) -> Vec<Span> {
    let mut spans = merge_touching(spans);
    loop {
        let touches = |a: &Span, b: &Span| a.end == b.start;
        let candidate = (0..spans.len())
            .filter(|&i| spans[i].end - spans[i].start < min_duration)
            .filter(|&i| (i > 0 && touches(&spans[i - 1], &spans[i])) || (i + 1 < spans.len() && touches(&spans[i], &spans[i + 1])))
            .min_by(|&a, &b| (spans[a].end - spans[a].start).total_cmp(&(spans[b].end - spans[b].start)));
        let Some(i) = candidate else {
            return spans;
        };
        let left = (i > 0 && touches(&spans[i - 1], &spans[i])).then(|| spans[i - 1].end - spans[i - 1].start);
        let right =
            (i + 1 < spans.len() && touches(&spans[i], &spans[i + 1])).then(|| spans[i + 1].end - spans[i + 1].start);
        let into_left = match (left, right) {
            (Some(l), Some(r)) => l >= r,
            (Some(_), None) => true,
            _ => false,
        };
        let victim = spans.remove(i);
        if into_left {
            spans[i - 1].end = victim.end;
        } else {
            spans[i].start = victim.start;
        }
        spans = merge_touching(spans);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn span(start: f64, end: f64, label: usize) -> Span {
        Span { start, end, label }
    }

    #[test]
    fn isolated_flip_is_voted_out() {
        let raw: Vec<_> = [0, 0, 0, 1, 0, 0, 0].into_iter().map(Some).collect();
        assert_eq!(majority_smooth(&raw, 2), vec![Some(0); 7]);
    }

    #[test]
    fn zero_width_is_identity() {
        let raw = vec![Some(0), Some(1), None, Some(2), Some(1)];
        assert_eq!(majority_smooth(&raw, 0), raw);
    }

    #[test]
    fn tie_keeps_own_label() {
        // window 1 sees {0, 1, 1, 0}: a tie it keeps as 1
        let raw = vec![Some(0), Some(1), Some(1), Some(0)];
        assert_eq!(majority_smooth(&raw, 2)[1], Some(1));
    }

    #[test]
    fn consolidate_absorbs_into_longer_neighbour() {
        let spans = vec![span(0.0, 3.0, 0), span(3.0, 3.25, 1), span(3.25, 4.0, 2), span(4.0, 4.25, 2)];
        let out = consolidate(spans, 0.5);
        assert_eq!(out, vec![span(0.0, 3.25, 0), span(3.25, 4.25, 2)]);
    }

    #[test]
    fn isolated_short_span_survives() {
        let spans = vec![span(0.0, 2.0, 0), span(3.0, 3.25, 1)];
        assert_eq!(consolidate(spans.clone(), 0.5), spans);
    }

    proptest! {
        #[test]
        fn smoothing_never_invents_labels(raw in prop::collection::vec(prop::option::of(0usize..5), 0..40), k in 0usize..4) {
            let out = majority_smooth(&raw, k);
            prop_assert_eq!(out.len(), raw.len());
            for (o, r) in out.iter().zip(&raw) {
                prop_assert_eq!(o.is_some(), r.is_some());
                if let Some(l) = o {
                    prop_assert!(raw.contains(&Some(*l)));
                }
            }
        }

        #[test]
        fn consolidate_preserves_coverage(labels in prop::collection::vec(0usize..3, 1..30), min in 0.0f64..2.0) {
            let spans: Vec<Span> = labels.iter().enumerate().map(|(i, &l)| span(i as f64 * 0.25, (i + 1) as f64 * 0.25, l)).collect();
            let out = consolidate(spans, min);
            prop_assert_eq!(out[0].start, 0.0);
            prop_assert_eq!(out[out.len() - 1].end, labels.len() as f64 * 0.25);
            for w in out.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
                prop_assert!(w[0].label != w[1].label);
            }
            if out.len() > 1 {
                prop_assert!(out.iter().all(|s| s.end - s.start >= min));
            }
        }
    }
}
