use proptest::prelude::*;

use super::*;

fn emb(v: &[f64]) -> Embedding {
    Embedding::from_values(v.to_vec()).unwrap()
}

#[test]
fn aggregation_examples() {
    let one = aggregate(&[vec![0.2f32, 0.8]]).unwrap();
    assert!((one.values()[0] - 0.25).abs() < 1e-6);
    assert_eq!(one.values()[1], 1.0);

    let two = aggregate(&[vec![0.2f32, 0.8], vec![0.6, 0.4]]).unwrap();
    assert!((two.values()[0] - 0.666_667).abs() < 1e-6);
    assert_eq!(two.values()[1], 1.0);

    let zero = aggregate(&[vec![0.0f32; 3], vec![0.0; 3]]).unwrap();
    assert!(zero.is_degenerate());
    assert_eq!(zero.values(), &[0.0; 3]);

    assert_eq!(aggregate::<Vec<f32>>(&[]), Err(TrackerError::Empty));
    assert_eq!(aggregate(&[vec![0.1f32, -0.1]]), Err(TrackerError::Negative));
    assert_eq!(aggregate(&[vec![0.1f32], vec![0.1, 0.2]]), Err(TrackerError::Length(1, 2)));
}

#[test]
fn cosine_examples() {
    assert!((cosine_similarity(&emb(&[0.3, 1.0]), &emb(&[0.3, 1.0])).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(), 0.0);
    let s = cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0, 1.0])).unwrap();
    assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert_eq!(cosine_similarity(&emb(&[0.0, 0.0]), &emb(&[1.0, 1.0])), Err(TrackerError::ZeroNorm));
}

#[test]
fn registry_decisions() {
    let mut reg = SpeakerRegistry::default();
    let e = emb(&[0.2, 1.0, 0.4]);
    assert_eq!(reg.assign(&e).unwrap().speaker, "S0");
    let again = reg.assign(&e).unwrap();
    assert_eq!((again.speaker.as_str(), again.enrolled), ("S0", false));
    assert!((again.similarity.unwrap() - 1.0).abs() < 1e-12);

    let mut reg = SpeakerRegistry::default();
    reg.assign(&emb(&[1.0, 0.0, 0.0])).unwrap();
    let other = reg.assign(&emb(&[0.0, 1.0, 0.0])).unwrap();
    assert_eq!((other.speaker.as_str(), other.enrolled), ("S1", true));
    assert_eq!(reg.len(), 2);
}

#[test]
fn literal_mode_inverts_the_decision() {
    let mut reg = SpeakerRegistry::new(0.4, ThresholdMode::Literal);
    let e = emb(&[0.2, 1.0]);
    reg.assign(&e).unwrap();
    assert_eq!(reg.assign(&e).unwrap().speaker, "S1");
    let mut reg = SpeakerRegistry::new(0.4, ThresholdMode::Literal);
    reg.assign(&emb(&[1.0, 0.0])).unwrap();
    assert_eq!(reg.assign(&emb(&[0.0, 1.0])).unwrap().speaker, "S0");
    assert_eq!("literal".parse::<ThresholdMode>().unwrap(), ThresholdMode::Literal);
    assert!("cosine".parse::<ThresholdMode>().is_err());
}

#[test]
fn running_mean_is_max_normalized() {
    let mut reg = SpeakerRegistry::default();
    reg.assign(&emb(&[1.0, 0.5])).unwrap();
    reg.assign(&emb(&[1.0, 0.7])).unwrap();
    let rep = &reg.speakers()[0].representative;
    assert_eq!(rep.values()[0], 1.0);
    assert!((rep.values()[1] - 0.6).abs() < 1e-12);
    assert_eq!(reg.speakers()[0].segments, 2);
}

#[test]
fn reset_empties_the_registry() {
    let mut reg = SpeakerRegistry::default();
    reg.assign(&emb(&[1.0, 0.0])).unwrap();
    reg.assign(&emb(&[0.0, 1.0])).unwrap();
    reg.reset();
    assert_eq!(reg.len(), 0);
    reg.reset();
    assert!(reg.is_empty());
    assert_eq!(reg.assign(&emb(&[0.0, 1.0])).unwrap().speaker, "S0");
}

#[test]
fn degenerate_embeddings_inherit_the_previous_label() {
    let zero = Embedding::from_values(vec![0.0, 0.0]).unwrap();
    let mut reg = SpeakerRegistry::default();
    assert_eq!(reg.assign(&zero), Err(TrackerError::ZeroNorm));
    assert_eq!(reg.observe(&zero).unwrap().speaker, "S0");
    // the first real embedding fills the speaker enrolled from silence
    let a = reg.observe(&emb(&[1.0, 0.0])).unwrap();
    assert_eq!((a.speaker.as_str(), a.enrolled), ("S0", false));
    assert_eq!(reg.observe(&emb(&[0.0, 1.0])).unwrap().speaker, "S1");
    assert_eq!(reg.observe(&zero).unwrap().speaker, "S1");
    assert_eq!(reg.len(), 2);
}

#[test]
fn constant_source_enrolls_one_speaker() {
    let mut reg = SpeakerRegistry::default();
    let out = [0.05f32, 0.9, 0.1, 0.3];
    for _ in 0..50 {
        let e = aggregate(&[out]).unwrap();
        assert_eq!(reg.assign(&e).unwrap().speaker, "S0");
    }
    assert_eq!(reg.len(), 1);
}

proptest! {
    #[test]
    fn aggregate_is_scale_invariant(v in proptest::collection::vec(0.0f32..1.0, 1..6), alpha in 0.01f32..100.0) {
        let base = aggregate(&[v.clone()]).unwrap();
        let scaled = aggregate(&[v.iter().map(|x| x * alpha).collect::<Vec<f32>>()]).unwrap();
        prop_assert_eq!(base.is_degenerate(), scaled.is_degenerate());
        if !base.is_degenerate() {
            prop_assert!((base.values().iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
            for (a, b) in base.values().iter().zip(scaled.values()) {
                prop_assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(
        a in proptest::collection::vec(0.01f64..1.0, 3),
        b in proptest::collection::vec(0.01f64..1.0, 3),
        alpha in 0.1f64..10.0,
        beta in 0.1f64..10.0,
    ) {
        let s = cosine(&a, &b).unwrap();
        prop_assert!((s - cosine(&b, &a).unwrap()).abs() < 1e-12);
        let sa: Vec<f64> = a.iter().map(|x| x * alpha).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * beta).collect();
        prop_assert!((s - cosine(&sa, &sb).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn assign_is_deterministic(v in proptest::collection::vec(0.01f64..1.0, 4)) {
        let mut a = SpeakerRegistry::default();
        a.assign(&emb(&[1.0, 0.2, 0.1, 0.0])).unwrap();
        let mut b = a.clone();
        let e = emb(&v);
        prop_assert_eq!(a.assign(&e).unwrap(), b.assign(&e).unwrap());
    }
}
