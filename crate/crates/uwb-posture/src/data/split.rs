//! Stratified train/test partitioning.

use crate::rng::{shuffle, stream_rng};

use super::{DataError, Dataset, SampleLabel};

/// Stream offset for split shuffles; one stream per class keeps the
/// assignment of one class independent of every other.
pub(crate) const SPLIT_STREAM_BASE: u64 = 2_000_000;

/// Splits item indices into train and test, stratified by class.
///
/// `labels` pairs each item index with its class id. Per class, the item
/// order is shuffled deterministically from `seed` on RNG stream
/// `stream_base + class` and the first `round(fraction * n)` items (clamped
/// so neither side is empty when the class has two or more) go to train.
/// Returned index lists are sorted ascending.
pub(crate) fn stratified_indices(
    labels: &[(usize, u32)],
    train_fraction: f64,
    seed: u64,
    stream_base: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: Vec<(u32, Vec<usize>)> = Vec::new();
    for &(idx, class) in labels {
        match by_class.iter_mut().find(|(c, _)| *c == class) {
            Some((_, v)) => v.push(idx),
            None => by_class.push((class, vec![idx])),
        }
    }
    by_class.sort_by_key(|(c, _)| *c);

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class {
        let n = members.len();
        let mut rng = stream_rng(seed, stream_base + u64::from(class));
        shuffle(&mut rng, &mut members);
        let mut n_train = (train_fraction * n as f64).round() as usize;
        if n >= 2 {
            n_train = n_train.clamp(1, n - 1);
        } else {
            n_train = n_train.min(n);
        }
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Splits a dataset into train and test partitions, stratified by label at
/// the sample level.
///
/// Every known class keeps at least one sample on each side, which requires
/// at least two samples per class; otherwise [`DataError::ClassTooSmall`] is
/// returned. Unknown-labelled samples are never trainable, so they all go to
/// the test partition. The same dataset, fraction, and seed always produce
/// identical partitions, with samples kept in dataset order.
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Invariant(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }

    let (class_counts, _) = dataset.class_sample_counts();
    for (id, &count) in class_counts.iter().enumerate() {
        if count == 1 {
            return Err(DataError::ClassTooSmall {
                class: super::PostureLabel::from_id(id as u32).unwrap().name(),
                count,
                needed: 2,
            });
        }
    }

    let labels: Vec<(usize, u32)> = dataset
        .samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.label.known().map(|l| (i, l.id())))
        .collect();
    let (train_idx, test_idx) = stratified_indices(&labels, train_fraction, seed, SPLIT_STREAM_BASE);

    let in_train: std::collections::HashSet<usize> = train_idx.into_iter().collect();
    let in_test: std::collections::HashSet<usize> = test_idx.into_iter().collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, sample) in dataset.samples.iter().enumerate() {
        if in_train.contains(&i) {
            train.push(sample.clone());
        } else if in_test.contains(&i) || sample.label == SampleLabel::Unknown {
            test.push(sample.clone());
        }
    }

    let mk = |samples: Vec<super::Sample>| Dataset {
        schema_version: dataset.schema_version,
        n_taps: dataset.n_taps,
        samples,
    };
    Ok((mk(train), mk(test)))
}

#[cfg(test)]
mod tests {
    use super::super::tests::test_frame;
    use super::*;
    use crate::data::{PostureLabel, Sample, SCHEMA_VERSION};

    fn dataset_with_counts(per_class: &[(PostureLabel, usize)]) -> Dataset {
        let mut samples = Vec::new();
        for (label, count) in per_class {
            for i in 0..*count {
                samples.push(Sample {
                    sample_id: format!("{}-{i:04}", label.name()),
                    subject_id: format!("subj{:02}", i % 5),
                    label: SampleLabel::Known(*label),
                    scenario_tags: vec![],
                    frames: vec![test_frame(16)],
                });
            }
        }
        Dataset {
            schema_version: SCHEMA_VERSION,
            n_taps: 16,
            samples,
        }
    }

    fn full_balanced(n: usize) -> Dataset {
        dataset_with_counts(
            &PostureLabel::ALL
                .iter()
                .map(|&l| (l, n))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn ten_samples_at_sixty_percent_split_six_four() {
        let ds = full_balanced(10);
        let (train, test) = stratified_split(&ds, 0.6, 7).unwrap();
        let (train_counts, _) = train.class_sample_counts();
        let (test_counts, _) = test.class_sample_counts();
        assert!(train_counts.iter().all(|&c| c == 6));
        assert!(test_counts.iter().all(|&c| c == 4));
    }

    #[test]
    fn seven_samples_split_four_or_five() {
        // round(0.6 * 7) = 4, so every class lands on exactly 4 train samples
        // under the rounding rule; the allowed envelope is 4 or 5.
        let ds = full_balanced(7);
        let (train, _) = stratified_split(&ds, 0.6, 3).unwrap();
        let (train_counts, _) = train.class_sample_counts();
        assert!(train_counts.iter().all(|&c| c == 4 || c == 5), "{train_counts:?}");
    }

    #[test]
    fn split_is_deterministic() {
        let ds = full_balanced(5);
        let a = stratified_split(&ds, 0.6, 42).unwrap();
        let b = stratified_split(&ds, 0.6, 42).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = stratified_split(&ds, 0.6, 43).unwrap();
        assert!(c.0 != a.0 || c.1 != a.1);
    }

    #[test]
    fn partitions_are_disjoint_and_complete() {
        let ds = full_balanced(4);
        let (train, test) = stratified_split(&ds, 0.5, 9).unwrap();
        let mut ids: Vec<&str> = train
            .samples
            .iter()
            .chain(&test.samples)
            .map(|s| s.sample_id.as_str())
            .collect();
        ids.sort_unstable();
        let mut expected: Vec<&str> = ds.samples.iter().map(|s| s.sample_id.as_str()).collect();
        expected.sort_unstable();
        assert_eq!(ids, expected);
    }

    #[test]
    fn single_sample_class_is_rejected() {
        let ds = dataset_with_counts(&[
            (PostureLabel::Upright, 3),
            (PostureLabel::Hunch, 1),
        ]);
        match stratified_split(&ds, 0.6, 1).unwrap_err() {
            DataError::ClassTooSmall { class, count, .. } => {
                assert_eq!(class, "hunch");
                assert_eq!(count, 1);
            }
            other => panic!("expected ClassTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn unknown_samples_all_go_to_test() {
        let mut ds = dataset_with_counts(&[(PostureLabel::Upright, 4)]);
        for i in 0..3 {
            ds.samples.push(Sample {
                sample_id: format!("unk-{i}"),
                subject_id: "subj00".into(),
                label: SampleLabel::Unknown,
                scenario_tags: vec![],
                frames: vec![test_frame(16)],
            });
        }
        let (train, test) = stratified_split(&ds, 0.5, 2).unwrap();
        let (_, train_unknown) = train.class_sample_counts();
        let (_, test_unknown) = test.class_sample_counts();
        assert_eq!(train_unknown, 0);
        assert_eq!(test_unknown, 3);
    }

    #[test]
    fn extreme_fractions_keep_both_sides_nonempty() {
        let ds = dataset_with_counts(&[(PostureLabel::Upright, 2)]);
        let (train, test) = stratified_split(&ds, 0.99, 5).unwrap();
        assert_eq!(train.samples.len(), 1);
        assert_eq!(test.samples.len(), 1);
    }
}
