use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{validate_segments, AlignmentError, Decoder, SimilarityMatrix, VideoSegment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipWeighting {
    /// Each segment weighted by its duration.
    Duration,
    /// Each segment counts once.
    Count,
}

fn check_lengths(
    pred: &[Option<usize>],
    gold: &[Option<usize>],
    segments: &[VideoSegment],
) -> Result<(), AlignmentError> {
    if pred.len() != gold.len() {
        return Err(AlignmentError::LengthMismatch {
            what: "prediction",
            got: pred.len(),
            expected: gold.len(),
        });
    }
    if segments.len() != gold.len() {
        return Err(AlignmentError::LengthMismatch {
            what: "segments",
            got: segments.len(),
            expected: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(AlignmentError::Domain("no segments to score".into()));
    }
    validate_segments(segments)
}

/// Share of segments (or of total duration) whose predicted sentence equals
/// the gold one; an unmatched prediction is right only when gold is
/// unmatched too.
pub fn clip_accuracy(
    pred: &[Option<usize>],
    gold: &[Option<usize>],
    segments: &[VideoSegment],
    weighting: ClipWeighting,
) -> Result<f64, AlignmentError> {
    check_lengths(pred, gold, segments)?;
    let weight = |s: &VideoSegment| match weighting {
        ClipWeighting::Duration => s.duration(),
        ClipWeighting::Count => 1.0,
    };
    let total: f64 = segments.iter().map(weight).sum();
    let correct: f64 = segments
        .iter()
        .zip(pred.iter().zip(gold))
        .filter(|(_, (p, g))| p == g)
        .map(|(s, _)| weight(s))
        .sum();
    Ok(correct / total)
}

/// Mean over gold-covered sentences of the duration IoU between the
/// segments predicted for the sentence and the segments gold assigns to it.
pub fn sentence_iou(
    pred: &[Option<usize>],
    gold: &[Option<usize>],
    segments: &[VideoSegment],
) -> Result<f64, AlignmentError> {
    check_lengths(pred, gold, segments)?;
    let mut sentences: Vec<usize> = gold.iter().flatten().copied().collect();
    sentences.sort_unstable();
    sentences.dedup();
    if sentences.is_empty() {
        return Err(AlignmentError::Domain(
            "gold alignment covers no sentence".into(),
        ));
    }
    let mut sum = 0.0;
    for &j in &sentences {
        let (mut inter, mut union) = (0.0, 0.0);
        for (s, (p, g)) in segments.iter().zip(pred.iter().zip(gold)) {
            let (in_p, in_g) = (*p == Some(j), *g == Some(j));
            if in_p && in_g {
                inter += s.duration();
            }
            if in_p || in_g {
                union += s.duration();
            }
        }
        sum += inter / union;
    }
    Ok(sum / sentences.len() as f64)
}

/// Threshold from `grid` with the best clip accuracy on a dev split; ties
/// go to the earlier grid value.
pub fn calibrate_threshold(
    s: &SimilarityMatrix,
    gold: &[Option<usize>],
    segments: &[VideoSegment],
    decoder: Decoder,
    grid: &[f64],
    weighting: ClipWeighting,
) -> Result<(f64, f64), AlignmentError> {
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        let acc = clip_accuracy(&decoder.decode(s, t).assignment, gold, segments, weighting)?;
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((t, acc));
        }
    }
    best.ok_or_else(|| AlignmentError::Domain("empty threshold grid".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFixture {
    pub segments: Vec<VideoSegment>,
    pub gold: Vec<Option<usize>>,
    pub similarity: SimilarityMatrix,
}

/// Random monotone alignment with a known answer. Every sentence gets at
/// least one segment, the first and last segments are matched, and
/// unmatched segments only sit between two segments of the same sentence.
/// Similarity is 1 on gold cells and 0 elsewhere.
pub fn planted_fixture(
    seed: u64,
    n_sentences: usize,
    n_segments: usize,
) -> Result<PlantedFixture, AlignmentError> {
    if n_sentences == 0 || n_segments < n_sentences {
        return Err(AlignmentError::Domain(format!(
            "need at least one sentence and one segment per sentence, got {n_sentences} sentences, {n_segments} segments"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![1usize; n_sentences];
    for _ in n_sentences..n_segments {
        counts[rng.random_range(0..n_sentences)] += 1;
    }
    let mut gold = Vec::with_capacity(n_segments);
    for (j, &k) in counts.iter().enumerate() {
        for pos in 0..k {
            let interior = pos > 0 && pos + 1 < k;
            gold.push(if interior && rng.random_bool(0.3) {
                None
            } else {
                Some(j)
            });
        }
    }
    let mut segments = Vec::with_capacity(n_segments);
    let mut t = 0.0;
    for index in 0..n_segments {
        let d = f64::from(rng.random_range(2u32..=8)) / 2.0;
        segments.push(VideoSegment {
            index,
            start: t,
            end: t + d,
        });
        t += d;
    }
    let similarity = SimilarityMatrix::identity_from(&gold, n_sentences)?;
    Ok(PlantedFixture {
        segments,
        gold,
        similarity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segs(durations: &[f64]) -> Vec<VideoSegment> {
        let mut t = 0.0;
        durations
            .iter()
            .enumerate()
            .map(|(index, d)| {
                let s = VideoSegment {
                    index,
                    start: t,
                    end: t + d,
                };
                t += d;
                s
            })
            .collect()
    }

    #[test]
    fn clip_accuracy_weights() {
        let s = segs(&[2.0, 2.0, 4.0]);
        let gold = [Some(0), Some(1), Some(1)];
        let pred = [Some(0), Some(1), Some(0)];
        assert_eq!(
            clip_accuracy(&pred, &gold, &s, ClipWeighting::Duration).unwrap(),
            0.5
        );
        assert!(
            (clip_accuracy(&pred, &gold, &s, ClipWeighting::Count).unwrap() - 2.0 / 3.0).abs()
                < 1e-15
        );
        let gold = [Some(0), None, None];
        let pred = [Some(0), None, Some(1)];
        assert_eq!(
            clip_accuracy(&pred, &gold, &s, ClipWeighting::Duration).unwrap(),
            0.5
        );
        assert!(clip_accuracy(&pred[..2], &gold, &s, ClipWeighting::Count).is_err());
    }

    #[test]
    fn iou_example() {
        let s = segs(&[2.0, 2.0, 2.0]);
        let gold = [Some(0), Some(0), Some(1)];
        let pred = [None, Some(0), Some(0)];
        // Sentence 0: overlap 2 of 6; sentence 1: 0 of 2.
        let v = sentence_iou(&pred, &gold, &s).unwrap();
        assert!((v - (1.0 / 3.0 + 0.0) / 2.0).abs() < 1e-15);
        assert_eq!(sentence_iou(&gold, &gold, &s).unwrap(), 1.0);
        assert!(sentence_iou(&pred, &[None, None, None], &s).is_err());
    }

    #[test]
    fn planted_fixture_shape() {
        for seed in 0..50 {
            let f = planted_fixture(seed, 5, 14).unwrap();
            assert_eq!(f.gold.len(), 14);
            assert_eq!(f.gold[0], Some(0));
            assert_eq!(f.gold[13], Some(4));
            let mapped: Vec<usize> = f.gold.iter().flatten().copied().collect();
            assert!(mapped.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
            assert!(validate_segments(&f.segments).is_ok());
        }
        assert!(planted_fixture(0, 4, 3).is_err());
    }

    #[test]
    fn decoders_recover_planted_alignment() {
        for seed in 0..30 {
            let f = planted_fixture(seed, 6, 20).unwrap();
            for decoder in [Decoder::MinimalDistance, Decoder::Dtw] {
                let pred = decoder.decode(&f.similarity, 0.5).assignment;
                assert_eq!(pred, f.gold, "seed {seed} {decoder}");
            }
        }
    }

    #[test]
    fn calibration_picks_first_best() {
        let f = planted_fixture(3, 4, 12).unwrap();
        let (t, acc) = calibrate_threshold(
            &f.similarity,
            &f.gold,
            &f.segments,
            Decoder::MinimalDistance,
            &[-1.0, 0.5, 0.9],
            ClipWeighting::Duration,
        )
        .unwrap();
        assert_eq!(acc, 1.0);
        assert!(t == 0.5 || !f.gold.contains(&None));
        assert!(calibrate_threshold(
            &f.similarity,
            &f.gold,
            &f.segments,
            Decoder::Dtw,
            &[],
            ClipWeighting::Count
        )
        .is_err());
    }
}
