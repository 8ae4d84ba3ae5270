//! Multivariate counterfactuals by whole-channel swaps.
//!
//! Channels of the query are replaced by the corresponding channels of a
//! distractor (a nearby instance the model assigns to the target class).
//! Random-restart hill climbing over the swap mask looks for the smallest
//! set of swapped channels that still yields the target prediction.
//!
//! Search state is a bit mask over channels; the neighborhood is every mask
//! at Hamming distance one. Valid states are ranked by fewer swaps, then
//! higher target probability, then lower swapped channel indices. The
//! climber moves to the best valid neighbor while it beats the current
//! state. From an invalid state with no valid neighbor it adds the channel
//! that raises the target probability the most.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::explanation::CounterfactualResult;
use crate::models::{predict, predicted_classes, score_batch, Model};
use crate::series::{ClassId, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComteParams {
    pub n_distractors: usize,
    pub restarts: usize,
    /// Moves per restart.
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for ComteParams {
    fn default() -> Self {
        ComteParams {
            n_distractors: 3,
            restarts: 5,
            max_iters: 100,
            seed: 0,
        }
    }
}

impl ComteParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_distractors == 0 || self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::BadParams(
                "n_distractors, restarts and max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Which channels are taken from the distractor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwapState {
    pub swapped: Vec<bool>,
}

impl SwapState {
    pub fn none(channels: usize) -> Self {
        SwapState {
            swapped: vec![false; channels],
        }
    }

    pub fn count(&self) -> usize {
        self.swapped.iter().filter(|s| **s).count()
    }

    pub fn flipped(&self, channel: usize) -> Self {
        let mut s = self.clone();
        s.swapped[channel] = !s.swapped[channel];
        s
    }

    fn random(channels: usize, rng: &mut impl Rng) -> Self {
        SwapState {
            swapped: (0..channels).map(|_| rng.gen_bool(0.5)).collect(),
        }
    }
}

/// Up to `n` instances predicted as `target`, nearest to `query` first
/// (ties by dataset index).
pub fn select_distractors(
    query: &Series,
    target: ClassId,
    ds: &LabeledDataset,
    model: &dyn Model,
    n: usize,
) -> Result<Vec<Series>> {
    if query.shape() != ds.shape() {
        return Err(Error::ShapeMismatch(0));
    }
    let pool: Vec<Series> = ds.iter().map(|(s, _)| s.clone()).collect();
    let preds = predicted_classes(model, &pool)?;
    let mut candidates: Vec<(f64, usize)> = pool
        .iter()
        .zip(&preds)
        .enumerate()
        .filter(|(_, (_, p))| **p == target)
        .map(|(i, (s, _))| (s.sq_dist(query), i))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoDistractor);
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(candidates
        .into_iter()
        .take(n)
        .map(|(_, i)| pool[i].clone())
        .collect())
}

/// Channel `d` of the result is the distractor's if `swapped[d]`, else the query's.
pub fn apply_swap(query: &Series, distractor: &Series, state: &SwapState) -> Result<Series> {
    if !query.same_shape(distractor) || state.swapped.len() != query.channels() {
        return Err(Error::ShapeMismatch(0));
    }
    let mut out = query.clone();
    for (d, _) in state.swapped.iter().enumerate().filter(|(_, s)| **s) {
        out.row_mut(d).copy_from_slice(distractor.row(d));
    }
    Ok(out)
}

/// Channels swapped in `state`, ascending.
fn swapped_channels(state: &SwapState) -> Vec<usize> {
    (0..state.swapped.len())
        .filter(|&d| state.swapped[d])
        .collect()
}

/// Preference order over valid states: fewer swaps, then higher target
/// probability, then lower swapped channel indices.
fn better(a: &SwapState, pa: f64, b: &SwapState, pb: f64) -> bool {
    a.count()
        .cmp(&b.count())
        .then(pb.total_cmp(&pa))
        .then_with(|| swapped_channels(a).cmp(&swapped_channels(b)))
        .is_lt()
}

/// Random-restart hill climbing for one distractor. Returns the best valid
/// state over all restarts (fewest swaps, then highest target probability,
/// then lowest channel indices, then earliest restart) with its target
/// probability, or `None` if no restart reached the target.
pub fn hill_climb(
    query: &Series,
    distractor: &Series,
    target: ClassId,
    model: &dyn Model,
    params: &ComteParams,
    rng: &mut impl Rng,
) -> Result<Option<(SwapState, f64)>> {
    params.validate()?;
    let channels = query.channels();
    let mut best: Option<(SwapState, f64)> = None;

    for _ in 0..params.restarts {
        let mut state = SwapState::random(channels, rng);
        let p = predict(model, &apply_swap(query, distractor, &state)?)?;
        let mut valid = p.argmax() == target;
        let mut p_target = p.get(target);

        for _ in 0..params.max_iters {
            let neighbors: Vec<SwapState> = (0..channels).map(|d| state.flipped(d)).collect();
            let batch = neighbors
                .iter()
                .map(|s| apply_swap(query, distractor, s))
                .collect::<Result<Vec<_>>>()?;
            let probs = score_batch(model, &batch)?;
            let pt = |d: usize| probs[d].get(target);

            let mut best_valid: Option<usize> = None;
            for d in (0..channels).filter(|&d| probs[d].argmax() == target) {
                if best_valid.is_none_or(|b| better(&neighbors[d], pt(d), &neighbors[b], pt(b))) {
                    best_valid = Some(d);
                }
            }

            match best_valid {
                Some(d) => {
                    if valid && !better(&neighbors[d], pt(d), &state, p_target) {
                        break;
                    }
                    state = neighbors[d].clone();
                    p_target = pt(d);
                    valid = true;
                }
                None if valid => break,
                None => {
                    let mut pick: Option<usize> = None;
                    for d in (0..channels).filter(|&d| !state.swapped[d]) {
                        if pick.is_none_or(|b| pt(d) > pt(b)) {
                            pick = Some(d);
                        }
                    }
                    let Some(d) = pick else { break };
                    state = neighbors[d].clone();
                    p_target = pt(d);
                }
            }
        }

        if valid
            && best
                .as_ref()
                .is_none_or(|(b, pb)| better(&state, p_target, b, *pb))
        {
            best = Some((state, p_target));
        }
    }
    Ok(best)
}

/// Per-distractor random stream: the same seed with stream index `i`.
fn distractor_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

/// Finds a minimal channel swap toward `target` (default: the query's
/// runner-up class).
pub fn explain(
    query: &Series,
    model: &dyn Model,
    ds: &LabeledDataset,
    target: Option<ClassId>,
    params: &ComteParams,
) -> Result<CounterfactualResult> {
    params.validate()?;
    let probs = predict(model, query)?;
    let predicted = probs.argmax();
    let target = target.unwrap_or_else(|| probs.runner_up());
    if target >= model.n_classes() {
        return Err(Error::BadParams(format!(
            "target class {target} out of range"
        )));
    }
    if target == predicted {
        if model.n_classes() < 2 {
            return Err(Error::NoDistractor);
        }
        return Err(Error::BadParams(format!(
            "target {target} is already the predicted class"
        )));
    }

    let distractors = select_distractors(query, target, ds, model, params.n_distractors)?;
    let search = |(i, dist): (usize, &Series)| {
        hill_climb(
            query,
            dist,
            target,
            model,
            params,
            &mut distractor_rng(params.seed, i),
        )
    };
    let found: Vec<Option<(SwapState, f64)>> = if model.capabilities().parallel_safe {
        distractors
            .par_iter()
            .enumerate()
            .map(search)
            .collect::<Result<_>>()?
    } else {
        distractors
            .iter()
            .enumerate()
            .map(search)
            .collect::<Result<_>>()?
    };

    let mut best: Option<(usize, SwapState, f64)> = None;
    for (i, found) in found.into_iter().enumerate() {
        if let Some((s, p)) = found {
            if best.as_ref().is_none_or(|(_, b, pb)| better(&s, p, b, *pb)) {
                best = Some((i, s, p));
            }
        }
    }
    let (i, state, _) = best.ok_or(Error::SearchFailed)?;
    let cf = apply_swap(query, &distractors[i], &state)?;
    let label = predict(model, &cf)?.argmax();
    Ok(CounterfactualResult::from_diff(query, cf, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnModel;

    fn series(rows: Vec<Vec<f64>>) -> Series {
        Series::from_rows(rows).unwrap()
    }

    /// Class 1 iff channel 0 has a positive mean.
    fn reads_channel_zero() -> FnModel<impl Fn(&Series) -> Vec<f64> + Send + Sync> {
        FnModel::new(2, |x: &Series| {
            if x.row(0).iter().sum::<f64>() > 0.0 {
                vec![0.2, 0.8]
            } else {
                vec![0.8, 0.2]
            }
        })
    }

    #[test]
    fn swap_basics() {
        let q = series(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let d = series(vec![vec![5.0, 5.0], vec![6.0, 6.0]]);
        assert_eq!(apply_swap(&q, &d, &SwapState::none(2)).unwrap(), q);
        let all = SwapState {
            swapped: vec![true, true],
        };
        assert_eq!(apply_swap(&q, &d, &all).unwrap(), d);
        let first = SwapState {
            swapped: vec![true, false],
        };
        assert_eq!(
            apply_swap(&q, &d, &first).unwrap(),
            series(vec![vec![5.0, 5.0], vec![1.0, 1.0]])
        );
        let short = series(vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]]);
        assert_eq!(apply_swap(&q, &short, &first), Err(Error::ShapeMismatch(0)));
    }

    #[test]
    fn distractor_selection() {
        let m = reads_channel_zero();
        let q = series(vec![vec![-1.0, -1.0], vec![0.0, 0.0]]);
        let near = series(vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        let far = series(vec![vec![3.0, 3.0], vec![0.0, 0.0]]);
        let same = series(vec![vec![-2.0, -2.0], vec![0.0, 0.0]]);
        let ds =
            LabeledDataset::from_instances(vec![(far.clone(), 1), (same, 0), (near.clone(), 1)])
                .unwrap();
        assert_eq!(
            select_distractors(&q, 1, &ds, &m, 1).unwrap(),
            vec![near.clone()]
        );
        assert_eq!(
            select_distractors(&q, 1, &ds, &m, 5).unwrap(),
            vec![near, far]
        );
        let only_zero = LabeledDataset::from_instances(vec![(
            series(vec![vec![-1.0, 0.0], vec![0.0, 0.0]]),
            0,
        )])
        .unwrap();
        assert_eq!(
            select_distractors(&q, 1, &only_zero, &m, 3),
            Err(Error::NoDistractor)
        );
    }

    #[test]
    fn climbs_to_the_informative_channel() {
        let m = reads_channel_zero();
        let q = series(vec![vec![-1.0; 4], vec![2.0; 4], vec![3.0; 4]]);
        let d = series(vec![vec![1.0; 4], vec![-2.0; 4], vec![0.5; 4]]);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = hill_climb(&q, &d, 1, &m, &ComteParams::default(), &mut rng)
                .unwrap()
                .unwrap();
            assert_eq!(s.0.swapped, vec![true, false, false]);
            assert_eq!(s.1, 0.8);
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let m = FnModel::new(2, |x: &Series| {
            let s: f64 = (0..x.channels()).map(|d| x.get(d, 0)).sum();
            if s > 1.5 {
                vec![0.0, 1.0]
            } else {
                vec![1.0, 0.0]
            }
        });
        let q = series(vec![vec![0.0; 2]; 4]);
        let d = series(vec![vec![1.0; 2]; 4]);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            hill_climb(&q, &d, 1, &m, &ComteParams::default(), &mut rng).unwrap()
        };
        let a = run(42).unwrap();
        assert_eq!(Some(a.clone()), run(42));
        assert_eq!(a.0.count(), 2);
    }

    #[test]
    fn equal_swaps_prefer_confidence_then_low_channels() {
        // any single swapped channel reaches class 1; channel 2 most confidently
        let m = FnModel::new(2, |x: &Series| {
            let hits: Vec<bool> = (0..3).map(|d| x.get(d, 0) > 0.0).collect();
            match hits.iter().filter(|h| **h).count() {
                0 => vec![1.0, 0.0],
                _ if hits[2] => vec![0.1, 0.9],
                _ => vec![0.4, 0.6],
            }
        });
        let q = series(vec![vec![-1.0, -1.0]; 3]);
        let d = series(vec![vec![1.0, 1.0]; 3]);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, p) = hill_climb(&q, &d, 1, &m, &ComteParams::default(), &mut rng)
                .unwrap()
                .unwrap();
            assert_eq!((s.swapped, p), (vec![false, false, true], 0.9));
        }

        let flat = FnModel::new(2, |x: &Series| {
            if (0..3).any(|d| x.get(d, 0) > 0.0) {
                vec![0.0, 1.0]
            } else {
                vec![1.0, 0.0]
            }
        });
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (s, _) = hill_climb(&q, &d, 1, &flat, &ComteParams::default(), &mut rng)
                .unwrap()
                .unwrap();
            assert_eq!(s.swapped, vec![true, false, false]);
        }
    }

    #[test]
    fn univariate_swaps_its_only_channel() {
        let m = reads_channel_zero();
        let q = series(vec![vec![-1.0, -2.0]]);
        let d = series(vec![vec![1.0, 3.0]]);
        let ds = LabeledDataset::from_instances(vec![(d.clone(), 1), (q.clone(), 0)]).unwrap();
        let r = explain(&q, &m, &ds, None, &ComteParams::default()).unwrap();
        assert_eq!(r.changed_channels, vec![true]);
        assert_eq!(r.cf, d);
        assert_eq!(r.label, 1);
    }

    #[test]
    fn missing_target_class() {
        let m = reads_channel_zero();
        let q = series(vec![vec![-1.0, -2.0], vec![0.0, 0.0]]);
        let ds = LabeledDataset::from_instances(vec![(q.clone(), 0)]).unwrap();
        assert_eq!(
            explain(&q, &m, &ds, Some(1), &ComteParams::default()),
            Err(Error::NoDistractor)
        );
        assert!(matches!(
            explain(&q, &m, &ds, Some(0), &ComteParams::default()),
            Err(Error::BadParams(_))
        ));
    }

    #[test]
    fn zero_counts_rejected() {
        let p = ComteParams {
            restarts: 0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
