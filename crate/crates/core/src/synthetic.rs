//! Seeded synthetic classification datasets with a known discriminative
//! region, used by the demo and by property tests of the explainers.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::series::Series;

/// Peak height of the class-1 bump.
pub const BUMP_AMPLITUDE: f64 = 2.0;
/// Standard deviation of the noise on the non-informative channels of
/// [`SyntheticKind::ChannelMulti`].
pub const NOISE_CHANNEL_STD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Univariate: class 1 carries a Gaussian bump over unit noise, class 0 is noise only.
    BumpUni,
    /// Multivariate: channel 0 behaves like `BumpUni`; the remaining
    /// channels are label-independent noise.
    ChannelMulti,
}

/// Gaussian bump width (standard deviation in timesteps) for length `t`.
pub fn bump_width(t: usize) -> f64 {
    t as f64 / 10.0
}

/// Range the bump center is drawn from: `[0.2 t, 0.4 t]`.
pub fn bump_center_range(t: usize) -> (f64, f64) {
    (0.2 * t as f64, 0.4 * t as f64)
}

/// Timesteps holding nearly all of the bump mass: the center range widened
/// by one bump width on each side.
pub fn informative_window(t: usize) -> Range<usize> {
    let (lo, hi) = bump_center_range(t);
    let w = bump_width(t);
    let start = (lo - w).max(0.0).floor() as usize;
    let end = ((hi + w).ceil() as usize).min(t);
    start..end
}

/// Adds a bump of the standard amplitude and width centered at `center`.
pub fn add_bump(row: &mut [f64], center: f64) {
    let sigma = bump_width(row.len());
    for (tau, v) in row.iter_mut().enumerate() {
        let z = (tau as f64 - center) / sigma;
        *v += BUMP_AMPLITUDE * (-0.5 * z * z).exp();
    }
}

/// Label of instance `i` out of `n`: first half class 0, second half class 1.
fn balanced_label(i: usize, n: usize) -> usize {
    usize::from(2 * i >= n)
}

/// Generates `n` instances of `d` channels and length `t`.
pub fn make_synthetic(
    kind: SyntheticKind,
    n: usize,
    d: usize,
    t: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if n < 4 {
        return Err(Error::BadParams(format!("n must be at least 4, got {n}")));
    }
    if t < 20 {
        return Err(Error::BadParams(format!("t must be at least 20, got {t}")));
    }
    match kind {
        SyntheticKind::BumpUni if d != 1 => {
            return Err(Error::BadParams("bump_uni is univariate (d = 1)".into()))
        }
        SyntheticKind::ChannelMulti if d < 2 => {
            return Err(Error::BadParams("channel_multi needs d >= 2".into()))
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let side = Normal::new(0.0, NOISE_CHANNEL_STD).expect("valid normal");
    let (lo, hi) = bump_center_range(t);

    let instances = (0..n)
        .map(|i| {
            let label = balanced_label(i, n);
            let mut values = Vec::with_capacity(d * t);
            let mut row0: Vec<f64> = (0..t).map(|_| unit.sample(&mut rng)).collect();
            if label == 1 {
                let center = rng.gen_range(lo..=hi);
                add_bump(&mut row0, center);
            }
            values.extend(row0);
            for _ in 1..d {
                values.extend((0..t).map(|_| side.sample(&mut rng)));
            }
            let s = Series::from_flat(d, t, values).expect("generated values are finite");
            (s, label)
        })
        .collect();
    LabeledDataset::new(instances, 2)
}

/// Held-out instances for a training set generated with `seed`.
pub fn held_out_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// Training set from `seed` and a test set from [`held_out_seed`].
pub fn make_split(
    kind: SyntheticKind,
    n_train: usize,
    n_test: usize,
    d: usize,
    t: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let train = make_synthetic(kind, n_train, d, t, seed)?;
    let test = make_synthetic(kind, n_test, d, t, held_out_seed(seed))?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_balanced() {
        let ds = make_synthetic(SyntheticKind::BumpUni, 4, 1, 20, 0).unwrap();
        assert_eq!(ds.labels(), vec![0, 0, 1, 1]);
        assert_eq!(ds.shape(), (1, 20));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = make_synthetic(SyntheticKind::BumpUni, 200, 1, 50, 7).unwrap();
        let b = make_synthetic(SyntheticKind::BumpUni, 200, 1, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = make_synthetic(SyntheticKind::BumpUni, 200, 1, 50, 8).unwrap();
        assert!(a
            .iter()
            .zip(c.iter())
            .any(|((x, _), (y, _))| x.values() != y.values()));
    }

    #[test]
    fn bad_params() {
        for (kind, n, d, t) in [
            (SyntheticKind::BumpUni, 3, 1, 20),
            (SyntheticKind::BumpUni, 4, 1, 19),
            (SyntheticKind::BumpUni, 4, 2, 20),
            (SyntheticKind::ChannelMulti, 4, 1, 20),
        ] {
            assert!(matches!(
                make_synthetic(kind, n, d, t, 0),
                Err(Error::BadParams(_))
            ));
        }
    }

    #[test]
    fn noise_channels_are_label_independent() {
        let ds = make_synthetic(SyntheticKind::ChannelMulti, 500, 3, 50, 11).unwrap();
        for d in 1..3 {
            let mut sums = [0.0; 2];
            let mut counts = [0.0; 2];
            for (s, l) in ds.iter() {
                sums[*l] += s.row(d).iter().sum::<f64>();
                counts[*l] += s.len() as f64;
            }
            let diff = (sums[0] / counts[0] - sums[1] / counts[1]).abs();
            assert!(diff <= 0.1, "channel {d} class means differ by {diff}");
        }
        // the informative channel does differ
        let mut sums = [0.0; 2];
        for (s, l) in ds.iter() {
            sums[*l] += s.row(0).iter().sum::<f64>();
        }
        assert!((sums[1] - sums[0]) / (250.0 * 50.0) > 0.3);
    }

    #[test]
    fn window_covers_bump_support() {
        assert_eq!(informative_window(50), 5..25);
        assert_eq!(informative_window(20), 2..10);
    }
}
