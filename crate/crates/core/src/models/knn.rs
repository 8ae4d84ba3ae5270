use std::sync::Arc;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::{Capabilities, Model};
use crate::series::{ProbVector, Series};

/// k-nearest-neighbor classifier under Euclidean distance. Probabilities
/// are the neighbors' vote frequencies; no distance weighting.
#[derive(Debug, Clone)]
pub struct KnnModel {
    train: Arc<LabeledDataset>,
    k: usize,
}

/// Stores `ds` as the reference set of a `k`-NN classifier.
pub fn knn_fit(ds: &LabeledDataset, k: usize) -> Result<KnnModel> {
    if k == 0 || k > ds.len() {
        return Err(Error::BadK { k, n: ds.len() });
    }
    Ok(KnnModel {
        train: Arc::new(ds.clone()),
        k,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the `k` nearest training instances, nearest first.
    /// Equal distances are ordered by dataset index.
    pub fn neighbors(&self, x: &Series) -> Vec<usize> {
        let mut dists: Vec<(f64, usize)> = self
            .train
            .iter()
            .enumerate()
            .map(|(i, (s, _))| (s.sq_dist(x), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dists.len() {
            dists.select_nth_unstable_by(self.k - 1, cmp);
            dists.truncate(self.k);
        }
        dists.sort_by(cmp);
        dists.into_iter().map(|(_, i)| i).collect()
    }

    fn predict_one(&self, x: &Series) -> Result<ProbVector> {
        if !x.same_shape(self.train.series(0)) {
            return Err(Error::ShapeMismatch(0));
        }
        let mut votes = vec![0.0; self.train.n_classes()];
        for i in self.neighbors(x) {
            votes[self.train.label(i)] += 1.0;
        }
        let k = self.k as f64;
        votes.iter_mut().for_each(|v| *v /= k);
        ProbVector::new(votes)
    }
}

impl Model for KnnModel {
    fn n_classes(&self) -> usize {
        self.train.n_classes()
    }

    fn predict_batch(&self, batch: &[Series]) -> Result<Vec<ProbVector>> {
        batch.iter().map(|x| self.predict_one(x)).collect()
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            has_gradient: false,
            parallel_safe: true,
        }
    }
}
