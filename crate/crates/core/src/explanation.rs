//! Output types shared by every explainer: feature attributions and
//! instance-based counterfactuals.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::series::{ClassId, Series};

/// Two cells count as different when they differ by more than this.
pub const CHANGE_TOL: f64 = 1e-12;

/// Declared value range of an attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeKind {
    /// Scores in `[-1, 1]`; sign carries the direction of influence.
    Signed,
    /// Scores in `[0, 1]`.
    Unit,
}

impl RangeKind {
    pub fn contains(self, v: f64) -> bool {
        match self {
            RangeKind::Signed => (-1.0..=1.0).contains(&v),
            RangeKind::Unit => (0.0..=1.0).contains(&v),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RangeKind::Signed => "signed",
            RangeKind::Unit => "unit",
        }
    }
}

/// A timestep interval `[start, end)` carrying one score for all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentScore {
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

/// Relevance matrix (`D x T`) for a single prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    channels: usize,
    len: usize,
    scores: Vec<f64>,
    range_kind: RangeKind,
    segments: Option<Vec<SegmentScore>>,
}

impl Attribution {
    /// Checks every score against `range_kind`.
    pub fn new(
        channels: usize,
        len: usize,
        scores: Vec<f64>,
        range_kind: RangeKind,
    ) -> Result<Self> {
        if scores.len() != channels * len {
            return Err(Error::BadParams(format!(
                "{} scores for a {channels}x{len} attribution",
                scores.len()
            )));
        }
        if let Some(i) = scores
            .iter()
            .position(|v| !v.is_finite() || !range_kind.contains(*v))
        {
            return Err(Error::RangeViolation {
                channel: i / len,
                timestep: i % len,
                value: scores[i],
            });
        }
        Ok(Attribution {
            channels,
            len,
            scores,
            range_kind,
            segments: None,
        })
    }

    /// Builds a segment-constant attribution: every cell in a segment gets
    /// that segment's score, on all channels. Segments must be ordered,
    /// contiguous from 0 and end at or before `len`; cells past the last
    /// segment score 0.
    pub fn from_segments(
        channels: usize,
        len: usize,
        segments: Vec<SegmentScore>,
        range_kind: RangeKind,
    ) -> Result<Self> {
        let mut cursor = 0;
        for s in &segments {
            if s.start != cursor || s.end <= s.start || s.end > len {
                return Err(Error::BadParams(
                    "segments must tile [0, T) in order".into(),
                ));
            }
            cursor = s.end;
        }
        let mut row = vec![0.0; len];
        for s in &segments {
            row[s.start..s.end].iter_mut().for_each(|v| *v = s.score);
        }
        let scores = row.repeat(channels);
        let mut a = Self::new(channels, len, scores, range_kind)?;
        a.segments = Some(segments);
        Ok(a)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.len)
    }

    pub fn range_kind(&self) -> RangeKind {
        self.range_kind
    }

    pub fn segments(&self) -> Option<&[SegmentScore]> {
        self.segments.as_deref()
    }

    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.scores[channel * self.len + t]
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.scores[channel * self.len..(channel + 1) * self.len]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.channels).map(|d| self.row(d).to_vec()).collect()
    }

    pub fn max(&self) -> f64 {
        self.scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.scores.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A counterfactual series with its predicted label and change masks.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualResult {
    pub cf: Series,
    pub label: ClassId,
    pub changed_channels: Vec<bool>,
    /// Row-major `D x T` mask of cells that differ from the query.
    pub changed_cells: Vec<bool>,
    /// Timestep window copied from the native guide, for the saliency-guided variant.
    pub window: Option<Range<usize>>,
}

impl CounterfactualResult {
    /// Derives the change masks by diffing `query` and `cf`.
    pub fn from_diff(query: &Series, cf: Series, label: ClassId) -> Self {
        let (changed_cells, changed_channels) = change_masks(query, &cf);
        CounterfactualResult {
            cf,
            label,
            changed_channels,
            changed_cells,
            window: None,
        }
    }

    pub fn with_window(mut self, window: Range<usize>) -> Self {
        self.window = Some(window);
        self
    }

    pub fn cell_changed(&self, channel: usize, t: usize) -> bool {
        self.changed_cells[channel * self.cf.len() + t]
    }

    pub fn n_changed_channels(&self) -> usize {
        self.changed_channels.iter().filter(|c| **c).count()
    }

    /// Timesteps where any channel changed.
    pub fn changed_timesteps(&self) -> Vec<usize> {
        (0..self.cf.len())
            .filter(|&t| (0..self.cf.channels()).any(|d| self.cell_changed(d, t)))
            .collect()
    }
}

/// Cell mask and channel mask of `|a - b| > CHANGE_TOL`.
pub fn change_masks(a: &Series, b: &Series) -> (Vec<bool>, Vec<bool>) {
    assert!(a.same_shape(b), "change masks need equal shapes");
    let cells: Vec<bool> = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs() > CHANGE_TOL)
        .collect();
    let channels = cells
        .chunks(a.len())
        .map(|r| r.iter().any(|c| *c))
        .collect();
    (cells, channels)
}

/// Inputs of one explanation call.
#[derive(Debug, Clone)]
pub struct ExplainRequest {
    pub query: Series,
    /// Requested counterfactual class; must differ from the query's prediction.
    pub target: Option<ClassId>,
    /// Class to attribute; defaults to the predicted class.
    pub class_of_interest: Option<ClassId>,
    pub seed: u64,
}

impl ExplainRequest {
    pub fn new(query: Series) -> Self {
        ExplainRequest {
            query,
            target: None,
            class_of_interest: None,
            seed: 0,
        }
    }
}
