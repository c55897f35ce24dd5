//! Time series and trend-line data types.
//!
//! A [`TimeSeries`] is treated as equally spaced: timestamps are carried
//! through for reporting but no algorithm reads them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Univariate observations with an optional timestamp column and a
/// per-index missing flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    values: Vec<f64>,
    timestamps: Option<Vec<f64>>,
    missing: Vec<bool>,
}

impl TimeSeries {
    /// A fully observed series.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite value at index {i}")));
        }
        let missing = vec![false; values.len()];
        Ok(Self {
            values,
            timestamps: None,
            missing,
        })
    }

    /// A series where `None` marks an absent observation.
    pub fn from_options(values: Vec<Option<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(values.len());
        let mut missing = Vec::with_capacity(values.len());
        for (i, v) in values.into_iter().enumerate() {
            match v {
                Some(x) if !x.is_finite() => {
                    return Err(Error::InvalidSeries(format!("non-finite value at index {i}")))
                }
                Some(x) => {
                    out.push(x);
                    missing.push(false);
                }
                None => {
                    out.push(0.0);
                    missing.push(true);
                }
            }
        }
        Ok(Self {
            values: out,
            timestamps: None,
            missing,
        })
    }

    /// Attach timestamps. They must be strictly increasing and match the
    /// series length.
    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} timestamps for {} values",
                timestamps.len(),
                self.values.len()
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSeries(format!(
                "timestamps not strictly increasing at index {}",
                i + 1
            )));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Raw values. Entries flagged missing hold a placeholder and must not
    /// be read before imputation.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.missing[index]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|m| *m)
    }

    /// Value at `index`, or `None` when it is missing.
    pub fn get(&self, index: usize) -> Option<f64> {
        (!self.missing[index]).then(|| self.values[index])
    }
}

/// Forward-fill missing observations with the closest preceding observed
/// value. A leading gap has no predecessor and takes the first observed
/// value instead.
pub fn impute_missing(series: &TimeSeries) -> Result<TimeSeries> {
    let first = (0..series.len())
        .find_map(|i| series.get(i))
        .ok_or(Error::NoObservedValues)?;

    let mut last = first;
    let values = (0..series.len())
        .map(|i| {
            if let Some(v) = series.get(i) {
                last = v;
            }
            last
        })
        .collect();

    Ok(TimeSeries {
        values,
        timestamps: series.timestamps.clone(),
        missing: vec![false; series.len()],
    })
}

/// One piecewise-linear segment: slope angle in degrees and the number of
/// points it covers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub slope: f64,
    pub duration: usize,
}

impl Trend {
    pub fn new(slope: f64, duration: usize) -> Result<Self> {
        if !(slope > -90.0 && slope < 90.0) {
            return Err(Error::InvalidTrend(format!("slope {slope} outside (-90, 90)")));
        }
        if duration < 2 {
            return Err(Error::InvalidTrend(format!("duration {duration} < 2")));
        }
        Ok(Self { slope, duration })
    }
}

/// Ordered trends partitioning a series: every point belongs to exactly
/// one trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSequence {
    trends: Vec<Trend>,
    boundaries: Vec<usize>,
}

impl TrendSequence {
    /// Build from trends laid end to end starting at index 0.
    pub fn from_trends(trends: Vec<Trend>) -> Result<Self> {
        let mut boundaries = Vec::with_capacity(trends.len());
        let mut start = 0;
        for t in &trends {
            Trend::new(t.slope, t.duration)?;
            boundaries.push(start);
            start += t.duration;
        }
        Ok(Self { trends, boundaries })
    }

    /// Build from explicit start indices, which must agree with the
    /// durations.
    pub fn new(trends: Vec<Trend>, boundaries: Vec<usize>) -> Result<Self> {
        if trends.len() != boundaries.len() {
            return Err(Error::InvalidTrend(format!(
                "{} trends but {} boundaries",
                trends.len(),
                boundaries.len()
            )));
        }
        let seq = Self::from_trends(trends)?;
        if seq.boundaries != boundaries {
            return Err(Error::InvalidTrend(
                "boundaries do not match cumulative durations".into(),
            ));
        }
        Ok(seq)
    }

    pub fn trends(&self) -> &[Trend] {
        &self.trends
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn len(&self) -> usize {
        self.trends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trends.is_empty()
    }

    /// Number of points covered by all trends.
    pub fn covered(&self) -> usize {
        self.trends.iter().map(|t| t.duration).sum()
    }

    /// Index range `[start, end)` of trend `k` in the source series.
    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.boundaries[k];
        start..start + self.trends[k].duration
    }

    pub(crate) fn check_against(&self, series_len: usize) -> Result<()> {
        let covered = self.covered();
        if covered != series_len {
            return Err(Error::SegmentationMismatch {
                covered,
                len: series_len,
            });
        }
        Ok(())
    }
}

/// Summary statistics of a segmented series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_points: usize,
    pub n_trends: usize,
    pub slope_mean: f64,
    pub slope_std: f64,
    pub duration_mean: f64,
    pub duration_std: f64,
    pub n_instances: usize,
}

/// Population mean and standard deviation. Empty input gives zeros.
pub(crate) fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let first = values.clone().next().expect("nonempty");
    if values.clone().all(|v| v == first) {
        return (first, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

pub fn dataset_stats(series: &TimeSeries, trends: &TrendSequence) -> Result<DatasetStats> {
    trends.check_against(series.len())?;
    let (slope_mean, slope_std) = mean_std(trends.trends.iter().map(|t| t.slope));
    let (duration_mean, duration_std) =
        mean_std(trends.trends.iter().map(|t| t.duration as f64));
    Ok(DatasetStats {
        n_points: series.len(),
        n_trends: trends.len(),
        slope_mean,
        slope_std,
        duration_mean,
        duration_std,
        n_instances: trends.len().saturating_sub(1),
    })
}
