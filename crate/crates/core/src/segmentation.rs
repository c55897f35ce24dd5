//! Bottom-up piecewise linear segmentation and sliding-window instance
//! construction.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{TimeSeries, Trend, TrendSequence};

/// How a segment's least-squares residual is turned into a cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    /// Residual sum of squares divided by the segment length.
    #[default]
    MeanSquaredResidual,
    /// Residual sum of squares.
    SumSquaredResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    /// Largest fit cost a merged segment may have.
    pub max_error: f64,
    #[serde(default)]
    pub cost: CostKind,
}

impl SegmentationConfig {
    pub fn new(max_error: f64, cost: CostKind) -> Result<Self> {
        let cfg = Self { max_error, cost };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_error >= 0.0) || !self.max_error.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "max_error must be a finite value >= 0, got {}",
                self.max_error
            )));
        }
        Ok(())
    }
}

/// Least-squares fit of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentFit {
    /// Angle of the fitted line, in degrees.
    pub slope: f64,
    pub cost: f64,
}

/// Centered sufficient statistics of a point set `(index, value)`.
/// Merging uses the pairwise update so long flat segments at a large
/// offset keep their precision.
#[derive(Debug, Clone, Copy)]
struct LineStats {
    n: f64,
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl LineStats {
    fn from_points(offset: usize, points: &[f64]) -> Self {
        let mut s = LineStats {
            n: 0.0,
            mean_x: 0.0,
            mean_y: 0.0,
            sxx: 0.0,
            syy: 0.0,
            sxy: 0.0,
        };
        for (i, &y) in points.iter().enumerate() {
            let x = (offset + i) as f64;
            s.n += 1.0;
            let dx = x - s.mean_x;
            let dy = y - s.mean_y;
            s.mean_x += dx / s.n;
            s.mean_y += dy / s.n;
            s.sxx += dx * (x - s.mean_x);
            s.syy += dy * (y - s.mean_y);
            s.sxy += dx * (y - s.mean_y);
        }
        s
    }

    fn merge(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        let w = self.n * other.n / n;
        LineStats {
            n,
            mean_x: self.mean_x + dx * other.n / n,
            mean_y: self.mean_y + dy * other.n / n,
            sxx: self.sxx + other.sxx + dx * dx * w,
            syy: self.syy + other.syy + dy * dy * w,
            sxy: self.sxy + other.sxy + dx * dy * w,
        }
    }

    fn coefficient(&self) -> f64 {
        if self.sxx > 0.0 {
            self.sxy / self.sxx
        } else {
            0.0
        }
    }

    fn residual_ss(&self) -> f64 {
        if self.sxx <= 0.0 {
            return 0.0;
        }
        let r = self.syy - self.sxy * self.sxy / self.sxx;
        // Below this the residual is rounding noise of an exact line.
        if r <= 1e-12 * self.syy {
            0.0
        } else {
            r
        }
    }

    fn cost(&self, kind: CostKind) -> f64 {
        match kind {
            CostKind::MeanSquaredResidual => self.residual_ss() / self.n,
            CostKind::SumSquaredResidual => self.residual_ss(),
        }
    }

    fn slope_degrees(&self) -> f64 {
        slope_to_degrees(self.coefficient())
    }
}

/// Angle in degrees of a line coefficient, kept strictly inside (-90, 90).
pub fn slope_to_degrees(coefficient: f64) -> f64 {
    const LIMIT: f64 = 90.0;
    let deg = coefficient.atan().to_degrees();
    let just_below = f64::from_bits(LIMIT.to_bits() - 1);
    deg.clamp(-just_below, just_below)
}

/// OLS line over indices `0..n`, returning its angle and fit cost.
pub fn fit_segment(points: &[f64], cost: CostKind) -> Result<SegmentFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateSegment(points.len()));
    }
    let stats = LineStats::from_points(0, points);
    Ok(SegmentFit {
        slope: stats.slope_degrees(),
        cost: stats.cost(cost),
    })
}

/// Intercept and coefficient of the OLS line over indices `0..n`.
pub fn fit_line(points: &[f64]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::DegenerateSegment(points.len()));
    }
    let stats = LineStats::from_points(0, points);
    let b = stats.coefficient();
    Ok((stats.mean_y - b * stats.mean_x, b))
}

struct Segment {
    start: usize,
    end: usize,
    stats: LineStats,
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
    version: u32,
}

struct Candidate {
    cost: f64,
    start: usize,
    left: usize,
    right: usize,
    left_version: u32,
    right_version: u32,
    merged: LineStats,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Lowest cost first, then leftmost.
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.start.cmp(&other.start))
    }
}

fn candidate(segs: &[Segment], left: usize, right: usize, kind: CostKind) -> Reverse<Candidate> {
    let merged = segs[left].stats.merge(&segs[right].stats);
    Reverse(Candidate {
        cost: merged.cost(kind),
        start: segs[left].start,
        left,
        right,
        left_version: segs[left].version,
        right_version: segs[right].version,
        merged,
    })
}

/// Greedy bottom-up segmentation.
///
/// Starts from adjacent point pairs (the last segment takes three points
/// when the length is odd) and repeatedly merges the adjacent pair whose
/// refit cost is lowest, leftmost first on ties, until every remaining
/// merge would exceed `cfg.max_error`.
pub fn segment_bottom_up(series: &TimeSeries, cfg: &SegmentationConfig) -> Result<TrendSequence> {
    cfg.validate()?;
    if series.has_missing() {
        return Err(Error::InvalidSeries(
            "series has missing values; impute first".into(),
        ));
    }
    let values = series.values();
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateSegment(n));
    }

    let mut segs: Vec<Segment> = Vec::with_capacity(n / 2);
    let mut start = 0;
    while start < n {
        let end = if n - start == 3 { n } else { start + 2 };
        let id = segs.len();
        segs.push(Segment {
            start,
            end,
            stats: LineStats::from_points(start, &values[start..end]),
            prev: id.checked_sub(1),
            next: None,
            alive: true,
            version: 0,
        });
        if id > 0 {
            segs[id - 1].next = Some(id);
        }
        start = end;
    }

    let mut heap: BinaryHeap<Reverse<Candidate>> = (1..segs.len())
        .map(|r| candidate(&segs, r - 1, r, cfg.cost))
        .collect();

    while let Some(Reverse(c)) = heap.pop() {
        let (l, r) = (&segs[c.left], &segs[c.right]);
        let fresh = l.alive
            && r.alive
            && l.next == Some(c.right)
            && l.version == c.left_version
            && r.version == c.right_version;
        if !fresh {
            continue;
        }
        if c.cost > cfg.max_error {
            break;
        }

        let next = segs[c.right].next;
        let right_end = segs[c.right].end;
        segs[c.right].alive = false;
        let left = &mut segs[c.left];
        left.end = right_end;
        left.stats = c.merged;
        left.next = next;
        left.version += 1;
        if let Some(nx) = next {
            segs[nx].prev = Some(c.left);
            heap.push(candidate(&segs, c.left, nx, cfg.cost));
        }
        if let Some(pv) = segs[c.left].prev {
            heap.push(candidate(&segs, pv, c.left, cfg.cost));
        }
    }

    let mut trends = Vec::new();
    let mut cursor = Some(0);
    while let Some(id) = cursor {
        let s = &segs[id];
        trends.push(Trend::new(s.stats.slope_degrees(), s.end - s.start)?);
        cursor = s.next;
    }
    TrendSequence::from_trends(trends)
}

/// Which values make up an instance's flat feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    #[default]
    RawOnly,
    /// Raw window followed by the current trend's slope and duration.
    RawPlusTrend,
}

impl FeatureMode {
    /// Flat feature length for a window of `window` raw points.
    pub fn feature_len(self, window: usize) -> usize {
        match self {
            FeatureMode::RawOnly => window,
            FeatureMode::RawPlusTrend => window + 2,
        }
    }
}

/// One supervised example: predict `target` from the data up to the end
/// of `current_trend`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub local_points: Vec<f64>,
    pub current_trend: Trend,
    /// Most recent trends, oldest first, ending with `current_trend`.
    pub trend_history: Vec<Trend>,
    pub target: Trend,
    pub mode: FeatureMode,
}

impl Instance {
    pub fn features(&self) -> Vec<f64> {
        let mut f = self.local_points.clone();
        if self.mode == FeatureMode::RawPlusTrend {
            f.push(self.current_trend.slope);
            f.push(self.current_trend.duration as f64);
        }
        f
    }

    pub fn feature_len(&self) -> usize {
        self.mode.feature_len(self.local_points.len())
    }

    pub fn target_pair(&self) -> [f64; 2] {
        [self.target.slope, self.target.duration as f64]
    }
}

/// Sliding-window instances, one per trend except the last.
///
/// The window size is the duration of the first trend. Windows that would
/// start before index 0 are left-padded with the first value, and short
/// histories are front-padded by repeating their earliest trend.
pub fn build_instances(
    series: &TimeSeries,
    trends: &TrendSequence,
    mode: FeatureMode,
    history_len: usize,
) -> Result<Vec<Instance>> {
    trends.check_against(series.len())?;
    if trends.len() < 2 {
        return Err(Error::NothingToPredict(trends.len()));
    }
    if history_len == 0 {
        return Err(Error::InvalidSpec("trend history length must be >= 1".into()));
    }
    let values = series.values();
    let all = trends.trends();
    let window = all[0].duration;

    let instances = (0..all.len() - 1)
        .map(|k| {
            let end = trends.range(k).end;
            let local_points = (0..window)
                .map(|j| {
                    let idx = end as isize - window as isize + j as isize;
                    values[idx.max(0) as usize]
                })
                .collect();
            let first = (k + 1).saturating_sub(history_len);
            let available = &all[first..=k];
            let mut trend_history = vec![available[0]; history_len - available.len()];
            trend_history.extend_from_slice(available);
            Instance {
                local_points,
                current_trend: all[k],
                trend_history,
                target: all[k + 1],
                mode,
            }
        })
        .collect();
    Ok(instances)
}
