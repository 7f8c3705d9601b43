//! Dense, piecewise-continuous trajectory storage.
//!
//! A [`HistoryBuffer`] holds the recorded solution `x(t)` on `[t_min, t_max]`,
//! including the initial segment. Samples are stored at strictly increasing
//! times. A sample may carry two values, a left and a right limit, which is
//! how state jumps are represented: interpolation between neighbouring
//! samples always uses the right value of the earlier sample and the left
//! value of the later one, so a jump is never smeared across an interval.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which one-sided limit to read at a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Four-point Lagrange interpolation inside a continuous segment; falls
    /// back to linear when the segment holds fewer than four samples.
    Cubic,
}

/// Relative slack accepted at the ends of the coverage interval, so that a
/// delayed lookup rounded one ulp past `t_max` still resolves.
const EDGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    dim: usize,
    interpolation: Interpolation,
    times: Vec<f64>,
    /// Right-limit values, `dim` per sample.
    values: Vec<f64>,
    /// Left-limit values for samples that are discontinuities.
    left_limits: BTreeMap<usize, Vec<f64>>,
}

impl HistoryBuffer {
    pub fn new(dim: usize, interpolation: Interpolation) -> Self {
        Self {
            dim,
            interpolation,
            times: Vec::new(),
            values: Vec::new(),
            left_limits: BTreeMap::new(),
        }
    }

    /// Buffer holding a constant state on `[t_start, t_end]`.
    pub fn constant(
        t_start: f64,
        t_end: f64,
        state: &[f64],
        interpolation: Interpolation,
    ) -> Result<Self> {
        let mut buffer = Self::new(state.len(), interpolation);
        buffer.push(t_start, state)?;
        if t_end > t_start {
            buffer.push(t_end, state)?;
        }
        Ok(buffer)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_min(&self) -> Option<f64> {
        self.times.first().copied()
    }

    pub fn t_max(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// Stored value of sample `index` for the requested side.
    pub fn sample(&self, index: usize, side: Side) -> &[f64] {
        if side == Side::Left {
            if let Some(left) = self.left_limits.get(&index) {
                return left;
            }
        }
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    /// Right value of the most recent sample.
    pub fn last_state(&self) -> Option<&[f64]> {
        if self.is_empty() {
            None
        } else {
            Some(self.sample(self.len() - 1, Side::Right))
        }
    }

    pub fn is_discontinuity(&self, index: usize) -> bool {
        self.left_limits.contains_key(&index)
    }

    /// Indices of samples where left and right limits differ.
    pub fn discontinuities(&self) -> impl Iterator<Item = usize> + '_ {
        self.left_limits.keys().copied()
    }

    /// Appends a continuous sample. Times must be strictly increasing.
    pub fn push(&mut self, t: f64, state: &[f64]) -> Result<()> {
        self.check_dim(state)?;
        if !t.is_finite() {
            return Err(Error::State(format!("non-finite sample time {t}")));
        }
        if let Some(last) = self.t_max() {
            if t <= last {
                return Err(Error::State(format!(
                    "sample time {t} does not advance past {last}"
                )));
            }
        }
        self.times.push(t);
        self.values.extend_from_slice(state);
        Ok(())
    }

    /// Overwrites the most recent sample. Used when successive updates land on
    /// the same floating-point time (gaps below the resolution of `t`). A
    /// discontinuity keeps its left limit; otherwise both limits move.
    pub fn replace_last(&mut self, state: &[f64]) -> Result<()> {
        self.check_dim(state)?;
        let index = self
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::State("replace on empty history".into()))?;
        self.values[index * self.dim..(index + 1) * self.dim].copy_from_slice(state);
        Ok(())
    }

    /// Records a jump at the most recent sample: its current value becomes the
    /// left limit and `right` the new right limit.
    pub fn push_jump(&mut self, right: &[f64]) -> Result<()> {
        self.check_dim(right)?;
        let index = self
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::State("jump on empty history".into()))?;
        let range = index * self.dim..(index + 1) * self.dim;
        let left = self.values[range.clone()].to_vec();
        self.left_limits.entry(index).or_insert(left);
        self.values[range].copy_from_slice(right);
        Ok(())
    }

    fn check_dim(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::State(format!(
                "state has dimension {}, history expects {}",
                state.len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, t: f64, side: Side) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(t, side, &mut out)?;
        Ok(out)
    }

    /// Interpolated state at `t`. At a stored sample time the stored value for
    /// `side` is returned exactly.
    pub fn evaluate_into(&self, t: f64, side: Side, out: &mut [f64]) -> Result<()> {
        let (t_min, t_max) = match (self.t_min(), self.t_max()) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => return Err(Error::State("history is empty".into())),
        };
        let slack = EDGE_SLACK * t_min.abs().max(t_max.abs()).max(1.0);
        if !(t >= t_min - slack && t <= t_max + slack) {
            return Err(Error::Range { t, t_min, t_max });
        }
        let t = t.clamp(t_min, t_max);

        // Number of samples with time <= t; at least one because t >= t_min.
        let upper = self.times.partition_point(|&s| s <= t);
        let at = upper - 1;
        if self.times[at] == t {
            out.copy_from_slice(self.sample(at, side));
            return Ok(());
        }
        let (lo, hi) = (at, upper);
        match self.interpolation {
            Interpolation::Linear => self.linear(lo, hi, t, out),
            Interpolation::Cubic => self.cubic(lo, hi, t, out),
        }
        Ok(())
    }

    fn linear(&self, lo: usize, hi: usize, t: f64, out: &mut [f64]) {
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let w = (t - t0) / (t1 - t0);
        let a = self.sample(lo, Side::Right);
        let b = self.sample(hi, Side::Left);
        for ((o, &xa), &xb) in out.iter_mut().zip(a).zip(b) {
            *o = xa + w * (xb - xa);
        }
    }

    fn cubic(&self, lo: usize, hi: usize, t: f64, out: &mut [f64]) {
        // Continuous segment containing [lo, hi]: bounded by the nearest
        // discontinuities (inclusive, using the matching one-sided value).
        let seg_start = self
            .left_limits
            .range(..=lo)
            .next_back()
            .map_or(0, |(&i, _)| i);
        let seg_end = self
            .left_limits
            .range(hi..)
            .next()
            .map_or(self.len() - 1, |(&i, _)| i);
        if seg_end - seg_start < 3 {
            self.linear(lo, hi, t, out);
            return;
        }
        let first = lo.saturating_sub(1).max(seg_start).min(seg_end - 3);
        let nodes: [usize; 4] = [first, first + 1, first + 2, first + 3];
        let ts = nodes.map(|i| self.times[i]);
        out.fill(0.0);
        for (j, &node) in nodes.iter().enumerate() {
            let mut weight = 1.0;
            for (m, &tm) in ts.iter().enumerate() {
                if m != j {
                    weight *= (t - tm) / (ts[j] - tm);
                }
            }
            let side = if node == seg_start { Side::Right } else { Side::Left };
            for (o, &v) in out.iter_mut().zip(self.sample(node, side)) {
                *o += weight * v;
            }
        }
    }
}
