use serde::{Deserialize, Serialize};

use crate::history::{HistoryBuffer, Side};

/// Exponential envelope `|x(t)| ~ amplitude * e^{-rate t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    /// Positive for decay, negative for growth.
    pub rate: f64,
    pub points_used: usize,
    /// Every sample of the tail is exactly zero.
    pub infinite_rate: bool,
}

/// Least-squares fit of `ln |x|` against `t` over the peak envelope of the
/// trajectory from `t_start` on.
///
/// Peaks are local maxima of `|x|` (both limits at jumps count, endpoints
/// included when they dominate their neighbour). Trajectories that cross
/// zero make a raw log-fit meaningless; monotone ones have too few peaks,
/// and then every nonzero sample is used instead.
pub fn decay_fit(traj: &HistoryBuffer, t_start: f64) -> DecayFit {
    let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(traj.len());
    for (i, &t) in traj.times().iter().enumerate() {
        if t < t_start {
            continue;
        }
        if traj.is_discontinuity(i) {
            points.push((t, norm(traj.sample(i, Side::Left))));
        }
        points.push((t, norm(traj.sample(i, Side::Right))));
    }

    if points.iter().all(|p| p.1 == 0.0) {
        return DecayFit {
            amplitude: 0.0,
            rate: f64::INFINITY,
            points_used: 0,
            infinite_rate: true,
        };
    }

    let n = points.len();
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let a = points[i].1;
        let left_ok = i == 0 || a >= points[i - 1].1;
        let right_ok = i + 1 == n || a >= points[i + 1].1;
        if a > 0.0 && left_ok && right_ok && n > 1 {
            peaks.push(points[i]);
        }
    }
    if peaks.len() < 3 {
        peaks = points.into_iter().filter(|p| p.1 > 0.0).collect();
    }

    let (slope, intercept) = least_squares(peaks.iter().map(|&(t, a)| (t, a.ln())));
    DecayFit {
        amplitude: intercept.exp(),
        rate: -slope,
        points_used: peaks.len(),
        infinite_rate: false,
    }
}

fn least_squares(points: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = points.clone().count() as f64;
    if n < 2.0 {
        let y = points.map(|p| p.1).next().unwrap_or(0.0);
        return (0.0, y);
    }
    let (st, sy) = points.clone().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (sxy, sxx) = points.fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::Interpolation;
    use approx::assert_abs_diff_eq;

    fn sampled(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> HistoryBuffer {
        let mut buf = HistoryBuffer::new(1, Interpolation::Linear);
        let n = (t_end / dt).round() as usize;
        for i in 0..=n {
            let t = i as f64 * dt;
            buf.push(t, &[f(t)]).unwrap();
        }
        buf
    }

    #[test]
    fn pure_exponential() {
        let fit = decay_fit(&sampled(|t| (-0.5 * t).exp(), 10.0, 0.01), 0.0);
        assert_abs_diff_eq!(fit.rate, 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(fit.amplitude, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn oscillating_decay_uses_peaks() {
        let fit = decay_fit(&sampled(|t| (-0.2 * t).exp() * (3.0 * t).cos(), 30.0, 0.001), 0.0);
        assert_abs_diff_eq!(fit.rate, 0.2, epsilon = 5e-3);
    }

    #[test]
    fn growth_has_negative_rate() {
        let fit = decay_fit(&sampled(|t| (0.05 * t).exp() * t.sin(), 60.0, 0.01), 0.0);
        assert!(fit.rate < 0.0);
    }

    #[test]
    fn zero_tail() {
        let fit = decay_fit(&sampled(|_| 0.0, 1.0, 0.1), 0.0);
        assert!(fit.infinite_rate);
    }
}
