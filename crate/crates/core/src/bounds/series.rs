use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::pairwise_sum;

/// Scalar samples in time, read as the piecewise-linear interpolant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

const TIME_TOL: f64 = 1e-9;

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Domain(
                "time series needs matching non-empty samples".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "time series samples must be increasing".into(),
            ));
        }
        Ok(Self { times, values })
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Interpolated value, clamped to the end samples outside the range.
    pub fn at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= self.end() {
            return *self.values.last().expect("non-empty");
        }
        let k = ts.partition_point(|&x| x <= t) - 1;
        let w = (t - ts[k]) / (ts[k + 1] - ts[k]);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Exact integral of the interpolant over `[s, t]` (clipped to the sampled range).
    pub fn integral(&self, s: f64, t: f64) -> f64 {
        self.weighted_integral(s, t, |_| 1.0)
    }

    /// Trapezoid rule for `int_s^t w(tau) u(tau) dtau` on the sample nodes
    /// plus the interval ends.
    pub fn weighted_integral(&self, s: f64, t: f64, w: impl Fn(f64) -> f64) -> f64 {
        let s = s.max(self.start());
        let t = t.min(self.end());
        if !(t > s) {
            return 0.0;
        }
        let mut nodes = vec![s];
        nodes.extend(self.times.iter().copied().filter(|&x| x > s && x < t));
        nodes.push(t);
        let terms: Vec<f64> = nodes
            .windows(2)
            .map(|n| 0.5 * (n[1] - n[0]) * (w(n[0]) * self.at(n[0]) + w(n[1]) * self.at(n[1])))
            .collect();
        pairwise_sum(&terms)
    }

    /// Largest sample in `[s, t]`, including the interpolated ends.
    pub fn max_over(&self, s: f64, t: f64) -> f64 {
        let s = s.max(self.start());
        let t = t.min(self.end());
        self.times
            .iter()
            .zip(&self.values)
            .filter(|(&x, _)| x >= s && x <= t)
            .map(|(_, &v)| v)
            .fold(self.at(s).max(self.at(t)), f64::max)
    }

    /// Indices of samples in `[s, t]` up to a small tolerance.
    pub fn indices_in(&self, s: f64, t: f64) -> impl Iterator<Item = usize> + '_ {
        let tol = TIME_TOL * (1.0 + t.abs());
        self.times
            .iter()
            .enumerate()
            .filter(move |(_, &x)| x >= s - tol && x <= t + tol)
            .map(|(k, _)| k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> TimeSeries {
        TimeSeries::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 6.0]).unwrap()
    }

    #[test]
    fn interpolates_and_clamps() {
        let s = line();
        assert_eq!(s.at(0.5), 1.0);
        assert_eq!(s.at(2.0), 4.0);
        assert_eq!(s.at(-1.0), 0.0);
        assert_eq!(s.at(5.0), 6.0);
    }

    #[test]
    fn integral_of_linear_interpolant_is_exact() {
        let s = line();
        assert!((s.integral(0.5, 2.5) - (2.5f64.powi(2) - 0.25)).abs() < 1e-14);
        assert_eq!(s.integral(2.0, 2.0), 0.0);
        assert!((s.integral(-5.0, 10.0) - 9.0).abs() < 1e-14);
    }

    #[test]
    fn max_includes_interpolated_ends() {
        let s = line();
        assert_eq!(s.max_over(0.2, 0.7), 1.4);
        assert_eq!(s.max_over(0.0, 3.0), 6.0);
    }
}
