//! Bjøntegaard delta rate with monotone piecewise-cubic (PCHIP) fits.
//!
//! Each curve is modelled as `log10(bpp)` as a function of the quality score.
//! The two fits are integrated exactly over the intersection of their score
//! ranges (no extrapolation), and the mean log-rate gap `d` is reported as
//! `(10^d - 1) * 100` percent. Negative values mean the test curve needs
//! fewer bits than the anchor for the same quality.

use super::rd::RdCurve;
use super::MetricsError;

const MIN_POINTS: usize = 4;

/// Fritsch–Carlson style monotone cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` must be strictly increasing and hold at least two knots.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len());
        assert!(xs.windows(2).all(|w| w[0] < w[1]), "knots must be strictly increasing");
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slopes[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { xs, ys, slopes }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[k]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[k + 1]
            + (t3 - t2) * h * self.slopes[k + 1]
    }

    /// Antiderivative of segment `k` in local units, evaluated at `t`.
    fn segment_primitive(&self, k: usize, t: f64) -> f64 {
        let h = self.xs[k + 1] - self.xs[k];
        let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
        h * ((t4 / 2.0 - t3 + t) * self.ys[k]
            + (t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0) * h * self.slopes[k]
            + (-t4 / 2.0 + t3) * self.ys[k + 1]
            + (t4 / 4.0 - t3 / 3.0) * h * self.slopes[k + 1])
    }

    /// Exact integral over `[a, b]`, which must lie inside the knot range.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let (ka, kb) = (self.segment(a), self.segment(b));
        let local = |k: usize, x: f64| (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        if ka == kb {
            return self.segment_primitive(ka, local(ka, b)) - self.segment_primitive(ka, local(ka, a));
        }
        let mut total = self.segment_primitive(ka, 1.0) - self.segment_primitive(ka, local(ka, a));
        for k in ka + 1..kb {
            total += self.segment_primitive(k, 1.0);
        }
        total + self.segment_primitive(kb, local(kb, b))
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

fn fit(curve: &RdCurve) -> Result<MonotoneCubic, MetricsError> {
    if curve.points.len() < MIN_POINTS {
        return Err(MetricsError::InsufficientPoints {
            curve: curve.label(),
            points: curve.points.len(),
        });
    }
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.score, p.bpp.log10())).collect();
    if pts.iter().any(|(s, r)| !s.is_finite() || !r.is_finite()) {
        return Err(MetricsError::InvalidCurve {
            curve: curve.label(),
            reason: "non-finite score or rate".into(),
        });
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(MetricsError::InvalidCurve {
            curve: curve.label(),
            reason: "repeated quality score".into(),
        });
    }
    let (xs, ys) = pts.into_iter().unzip();
    Ok(MonotoneCubic::new(xs, ys))
}

/// Integral of each fitted `log10(bpp)` curve over the shared quality range,
/// returned with that range.
pub fn integrate_log_rate(anchor: &RdCurve, test: &RdCurve) -> Result<(f64, f64, f64, f64), MetricsError> {
    let fa = fit(anchor)?;
    let ft = fit(test)?;
    let (a0, a1) = fa.domain();
    let (t0, t1) = ft.domain();
    let lo = a0.max(t0);
    let hi = a1.min(t1);
    if hi <= lo {
        return Err(MetricsError::EmptyOverlap);
    }
    Ok((fa.integrate(lo, hi), ft.integrate(lo, hi), lo, hi))
}

/// Percent rate change of `test` relative to `anchor` at equal quality.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64, MetricsError> {
    let (ia, it, lo, hi) = integrate_log_rate(anchor, test)?;
    let mean_gap = (it - ia) / (hi - lo);
    Ok((10f64.powf(mean_gap) - 1.0) * 100.0)
}
