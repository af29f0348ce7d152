//! Small statistics toolkit: regression, KS tests, summaries.

use statrs::distribution::{ContinuousCDF, Normal};

/// Ordinary or weighted least-squares line `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    /// Root mean square of the (weighted) residuals.
    pub residual: f64,
}

/// Weighted least squares. With `w = None` all weights are 1 and standard
/// errors come from the residual variance; with weights `1/σ²` they come from
/// the weights alone.
pub fn fit_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> LineFit {
    let n = x.len();
    assert!(n >= 2 && y.len() == n, "need at least two points");
    let ones = vec![1.0; n];
    let w = w.unwrap_or(&ones);
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * x[i] * y[i]).sum();
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    let rss: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let residual = (rss / sw).sqrt();
    let scale = if w.iter().all(|&v| v == 1.0) {
        if n > 2 {
            rss / (n - 2) as f64
        } else {
            0.0
        }
    } else {
        1.0
    };
    LineFit {
        intercept,
        slope,
        se_intercept: (scale * sxx / det).sqrt(),
        se_slope: (scale * sw / det).sqrt(),
        residual,
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0).max(1.0)
}

/// Sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0).max(1.0)
}

/// Kolmogorov–Smirnov statistic `sup |F_n - F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test; returns `(D, p-value)`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let d = ks_statistic(samples, cdf);
    let sn = (samples.len() as f64).sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

/// KS test against the normal law with fitted mean and standard deviation.
pub fn ks_normal(samples: &[f64]) -> (f64, f64) {
    let m = mean(samples);
    let sd = variance(samples).sqrt();
    if !(sd > 0.0) {
        return (1.0, 0.0);
    }
    let n = Normal::new(m, sd).expect("valid normal");
    ks_test(samples, |x| n.cdf(x))
}

/// Standard error of the mean from non-overlapping batch means.
pub fn batch_means_se(x: &[f64], n_batches: usize) -> f64 {
    let b = x.len() / n_batches;
    let means: Vec<f64> = (0..n_batches).map(|i| mean(&x[i * b..(i + 1) * b])).collect();
    (variance(&means) / n_batches as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| 1.5 - 0.25 * x).collect();
        let f = fit_line(&x, &y, None);
        assert!((f.slope + 0.25).abs() < 1e-12 && (f.intercept - 1.5).abs() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Known quantiles of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_accepts_uniform_grid() {
        let s: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = ks_test(&s, |x| x.clamp(0.0, 1.0));
        assert!(d <= 5e-4 + 1e-12 && p > 0.99);
    }
}
