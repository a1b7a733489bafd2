use serde::{Deserialize, Serialize};

/// 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub samples: usize,
    pub mean: f64,
    pub stdev: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    /// Mean, sample standard deviation and a normal 95% interval. An empty
    /// slice gives NaN moments.
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary {
                samples: 0,
                mean: f64::NAN,
                stdev: f64::NAN,
                stderr: f64::NAN,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stdev = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let stderr = stdev / (n as f64).sqrt();
        Summary {
            samples: n,
            mean,
            stdev,
            stderr,
            ci_low: mean - Z95 * stderr,
            ci_high: mean + Z95 * stderr,
        }
    }

    pub fn half_width(&self) -> f64 {
        Z95 * self.stderr
    }
}

/// Ordinary least squares `y = slope * x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; NaN with fewer than three points.
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (slope * x + intercept)).collect();
    let slope_stderr = if n > 2 {
        (residuals.iter().map(|r| r * r).sum::<f64>() / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
        residuals,
    })
}
