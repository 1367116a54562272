use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Cross-seed mean with a two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two samples.
    pub std_dev: Option<f64>,
    /// `None` with fewer than two samples.
    pub ci95: Option<[f64; 2]>,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std_dev: None, ci95: None };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { n, mean, std_dev: None, ci95: None };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("df >= 1").inverse_cdf(0.975);
        let half = t * sd / (n as f64).sqrt();
        Self { n, mean, std_dev: Some(sd), ci95: Some([mean - half, mean + half]) }
    }

    pub fn half_width(&self) -> Option<f64> {
        self.ci95.map(|[lo, hi]| (hi - lo) / 2.0)
    }

    /// Both intervals exist and do not intersect.
    pub fn disjoint(&self, other: &Estimate) -> bool {
        match (self.ci95, other.ci95) {
            (Some([a0, a1]), Some([b0, b1])) => a1 < b0 || b1 < a0,
            _ => false,
        }
    }
}

/// `(ours - base) / base`.
pub fn relative_delta(ours: f64, base: f64) -> f64 {
    (ours - base) / base
}
