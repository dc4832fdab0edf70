//! Means and t-distribution confidence intervals.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Half-width of the two-sided 95% interval for the mean; 0 below two samples.
pub fn ci95(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    t * (var / n as f64).sqrt()
}

/// A mean with its interval half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub ci: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Estimate {
        Estimate { mean: mean(xs), ci: ci95(xs) }
    }

    /// `self <= other` unless the intervals are disjoint with `self` above.
    pub fn at_most(self, other: Estimate) -> bool {
        self.mean <= other.mean + self.ci + other.ci
    }

    /// Ratio of means with a first-order propagated half-width.
    pub fn ratio(self, base: Estimate) -> Estimate {
        let r = self.mean / base.mean;
        let rel = |e: Estimate| if e.mean == 0.0 { 0.0 } else { e.ci / e.mean };
        Estimate {
            mean: r,
            ci: r.abs() * (rel(self).powi(2) + rel(base).powi(2)).sqrt(),
        }
    }
}
