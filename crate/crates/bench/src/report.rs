//! CSV output.

use serde::Serialize;

use crate::stats::Estimate;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchResult {
    pub variant: String,
    pub bench: String,
    pub selectivity: Option<f64>,
    pub reps: usize,
    pub mean_ms: f64,
    pub ci95_ms: f64,
}

impl BenchResult {
    pub fn new(variant: &str, bench: &str, selectivity: Option<f64>, samples_ms: &[f64]) -> BenchResult {
        let e = Estimate::of(samples_ms);
        BenchResult {
            variant: variant.to_string(),
            bench: bench.to_string(),
            selectivity,
            reps: samples_ms.len(),
            mean_ms: e.mean,
            ci95_ms: e.ci,
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean_ms,
            ci: self.ci95_ms,
        }
    }
}

pub const HEADER: &str = "variant,bench,selectivity,reps,mean_ms,ci95_ms";

/// One row per result, ordered by bench, selectivity, then variant.
pub fn to_csv(results: &[BenchResult]) -> String {
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| {
        (&a.bench, a.selectivity.unwrap_or(-1.0), &a.variant)
            .partial_cmp(&(&b.bench, b.selectivity.unwrap_or(-1.0), &b.variant))
            .expect("finite selectivity")
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &sorted {
        w.serialize(r).expect("in-memory write");
    }
    if sorted.is_empty() {
        return format!("{HEADER}\n");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
