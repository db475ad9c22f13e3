//! Chunked, seeded Monte Carlo engine and the shared log-magnitude estimator.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

pub const MIN_SAMPLES: usize = 100;
pub const TRUNCATION_THRESHOLDS: [f64; 4] = [10.0, 20.0, 40.0, 80.0];
/// `|trunc(40) − trunc(80)|` at or below this counts as empirically finite.
pub const FINITENESS_TOL: f64 = 0.01;
pub const DEFAULT_CHUNK: usize = 1024;

/// `E[log2 |z|]` for `z ~ CN(0, 1)`, i.e. `−γ / (2 ln 2)`.
pub const E_LOG2_ABS_CN: f64 = -0.416_373_088_638_433_6;

/// Sampling settings. Chunk `c` always draws from substream `c` of `seed`,
/// so results depend on `(seed, n, chunk)` and never on `workers`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarlo {
    pub seed: u64,
    pub n: usize,
    pub chunk: usize,
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(seed: u64, n: usize) -> Self {
        Self {
            seed,
            n,
            chunk: DEFAULT_CHUNK,
            workers: std::thread::available_parallelism().map_or(1, |p| p.get()),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// Evaluates `draw` `n` times and returns the values in sample order.
    pub fn run<T, F>(&self, draw: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut Stream) -> T + Sync,
    {
        let chunk = self.chunk.max(1);
        let chunks = self.n.div_ceil(chunk);
        let work = |c: usize| {
            let mut rng = substream(self.seed, c as u64);
            let len = chunk.min(self.n - c * chunk);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<T>>()
        };
        let parts: Vec<Vec<T>> = if self.workers <= 1 {
            (0..chunks).map(work).collect()
        } else {
            match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
                Ok(pool) => pool.install(|| (0..chunks).into_par_iter().map(work).collect()),
                Err(_) => (0..chunks).map(work).collect(),
            }
        };
        parts.into_iter().flatten().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    /// Bits.
    pub mean: f64,
    pub stderr: f64,
    /// Samples used (excluded ones not counted).
    #[serde(rename = "N")]
    pub n: usize,
    /// Draws whose value was exactly zero (log undefined).
    pub excluded: usize,
    pub excluded_fraction: f64,
    /// `(T, mean of max(v, −T))`.
    pub truncation_curve: Vec<(f64, f64)>,
    /// `(T, fraction of v < −T)`.
    pub below_threshold_fraction: Vec<(f64, f64)>,
}

impl McEstimate {
    /// Summarizes log-values; `−∞` entries are excluded and counted.
    pub fn from_log_values(values: &[f64]) -> Result<Self> {
        let finite: Vec<f64> = values.iter().copied().filter(|v| *v != f64::NEG_INFINITY).collect();
        let excluded = values.len() - finite.len();
        let n = finite.len();
        if n < 2 {
            return Err(Error::TooFewSamples { n, min: 2 });
        }
        let mean = finite.iter().sum::<f64>() / n as f64;
        let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let truncation_curve = TRUNCATION_THRESHOLDS
            .iter()
            .map(|&t| (t, finite.iter().map(|v| v.max(-t)).sum::<f64>() / n as f64))
            .collect();
        let below_threshold_fraction = TRUNCATION_THRESHOLDS
            .iter()
            .map(|&t| (t, finite.iter().filter(|&&v| v < -t).count() as f64 / n as f64))
            .collect();
        Ok(Self {
            mean,
            stderr: (var / n as f64).sqrt(),
            n,
            excluded,
            excluded_fraction: excluded as f64 / values.len() as f64,
            truncation_curve,
            below_threshold_fraction,
        })
    }

    pub fn truncated_mean(&self, t: f64) -> Option<f64> {
        self.truncation_curve.iter().find(|(th, _)| *th == t).map(|(_, m)| *m)
    }

    /// `|trunc(40) − trunc(80)|`.
    pub fn tail_delta(&self) -> f64 {
        match (self.truncated_mean(40.0), self.truncated_mean(80.0)) {
            (Some(a), Some(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        }
    }

    pub fn empirically_finite(&self) -> bool {
        self.mean.is_finite() && self.tail_delta() <= FINITENESS_TOL
    }

    pub fn shifted(&self, by: f64) -> Self {
        let mut out = self.clone();
        out.mean += by;
        for (_, m) in &mut out.truncation_curve {
            *m += by;
        }
        out
    }
}

fn require_samples(mc: &MonteCarlo) -> Result<()> {
    if mc.n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { n: mc.n, min: MIN_SAMPLES });
    }
    Ok(())
}

/// Estimates `E[log2 |evaluator(draw)|]`.
pub fn mc_log_abs<D, S, E>(sampler: S, evaluator: E, mc: &MonteCarlo) -> Result<McEstimate>
where
    S: Fn(&mut Stream) -> D + Sync,
    E: Fn(&D) -> Complex64 + Sync,
{
    mc_log_values(|rng| evaluator(&sampler(rng)).norm().log2(), mc)
}

/// As [`mc_log_abs`] for an evaluator that already returns `log2 |·|`.
pub fn mc_log_values<F>(draw: F, mc: &MonteCarlo) -> Result<McEstimate>
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    require_samples(mc)?;
    McEstimate::from_log_values(&mc.run(draw))
}

/// Paired estimates from common random numbers; the third entry summarizes
/// the per-draw differences `b − a`.
pub fn mc_paired<F>(draw: F, mc: &MonteCarlo) -> Result<(McEstimate, McEstimate, McEstimate)>
where
    F: Fn(&mut Stream) -> (f64, f64) + Sync,
{
    require_samples(mc)?;
    let pairs = mc.run(draw);
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .map(|p| p.1 - p.0)
        .collect();
    Ok((
        McEstimate::from_log_values(&a)?,
        McEstimate::from_log_values(&b)?,
        McEstimate::from_log_values(&d)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::complex_normal;

    #[test]
    fn constant_evaluator() {
        let mc = MonteCarlo::new(1, 500);
        let est = mc_log_abs(|_| (), |_| Complex64::new(2.0, 0.0), &mc).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.n, 500);
    }

    #[test]
    fn zeros_are_excluded_and_counted() {
        let mc = MonteCarlo::new(1, 200);
        let est = mc_log_abs(
            complex_normal,
            |z| if z.re > 0.0 { *z } else { Complex64::new(0.0, 0.0) },
            &mc,
        )
        .unwrap();
        assert_eq!(est.n + est.excluded, 200);
        assert!(est.excluded > 50 && est.excluded < 150);
    }

    #[test]
    fn too_few_samples() {
        let mc = MonteCarlo::new(1, 99);
        assert!(matches!(
            mc_log_values(|_| 0.0, &mc),
            Err(Error::TooFewSamples { n: 99, min: 100 })
        ));
    }

    #[test]
    fn worker_count_does_not_change_values() {
        let mc = MonteCarlo { seed: 9, n: 5000, chunk: 64, workers: 1 };
        let a = mc.run(|rng| complex_normal(rng).re);
        let b = mc.with_workers(4).run(|rng| complex_normal(rng).re);
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_curve_is_monotone() {
        let mc = MonteCarlo::new(3, 2000);
        // heavy lower tail: log2 |z|^8
        let est = mc_log_values(|rng| 8.0 * complex_normal(rng).norm().log2(), &mc).unwrap();
        for w in est.truncation_curve.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        for w in est.below_threshold_fraction.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn shift_moves_mean_and_curve() {
        let est = McEstimate::from_log_values(&[1.0, 2.0, 3.0]).unwrap();
        let s = est.shifted(2.0);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.stderr, est.stderr);
        assert_eq!(s.truncated_mean(80.0), Some(4.0));
    }
}
