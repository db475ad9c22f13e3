//! Conditional output entropy `h(y | x)` and its high-SNR slope.

use serde::Serialize;

use super::mc::{McEstimate, MonteCarlo, MIN_SAMPLES};
use crate::channel::{sample_input, ChannelConfig, CorrelationMatrix, SnrPoint};
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// `log2(π e)`: entropy of CN(0, 1) in bits.
pub const LOG2_PI_E: f64 = 3.094_191_170_361_282;

/// `log2 det(I_Q + ρ QᴴXᴴXQ)` with `XQ` given; equals
/// `log2 det(I_L + ρ XQQᴴXᴴ)` by Sylvester's identity.
fn log2_det_gram(xq: &CMat, rho: f64) -> f64 {
    let q = xq.ncols();
    let gram = xq.adjoint() * xq * nalgebra::Complex::new(rho, 0.0) + CMat::identity(q, q);
    match gram.clone().cholesky() {
        Some(ch) => 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.re.abs().log2()).sum::<f64>(),
        None => crate::linalg::log2_abs_det(&gram),
    }
}

fn xq_matrix(qmat: &CorrelationMatrix, x: &[num_complex::Complex64]) -> CMat {
    let mut m = qmat.matrix().clone();
    for (i, mut row) in m.row_iter_mut().enumerate() {
        row *= x[i];
    }
    m
}

fn check_inputs(cfg: &ChannelConfig, qmat: &CorrelationMatrix, mc: &MonteCarlo) -> Result<ChannelConfig> {
    let cfg = cfg.checked()?;
    qmat.matches(&cfg)?;
    if mc.n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { n: mc.n, min: MIN_SAMPLES });
    }
    Ok(cfg)
}

/// `ĥ(y | x) = E_x[R (L log2(πe) + log2 det(I + ρ QᴴXᴴXQ))]` in bits,
/// with `x ~ CN(0, I_L)`.
pub fn conditional_output_entropy(
    cfg: &ChannelConfig,
    qmat: &CorrelationMatrix,
    rho: SnrPoint,
    mc: &MonteCarlo,
) -> Result<McEstimate> {
    let grid = entropy_over_grid(cfg, qmat, &[rho], mc)?;
    Ok(grid.into_iter().next().expect("one grid point"))
}

/// Evaluates `ĥ(y | x)` at every grid point on the same input draws.
pub fn entropy_over_grid(
    cfg: &ChannelConfig,
    qmat: &CorrelationMatrix,
    grid: &[SnrPoint],
    mc: &MonteCarlo,
) -> Result<Vec<McEstimate>> {
    let cfg = check_inputs(cfg, qmat, mc)?;
    let r = cfg.r as f64;
    let floor = cfg.l as f64 * LOG2_PI_E;
    let rows = mc.run(|rng| {
        let x = sample_input(&cfg, rng);
        let xq = xq_matrix(qmat, x.as_slice());
        grid.iter()
            .map(|rho| r * (floor + log2_det_gram(&xq, rho.value())))
            .collect::<Vec<f64>>()
    });
    (0..grid.len())
        .map(|g| {
            let col: Vec<f64> = rows.iter().map(|row| row[g]).collect();
            McEstimate::from_log_values(&col)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    /// Bits per unit of `log2 ρ`.
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub rho_grid: Vec<f64>,
    pub log2_rho: Vec<f64>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
}

/// `steps` points with `log2 ρ` evenly spaced on `[a, b]`.
pub fn log2_grid(a: f64, b: f64, steps: usize) -> Result<Vec<SnrPoint>> {
    if steps < 4 || a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidGrid);
    }
    (0..steps)
        .map(|i| SnrPoint::from_log2(a + (b - a) * i as f64 / (steps - 1) as f64))
        .collect()
}

/// Ordinary least squares `y ≈ slope · x + intercept`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Fits `ĥ(y | x)` against `log2 ρ`; the grid must be strictly increasing
/// with at least four points.
pub fn fit_entropy_slope(
    cfg: &ChannelConfig,
    qmat: &CorrelationMatrix,
    grid: &[SnrPoint],
    mc: &MonteCarlo,
) -> Result<SlopeFit> {
    if grid.len() < 4 || grid.windows(2).any(|w| w[0].value() >= w[1].value()) {
        return Err(Error::InvalidGrid);
    }
    let estimates = entropy_over_grid(cfg, qmat, grid, mc)?;
    let log2_rho: Vec<f64> = grid.iter().map(|p| p.value().log2()).collect();
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    let (slope, intercept, residual) = fit_line(&log2_rho, &means);
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
        rho_grid: grid.iter().map(|p| p.value()).collect(),
        log2_rho,
        means,
        stderrs: estimates.iter().map(|e| e.stderr).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_snr_limit() {
        let cfg = ChannelConfig::new(5, 3, 2);
        let q = CorrelationMatrix::dft(5, 3).unwrap();
        let h = conditional_output_entropy(&cfg, &q, SnrPoint::new(1e-14).unwrap(), &MonteCarlo::new(1, 200)).unwrap();
        assert!((h.mean - 10.0 * LOG2_PI_E).abs() < 1e-9);
        assert!((LOG2_PI_E - (std::f64::consts::PI * std::f64::consts::E).log2()).abs() < 1e-15);
    }

    #[test]
    fn gram_matches_full_determinant() {
        // Sylvester: det(I_Q + ρ AᴴA) = det(I_L + ρ AAᴴ)
        let q = CorrelationMatrix::dft(6, 3).unwrap();
        let x: Vec<_> = (0..6).map(|i| num_complex::Complex64::new(0.3 + i as f64, -0.5)).collect();
        let xq = xq_matrix(&q, &x);
        let rho = 7.5;
        let big = &xq * xq.adjoint() * nalgebra::Complex::new(rho, 0.0) + CMat::identity(6, 6);
        assert!((log2_det_gram(&xq, rho) - crate::linalg::log2_abs_det(&big)).abs() < 1e-10);
    }

    #[test]
    fn fit_line_exact() {
        let (s, i, r) = fit_line(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]);
        assert!((s - 2.0).abs() < 1e-14 && (i - 1.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(log2_grid(10.0, 30.0, 3), Err(Error::InvalidGrid)));
        assert!(matches!(log2_grid(30.0, 10.0, 5), Err(Error::InvalidGrid)));
        let g = log2_grid(10.0, 30.0, 5).unwrap();
        assert_eq!(g[0].value(), 1024.0);
        assert_eq!(g[4].value(), 2f64.powi(30));
        let cfg = ChannelConfig::new(5, 3, 2);
        let q = CorrelationMatrix::dft(5, 3).unwrap();
        let bad = [g[0], g[2], g[1], g[3]];
        assert!(matches!(
            fit_entropy_slope(&cfg, &q, &bad, &MonteCarlo::new(1, 200)),
            Err(Error::InvalidGrid)
        ));
    }

    #[test]
    fn slope_close_to_qr() {
        let cfg = ChannelConfig::new(5, 3, 2);
        let q = CorrelationMatrix::dft(5, 3).unwrap();
        let fit = fit_entropy_slope(&cfg, &q, &log2_grid(10.0, 30.0, 5).unwrap(), &MonteCarlo::new(4, 2000)).unwrap();
        assert!((fit.slope / 6.0 - 1.0).abs() < 0.02, "{}", fit.slope);
    }
}
