//! Correlated block-fading SIMO channel in whitened form.
//!
//! Within one block of length `L`, antenna `m` observes
//! `y_m = sqrt(rho) diag(Q s_m) x + n_m` with `s_m ~ CN(0, I_Q)`. Stacking the
//! `R` antennas gives `y = sqrt(rho) ybar + n`, `ybar = (I_R ⊗ X Q) s`.
//!
//! All external indices are 1-based; internally everything is 0-based.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ZERO};
use crate::rng::{complex_normal, complex_normal_vec};

/// Block length `L`, correlation rank `Q` and receive antennas `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "R")]
    pub r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConfigViolation {
    BlockLengthZero,
    RankZero,
    AntennasZero,
    RankNotBelowBlockLength,
    TooManyAntennas,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            ConfigViolation::BlockLengthZero => "L≥1 required",
            ConfigViolation::RankZero => "Q≥1 required",
            ConfigViolation::AntennasZero => "R≥1 required",
            ConfigViolation::RankNotBelowBlockLength => "Q<L required",
            ConfigViolation::TooManyAntennas => "R≤Q required",
        };
        f.write_str(msg)
    }
}

impl ChannelConfig {
    pub const fn new(l: usize, q: usize, r: usize) -> Self {
        Self { l, q, r }
    }

    /// Named reference configurations `A`..`D`.
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "A" => Some(Self::new(5, 3, 2)),
            "B" => Some(Self::new(6, 4, 3)),
            "C" => Some(Self::new(4, 3, 2)),
            "D" => Some(Self::new(6, 3, 2)),
            _ => None,
        }
    }

    pub const PRESET_NAMES: [&'static str; 4] = ["A", "B", "C", "D"];

    /// Every violated constraint; empty iff `1 ≤ R ≤ Q < L`.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        let mut v = Vec::new();
        if self.l == 0 {
            v.push(ConfigViolation::BlockLengthZero);
        }
        if self.q == 0 {
            v.push(ConfigViolation::RankZero);
        }
        if self.r == 0 {
            v.push(ConfigViolation::AntennasZero);
        }
        if self.q >= self.l {
            v.push(ConfigViolation::RankNotBelowBlockLength);
        }
        if self.r > self.q {
            v.push(ConfigViolation::TooManyAntennas);
        }
        v
    }

    pub fn checked(self) -> Result<Self> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

/// The `L × Q` whitening factor with nonzero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: CMat,
}

#[derive(Serialize, Deserialize)]
struct CorrelationFile {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "Q")]
    q: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl CorrelationMatrix {
    /// Wraps `entries`, rejecting zero rows. Column rank is not enforced here;
    /// see [`CorrelationMatrix::has_full_column_rank`].
    pub fn new(entries: CMat) -> Result<Self> {
        if let Some(row) = (0..entries.nrows()).find(|&i| entries.row(i).iter().all(|z| *z == ZERO)) {
            return Err(Error::ZeroRow { row: row + 1 });
        }
        Ok(Self { entries })
    }

    /// Leading `Q` columns of the unitary `L`-point DFT matrix.
    pub fn dft(l: usize, q: usize) -> Result<Self> {
        if q == 0 || q >= l {
            return Err(Error::InvalidConfig(
                ChannelConfig::new(l, q, 1).validate(),
            ));
        }
        let scale = 1.0 / (l as f64).sqrt();
        let entries = CMat::from_fn(l, q, |i, j| {
            // reduce the exponent mod L before scaling to keep the phase exact
            let k = (i * j) % l;
            Complex64::from_polar(scale, 2.0 * PI * k as f64 / l as f64)
        });
        Self::new(entries)
    }

    pub fn l(&self) -> usize {
        self.entries.nrows()
    }

    pub fn q(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    /// `q_i^T s` for 0-based row `i`.
    pub fn row_dot(&self, i: usize, s: &[Complex64]) -> Complex64 {
        debug_assert_eq!(s.len(), self.q());
        self.entries
            .row(i)
            .iter()
            .zip(s)
            .fold(ZERO, |acc, (a, b)| acc + a * b)
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.entries.row(i).norm()
    }

    /// Row submatrix `Q_K` for 0-based indices.
    pub fn rows(&self, idx: &[usize]) -> CMat {
        linalg::select_rows(&self.entries, idx)
    }

    pub fn has_full_column_rank(&self, rel_tol: f64) -> bool {
        linalg::rank(&self.entries, rel_tol) == self.q()
    }

    pub fn matches(&self, cfg: &ChannelConfig) -> Result<()> {
        if self.l() != cfg.l {
            return Err(Error::DimensionMismatch {
                context: "correlation matrix rows",
                expected: cfg.l,
                actual: self.l(),
            });
        }
        if self.q() != cfg.q {
            return Err(Error::DimensionMismatch {
                context: "correlation matrix columns",
                expected: cfg.q,
                actual: self.q(),
            });
        }
        Ok(())
    }

    /// `{"L":..,"Q":..,"entries":[[[re,im],..],..]}`, row-major.
    pub fn to_json(&self) -> String {
        let file = CorrelationFile {
            l: self.l(),
            q: self.q(),
            entries: (0..self.l())
                .map(|i| (0..self.q()).map(|j| [self.entries[(i, j)].re, self.entries[(i, j)].im]).collect())
                .collect(),
        };
        serde_json::to_string(&file).expect("plain numeric data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CorrelationFile = serde_json::from_str(text)?;
        if file.entries.len() != file.l {
            return Err(Error::Format(format!(
                "expected {} rows, found {}",
                file.l,
                file.entries.len()
            )));
        }
        if let Some((i, row)) = file.entries.iter().enumerate().find(|(_, r)| r.len() != file.q) {
            return Err(Error::Format(format!(
                "row {} has {} entries, expected {}",
                i + 1,
                row.len(),
                file.q
            )));
        }
        let entries = CMat::from_fn(file.l, file.q, |i, j| {
            let [re, im] = file.entries[i][j];
            Complex64::new(re, im)
        });
        Self::new(entries)
    }
}

/// Stacked fading `s = (s_1, .., s_R)`, each block of length `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    q: usize,
    s: Vec<Complex64>,
}

impl FadingDraw {
    pub fn new(cfg: &ChannelConfig, s: Vec<Complex64>) -> Result<Self> {
        Self::with_block_len(cfg.q, cfg.r, s)
    }

    pub fn with_block_len(q: usize, r: usize, s: Vec<Complex64>) -> Result<Self> {
        if s.len() != q * r {
            return Err(Error::DimensionMismatch {
                context: "fading vector",
                expected: q * r,
                actual: s.len(),
            });
        }
        Ok(Self { q, s })
    }

    pub fn zeros(cfg: &ChannelConfig) -> Self {
        Self {
            q: cfg.q,
            s: vec![ZERO; cfg.q * cfg.r],
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.s
    }

    pub fn block_len(&self) -> usize {
        self.q
    }

    pub fn antennas(&self) -> usize {
        self.s.len().checked_div(self.q).unwrap_or(0)
    }

    /// Block `s_m` for 0-based antenna `m`.
    pub fn block(&self, m: usize) -> &[Complex64] {
        &self.s[m * self.q..(m + 1) * self.q]
    }

    pub fn scaled(&self, lambda: Complex64) -> Self {
        Self {
            q: self.q,
            s: self.s.iter().map(|z| z * lambda).collect(),
        }
    }
}

/// Transmitted block `x` of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDraw {
    x: Vec<Complex64>,
}

impl InputDraw {
    pub fn new(cfg: &ChannelConfig, x: Vec<Complex64>) -> Result<Self> {
        if x.len() != cfg.l {
            return Err(Error::DimensionMismatch {
                context: "input vector",
                expected: cfg.l,
                actual: x.len(),
            });
        }
        Ok(Self { x })
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.x
    }

    pub fn all_nonzero(&self) -> bool {
        self.x.iter().all(|z| *z != ZERO)
    }
}

/// Linear SNR, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct SnrPoint(f64);

impl SnrPoint {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho.is_finite() {
            Ok(Self(rho))
        } else {
            Err(Error::InvalidSnr(rho))
        }
    }

    pub fn from_log2(exponent: f64) -> Result<Self> {
        Self::new(exponent.exp2())
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn sample_fading<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> FadingDraw {
    FadingDraw {
        q: cfg.q,
        s: complex_normal_vec(rng, cfg.q * cfg.r),
    }
}

/// i.i.d. CN(0, 1) input symbols.
pub fn sample_input<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> InputDraw {
    InputDraw {
        x: complex_normal_vec(rng, cfg.l),
    }
}

/// Noiseless output `ybar = (I_R ⊗ diag(x) Q) s`, antenna blocks stacked.
pub fn build_ybar(
    cfg: &ChannelConfig,
    qmat: &CorrelationMatrix,
    x: &InputDraw,
    s: &FadingDraw,
) -> Result<Vec<Complex64>> {
    qmat.matches(cfg)?;
    check_len("input vector", cfg.l, x.x.len())?;
    check_len("fading vector", cfg.q * cfg.r, s.s.len())?;
    let mut ybar = Vec::with_capacity(cfg.l * cfg.r);
    for m in 0..cfg.r {
        let sm = s.block(m);
        ybar.extend((0..cfg.l).map(|i| x.x[i] * qmat.row_dot(i, sm)));
    }
    Ok(ybar)
}

/// `y = sqrt(rho) ybar + n` with `n ~ CN(0, I)`.
pub fn apply_channel<R: Rng + ?Sized>(ybar: &[Complex64], rho: SnrPoint, rng: &mut R) -> Vec<Complex64> {
    let amp = rho.0.sqrt();
    ybar.iter().map(|y| y * amp + complex_normal(rng)).collect()
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn validate_reports_each_violation() {
        assert!(ChannelConfig::new(5, 3, 2).validate().is_empty());
        assert_eq!(
            ChannelConfig::new(5, 5, 2).validate(),
            vec![ConfigViolation::RankNotBelowBlockLength]
        );
        let v = ChannelConfig::new(5, 3, 4).validate();
        assert_eq!(v, vec![ConfigViolation::TooManyAntennas]);
        assert_eq!(v[0].to_string(), "R≤Q required");
        assert_eq!(ConfigViolation::RankNotBelowBlockLength.to_string(), "Q<L required");
        assert_eq!(ChannelConfig::new(0, 0, 0).validate().len(), 4);
    }

    #[test]
    fn presets() {
        assert_eq!(ChannelConfig::preset("a"), Some(ChannelConfig::new(5, 3, 2)));
        assert_eq!(ChannelConfig::preset("D"), Some(ChannelConfig::new(6, 3, 2)));
        assert_eq!(ChannelConfig::preset("E"), None);
        for name in ChannelConfig::PRESET_NAMES {
            assert!(ChannelConfig::preset(name).unwrap().validate().is_empty());
        }
    }

    #[test]
    fn dft_first_column_is_constant() {
        let q = CorrelationMatrix::dft(2, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q.matrix()[(0, 0)] - Complex64::new(h, 0.0)).norm() < 1e-15);
        assert!((q.matrix()[(1, 0)] - Complex64::new(h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dft_rows_have_norm_sqrt_q_over_l() {
        let q = CorrelationMatrix::dft(7, 3).unwrap();
        for i in 0..7 {
            assert!((q.row_norm(i) - (3.0_f64 / 7.0).sqrt()).abs() < 1e-14);
            for j in 0..3 {
                assert!((q.matrix()[(i, j)].norm() - 1.0 / 7.0_f64.sqrt()).abs() < 1e-15);
            }
        }
        assert!(q.has_full_column_rank(1e-10));
    }

    #[test]
    fn dft_rejects_q_not_below_l() {
        assert!(CorrelationMatrix::dft(4, 4).is_err());
        assert!(CorrelationMatrix::dft(4, 0).is_err());
    }

    #[test]
    fn zero_row_rejected() {
        let mut m = CorrelationMatrix::dft(5, 3).unwrap().matrix().clone();
        m.row_mut(2).fill(ZERO);
        assert!(matches!(CorrelationMatrix::new(m), Err(Error::ZeroRow { row: 3 })));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let q = CorrelationMatrix::dft(6, 4).unwrap();
        let text = q.to_json();
        let back = CorrelationMatrix::from_json(&text).unwrap();
        assert_eq!(back, q);
        assert_eq!(back.to_json(), text);
        assert!(text.starts_with("{\"L\":6,\"Q\":4,\"entries\":[[["));
    }

    #[test]
    fn json_shape_errors() {
        assert!(CorrelationMatrix::from_json(r#"{"L":2,"Q":1,"entries":[[[1,0]]]}"#).is_err());
        assert!(CorrelationMatrix::from_json(r#"{"L":1,"Q":2,"entries":[[[1,0]]]}"#).is_err());
    }

    #[test]
    fn ybar_zero_input_and_hand_case() {
        let cfg = ChannelConfig::new(5, 3, 2);
        let q = CorrelationMatrix::dft(5, 3).unwrap();
        let mut rng = substream(1, 0);
        let s = sample_fading(&cfg, &mut rng);
        let x = InputDraw::new(&cfg, vec![ZERO; 5]).unwrap();
        assert!(build_ybar(&cfg, &q, &x, &s).unwrap().iter().all(|z| *z == ZERO));

        let cfg = ChannelConfig::new(2, 1, 1);
        let q = CorrelationMatrix::new(CMat::from_element(2, 1, Complex64::new(1.0, 0.0))).unwrap();
        let x = InputDraw::new(&cfg, vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]).unwrap();
        let s = FadingDraw::new(&cfg, vec![Complex64::new(1.0, 0.0)]).unwrap();
        let y = build_ybar(&cfg, &q, &x, &s).unwrap();
        assert_eq!(y, vec![Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)]);
    }

    #[test]
    fn ybar_dimension_mismatch() {
        let cfg = ChannelConfig::new(5, 3, 2);
        let q = CorrelationMatrix::dft(6, 3).unwrap();
        let mut rng = substream(1, 0);
        let s = sample_fading(&cfg, &mut rng);
        let x = sample_input(&cfg, &mut rng);
        assert!(matches!(
            build_ybar(&cfg, &q, &x, &s),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(InputDraw::new(&cfg, vec![ZERO; 4]).is_err());
        assert!(FadingDraw::new(&cfg, vec![ZERO; 5]).is_err());
    }

    #[test]
    fn snr_must_be_positive() {
        assert!(SnrPoint::new(0.0).is_err());
        assert!(SnrPoint::new(-1.0).is_err());
        assert!(SnrPoint::new(f64::INFINITY).is_err());
        assert_eq!(SnrPoint::from_log2(10.0).unwrap().value(), 1024.0);
    }

    #[test]
    fn sampling_is_reproducible() {
        let cfg = ChannelConfig::new(6, 4, 3);
        let a = sample_fading(&cfg, &mut substream(9, 2));
        let b = sample_fading(&cfg, &mut substream(9, 2));
        assert_eq!(a, b);
        let x = sample_input(&cfg, &mut substream(9, 2));
        assert!(x.all_nonzero());
    }
}
