//! Spectral concentration: the sinc matrix `Q_p`, the Slepian window and
//! mainlobe/sidelobe metrics.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::accurate::{dot2, Dd};
use crate::error::{Error, Result};
use crate::gabor::{GaborParams, Window};

/// Default spectrum oversampling relative to the window length.
pub const DEFAULT_OVERSAMPLING: usize = 16;

/// Magnitudes below this many dB under the peak are clamped.
pub const DB_FLOOR: f64 = -400.0;

/// `sin(pi x)` with exact argument reduction, so integer `x` gives exactly zero.
pub fn sin_pi(x: f64) -> f64 {
    // r in [-1, 1], exact for |x| < 2^52
    let r = x - 2.0 * (x / 2.0).round();
    let s = if r > 0.5 {
        1.0 - r
    } else if r < -0.5 {
        -1.0 - r
    } else {
        r
    };
    if s == 0.0 {
        0.0
    } else {
        (std::f64::consts::PI * s).sin()
    }
}

fn sinc_kernel(p: f64, d: usize) -> f64 {
    if d == 0 {
        p
    } else {
        let d = d as f64;
        sin_pi(p * d) / (std::f64::consts::PI * d)
    }
}

/// `Q_p[l, l'] = sin(pi p (l - l')) / (pi (l - l'))`, diagonal `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationMatrix {
    matrix: DMatrix<f64>,
    p: f64,
}

impl ConcentrationMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    /// `y = Q w`, each entry a compensated dot product.
    pub fn apply_accurate(&self, w: &[f64]) -> Vec<Dd> {
        // symmetric, so column i is row i and is contiguous
        (0..self.order())
            .map(|i| dot2(self.matrix.column(i).as_slice(), w))
            .collect()
    }

    /// `w^T Q w` evaluated in double-double.
    pub fn quadratic_form(&self, w: &[f64]) -> Dd {
        let y = self.apply_accurate(w);
        w.iter().zip(&y).fold(Dd::ZERO, |acc, (&wi, &yi)| acc + yi * wi)
    }

    /// `w^T (I - Q) w`, the energy outside the mainlobe.
    pub fn complement_form(&self, w: &[f64]) -> Dd {
        let energy = dot2(w, w);
        energy - self.quadratic_form(w)
    }
}

/// Builds `Q_p` for `0 < p <= 1`; `p = 1` yields the identity exactly.
pub fn build_q(p: f64, k: usize) -> Result<ConcentrationMatrix> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidProportion(p));
    }
    if k < 2 {
        return Err(Error::InvalidParams(format!("concentration matrix order must be >= 2, got {k}")));
    }
    let kernel: Vec<f64> = (0..k).map(|d| sinc_kernel(p, d)).collect();
    let matrix = DMatrix::from_fn(k, k, |i, j| kernel[i.abs_diff(j)]);
    Ok(ConcentrationMatrix { matrix, p })
}

/// Slepian commuting tridiagonal matrix for mainlobe proportion `p`: its
/// eigenvectors are those of `Q_p` but its eigenvalues are well separated.
fn commuting_tridiagonal(p: f64, k: usize) -> DMatrix<f64> {
    let c = (std::f64::consts::PI * p).cos();
    let kf = k as f64;
    let mut t = DMatrix::zeros(k, k);
    for l in 0..k {
        let lf = l as f64;
        let h = (kf - 1.0 - 2.0 * lf) / 2.0;
        t[(l, l)] = h * h * c;
        if l > 0 {
            let off = lf * (kf - lf) / 2.0;
            t[(l, l - 1)] = off;
            t[(l - 1, l)] = off;
        }
    }
    t
}

/// Unit-norm principal eigenvector of `Q_p` with positive coefficient sum.
///
/// `Q_p` has a cluster of eigenvalues indistinguishable from one in double
/// precision once `p K` grows, so the vector is taken from the tridiagonal
/// matrix that commutes with `Q_p` instead. The result is exactly symmetric.
pub fn slepian_coeffs(p: f64, k: usize) -> Result<Vec<f64>> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProportion(p));
    }
    if k < 2 {
        return Err(Error::InvalidParams(format!("window length must be >= 2, got {k}")));
    }
    let eig = SymmetricEigen::try_new(commuting_tridiagonal(p, k), f64::EPSILON, 100 * k)
        .ok_or(Error::EigenConvergence(k))?;
    let top = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::EigenConvergence(k))?;
    let v = eig.eigenvectors.column(top);
    let mut w: Vec<f64> = (0..k).map(|l| 0.5 * (v[l] + v[k - 1 - l])).collect();
    let norm = w.iter().map(|c| c * c).sum::<f64>().sqrt();
    let sign = if w.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for c in &mut w {
        *c *= sign / norm;
    }
    Ok(w)
}

pub fn slepian(p: f64, params: &GaborParams) -> Result<Window> {
    Window::new(slepian_coeffs(p, params.window_len())?, *params)
}

fn check_order(w: &[f64], q: &ConcentrationMatrix) -> Result<()> {
    if w.len() != q.order() {
        return Err(Error::DimensionMismatch {
            what: "window",
            got: w.len(),
            expected: q.order(),
        });
    }
    Ok(())
}

/// Mainlobe energy fraction `w^T Q w / w^T w`.
pub fn concentration_ratio(w: &[f64], q: &ConcentrationMatrix) -> Result<f64> {
    check_order(w, q)?;
    let energy = dot2(w, w).to_f64();
    if energy == 0.0 {
        return Err(Error::ZeroWindow);
    }
    Ok(q.quadratic_form(w).to_f64() / energy)
}

/// Sidelobe energy fraction `1 - concentration_ratio`, evaluated without
/// forming the difference of two numbers close to one.
pub fn sidelobe_energy(w: &[f64], q: &ConcentrationMatrix) -> Result<f64> {
    check_order(w, q)?;
    let energy = dot2(w, w).to_f64();
    if energy == 0.0 {
        return Err(Error::ZeroWindow);
    }
    Ok(q.complement_form(w).to_f64() / energy)
}

/// Peak-normalized magnitude spectrum on `f_k = k / n - 1/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSamples {
    pub freqs: Vec<f64>,
    pub magnitudes_db: Vec<f64>,
}

impl SpectrumSamples {
    /// Frequencies with the Nyquist frequency mapped to one.
    pub fn nyquist_normalized(&self) -> impl Iterator<Item = f64> + '_ {
        self.freqs.iter().map(|f| 2.0 * f)
    }
}

/// Raw DTFT samples `w_hat(k / n - 1/2)`, `k = 0..n`.
pub fn dtft_grid(w: &[f64], num_points: usize) -> Vec<Complex64> {
    // Modulating by (-1)^l shifts the FFT grid by half the band.
    let mut buf = vec![Complex64::new(0.0, 0.0); num_points];
    for (l, &c) in w.iter().enumerate() {
        buf[l] = Complex64::new(if l % 2 == 0 { c } else { -c }, 0.0);
    }
    FftPlanner::new().plan_fft_forward(num_points).process(&mut buf);
    buf
}

pub fn spectrum(w: &[f64], num_points: usize) -> Result<SpectrumSamples> {
    if num_points < w.len() {
        return Err(Error::InvalidParams(format!(
            "spectrum needs at least K = {} points, got {num_points}",
            w.len()
        )));
    }
    let mags: Vec<f64> = dtft_grid(w, num_points).iter().map(|z| z.norm()).collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroWindow);
    }
    let n = num_points as f64;
    Ok(SpectrumSamples {
        freqs: (0..num_points).map(|k| k as f64 / n - 0.5).collect(),
        magnitudes_db: mags
            .iter()
            .map(|m| (20.0 * (m / peak).log10()).max(DB_FLOOR))
            .collect(),
    })
}

/// Two-norm condition number of `Q_p` (for reporting).
pub fn condition_number(q: &ConcentrationMatrix) -> f64 {
    let ev = q.matrix().clone().symmetric_eigenvalues();
    let max = ev.iter().cloned().fold(f64::MIN, f64::max);
    let min = ev.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_pi_is_exact_at_integers() {
        for i in -20..20 {
            assert_eq!(sin_pi(i as f64), 0.0);
        }
        assert!((sin_pi(0.5) - 1.0).abs() < 1e-16);
        assert!((sin_pi(-2.5) + 1.0).abs() < 1e-16);
        assert!((sin_pi(0.75) - (0.75 * std::f64::consts::PI).sin()).abs() < 1e-15);
        assert!((sin_pi(7.3) - (7.3 * std::f64::consts::PI).sin()).abs() < 1e-13);
    }

    #[test]
    fn q_of_one_is_identity() {
        for k in [4, 64, 512] {
            let q = build_q(1.0, k).unwrap();
            assert_eq!(*q.matrix(), DMatrix::<f64>::identity(k, k));
        }
    }

    #[test]
    fn q_entries() {
        let q = build_q(0.25, 4).unwrap();
        for i in 0..4 {
            assert_eq!(q.matrix()[(i, i)], 0.25);
        }
        let expect = (0.75 * std::f64::consts::PI).sin() / (3.0 * std::f64::consts::PI);
        assert!((q.matrix()[(0, 3)] - expect).abs() < 1e-16);
        assert!((q.matrix()[(0, 3)] - 0.0750264).abs() < 1e-7);
        assert_eq!(q.matrix()[(0, 3)], q.matrix()[(3, 0)]);
    }

    #[test]
    fn q_domain() {
        assert!(matches!(build_q(0.0, 8), Err(Error::InvalidProportion(_))));
        assert!(matches!(build_q(1.5, 8), Err(Error::InvalidProportion(_))));
        assert!(build_q(0.5, 1).is_err());
        assert!(slepian_coeffs(1.0, 8).is_err());
    }

    #[test]
    fn slepian_is_an_eigenvector() {
        for (p, k) in [(0.2, 16), (0.05, 64), (20.0 / 512.0, 512)] {
            let w = slepian_coeffs(p, k).unwrap();
            let q = build_q(p, k).unwrap();
            let rho = q.quadratic_form(&w).to_f64();
            let qw = q.apply_accurate(&w);
            let res: f64 = qw
                .iter()
                .zip(&w)
                .map(|(y, c)| (y.to_f64() - rho * c).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-10, "p={p} k={k} residual {res:e}");
            assert!(w.iter().sum::<f64>() > 0.0);
            for l in 0..k {
                assert_eq!(w[l], w[k - 1 - l]);
            }
        }
    }

    #[test]
    fn ratio_with_full_band_is_one() {
        let q = build_q(1.0, 8).unwrap();
        let w = [0.3, -1.0, 2.0, 0.1, 0.0, 5.0, -0.2, 1.0];
        assert!((concentration_ratio(&w, &q).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(concentration_ratio(&[0.0; 8], &q), Err(Error::ZeroWindow));
    }

    #[test]
    fn ratio_and_sidelobe_are_complementary() {
        let q = build_q(0.3, 8).unwrap();
        let w = [0.3, -1.0, 2.0, 0.1, 0.0, 5.0, -0.2, 1.0];
        let r = concentration_ratio(&w, &q).unwrap();
        let s = sidelobe_energy(&w, &q).unwrap();
        assert!((r + s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectrum_of_impulse_is_flat() {
        let mut w = vec![0.0; 8];
        w[0] = 1.0;
        let s = spectrum(&w, 64).unwrap();
        assert_eq!(s.freqs.len(), 64);
        assert!(s.magnitudes_db.iter().all(|&m| m.abs() < 1e-12));
        assert!(spectrum(&w, 7).is_err());
    }

    #[test]
    fn rectangular_spectrum_has_first_null_at_one_over_k() {
        let s = spectrum(&[1.0; 8], 64).unwrap();
        // f = 1/8 sits at k = 40, f = 0 at k = 32
        assert!((s.freqs[40] - 0.125).abs() < 1e-15);
        assert_eq!(s.magnitudes_db[32], 0.0);
        assert!(s.magnitudes_db[40] < -250.0);
        assert!(s.magnitudes_db[39] > -40.0);
        let nyq: Vec<f64> = s.nyquist_normalized().collect();
        assert_eq!(nyq[0], -1.0);
    }
}
