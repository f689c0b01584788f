//! Discrete Gabor transform with real windows on a painless lattice.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Relative tolerance used when a caller does not supply one.
pub const DEFAULT_TIGHT_TOL: f64 = 1e-10;

/// Lattice and window geometry.
///
/// Construction enforces `L mod a = 0`, `K mod a = 0` and `0 < a < K <= M <= L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GaborParams {
    signal_len: usize,
    window_len: usize,
    hop: usize,
    channels: usize,
}

impl GaborParams {
    pub fn new(signal_len: usize, window_len: usize, hop: usize, channels: usize) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if hop == 0 {
            return bad("hop a must be positive".into());
        }
        if hop >= window_len {
            return bad(format!("hop a = {hop} must be smaller than window length K = {window_len}"));
        }
        if window_len > channels {
            return bad(format!("window length K = {window_len} exceeds channel count M = {channels}"));
        }
        if channels > signal_len {
            return bad(format!("channel count M = {channels} exceeds signal length L = {signal_len}"));
        }
        if window_len % hop != 0 {
            return bad(format!("K = {window_len} is not a multiple of a = {hop}"));
        }
        if signal_len % hop != 0 {
            return bad(format!("L = {signal_len} is not a multiple of a = {hop}"));
        }
        Ok(GaborParams {
            signal_len,
            window_len,
            hop,
            channels,
        })
    }

    /// Signal length `L`.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    /// Window length `K`.
    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Time shift `a`, also the number of residue classes / manifold blocks.
    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Number of frequency channels `M`.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of frames `N = L / a`.
    pub fn frames(&self) -> usize {
        self.signal_len / self.hop
    }

    /// Taps per residue class `J = K / a`.
    pub fn block_len(&self) -> usize {
        self.window_len / self.hop
    }

    /// Frame constant of a unit-norm tight window, `M / a`.
    pub fn unit_frame_constant(&self) -> f64 {
        self.channels as f64 / self.hop as f64
    }

    /// Same window geometry with a different signal length.
    pub fn with_signal_len(&self, signal_len: usize) -> Result<Self> {
        GaborParams::new(signal_len, self.window_len, self.hop, self.channels)
    }

    fn compatible(&self, other: &GaborParams) -> bool {
        self.window_len == other.window_len && self.hop == other.hop && self.channels == other.channels
    }
}

/// A real window of length `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    coeffs: Vec<f64>,
    params: GaborParams,
}

impl Window {
    pub fn new(coeffs: Vec<f64>, params: GaborParams) -> Result<Self> {
        if coeffs.len() != params.window_len() {
            return Err(Error::DimensionMismatch {
                what: "window",
                got: coeffs.len(),
                expected: params.window_len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient { index });
        }
        Ok(Window { coeffs, params })
    }

    pub fn ones(params: GaborParams) -> Self {
        Window {
            coeffs: vec![1.0; params.window_len()],
            params,
        }
    }

    pub fn impulse(params: GaborParams) -> Self {
        let mut coeffs = vec![0.0; params.window_len()];
        coeffs[0] = 1.0;
        Window { coeffs, params }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Window {
        Window {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            params: self.params,
        }
    }

    /// Rebinds the window to a lattice with the same `K`, `a` and `M`.
    pub fn with_params(&self, params: GaborParams) -> Result<Window> {
        if !self.params.compatible(&params) {
            return Err(Error::InvalidParams(
                "window geometry (K, a, M) differs from the target lattice".into(),
            ));
        }
        Ok(Window {
            coeffs: self.coeffs.clone(),
            params,
        })
    }
}

/// DGT coefficients `X[m, n]`, stored frame by frame (`M` values per frame).
#[derive(Debug, Clone, PartialEq)]
pub struct GaborCoefficients {
    values: Vec<Complex64>,
    channels: usize,
    frames: usize,
}

impl GaborCoefficients {
    pub fn zeros(channels: usize, frames: usize) -> Self {
        GaborCoefficients {
            values: vec![Complex64::new(0.0, 0.0); channels * frames],
            channels,
            frames,
        }
    }

    pub fn from_frames(values: Vec<Complex64>, channels: usize, frames: usize) -> Result<Self> {
        if values.len() != channels * frames {
            return Err(Error::DimensionMismatch {
                what: "coefficient array",
                got: values.len(),
                expected: channels * frames,
            });
        }
        Ok(GaborCoefficients {
            values,
            channels,
            frames,
        })
    }

    /// `(M, N)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.frames)
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.values[n * self.channels + m]
    }

    pub fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.values[n * self.channels + m] = value;
    }

    pub fn frame(&self, n: usize) -> &[Complex64] {
        &self.values[n * self.channels..(n + 1) * self.channels]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.values
    }
}

fn check_window(w: &Window, params: &GaborParams) -> Result<()> {
    if !w.params.compatible(params) {
        return Err(Error::InvalidParams(
            "window geometry (K, a, M) differs from the transform parameters".into(),
        ));
    }
    Ok(())
}

/// Forward DGT, `X[m,n] = sum_l x[(l + a n) mod L] w[l] e^{-2 pi i m l / M}`.
///
/// Each frame is a zero-padded `M`-point FFT of the windowed segment.
pub fn dgt(x: &[Complex64], w: &Window, params: &GaborParams) -> Result<GaborCoefficients> {
    check_window(w, params)?;
    let l_len = params.signal_len();
    if x.len() != l_len {
        return Err(Error::DimensionMismatch {
            what: "signal",
            got: x.len(),
            expected: l_len,
        });
    }
    let m = params.channels();
    let n_frames = params.frames();
    let a = params.hop();
    let fft = FftPlanner::new().plan_fft_forward(m);

    let mut values = vec![Complex64::new(0.0, 0.0); m * n_frames];
    for (n, frame) in values.chunks_exact_mut(m).enumerate() {
        for (l, &wl) in w.coeffs().iter().enumerate() {
            frame[l] = x[(l + a * n) % l_len] * wl;
        }
        fft.process(frame);
    }
    GaborCoefficients::from_frames(values, m, n_frames)
}

/// Inverse DGT with synthesis window `gamma`.
///
/// Frames with negative index wrap to `N - n`, so every sample receives
/// contributions from all frames overlapping it on the circle.
pub fn idgt(coeffs: &GaborCoefficients, gamma: &Window, params: &GaborParams) -> Result<Vec<Complex64>> {
    check_window(gamma, params)?;
    let m = params.channels();
    let n_frames = params.frames();
    if coeffs.shape() != (m, n_frames) {
        return Err(Error::DimensionMismatch {
            what: "coefficient array",
            got: coeffs.as_slice().len(),
            expected: m * n_frames,
        });
    }
    let l_len = params.signal_len();
    let a = params.hop();
    // Only frames n >= -floor((K-1)/a) are reachable, and K <= L keeps them distinct mod N.
    debug_assert!((params.window_len() - 1) / a < n_frames);
    let ifft = FftPlanner::new().plan_fft_inverse(m);

    let mut out = vec![Complex64::new(0.0, 0.0); l_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for n in 0..n_frames {
        buf.copy_from_slice(coeffs.frame(n));
        ifft.process(&mut buf);
        for (j, &g) in gamma.coeffs().iter().enumerate() {
            out[(a * n + j) % l_len] += buf[j] * g;
        }
    }
    Ok(out)
}

/// Diagonal of the frame operator, `M * sum_n w[l + a n]^2` over the taps of
/// the window that share the residue of `l`.
pub fn frame_operator_diag(w: &Window) -> Vec<f64> {
    let params = w.params();
    let k = params.window_len() as isize;
    let a = params.hop() as isize;
    let m = params.channels() as f64;
    (0..k)
        .map(|l| {
            let lo = -(l / a);
            let hi = (k - l - 1) / a;
            let sum: f64 = (lo..=hi)
                .map(|n| {
                    let c = w.coeffs()[(l + a * n) as usize];
                    c * c
                })
                .sum();
            m * sum
        })
        .collect()
}

/// Canonical tight projection `sqrt(lambda) S_w^{-1/2} w`.
pub fn canonical_tight(w: &Window, lambda: f64) -> Result<Window> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("frame constant must be positive, got {lambda}")));
    }
    let diag = frame_operator_diag(w);
    let peak = diag.iter().cloned().fold(0.0, f64::max);
    let floor = peak * f64::EPSILON * f64::EPSILON;
    if let Some((index, &value)) = diag
        .iter()
        .enumerate()
        .find(|(_, &d)| !(d > floor) || d <= f64::MIN_POSITIVE)
    {
        return Err(Error::ZeroFrameDiagonal { index, value });
    }
    let coeffs = w
        .coeffs()
        .iter()
        .zip(&diag)
        .map(|(c, d)| c * (lambda / d).sqrt())
        .collect();
    Window::new(coeffs, *w.params())
}

/// Result of a tightness test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tightness {
    pub tight: bool,
    /// Mean residue-class energy `M ||w_l||^2`; the frame constant when tight.
    pub lambda: f64,
    /// Largest relative deviation of a residue-class energy from `lambda`.
    pub deviation: f64,
}

/// Residue-class energies `M ||w_l||^2`, `l = 0..a`.
pub fn block_energies(w: &Window) -> Vec<f64> {
    let params = w.params();
    let a = params.hop();
    let m = params.channels() as f64;
    (0..a)
        .map(|l| m * w.coeffs().iter().skip(l).step_by(a).map(|c| c * c).sum::<f64>())
        .collect()
}

pub fn is_tight(w: &Window, tol: f64) -> Tightness {
    let energies = block_energies(w);
    let lambda = energies.iter().sum::<f64>() / energies.len() as f64;
    if !(lambda > 0.0) {
        return Tightness {
            tight: false,
            lambda,
            deviation: f64::INFINITY,
        };
    }
    let deviation = energies
        .iter()
        .map(|e| (e - lambda).abs() / lambda)
        .fold(0.0, f64::max);
    Tightness {
        tight: deviation <= tol,
        lambda,
        deviation,
    }
}

/// Round-trips `trials` random complex signals through `dgt` and `idgt` with
/// synthesis window `w / lambda` and returns the largest relative error.
pub fn verify_reconstruction(w: &Window, params: &GaborParams, trials: usize, seed: u64) -> Result<f64> {
    let t = is_tight(w, DEFAULT_TIGHT_TOL);
    if !t.tight {
        return Err(Error::NotTight {
            lambda: t.lambda,
            deviation: t.deviation,
        });
    }
    let gamma = w.scaled(1.0 / t.lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x: Vec<Complex64> = (0..params.signal_len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let coeffs = dgt(&x, w, params)?;
        let y = idgt(&coeffs, &gamma, params)?;
        let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    Ok(worst)
}
