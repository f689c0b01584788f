//! File formats: window JSON/CSV, spectrum CSV, metrics JSON, trace CSV and
//! the sweep summary CSV.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the exact values that were written.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{GaborParams, Window};
use crate::solver::SolverTrace;
use crate::spectral::SpectrumSamples;

pub const SPECTRUM_HEADER: &str = "freq_cycles_per_sample,freq_nyquist_normalized,magnitude_db";
pub const TRACE_HEADER: &str = "iter,grad_norm,objective";
pub const SUMMARY_HEADER: &str = "p_numerator,iterations,status,concentration,sidelobe_energy";

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    let ax = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&ax) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// On-disk window: `{"K", "a", "M", "p", "lambda", "coeffs"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub a: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub coeffs: Vec<f64>,
}

impl WindowFile {
    pub fn from_window(w: &Window, p: Option<f64>, lambda: Option<f64>) -> Self {
        let params = w.params();
        WindowFile {
            k: params.window_len(),
            a: params.hop(),
            m: params.channels(),
            p,
            lambda,
            coeffs: w.coeffs().to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.len() != self.k {
            return Err(Error::Format(format!(
                "window file declares K = {} but holds {} coefficients",
                self.k,
                self.coeffs.len()
            )));
        }
        if let Some(i) = self.coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::Format(format!("coefficient {i} is not finite")));
        }
        if let Some(p) = self.p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Format(format!("p = {p} outside (0, 1]")));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Format(format!("lambda = {l} must be positive")));
            }
        }
        // geometry check with the smallest admissible signal length
        self.params(self.m.max(1).div_ceil(self.a.max(1)) * self.a.max(1))?;
        Ok(())
    }

    /// Lattice for this window with the given signal length.
    pub fn params(&self, signal_len: usize) -> Result<GaborParams> {
        GaborParams::new(signal_len, self.k, self.a, self.m)
    }

    pub fn to_window(&self, signal_len: usize) -> Result<Window> {
        Window::new(self.coeffs.clone(), self.params(signal_len)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("window file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: WindowFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }
}

/// Header-free CSV, one coefficient per line.
pub fn write_window_csv<W: Write>(out: &mut W, coeffs: &[f64]) -> Result<()> {
    for c in coeffs {
        writeln!(out, "{}", fmt_f64(*c)).map_err(io_err)?;
    }
    Ok(())
}

pub fn read_window_csv<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Format(format!("line {}: not a number: {line:?}", n + 1)))?;
        if !v.is_finite() {
            return Err(Error::Format(format!("line {}: non-finite value", n + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

/// `{"p", "concentration", "sidelobe_energy", "is_tight", "lambda"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub p: f64,
    pub concentration: f64,
    pub sidelobe_energy: f64,
    pub is_tight: bool,
    pub lambda: f64,
}

impl Metrics {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Format(format!("p = {} outside (0, 1]", self.p)));
        }
        if !self.concentration.is_finite() || !self.sidelobe_energy.is_finite() || !self.lambda.is_finite() {
            return Err(Error::Format("metrics contain non-finite values".into()));
        }
        Ok(())
    }
}

pub fn write_spectrum_csv<W: Write>(out: &mut W, s: &SpectrumSamples) -> Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}").map_err(io_err)?;
    for ((f, fn_), db) in s.freqs.iter().zip(s.nyquist_normalized()).zip(&s.magnitudes_db) {
        writeln!(out, "{},{},{}", fmt_f64(*f), fmt_f64(fn_), fmt_f64(*db)).map_err(io_err)?;
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(out: &mut W, trace: &SolverTrace) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}").map_err(io_err)?;
    for (i, (g, h)) in trace.grad_norms.iter().zip(&trace.objective).enumerate() {
        writeln!(out, "{i},{},{}", fmt_f64(*g), fmt_f64(*h)).map_err(io_err)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub p_numerator: u64,
    pub iterations: usize,
    pub status: String,
    pub concentration: f64,
    pub sidelobe_energy: f64,
}

pub fn write_summary_csv<W: Write>(out: &mut W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}").map_err(io_err)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.p_numerator,
            r.iterations,
            r.status,
            fmt_f64(r.concentration),
            fmt_f64(r.sidelobe_energy)
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// The CSV layouts this crate produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Spectrum,
    Trace,
    Summary,
    Window,
}

const STATUSES: [&str; 5] = ["converged", "iteration_cap", "stagnated", "singular_system", "zero_block"];

/// Identifies a CSV by its header and checks every row against its layout.
/// Returns the kind and the number of data rows.
pub fn check_csv(text: &str) -> Result<(CsvKind, usize)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
    let kind = match first.trim() {
        SPECTRUM_HEADER => CsvKind::Spectrum,
        TRACE_HEADER => CsvKind::Trace,
        SUMMARY_HEADER => CsvKind::Summary,
        _ => {
            let coeffs = read_window_csv(text.as_bytes())?;
            return Ok((CsvKind::Window, coeffs.len()));
        }
    };
    let bad = |n: usize, msg: &str| Error::Format(format!("row {n}: {msg}"));
    let num = |n: usize, s: &str| -> Result<f64> { s.trim().parse::<f64>().map_err(|_| bad(n, "not a number")) };
    let mut rows = 0;
    for (n, line) in lines.enumerate() {
        let n = n + 1;
        let cols: Vec<&str> = line.split(',').collect();
        match kind {
            CsvKind::Spectrum => {
                if cols.len() != 3 {
                    return Err(bad(n, "expected 3 columns"));
                }
                let f = num(n, cols[0])?;
                let fnq = num(n, cols[1])?;
                num(n, cols[2])?;
                if !(-0.5..0.5).contains(&f) || (fnq - 2.0 * f).abs() > 1e-12 {
                    return Err(bad(n, "frequency columns inconsistent"));
                }
            }
            CsvKind::Trace => {
                if cols.len() != 3 {
                    return Err(bad(n, "expected 3 columns"));
                }
                let it: usize = cols[0].trim().parse().map_err(|_| bad(n, "iteration is not an integer"))?;
                if it != n - 1 {
                    return Err(bad(n, "iterations must count up from 0"));
                }
                if num(n, cols[1])? < 0.0 {
                    return Err(bad(n, "negative gradient norm"));
                }
                num(n, cols[2])?;
            }
            CsvKind::Summary => {
                if cols.len() != 5 {
                    return Err(bad(n, "expected 5 columns"));
                }
                cols[0].trim().parse::<u64>().map_err(|_| bad(n, "p_numerator is not an integer"))?;
                cols[1].trim().parse::<usize>().map_err(|_| bad(n, "iterations is not an integer"))?;
                if !STATUSES.contains(&cols[2].trim()) {
                    return Err(bad(n, "unknown status"));
                }
                num(n, cols[3])?;
                num(n, cols[4])?;
            }
            CsvKind::Window => unreachable!(),
        }
        rows += 1;
    }
    Ok((kind, rows))
}
