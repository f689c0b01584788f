//! Riemannian Newton iteration for tight minimum-sidelobe windows.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{canonical_tight, GaborParams, Window};
use crate::oblique::{newton_step, permute_q, retract, sort_window, unsort_window, NewtonSystem, SortedWindow};
use crate::spectral::{build_q, slepian};

/// Gradient norm below which a run is considered to be at the precision floor.
///
/// Far from a solution pure Newton may wander for hundreds of iterations
/// before entering the quadratic basin, so a lack of progress there is not
/// treated as stagnation.
pub const STAGNATION_FLOOR: f64 = 100.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the Riemannian gradient norm is at most this.
    pub delta: f64,
    pub max_iter: usize,
    /// Give up after this many iterations without a new best gradient norm,
    /// counted only once the best norm is down at [`STAGNATION_FLOOR`].
    pub stagnation_window: usize,
    /// Iteratively refine each Newton solve with double-double residuals.
    pub refine: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            delta: 1e-15,
            max_iter: 1000,
            stagnation_window: 20,
            refine: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParams(format!("delta must be positive, got {}", self.delta)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParams("iteration cap must be at least 1".into()));
        }
        if self.stagnation_window == 0 {
            return Err(Error::InvalidParams("stagnation window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    IterationCap,
    Stagnated,
    SingularSystem,
    /// A retraction met a block of `w + v` with (numerically) zero norm.
    ZeroBlock,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::IterationCap => "iteration_cap",
            SolverStatus::Stagnated => "stagnated",
            SolverStatus::SingularSystem => "singular_system",
            SolverStatus::ZeroBlock => "zero_block",
        }
    }
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-iteration record. Entry 0 is the starting point, entry `i` the
/// iterate after `i` Newton steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub grad_norms: Vec<f64>,
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub status: SolverStatus,
    /// Iteration whose iterate was returned.
    pub returned_iter: usize,
    pub warnings: Vec<String>,
}

impl SolverTrace {
    pub fn final_grad_norm(&self) -> f64 {
        self.grad_norms[self.returned_iter]
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub window: Window,
    pub trace: SolverTrace,
}

/// Canonical tight projection of the Slepian window with frame constant
/// `M / a`, i.e. the Slepian window pushed onto the manifold.
pub fn init_from_slepian(p: f64, params: &GaborParams) -> Result<Window> {
    let s = slepian(p, params)?;
    canonical_tight(&s, params.unit_frame_constant())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProportion(p));
    }
    Ok(())
}

/// Pure Newton iteration from a tight starting window.
///
/// Non-converged runs return the iterate with the smallest gradient norm.
pub fn solve(w0: &Window, p: f64, cfg: &SolverConfig) -> Result<Solution> {
    check_p(p)?;
    cfg.validate()?;
    let params = *w0.params();
    let start = sort_window(w0);
    start.check_on_manifold()?;
    // exact block norms; moves the point by at most the manifold tolerance
    let start = start.project_to_manifold()?;

    let qtilde = Arc::new(permute_q(&build_q(p, params.window_len())?, &params)?);
    let mut current = start;
    let mut sys = NewtonSystem::new(&current, qtilde.clone())?;
    let mut grad_norms = vec![sys.gradient_norm()];
    let mut objective = vec![sys.objective()];
    let mut best = (grad_norms[0], 0usize, current.clone());
    let mut since_best = 0usize;
    let mut iterations = 0usize;
    let mut status = None;

    while grad_norms[iterations] > cfg.delta && iterations < cfg.max_iter {
        let step = match newton_step(&current, &sys, cfg.refine) {
            Ok(step) => step,
            Err(Error::SingularSystem { .. }) => {
                status = Some(SolverStatus::SingularSystem);
                break;
            }
            Err(e) => return Err(e),
        };
        current = match retract(&current, &step.direction) {
            Ok(next) => next,
            Err(Error::ZeroBlock { .. }) => {
                status = Some(SolverStatus::ZeroBlock);
                break;
            }
            Err(e) => return Err(e),
        };
        iterations += 1;
        sys = NewtonSystem::new(&current, qtilde.clone())?;
        let g = sys.gradient_norm();
        grad_norms.push(g);
        objective.push(sys.objective());
        if g < best.0 {
            best = (g, iterations, current.clone());
            since_best = 0;
        } else if best.0 <= STAGNATION_FLOOR {
            since_best += 1;
            if since_best >= cfg.stagnation_window {
                status = Some(SolverStatus::Stagnated);
                break;
            }
        }
    }

    let status = status.unwrap_or(if grad_norms[iterations] <= cfg.delta {
        SolverStatus::Converged
    } else {
        SolverStatus::IterationCap
    });
    let (returned_iter, result): (usize, SortedWindow) = if status == SolverStatus::Converged {
        (iterations, current)
    } else {
        (best.1, best.2)
    };

    let mut warnings = Vec::new();
    if status == SolverStatus::Converged && objective[returned_iter] > objective[0] {
        warnings.push(format!(
            "final objective {:e} exceeds the starting objective {:e}",
            objective[returned_iter], objective[0]
        ));
    }

    Ok(Solution {
        window: unsort_window(&result),
        trace: SolverTrace {
            grad_norms,
            objective,
            iterations,
            status,
            returned_iter,
            warnings,
        },
    })
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub p: f64,
    pub window: Window,
    pub trace: SolverTrace,
    /// Whether this entry started from the previous converged window.
    pub warm_started: bool,
}

/// Solves for each `p` in ascending order, warm-starting from the previous
/// converged window. After a failure the next entry restarts from the
/// Slepian-based initialization.
pub fn sweep(p_list: &[f64], params: &GaborParams, cfg: &SolverConfig) -> Result<Vec<SweepEntry>> {
    if p_list.is_empty() || p_list.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidSweep);
    }
    let mut out: Vec<SweepEntry> = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let warm = out
            .last()
            .filter(|prev| prev.trace.status == SolverStatus::Converged)
            .map(|prev| prev.window.clone());
        let warm_started = warm.is_some();
        let w0 = match warm {
            Some(w) => w,
            None => init_from_slepian(p, params)?,
        };
        let sol = solve(&w0, p, cfg)?;
        out.push(SweepEntry {
            p,
            window: sol.window,
            trace: sol.trace,
            warm_started,
        });
    }
    Ok(out)
}
