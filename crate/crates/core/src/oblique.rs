//! Geometry of the tightness constraint.
//!
//! Sorting the taps of a window by residue class modulo the hop turns the
//! tightness condition `||w_l||^2 = 1/a` into membership of the oblique
//! manifold `(S^{J-1}_{1/sqrt(a)})^a`. Everything here works on the sorted
//! (block-major) layout: block `l` holds `w[l], w[l+a], ..., w[l+a(J-1)]`.
//!
//! The cost is `h(w) = -1/2 w^T Q w`. With `q = Q w` and
//! `h_l = w_l^T q_l`, the Riemannian gradient is `-U w` where
//! `U = Q - a blockdiag(h_l I_J)`, and the Hessian acts on tangent vectors
//! as `-(U - a W W^T Q)`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::accurate::{self, dot2, Dd};
use crate::error::{Error, Result};
use crate::gabor::{GaborParams, Window};
use crate::spectral::ConcentrationMatrix;

/// Block norms must match `1/sqrt(a)` to this absolute tolerance.
pub const MANIFOLD_TOL: f64 = 1e-12;
/// `|w_l^T v_l| <= TANGENT_TOL * ||v||` for tangent vectors.
pub const TANGENT_TOL: f64 = 1e-10;
/// Retraction refuses blocks of `w + v` shorter than this.
pub const ZERO_BLOCK_TOL: f64 = 1e-14;
/// Largest relative residual accepted from the Newton solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;
/// Cap on iterative-refinement passes per Newton step.
pub const MAX_REFINEMENTS: usize = 5;

/// Index in the original window of position `i` of the sorted layout.
#[inline]
pub fn sorted_index(params: &GaborParams, i: usize) -> usize {
    let j = params.block_len();
    let (block, tap) = (i / j, i % j);
    block + params.hop() * tap
}

pub fn sort_vector(params: &GaborParams, w: &[f64]) -> Vec<f64> {
    (0..w.len()).map(|i| w[sorted_index(params, i)]).collect()
}

pub fn unsort_vector(params: &GaborParams, sorted: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; sorted.len()];
    for (i, &v) in sorted.iter().enumerate() {
        out[sorted_index(params, i)] = v;
    }
    out
}

fn fingerprint(data: &[f64], params: &GaborParams) -> u64 {
    let mut h = DefaultHasher::new();
    params.hash(&mut h);
    for v in data {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// A window in block-major order. Not necessarily on the manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedWindow {
    data: Vec<f64>,
    params: GaborParams,
}

impl SortedWindow {
    pub fn from_sorted(data: Vec<f64>, params: GaborParams) -> Result<Self> {
        if data.len() != params.window_len() {
            return Err(Error::DimensionMismatch {
                what: "sorted window",
                got: data.len(),
                expected: params.window_len(),
            });
        }
        Ok(SortedWindow { data, params })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.params.block_len())
    }

    pub fn block(&self, l: usize) -> &[f64] {
        let j = self.params.block_len();
        &self.data[l * j..(l + 1) * j]
    }

    pub fn block_norms(&self) -> Vec<f64> {
        self.blocks().map(|b| dot2(b, b).to_f64().sqrt()).collect()
    }

    pub fn fingerprint(&self) -> u64 {
        fingerprint(&self.data, &self.params)
    }

    pub fn check_on_manifold(&self) -> Result<()> {
        let expected = 1.0 / (self.params.hop() as f64).sqrt();
        for (block, norm) in self.block_norms().into_iter().enumerate() {
            if !((norm - expected).abs() <= MANIFOLD_TOL) {
                return Err(Error::OffManifold { block, norm, expected });
            }
        }
        Ok(())
    }

    pub fn is_on_manifold(&self) -> bool {
        self.check_on_manifold().is_ok()
    }

    /// Metric projection onto the manifold (each block rescaled to `1/sqrt(a)`).
    pub fn project_to_manifold(&self) -> Result<SortedWindow> {
        let zero = vec![0.0; self.data.len()];
        retract_raw(self, &zero)
    }

    /// `-1/2 w^T Q w` in double-double.
    pub fn objective(&self, qtilde: &DMatrix<f64>) -> Dd {
        let q = apply_accurate(qtilde, &self.data);
        let s = self.data.iter().zip(&q).fold(Dd::ZERO, |acc, (&w, &y)| acc + y * w);
        s.scale(-0.5)
    }
}

pub fn sort_window(w: &Window) -> SortedWindow {
    SortedWindow {
        data: sort_vector(w.params(), w.coeffs()),
        params: *w.params(),
    }
}

pub fn unsort_window(ws: &SortedWindow) -> Window {
    Window::new(unsort_vector(&ws.params, &ws.data), ws.params).expect("sorted data has length K")
}

/// `Q~[i, j] = Q[pi(i), pi(j)]`, so that `w^T Q w = w~^T Q~ w~`.
pub fn permute_q(q: &ConcentrationMatrix, params: &GaborParams) -> Result<DMatrix<f64>> {
    let k = params.window_len();
    if q.order() != k {
        return Err(Error::DimensionMismatch {
            what: "concentration matrix",
            got: q.order(),
            expected: k,
        });
    }
    let perm: Vec<usize> = (0..k).map(|i| sorted_index(params, i)).collect();
    let m = q.matrix();
    Ok(DMatrix::from_fn(k, k, |i, j| m[(perm[i], perm[j])]))
}

fn apply_accurate(m: &DMatrix<f64>, x: &[f64]) -> Vec<Dd> {
    // callers pass symmetric matrices; column i doubles as row i
    (0..m.ncols()).map(|i| dot2(m.column(i).as_slice(), x)).collect()
}

/// A vector in the tangent space at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    data: Vec<f64>,
    base: u64,
}

impl TangentVector {
    /// Validates block-wise orthogonality against `base`.
    pub fn new(base: &SortedWindow, data: Vec<f64>) -> Result<Self> {
        check_tangent(base, &data)?;
        Ok(TangentVector {
            data,
            base: base.fingerprint(),
        })
    }

    fn unchecked(base: &SortedWindow, data: Vec<f64>) -> Self {
        TangentVector {
            data,
            base: base.fingerprint(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn base_fingerprint(&self) -> u64 {
        self.base
    }

    pub fn norm(&self) -> f64 {
        dot2(&self.data, &self.data).to_f64().sqrt()
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        dot2(&self.data, &other.data).to_f64()
    }
}

fn check_tangent(base: &SortedWindow, v: &[f64]) -> Result<()> {
    if v.len() != base.data.len() {
        return Err(Error::DimensionMismatch {
            what: "tangent vector",
            got: v.len(),
            expected: base.data.len(),
        });
    }
    let tol = TANGENT_TOL * dot2(v, v).to_f64().sqrt();
    let j = base.params.block_len();
    for (block, (wl, vl)) in base.blocks().zip(v.chunks_exact(j)).enumerate() {
        let inner = dot2(wl, vl).to_f64();
        if !(inner.abs() <= tol) {
            return Err(Error::NotTangent { block, inner });
        }
    }
    Ok(())
}

fn project_raw(base: &SortedWindow, u: &[f64]) -> Vec<f64> {
    let a = base.params.hop() as f64;
    let j = base.params.block_len();
    let mut out = u.to_vec();
    for (wl, ol) in base.blocks().zip(out.chunks_exact_mut(j)) {
        let c = a * dot2(wl, ol).to_f64();
        for (o, &w) in ol.iter_mut().zip(wl) {
            *o -= c * w;
        }
    }
    out
}

/// `(I_K - a W W^T) u`, block `l` being `(I_J - a w_l w_l^T) u_l`.
pub fn project_tangent(base: &SortedWindow, u: &[f64]) -> Result<TangentVector> {
    base.check_on_manifold()?;
    if u.len() != base.data.len() {
        return Err(Error::DimensionMismatch {
            what: "vector",
            got: u.len(),
            expected: base.data.len(),
        });
    }
    Ok(TangentVector::unchecked(base, project_raw(base, u)))
}

/// Gradient, block couplings and cached products at one base point.
#[derive(Debug, Clone)]
pub struct NewtonSystem {
    qtilde: Arc<DMatrix<f64>>,
    /// `Q~ w~`
    q: Vec<Dd>,
    /// `h_l = w_l^T q_l`
    h: Vec<Dd>,
    /// `-U w~`
    gradient: Vec<Dd>,
    base: u64,
    params: GaborParams,
}

impl NewtonSystem {
    pub fn new(ws: &SortedWindow, qtilde: Arc<DMatrix<f64>>) -> Result<Self> {
        ws.check_on_manifold()?;
        let k = ws.params.window_len();
        if qtilde.nrows() != k || qtilde.ncols() != k {
            return Err(Error::DimensionMismatch {
                what: "permuted concentration matrix",
                got: qtilde.nrows(),
                expected: k,
            });
        }
        let a = ws.params.hop() as f64;
        let j = ws.params.block_len();
        let q = apply_accurate(&qtilde, &ws.data);
        let h: Vec<Dd> = ws
            .blocks()
            .zip(q.chunks_exact(j))
            .map(|(wl, ql)| wl.iter().zip(ql).fold(Dd::ZERO, |acc, (&w, &y)| acc + y * w))
            .collect();
        let gradient = (0..k)
            .map(|i| {
                let coupling = h[i / j].scale(a) * ws.data[i];
                coupling - q[i]
            })
            .collect();
        Ok(NewtonSystem {
            qtilde,
            q,
            h,
            gradient,
            base: ws.fingerprint(),
            params: ws.params,
        })
    }

    fn check_base(&self, ws: &SortedWindow) -> Result<()> {
        if ws.fingerprint() != self.base {
            return Err(Error::StaleSystem);
        }
        Ok(())
    }

    pub fn qtilde(&self) -> &Arc<DMatrix<f64>> {
        &self.qtilde
    }

    pub fn couplings(&self) -> Vec<f64> {
        self.h.iter().map(|h| h.to_f64()).collect()
    }

    pub fn gradient_norm(&self) -> f64 {
        accurate::norm(&self.gradient)
    }

    /// `-1/2 w~^T Q~ w~`.
    pub fn objective(&self) -> f64 {
        // w^T Q w = sum_l h_l
        let total = self.h.iter().fold(Dd::ZERO, |acc, &x| acc + x);
        -0.5 * total.to_f64()
    }

    /// `Q~ w~` rounded to `f64`.
    pub fn qw(&self) -> Vec<f64> {
        self.q.iter().map(|x| x.to_f64()).collect()
    }

    /// `U = Q~ - a blockdiag(h_l I_J)`.
    pub fn u_matrix(&self) -> DMatrix<f64> {
        let a = self.params.hop() as f64;
        let j = self.params.block_len();
        let mut u = (*self.qtilde).clone();
        for i in 0..u.nrows() {
            u[(i, i)] = (Dd::from_f64(u[(i, i)]) - self.h[i / j].scale(a)).to_f64();
        }
        u
    }

    /// Writes `U` as comma-separated rows.
    pub fn write_u_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let u = self.u_matrix();
        for i in 0..u.nrows() {
            let row: Vec<String> = (0..u.ncols()).map(|j| format!("{:e}", u[(i, j)])).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `U - a W W^T Q~` as a pair of row-major `f64` arrays (`hi`, `lo`).
    fn newton_matrix(&self, ws: &SortedWindow) -> (Vec<f64>, Vec<f64>) {
        let k = self.params.window_len();
        let j = self.params.block_len();
        let a = self.params.hop() as f64;
        let qt = &*self.qtilde;
        let storage = qt.as_slice();
        // r[l][c] = w_l^T Q~[block l, c]
        let mut r = vec![Dd::ZERO; self.params.hop() * k];
        for (l, wl) in ws.blocks().enumerate() {
            for c in 0..k {
                let col = &storage[c * k + l * j..c * k + (l + 1) * j];
                r[l * k + c] = dot2(wl, col).scale(a);
            }
        }
        let mut hi = vec![0.0; k * k];
        let mut lo = vec![0.0; k * k];
        for i in 0..k {
            let l = i / j;
            let wi = ws.data[i];
            for c in 0..k {
                let mut e = Dd::from_f64(qt[(i, c)]) - r[l * k + c] * wi;
                if i == c {
                    e = e - self.h[l].scale(a);
                }
                hi[i * k + c] = e.hi;
                lo[i * k + c] = e.lo;
            }
        }
        (hi, lo)
    }
}

/// Riemannian gradient `g = -U w~`.
pub fn riemannian_gradient(ws: &SortedWindow, sys: &NewtonSystem) -> Result<TangentVector> {
    sys.check_base(ws)?;
    Ok(TangentVector::unchecked(
        ws,
        sys.gradient.iter().map(|g| g.to_f64()).collect(),
    ))
}

/// Riemannian Hessian applied to a tangent vector, `-(U - a W W^T Q~) v`.
pub fn hessian_apply(ws: &SortedWindow, sys: &NewtonSystem, v: &TangentVector) -> Result<TangentVector> {
    sys.check_base(ws)?;
    check_tangent(ws, &v.data)?;
    let a = sys.params.hop() as f64;
    let j = sys.params.block_len();
    let qv = apply_accurate(&sys.qtilde, &v.data);
    let mut out = vec![0.0; v.data.len()];
    for (l, wl) in ws.blocks().enumerate() {
        let range = l * j..(l + 1) * j;
        let wq = wl
            .iter()
            .zip(&qv[range.clone()])
            .fold(Dd::ZERO, |acc, (&w, &y)| acc + y * w)
            .scale(a);
        let hl = sys.h[l].scale(a);
        for i in range {
            let uv = qv[i] - hl * v.data[i];
            out[i] = -(uv - wq * ws.data[i]).to_f64();
        }
    }
    Ok(TangentVector::unchecked(ws, out))
}

/// A Newton direction with solve diagnostics.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub direction: TangentVector,
    /// `max_l |w_l^T v_l| / ||v||` before re-projection.
    pub normal_defect: f64,
    /// Relative residual of the final solve.
    pub residual: f64,
    pub refinements: usize,
}

/// Solves `(U - a W W^T Q~) v = g` and re-projects `v` onto the tangent space.
///
/// The system matrix and residuals are formed in double-double; the LU
/// factorization (partial pivoting) runs in `f64`. With `refine`, correction
/// passes continue while the residual keeps shrinking.
pub fn newton_step(ws: &SortedWindow, sys: &NewtonSystem, refine: bool) -> Result<NewtonStep> {
    sys.check_base(ws)?;
    let k = sys.params.window_len();
    let gnorm = sys.gradient_norm();
    if gnorm == 0.0 {
        return Ok(NewtonStep {
            direction: TangentVector::unchecked(ws, vec![0.0; k]),
            normal_defect: 0.0,
            residual: 0.0,
            refinements: 0,
        });
    }
    let (hi, lo) = sys.newton_matrix(ws);
    let lu = DMatrix::from_row_slice(k, k, &hi).lu();
    let singular = |residual| Error::SingularSystem { residual };

    let g: Vec<f64> = sys.gradient.iter().map(|x| x.to_f64()).collect();
    let first = lu
        .solve(&DVector::from_column_slice(&g))
        .ok_or(singular(f64::INFINITY))?;
    let mut v: Vec<Dd> = first.iter().map(|&x| Dd::from_f64(x)).collect();

    let residual_of = |v: &[Dd]| -> Vec<Dd> {
        let vh: Vec<f64> = v.iter().map(|x| x.hi).collect();
        let vl: Vec<f64> = v.iter().map(|x| x.lo).collect();
        (0..k)
            .map(|i| {
                let row_hi = &hi[i * k..(i + 1) * k];
                let row_lo = &lo[i * k..(i + 1) * k];
                let av = dot2(row_hi, &vh) + dot2(row_hi, &vl) + dot2(row_lo, &vh);
                sys.gradient[i] - av
            })
            .collect()
    };

    let mut r = residual_of(&v);
    let mut rnorm = accurate::norm(&r);
    let mut refinements = 0;
    if refine {
        while refinements < MAX_REFINEMENTS && rnorm > f64::EPSILON * f64::EPSILON * gnorm {
            let rf: Vec<f64> = r.iter().map(|x| x.to_f64()).collect();
            let delta = lu
                .solve(&DVector::from_column_slice(&rf))
                .ok_or(singular(rnorm / gnorm))?;
            let candidate: Vec<Dd> = v.iter().zip(delta.iter()).map(|(x, &d)| x.add_f64(d)).collect();
            let r_new = residual_of(&candidate);
            let n_new = accurate::norm(&r_new);
            refinements += 1;
            if !(n_new < rnorm) {
                break;
            }
            let shrink = n_new / rnorm;
            v = candidate;
            r = r_new;
            rnorm = n_new;
            if shrink > 0.5 {
                break;
            }
        }
    }
    let residual = rnorm / gnorm;
    if !(residual <= SOLVE_RESIDUAL_TOL) {
        return Err(singular(residual));
    }

    let raw: Vec<f64> = v.iter().map(|x| x.to_f64()).collect();
    let vnorm = dot2(&raw, &raw).to_f64().sqrt();
    let j = sys.params.block_len();
    let normal_defect = if vnorm > 0.0 {
        ws.blocks()
            .zip(raw.chunks_exact(j))
            .map(|(wl, vl)| dot2(wl, vl).to_f64().abs())
            .fold(0.0, f64::max)
            / vnorm
    } else {
        0.0
    };
    Ok(NewtonStep {
        direction: TangentVector::unchecked(ws, project_raw(ws, &raw)),
        normal_defect,
        residual,
        refinements,
    })
}

/// The Newton direction through the matrix inversion lemma,
/// `v = -w~ + (1/a) U^{-1} W (W^T U^{-1} W)^{-1} 1`, in plain `f64`.
pub fn newton_step_inversion_lemma(ws: &SortedWindow, sys: &NewtonSystem) -> Result<Vec<f64>> {
    sys.check_base(ws)?;
    let k = sys.params.window_len();
    let a = sys.params.hop();
    let j = sys.params.block_len();
    let lu = sys.u_matrix().lu();
    let mut w_mat = DMatrix::zeros(k, a);
    for (l, wl) in ws.blocks().enumerate() {
        for (t, &x) in wl.iter().enumerate() {
            w_mat[(l * j + t, l)] = x;
        }
    }
    let y = lu
        .solve(&w_mat)
        .ok_or(Error::SingularSystem { residual: f64::INFINITY })?;
    let gram = w_mat.transpose() * &y;
    let z = gram
        .lu()
        .solve(&DVector::from_element(a, 1.0))
        .ok_or(Error::SingularSystem { residual: f64::INFINITY })?;
    let yz = y * z;
    Ok((0..k).map(|i| -ws.data[i] + yz[i] / a as f64).collect())
}

fn retract_raw(ws: &SortedWindow, v: &[f64]) -> Result<SortedWindow> {
    let j = ws.params.block_len();
    let root_a = (ws.params.hop() as f64).sqrt();
    let mut out = Vec::with_capacity(ws.data.len());
    for (block, (wl, vl)) in ws.blocks().zip(v.chunks_exact(j)).enumerate() {
        let u: Vec<f64> = wl.iter().zip(vl).map(|(w, d)| w + d).collect();
        let norm = dot2(&u, &u).to_f64().sqrt();
        if !(norm >= ZERO_BLOCK_TOL) {
            return Err(Error::ZeroBlock { block, norm });
        }
        let s = 1.0 / (root_a * norm);
        out.extend(u.iter().map(|x| x * s));
    }
    Ok(SortedWindow {
        data: out,
        params: ws.params,
    })
}

/// Blockwise metric projection of `w~ + v` back onto the manifold.
pub fn retract(ws: &SortedWindow, v: &TangentVector) -> Result<SortedWindow> {
    if v.data.len() != ws.data.len() {
        return Err(Error::DimensionMismatch {
            what: "tangent vector",
            got: v.data.len(),
            expected: ws.data.len(),
        });
    }
    retract_raw(ws, &v.data)
}
