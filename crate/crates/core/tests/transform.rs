use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tightwin::gabor::{
    canonical_tight, dgt, frame_operator_diag, idgt, is_tight, verify_reconstruction, GaborCoefficients, GaborParams,
    Window,
};

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn random_window(rng: &mut ChaCha8Rng, params: GaborParams) -> Window {
    let c = (0..params.window_len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    Window::new(c, params).unwrap()
}

fn naive_dgt(x: &[Complex64], w: &[f64], p: &GaborParams) -> Vec<Vec<Complex64>> {
    let (l_len, m, a) = (p.signal_len(), p.channels(), p.hop());
    (0..p.frames())
        .map(|n| {
            (0..m)
                .map(|mm| {
                    w.iter()
                        .enumerate()
                        .map(|(l, &wl)| {
                            let phase = -2.0 * PI * (mm * l) as f64 / m as f64;
                            x[(l + a * n) % l_len] * wl * Complex64::from_polar(1.0, phase)
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn naive_idgt(c: &[Vec<Complex64>], g: &[f64], p: &GaborParams) -> Vec<Complex64> {
    let (l_len, m, a) = (p.signal_len(), p.channels(), p.hop());
    let mut out = vec![Complex64::new(0.0, 0.0); l_len];
    for (n, frame) in c.iter().enumerate() {
        for (j, &gj) in g.iter().enumerate() {
            let s: Complex64 = (0..m)
                .map(|mm| frame[mm] * Complex64::from_polar(1.0, 2.0 * PI * (mm * j) as f64 / m as f64))
                .sum();
            out[(a * n + j) % l_len] += s * gj;
        }
    }
    out
}

fn geometries() -> Vec<GaborParams> {
    vec![
        GaborParams::new(16, 8, 4, 8).unwrap(),
        GaborParams::new(48, 12, 3, 16).unwrap(),
        GaborParams::new(24, 8, 2, 12).unwrap(),
    ]
}

#[test]
fn dgt_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in geometries() {
        let x = random_signal(&mut rng, p.signal_len());
        let w = random_window(&mut rng, p);
        let fast = dgt(&x, &w, &p).unwrap();
        let slow = naive_dgt(&x, w.coeffs(), &p);
        for (n, frame) in slow.iter().enumerate() {
            for (m, v) in frame.iter().enumerate() {
                assert!((fast.get(m, n) - v).norm() < 1e-12, "{p:?} m={m} n={n}");
            }
        }
    }
}

#[test]
fn idgt_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in geometries() {
        let g = random_window(&mut rng, p);
        let frames: Vec<Vec<Complex64>> = (0..p.frames()).map(|_| random_signal(&mut rng, p.channels())).collect();
        let flat: Vec<Complex64> = frames.iter().flatten().cloned().collect();
        let coeffs = GaborCoefficients::from_frames(flat, p.channels(), p.frames()).unwrap();
        let fast = idgt(&coeffs, &g, &p).unwrap();
        let slow = naive_idgt(&frames, g.coeffs(), &p);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-11);
        }
    }
}

#[test]
fn dgt_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = GaborParams::new(48, 12, 3, 16).unwrap();
    let w = random_window(&mut rng, p);
    let x = random_signal(&mut rng, 48);
    let y = random_signal(&mut rng, 48);
    let (s, t) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
    let z: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| s * a + t * b).collect();
    let (cx, cy, cz) = (dgt(&x, &w, &p).unwrap(), dgt(&y, &w, &p).unwrap(), dgt(&z, &w, &p).unwrap());
    for i in 0..cz.as_slice().len() {
        let lin = s * cx.as_slice()[i] + t * cy.as_slice()[i];
        assert!((cz.as_slice()[i] - lin).norm() < 1e-12);
    }
}

/// The frame operator `S = D^* D` assembled column by column from the DGT of
/// unit impulses.
fn brute_frame_operator(w: &Window, p: &GaborParams) -> Vec<Vec<Complex64>> {
    let l_len = p.signal_len();
    let cols: Vec<GaborCoefficients> = (0..l_len)
        .map(|t| {
            let mut e = vec![Complex64::new(0.0, 0.0); l_len];
            e[t] = Complex64::new(1.0, 0.0);
            dgt(&e, w, p).unwrap()
        })
        .collect();
    (0..l_len)
        .map(|r| {
            (0..l_len)
                .map(|c| {
                    cols[r]
                        .as_slice()
                        .iter()
                        .zip(cols[c].as_slice())
                        .map(|(x, y)| x.conj() * y)
                        .sum()
                })
                .collect()
        })
        .collect()
}

#[test]
fn frame_operator_is_diagonal_and_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in [GaborParams::new(16, 8, 4, 8).unwrap(), GaborParams::new(48, 12, 3, 16).unwrap()] {
        let w = random_window(&mut rng, p);
        let s = brute_frame_operator(&w, &p);
        let diag = frame_operator_diag(&w);
        for (r, row) in s.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if r != c {
                    assert!(v.norm() < 1e-10, "off-diagonal ({r},{c}) = {v}");
                }
            }
        }
        for (l, d) in diag.iter().enumerate() {
            assert!((s[l][l].re - d).abs() < 1e-10 * d, "l={l}");
        }
    }
}

#[test]
fn canonical_tight_reconstructs_and_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in geometries() {
        let w = random_window(&mut rng, p);
        let lam = p.unit_frame_constant();
        let t = canonical_tight(&w, lam).unwrap();
        let check = is_tight(&t, 1e-12);
        assert!(check.tight);
        assert!((check.lambda - lam).abs() < 1e-12 * lam);
        let again = canonical_tight(&t, lam).unwrap();
        for (a, b) in t.coeffs().iter().zip(again.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(verify_reconstruction(&t, &p, 3, 9).unwrap() < 1e-12);
    }
}

#[test]
fn gaps_in_the_window_are_reported() {
    let p = GaborParams::new(16, 8, 4, 8).unwrap();
    let mut c = vec![1.0; 8];
    c[1] = 0.0;
    c[5] = 0.0;
    assert!(canonical_tight(&Window::new(c, p).unwrap(), 2.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tight_projection_reconstructs_any_positive_window(
        coeffs in prop::collection::vec(0.05f64..2.0, 12),
        seed in 0u64..1000,
    ) {
        let p = GaborParams::new(48, 12, 3, 12).unwrap();
        let t = canonical_tight(&Window::new(coeffs, p).unwrap(), 4.0).unwrap();
        prop_assert!(verify_reconstruction(&t, &p, 2, seed).unwrap() < 1e-12);
    }
}
