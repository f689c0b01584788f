use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tightwin::gabor::{GaborParams, Window};
use tightwin::oblique::{
    hessian_apply, permute_q, project_tangent, retract, riemannian_gradient, sort_window, sorted_index, unsort_window,
    NewtonSystem, SortedWindow, TangentVector,
};
use tightwin::spectral::build_q;
use tightwin::Error;

fn setup(k: usize, a: usize, p: f64, seed: u64) -> (SortedWindow, NewtonSystem, ChaCha8Rng) {
    let prm = GaborParams::new(4 * k, k, a, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let ws = SortedWindow::from_sorted(data, prm).unwrap().project_to_manifold().unwrap();
    let qt = Arc::new(permute_q(&build_q(p, k).unwrap(), &prm).unwrap());
    let sys = NewtonSystem::new(&ws, qt).unwrap();
    (ws, sys, rng)
}

fn unit_tangent(ws: &SortedWindow, rng: &mut ChaCha8Rng) -> TangentVector {
    let u: Vec<f64> = (0..ws.as_slice().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = project_tangent(ws, &u).unwrap();
    let s = 1.0 / v.norm();
    project_tangent(ws, &v.as_slice().iter().map(|x| x * s).collect::<Vec<_>>()).unwrap()
}

fn along(ws: &SortedWindow, v: &TangentVector, t: f64) -> SortedWindow {
    let step = project_tangent(ws, &v.as_slice().iter().map(|x| x * t).collect::<Vec<_>>()).unwrap();
    retract(ws, &step).unwrap()
}

#[test]
fn gradient_matches_central_differences() {
    for (k, a, seed) in [(8, 2, 1), (12, 3, 2), (16, 4, 3)] {
        let (ws, sys, mut rng) = setup(k, a, 0.3, seed);
        let qt = sys.qtilde().clone();
        let g = riemannian_gradient(&ws, &sys).unwrap();
        for _ in 0..5 {
            let v = unit_tangent(&ws, &mut rng);
            let t = 1e-5;
            let fd = (along(&ws, &v, t).objective(&qt) - along(&ws, &v, -t).objective(&qt)).to_f64() / (2.0 * t);
            assert!((fd - g.dot(&v)).abs() < 1e-8, "fd {fd} vs {}", g.dot(&v));
        }
    }
}

#[test]
fn hessian_matches_second_differences() {
    for (k, a, seed) in [(8, 2, 4), (12, 3, 5)] {
        let (ws, sys, mut rng) = setup(k, a, 0.25, seed);
        let qt = sys.qtilde().clone();
        let f0 = ws.objective(&qt);
        for _ in 0..5 {
            let v = unit_tangent(&ws, &mut rng);
            let t = 1e-3;
            let plus = along(&ws, &v, t).objective(&qt);
            let minus = along(&ws, &v, -t).objective(&qt);
            let fd = (plus + minus - f0 - f0).to_f64() / (t * t);
            let hv = hessian_apply(&ws, &sys, &v).unwrap();
            assert!((fd - hv.dot(&v)).abs() < 1e-5, "fd {fd} vs {}", hv.dot(&v));
        }
    }
}

#[test]
fn retraction_is_second_order() {
    let (ws, _, mut rng) = setup(12, 3, 0.2, 6);
    let v = unit_tangent(&ws, &mut rng);
    let gap = |t: f64| {
        let r = along(&ws, &v, t);
        r.as_slice()
            .iter()
            .zip(ws.as_slice().iter().zip(v.as_slice()))
            .map(|(x, (w, d))| (x - w - t * d).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let ratio = gap(1e-2) / gap(5e-3);
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    let moved = along(&ws, &v, 0.7);
    assert!(moved.is_on_manifold());
}

#[test]
fn sorting_is_a_permutation() {
    let prm = GaborParams::new(48, 12, 3, 12).unwrap();
    let mut seen = vec![false; 12];
    for i in 0..12 {
        seen[sorted_index(&prm, i)] = true;
    }
    assert!(seen.iter().all(|&s| s));
    let w = Window::new((0..12).map(|i| i as f64).collect(), prm).unwrap();
    let ws = sort_window(&w);
    // block l holds taps l, l + a, l + 2a, ...
    assert_eq!(ws.block(1), &[1.0, 4.0, 7.0, 10.0]);
    assert_eq!(unsort_window(&ws), w);
}

#[test]
fn stale_systems_are_rejected() {
    let (ws, sys, mut rng) = setup(8, 2, 0.2, 7);
    let v = unit_tangent(&ws, &mut rng);
    let other = along(&ws, &v, 0.1);
    assert_eq!(riemannian_gradient(&other, &sys).unwrap_err(), Error::StaleSystem);
}

#[test]
fn normal_vectors_are_not_tangent() {
    let (ws, _, _) = setup(8, 2, 0.2, 8);
    assert!(matches!(
        TangentVector::new(&ws, ws.as_slice().to_vec()),
        Err(Error::NotTangent { .. })
    ));
}
