//! Constrained least squares checked against an independent active-set
//! enumeration that solves the raw (uncentered) normal equations.

use blink_core::predictor::{fit_nnls, solve_nnls, FitInput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sse(pts: &[(f64, f64)], a: f64, b: f64) -> f64 {
    pts.iter().map(|&(x, y)| (a + b * x - y).powi(2)).sum()
}

/// Minimum SSE over the feasible stationary points of the four faces of the
/// non-negative quadrant.
fn oracle(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let mut cands = vec![(0.0, 0.0)];
    // Cramer's rule on [[n, sx], [sx, sxx]] [a, b] = [sy, sxy].
    let det = n * sxx - sx * sx;
    let a = (sy * sxx - sx * sxy) / det;
    let b = (n * sxy - sx * sy) / det;
    if a >= 0.0 && b >= 0.0 {
        cands.push((a, b));
    }
    if sy / n >= 0.0 {
        cands.push((sy / n, 0.0));
    }
    if sxy / sxx >= 0.0 {
        cands.push((0.0, sxy / sxx));
    }
    cands
        .into_iter()
        .map(|(a, b)| (a, b, sse(pts, a, b)))
        .min_by(|x, y| x.2.partial_cmp(&y.2).unwrap())
        .unwrap()
}

#[test]
fn thousand_random_three_point_fits() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut xs: Vec<f64> = Vec::new();
        while xs.len() < 3 {
            let x: f64 = rng.gen_range(0.1..10.0);
            if xs.iter().all(|&e| (e - x).abs() > 1e-6) {
                xs.push(x);
            }
        }
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, rng.gen_range(0.0..100.0))).collect();
        let (a, b) = solve_nnls(&FitInput::new(pts.clone()).unwrap()).unwrap();
        assert!(a >= 0.0 && b >= 0.0);
        let (_, _, best) = oracle(&pts);
        let got = sse(&pts, a, b);
        assert!(
            got <= best + 1e-9 * (1.0 + best),
            "{pts:?}: {got} vs {best}"
        );
        worst = worst.max((got - best) / (1.0 + best));
    }
    assert!(worst <= 1e-9);
}

#[test]
fn constrained_example_is_exact() {
    let input = FitInput::new(vec![(1.0, 10.0), (2.0, 6.0), (3.0, 2.0)]).unwrap();
    let m = fit_nnls(&input).unwrap();
    assert_eq!((m.intercept, m.slope), (6.0, 0.0));
    assert_eq!(oracle(input.points()).0, 6.0);
}
