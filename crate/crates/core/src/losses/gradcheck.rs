//! Central finite-difference checks for analytic loss gradients.

use rand::Rng;

use crate::phase::kink_distance;

/// Central-difference estimate of the gradient of `f` at `point`.
pub fn central_differences<F>(f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = point.to_vec();
    (0..point.len())
        .map(|i| {
            probe[i] = point[i] + h;
            let plus = f(&probe);
            probe[i] = point[i] - h;
            let minus = f(&probe);
            probe[i] = point[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Largest elementwise relative error, with denominator `max(|a|, |b|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Largest elementwise error divided by the larger infinity norm of the two
/// vectors; the usual measure when some entries sit near zero.
pub fn max_normwise_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = inf(analytic).max(inf(numeric)).max(1e-8);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / scale)
        .fold(0.0, f64::max)
}

/// Compares the gradient returned by `loss_fn` with central differences of its value.
///
/// The caller is responsible for keeping `point` at least `10 h` away from
/// any kink of a piecewise-linear loss.
pub fn fd_gradient_check<F>(loss_fn: F, point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "step must be positive");
    let (_, analytic) = loss_fn(point);
    let numeric = central_differences(|p| loss_fn(p).0, point, h);
    max_relative_error(&analytic, &numeric)
}

/// Smallest kink distance over every anti-wrapped quantity of the phase loss:
/// the errors themselves and their frequency and time differences.
pub fn phase_kink_margin(target: &[f64], pred: &[f64], frames: usize, bins: usize) -> f64 {
    let err: Vec<f64> = target.iter().zip(pred).map(|(a, b)| a - b).collect();
    let at = |t: usize, f: usize| err[t * bins + f];
    let mut margin = err.iter().map(|&e| kink_distance(e)).fold(f64::MAX, f64::min);
    for t in 0..frames {
        for f in 0..bins {
            if f + 1 < bins {
                margin = margin.min(kink_distance(at(t, f + 1) - at(t, f)));
            }
            if t + 1 < frames {
                margin = margin.min(kink_distance(at(t + 1, f) - at(t, f)));
            }
        }
    }
    margin
}

/// Draws a (target, prediction) phase pair whose loss is smooth within `margin`.
pub fn kink_free_phase_pair<R: Rng>(
    rng: &mut R,
    frames: usize,
    bins: usize,
    margin: f64,
) -> (Vec<f64>, Vec<f64>) {
    use std::f64::consts::PI;
    loop {
        let target: Vec<f64> = (0..frames * bins).map(|_| rng.random_range(-PI..PI)).collect();
        let pred: Vec<f64> = (0..frames * bins).map(|_| rng.random_range(-PI..PI)).collect();
        if phase_kink_margin(&target, &pred, frames, bins) > margin {
            return (target, pred);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_is_exact() {
        let f = |p: &[f64]| {
            let v = 3.0 * p[0] * p[0] + p[0] * p[1] - 2.0 * p[1] * p[1] + p[2];
            (v, vec![6.0 * p[0] + p[1], p[0] - 4.0 * p[1], 1.0])
        };
        for point in [[0.3, -1.2, 5.0], [10.0, 4.0, -2.0]] {
            assert!(fd_gradient_check(f, &point, 1e-6) < 1e-8);
        }
    }

    #[test]
    fn detects_wrong_gradient() {
        let f = |p: &[f64]| (p[0] * p[0], vec![p[0]]);
        assert!(fd_gradient_check(f, &[1.0], 1e-6) > 0.4);
    }

    #[test]
    fn kink_free_pairs_respect_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (t, p) = kink_free_phase_pair(&mut rng, 4, 5, 1e-3);
        assert!(phase_kink_margin(&t, &p, 4, 5) > 1e-3);
    }
}
