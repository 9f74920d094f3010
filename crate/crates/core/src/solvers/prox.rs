use ndarray::{Array1, ArrayView1};

/// `sign(z)·max(|z| − tau, 0)`.
#[inline]
pub fn soft_threshold(z: f64, tau: f64) -> f64 {
    if z > tau {
        z - tau
    } else if z < -tau {
        z + tau
    } else {
        0.0
    }
}

/// Euclidean projection onto `{x : ‖x‖₁ ≤ radius}` by sorting magnitudes.
pub fn project_l1_ball(v: ArrayView1<'_, f64>, radius: f64) -> Array1<f64> {
    debug_assert!(radius >= 0.0);
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_owned();
    }
    if radius == 0.0 {
        return Array1::zeros(v.len());
    }
    let theta = l1_shrinkage(v, radius);
    v.mapv(|x| soft_threshold(x, theta))
}

/// The threshold `θ` of the projection: `Σ max(|v_i| − θ, 0) = radius`.
/// Requires `‖v‖₁ > radius > 0`.
fn l1_shrinkage(v: ArrayView1<'_, f64>, radius: f64) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - radius) / (i + 1) as f64;
        if u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// Proximal map of `tau·‖·‖_∞`, via Moreau: `v − P_{tau·B₁}(v)`.
///
/// Equivalently, magnitudes are clipped at the projection threshold.
pub fn prox_linf_row(v: ArrayView1<'_, f64>, tau: f64) -> Array1<f64> {
    debug_assert!(tau >= 0.0);
    if tau == 0.0 {
        return v.to_owned();
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= tau {
        return Array1::zeros(v.len());
    }
    let theta = l1_shrinkage(v, tau);
    v.mapv(|x| x.clamp(-theta, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        for z in [-2.5, 0.0, 1e-9, 7.0] {
            assert_eq!(soft_threshold(z, 0.0), z);
        }
    }

    #[test]
    fn prox_inside_dual_ball_is_zero() {
        let v = array![0.2, -0.3, 0.1];
        assert!(prox_linf_row(v.view(), 0.6).iter().all(|&x| x == 0.0));
        assert!(prox_linf_row(v.view(), 1.0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn prox_scalar_is_soft_threshold() {
        for (z, tau) in [(3.0, 1.0), (-0.5, 1.0), (-4.0, 1.5), (0.7, 0.0)] {
            let out = prox_linf_row(array![z].view(), tau);
            assert!((out[0] - soft_threshold(z, tau)).abs() < 1e-15);
        }
    }

    #[test]
    fn prox_clips_to_common_level() {
        // ‖v‖₁ = 6, tau = 2: projection threshold θ solves
        // (3 − θ) + (2 − θ) + max(1 − θ, 0) = 2 → θ = 1.5, so
        // the prox clips magnitudes at 1.5.
        let out = prox_linf_row(array![3.0, -2.0, 1.0].view(), 2.0);
        assert_eq!(out, array![1.5, -1.5, 1.0]);
    }

    #[test]
    fn projection_lands_on_ball() {
        let mut rng = crate::rng::substream(4, &[]);
        for _ in 0..200 {
            let n = rng.random_range(1..8);
            let v = Array1::from_shape_simple_fn(n, || rng.random_range(-3.0..3.0));
            let r = rng.random_range(0.0..4.0);
            let p = project_l1_ball(v.view(), r);
            let l1: f64 = p.iter().map(|x| x.abs()).sum();
            assert!(l1 <= r + 1e-12);
            let vl1: f64 = v.iter().map(|x| x.abs()).sum();
            if vl1 > r {
                assert!((l1 - r).abs() < 1e-12);
            }
            // Moreau: prox + projection reproduces v.
            let q = prox_linf_row(v.view(), r);
            for i in 0..n {
                assert!((p[i] + q[i] - v[i]).abs() < 1e-12);
            }
        }
    }
}
