use nalgebra::DVector;
use ndarray::{Array1, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::to_na;
use crate::model::SupportSet;

/// Least squares on the `support` columns, zero elsewhere.
///
/// Solved through a Householder QR of the selected columns; a rank-deficient
/// selection is reported as [`Error::Singular`].
pub fn ols_refit(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, support: &SupportSet) -> Result<Array1<f64>> {
    let (n, p) = x.dim();
    if y.len() != n {
        return Err(Error::Shape(format!("X has {n} rows but y has {} entries", y.len())));
    }
    if support.bound() > p {
        return Err(Error::Shape(format!("support exceeds p = {p}")));
    }
    let mut w = Array1::zeros(p);
    if support.is_empty() {
        return Ok(w);
    }
    let k = support.len();
    if k > n {
        return Err(Error::Singular(format!("{k} columns but only {n} samples")));
    }
    let sub = to_na(x.select(Axis(1), support.indices()).view());
    let qr = sub.qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
        return Err(Error::Singular(format!("restricted design of rank < {k}")));
    }
    let qty = qr.q().transpose() * DVector::from_iterator(n, y.iter().copied());
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    for (&j, &v) in support.indices().iter().zip(coef.iter()) {
        w[j] = v;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::{Array2, array};
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn normal_equations(x: &Array2<f64>, y: &Array1<f64>, cols: &[usize]) -> Vec<f64> {
        let k = cols.len();
        let mut a = vec![vec![0.0; k + 1]; k];
        for (i, &ci) in cols.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                a[i][j] = x.column(ci).dot(&x.column(cj));
            }
            a[i][k] = x.column(ci).dot(y);
        }
        for c in 0..k {
            let piv = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..k {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for m in c..=k {
                        a[r][m] -= f * a[c][m];
                    }
                }
            }
        }
        (0..k).map(|i| a[i][k] / a[i][i]).collect()
    }

    #[test]
    fn noiseless_refit_recovers_weights() {
        let mut rng = substream(1, &[]);
        let x = Array2::from_shape_simple_fn((12, 8), || rng.sample(StandardNormal));
        let w = array![1.0, 0.0, -2.0, 0.0, 0.5, 0.0, 0.0, 0.0];
        let y = x.dot(&w);
        let s = SupportSet::new([0, 2, 4], 8).unwrap();
        let fit = ols_refit(x.view(), y.view(), &s).unwrap();
        for j in 0..8 {
            assert!((fit[j] - w[j]).abs() <= 1e-8);
        }
    }

    #[test]
    fn empty_support_is_zero() {
        let x = Array2::ones((3, 2));
        let fit = ols_refit(x.view(), array![1.0, 2.0, 3.0].view(), &SupportSet::empty()).unwrap();
        assert_eq!(fit, array![0.0, 0.0]);
    }

    #[test]
    fn matches_normal_equations() {
        for seed in 0..20 {
            let mut rng = substream(seed, &[1]);
            let x = Array2::from_shape_simple_fn((15, 6), || rng.sample(StandardNormal));
            let y = Array1::from_shape_simple_fn(15, || rng.sample(StandardNormal));
            let cols = [0usize, 1, 3, 5];
            let s = SupportSet::new(cols, 6).unwrap();
            let fit = ols_refit(x.view(), y.view(), &s).unwrap();
            let brute = normal_equations(&x, &y, &cols);
            for (c, b) in cols.iter().zip(&brute) {
                assert!((fit[*c] - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn singular_selection_reported() {
        let x = array![[1.0, 2.0, 0.0], [2.0, 4.0, 1.0], [3.0, 6.0, 0.0]];
        let y = array![1.0, 2.0, 3.0];
        let s = SupportSet::new([0, 1], 3).unwrap();
        assert!(matches!(ols_refit(x.view(), y.view(), &s), Err(Error::Singular(_))));
        let too_many = SupportSet::new([0, 1, 2], 3).unwrap();
        assert!(ols_refit(x.slice(ndarray::s![..2, ..]), y.slice(ndarray::s![..2]), &too_many).is_err());
    }
}
