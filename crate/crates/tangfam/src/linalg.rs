//! Small dense linear solves shared by stencil generation and least-squares
//! fitting. Sizes here never exceed ~12, so plain Gaussian elimination with
//! partial pivoting is plenty.

use crate::scalar::Coeff;

/// Solve `a x = b` in place. Returns `None` when the matrix is singular
/// (no usable pivot). Pivoting compares `|to_f64|` magnitudes, which is
/// exact-safe: rational pivots are nonzero iff their float view is.
pub fn gauss_solve<C: Coeff>(mut a: Vec<Vec<C>>, mut b: Vec<C>) -> Option<Vec<C>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&i, &j| {
            let x = a[i][col].to_f64().abs();
            let y = a[j][col].to_f64().abs();
            x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot_row][col].is_zero() {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let inv = a[col][col].recip()?;
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col].mul(&inv);
            if factor.is_zero() {
                continue;
            }
            for k in col..n {
                let delta = factor.mul(&a[col][k]);
                a[row][k] = a[row][k].sub(&delta);
            }
            let delta = factor.mul(&b[col]);
            b[row] = b[row].sub(&delta);
        }
    }
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        x.push(b[i].mul(&a[i][i].recip()?));
    }
    Some(x)
}

/// Least-squares polynomial fit of degree `deg` to the points `(u, w)`,
/// returning coefficients `c[0] + c[1] u + ...`. Solved via the normal
/// equations, which is fine at degree <= 5 on pre-scaled data.
pub fn polyfit(us: &[f64], ws: &[f64], deg: usize) -> Option<Vec<f64>> {
    let n = deg + 1;
    let mut ata = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for (&u, &w) in us.iter().zip(ws) {
        let mut pow = vec![1.0; n];
        for k in 1..n {
            pow[k] = pow[k - 1] * u;
        }
        for i in 0..n {
            for j in 0..n {
                ata[i][j] += pow[i] * pow[j];
            }
            atb[i] += pow[i] * w;
        }
    }
    gauss_solve(ata, atb)
}

/// Residual RMS of a polynomial fit against the sample points.
pub fn polyfit_residual(us: &[f64], ws: &[f64], coeffs: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (&u, &w) in us.iter().zip(ws) {
        let mut v = 0.0;
        for c in coeffs.iter().rev() {
            v = v * u + c;
        }
        sum += (w - v) * (w - v);
    }
    (sum / us.len().max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_3x3() {
        let a = vec![
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ];
        let b = vec![8.0, -11.0, -3.0];
        let x = gauss_solve(a, b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!((x[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_cubic() {
        let us: Vec<f64> = (0..30).map(|i| -1.0 + i as f64 / 15.0).collect();
        let ws: Vec<f64> = us.iter().map(|u| 0.5 - u + 0.25 * u * u * u).collect();
        let c = polyfit(&us, &ws, 5).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-10);
        assert!((c[1] + 1.0).abs() < 1e-10);
        assert!(c[2].abs() < 1e-10);
        assert!((c[3] - 0.25).abs() < 1e-10);
        assert!(polyfit_residual(&us, &ws, &c) < 1e-12);
    }
}
