//! Small dense linear-algebra routines used by the estimators.

use crate::nn::Tensor;

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Tensor) -> Option<Tensor> {
    let n = a.rows();
    let mut l = Tensor::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (i * n, j * n);
            let ls = l.as_slice();
            for k in 0..j {
                s -= ls[ri + k] * ls[rj + k];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L·Lᵀ·x = b` given the lower factor `L`.
pub fn cholesky_solve(l: &Tensor, b: &[f64]) -> Vec<f64> {
    let y = forward_substitute(l, b);
    let n = l.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solves `L·y = b` for lower-triangular `L`.
pub fn forward_substitute(l: &Tensor, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        let s: f64 = (0..i).map(|k| row[k] * y[k]).sum();
        y[i] = (b[i] - s) / row[i];
    }
    y
}

/// Ridge-regularized least squares `argmin ‖X·w − y‖² + ridge·‖w‖²` via the
/// normal equations.
pub fn least_squares(x: &Tensor, y: &[f64], ridge: f64) -> Option<Vec<f64>> {
    let p = x.cols();
    let mut xtx = x.transpose().matmul(x).ok()?;
    for i in 0..p {
        xtx[(i, i)] += ridge;
    }
    let mut xty = vec![0.0; p];
    for (r, yi) in x.iter_rows().zip(y) {
        for j in 0..p {
            xty[j] += r[j] * yi;
        }
    }
    match cholesky(&xtx) {
        Some(l) => Some(cholesky_solve(&l, &xty)),
        None => {
            let rows: Vec<Vec<f64>> = xtx.iter_rows().map(|r| r.to_vec()).collect();
            solve(&rows, &xty)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        assert!(solve(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = Tensor::from_rows(&[vec![4.0, 2.0, 0.6], vec![2.0, 5.0, 1.0], vec![0.6, 1.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = cholesky_solve(&l, &b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[(i, j)] * x[j]).sum();
            assert!((r - b[i]).abs() < 1e-12);
        }
        assert!(cholesky(&Tensor::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()).is_none());
    }

    #[test]
    fn least_squares_recovers_line() {
        let x = Tensor::from_rows(&(0..10).map(|i| vec![1.0, i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<f64> = (0..10).map(|i| 2.0 - 0.5 * i as f64).collect();
        let w = least_squares(&x, &y, 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-10 && (w[1] + 0.5).abs() < 1e-10);
    }
}
