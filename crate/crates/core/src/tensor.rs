//! Small dense linear algebra over [`Taylor`] fields.
//!
//! Matrices are row-major `Vec<Vec<Taylor>>`. Pivoting decisions use the
//! constant terms only, so the elimination is a fixed rational function of
//! the entries and stays exact in the Taylor algebra.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::taylor::{Layout, Taylor};

pub type Vector = Vec<Taylor>;
pub type Matrix = Vec<Vec<Taylor>>;
pub type Tensor3 = Vec<Vec<Vec<Taylor>>>;

pub fn zeros(layout: &Arc<Layout>, n: usize) -> Vector {
    vec![Taylor::constant(layout, 0.0); n]
}

pub fn zeros2(layout: &Arc<Layout>, rows: usize, cols: usize) -> Matrix {
    vec![zeros(layout, cols); rows]
}

pub fn zeros3(layout: &Arc<Layout>, n: usize) -> Tensor3 {
    vec![zeros2(layout, n, n); n]
}

pub fn values(v: &[Taylor]) -> Vec<f64> {
    v.iter().map(Taylor::value).collect()
}

pub fn matrix_values(m: &[Vec<Taylor>]) -> DMatrix<f64> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, cols, |i, j| m[i][j].value())
}

pub fn dot(a: &[Taylor], b: &[Taylor]) -> Taylor {
    let mut acc = a[0].constant_like(0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Solves `a x = b_k` for every right-hand side in `rhs` by Gaussian
/// elimination with partial pivoting on constant terms.
pub fn solve_many(a: &[Vec<Taylor>], rhs: &[Vec<Taylor>], tol: f64) -> Result<Vec<Vector>> {
    let n = a.len();
    let mut m: Matrix = a.to_vec();
    let mut b: Vec<Vector> = rhs.to_vec();
    let scale = a
        .iter()
        .flatten()
        .map(|x| x.value().abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[r][col].value().abs()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol * scale {
            return Err(Error::SingularSystem { pivot: best / scale });
        }
        m.swap(col, piv);
        for rhs in b.iter_mut() {
            rhs.swap(col, piv);
        }
        let inv = m[col][col].recip();
        for r in col + 1..n {
            let factor = &m[r][col] * &inv;
            for c in col..n {
                let delta = &factor * &m[col][c];
                m[r][c] -= delta;
            }
            for rhs in b.iter_mut() {
                let delta = &factor * &rhs[col];
                rhs[r] -= delta;
            }
        }
    }
    let mut out = Vec::with_capacity(b.len());
    for rhs in b {
        let mut x: Vector = rhs.clone();
        for r in (0..n).rev() {
            let mut acc = rhs[r].clone();
            for c in r + 1..n {
                acc -= &m[r][c] * &x[c];
            }
            x[r] = acc / &m[r][r];
        }
        out.push(x);
    }
    Ok(out)
}

pub fn solve(a: &[Vec<Taylor>], b: &[Taylor], tol: f64) -> Result<Vector> {
    Ok(solve_many(a, &[b.to_vec()], tol)?.remove(0))
}

pub fn inverse(a: &[Vec<Taylor>], tol: f64) -> Result<Matrix> {
    let n = a.len();
    let layout = a[0][0].layout().clone();
    let eye: Vec<Vector> = (0..n)
        .map(|j| {
            (0..n)
                .map(|i| Taylor::constant(&layout, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let cols = solve_many(a, &eye, tol)?;
    Ok((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

/// Determinant. Small matrices use division-free cofactor expansion, so
/// entries whose constant terms vanish are handled exactly; larger ones fall
/// back to elimination.
pub fn det(a: &[Vec<Taylor>]) -> Taylor {
    let n = a.len();
    if n <= 6 {
        let cols: Vec<usize> = (0..n).collect();
        return laplace(a, 0, &cols);
    }
    let mut m: Matrix = a.to_vec();
    let mut sign = 1.0;
    let mut acc = a[0][0].constant_like(1.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| {
                m[x][col]
                    .value()
                    .abs()
                    .total_cmp(&m[y][col].value().abs())
            })
            .unwrap_or(col);
        if m[piv][col].value() == 0.0 {
            return a[0][0].constant_like(0.0);
        }
        if piv != col {
            m.swap(col, piv);
            sign = -sign;
        }
        let inv = m[col][col].recip();
        for r in col + 1..n {
            let factor = &m[r][col] * &inv;
            for c in col..n {
                let delta = &factor * &m[col][c];
                m[r][c] -= delta;
            }
        }
        acc = acc * &m[col][col];
    }
    acc * sign
}

fn laplace(a: &[Vec<Taylor>], row: usize, cols: &[usize]) -> Taylor {
    if cols.len() == 1 {
        return a[row][cols[0]].clone();
    }
    let mut acc = a[row][cols[0]].constant_like(0.0);
    for (j, &c) in cols.iter().enumerate() {
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = &a[row][c] * &laplace(a, row + 1, &rest);
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Generalized cross product of `n` vectors in `R^{n+1}`: the vector `N`
/// with `det[v_1, ..., v_n, w] = N · w` for every `w`.
pub fn cofactor_normal(cols: &[Vector]) -> Vector {
    let n = cols.len();
    let dim = n + 1;
    (0..dim)
        .map(|k| {
            let minor: Matrix = (0..dim)
                .filter(|&r| r != k)
                .map(|r| cols.iter().map(|c| c[r].clone()).collect())
                .collect();
            let sign = if (k + n) % 2 == 0 { 1.0 } else { -1.0 };
            det(&minor) * sign
        })
        .collect()
}

/// `det` of the square matrix whose columns are `cols`.
pub fn det_columns(cols: &[Vector]) -> Taylor {
    let n = cols.len();
    let m: Matrix = (0..n)
        .map(|r| cols.iter().map(|c| c[r].clone()).collect())
        .collect();
    det(&m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_inverse_match_closed_form() {
        let l = Layout::get(1, 3);
        let t = Taylor::var(&l, 0, 0.5);
        let one = t.constant_like(1.0);
        // [[t, 1], [1, t]] has inverse 1/(t^2-1) [[t, -1], [-1, t]]
        let a = vec![vec![t.clone(), one.clone()], vec![one.clone(), t.clone()]];
        let inv = inverse(&a, 1e-14).unwrap();
        let d = t.powi(2) - 1.0;
        let expected = &t / &d;
        for k in 0..=3 {
            let vars = vec![0; k];
            assert!((inv[0][0].partial(&vars) - expected.partial(&vars)).abs() < 1e-10);
        }
        let dt = det(&a);
        assert!((dt.partial(&[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cofactor_normal_is_orthogonal() {
        let l = Layout::get(1, 0);
        let c = |v: f64| Taylor::constant(&l, v);
        let a = vec![c(1.0), c(2.0), c(0.5)];
        let b = vec![c(-1.0), c(0.3), c(2.0)];
        let nrm = cofactor_normal(&[a.clone(), b.clone()]);
        assert!(dot(&nrm, &a).value().abs() < 1e-14);
        assert!(dot(&nrm, &b).value().abs() < 1e-14);
        let w = vec![c(0.2), c(-0.7), c(1.1)];
        let direct = det_columns(&[a, b, w.clone()]).value();
        assert!((dot(&nrm, &w).value() - direct).abs() < 1e-13);
    }

    #[test]
    fn singular_system_is_reported() {
        let l = Layout::get(1, 1);
        let c = |v: f64| Taylor::constant(&l, v);
        let a = vec![vec![c(1.0), c(2.0)], vec![c(2.0), c(4.0)]];
        assert!(matches!(
            solve(&a, &[c(1.0), c(1.0)], 1e-12),
            Err(Error::SingularSystem { .. })
        ));
    }
}
