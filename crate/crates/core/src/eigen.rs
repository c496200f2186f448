//! Cyclic Jacobi eigendecomposition for symmetric matrices, plus the
//! eigen-based solve used for the ridge systems. Deterministic and
//! dependency-free; fine for d up to a few hundred.

use crate::matrix::Mat;
use crate::{Error, Result};

/// Eigendecomposition A = V·diag(values)·Vᵀ with eigenvectors as columns
/// of `vectors`, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

const SWEEP_CAP: usize = 100;
const OFFDIAG_TOL: f64 = 1e-12;

fn offdiag_frob(a: &Mat) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += 2.0 * a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

/// Jacobi rotations, sweeping (p,q) pairs cyclically until the
/// off-diagonal Frobenius norm drops below 1e-12·‖A‖_F (cap 100 sweeps).
pub fn jacobi_eigen(a: &Mat) -> Result<SymEigen> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "jacobi_eigen needs a square matrix");
    if !a.is_finite() {
        return Err(Error::NonFinite {
            context: "jacobi_eigen input".into(),
        });
    }
    let mut m = a.symmetrized();
    let mut v = Mat::identity(n);
    let norm = m.frob();
    if norm > 0.0 {
        for _ in 0..SWEEP_CAP {
            if offdiag_frob(&m) < OFFDIAG_TOL * norm {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (2.0 * apq);
                    // smaller-root tangent, standard Jacobi choice
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = m[(k, p)];
                        let akq = m[(k, q)];
                        m[(k, p)] = c * akp - s * akq;
                        m[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = m[(p, k)];
                        let aqk = m[(q, k)];
                        m[(p, k)] = c * apk - s * aqk;
                        m[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut values: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable descending sort keeps equal eigenvalues in sweep order
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap());
    values = order.iter().map(|&i| values[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        // sign convention: largest-magnitude entry positive, ties at lowest index
        let mut best = 0;
        for k in 1..n {
            if v[(k, old_col)].abs() > v[(best, old_col)].abs() {
                best = k;
            }
        }
        let sign = if v[(best, old_col)] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[(k, new_col)] = sign * v[(k, old_col)];
        }
    }
    Ok(SymEigen { values, vectors })
}

impl SymEigen {
    /// max|λ| / min|λ|; infinite when the smallest magnitude is zero.
    pub fn condition_number(&self) -> f64 {
        let max = self.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        let min = self
            .values
            .iter()
            .fold(f64::INFINITY, |m, &x| m.min(x.abs()));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// V·diag(f(λ))·Vᵀ·b.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64, b: &[f64]) -> Vec<f64> {
        let coeffs = self.vectors.t_matvec(b);
        let scaled: Vec<f64> = coeffs
            .iter()
            .zip(&self.values)
            .map(|(c, &l)| c * f(l))
            .collect();
        self.vectors.matvec(&scaled)
    }
}

/// Solve the symmetric system A·x = b through the eigendecomposition,
/// returning the solution and the spectral condition number.
pub fn sym_solve(a: &Mat, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let eig = jacobi_eigen(a)?;
    let max = eig.values.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let min = eig
        .values
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min(x.abs()));
    if max == 0.0 || min <= 1e-14 * max {
        return Err(Error::Singular {
            context: "sym_solve".into(),
            detail: format!("eigenvalue magnitudes span [{min:e}, {max:e}]"),
        });
    }
    let x = eig.apply_fn(|l| 1.0 / l, b);
    Ok((x, max / min))
}

/// Smallest singular value of a general square matrix, via the Gram
/// matrix. Used only for error reporting on near-singular inner systems.
pub fn smallest_singular_value(a: &Mat) -> Result<f64> {
    let eig = jacobi_eigen(&a.gram())?;
    let min = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    Ok(min.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(e: &SymEigen) -> Mat {
        let n = e.values.len();
        let lam = Mat::from_fn(n, n, |i, j| if i == j { e.values[i] } else { 0.0 });
        e.vectors.matmul(&lam).matmul(&e.vectors.transpose())
    }

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let a = Mat::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let e = jacobi_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_2x2() {
        // eigenvalues of [[2,1],[1,2]] are 3 and 1
        let a = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = jacobi_eigen(&a).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12);
        assert!((e.values[1] - 1.0).abs() < 1e-12);
        assert!(reconstruct(&e).sub(&a).max_abs() < 1e-12);
    }

    #[test]
    fn orthonormal_and_reconstructs_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.gen_range(2..12);
            let x = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let a = x.symmetrized();
            let e = jacobi_eigen(&a).unwrap();
            let vtv = e.vectors.gram();
            assert!(vtv.sub(&Mat::identity(n)).max_abs() <= 1e-10);
            let scale = a.max_abs().max(1.0);
            assert!(reconstruct(&e).sub(&a).max_abs() <= 1e-9 * scale);
            for w in e.values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let a = Mat::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0]]);
        let e = jacobi_eigen(&a).unwrap();
        for j in 0..2 {
            let col = e.vectors.col(j);
            let best = col
                .iter()
                .cloned()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(best > 0.0);
        }
    }

    #[test]
    fn sym_solve_matches_lu() {
        let a = Mat::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let b = [1.0, 2.0];
        let (x, cond) = sym_solve(&a, &b).unwrap();
        let x2 = crate::matrix::lu_solve(&a, &b).unwrap();
        for (u, v) in x.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(cond > 1.0 && cond.is_finite());
    }

    #[test]
    fn sym_solve_rejects_singular() {
        let a = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(sym_solve(&a, &[1.0, 0.0]).is_err());
    }
}
