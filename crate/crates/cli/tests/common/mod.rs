//! Dense generalized eigenvalue reference: Cholesky reduction followed by
//! cyclic Jacobi rotations. Shares no code with the solver under test.

#![allow(clippy::needless_range_loop)]

pub type Dense = Vec<Vec<f64>>;

/// Lower-triangular `L` with `S = L Lᵀ`.
pub fn cholesky(s: &Dense) -> Dense {
    let n = s.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = s[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(sum > 0.0, "overlap not positive definite");
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    l
}

/// `L⁻¹ H L⁻ᵀ` by two triangular solves.
pub fn reduce(h: &Dense, l: &Dense) -> Dense {
    let n = h.len();
    // Y = L⁻¹ H
    let mut y = vec![vec![0.0; n]; n];
    for col in 0..n {
        for i in 0..n {
            let mut v = h[i][col];
            for k in 0..i {
                v -= l[i][k] * y[k][col];
            }
            y[i][col] = v / l[i][i];
        }
    }
    // C = Y L⁻ᵀ, i.e. solve L Cᵀ = Yᵀ
    let mut c = vec![vec![0.0; n]; n];
    for row in 0..n {
        for j in 0..n {
            let mut v = y[row][j];
            for k in 0..j {
                v -= l[j][k] * c[row][k];
            }
            c[row][j] = v / l[j][j];
        }
    }
    c
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(a: &Dense) -> Vec<f64> {
    let n = a.len();
    let mut a = a.clone();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = avg;
            a[j][i] = avg;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Generalized eigenvalues of `(H, S)` with `S` positive definite.
pub fn generalized_eigenvalues(h: &Dense, s: &Dense) -> Vec<f64> {
    jacobi_eigenvalues(&reduce(h, &cholesky(s)))
}

/// Panics unless the reference reproduces hand-solved cases.
pub fn self_check() {
    let s = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
    let h = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let e = generalized_eigenvalues(&h, &s);
    assert!((e[0] - 2.0 / 3.0).abs() < 1e-14 && (e[1] - 2.0).abs() < 1e-14);
    let h = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
    let e = jacobi_eigenvalues(&h);
    assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
}
