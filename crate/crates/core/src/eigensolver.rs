//! Generalized symmetric eigenproblem `H c = λ S c` by canonical
//! orthogonalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::assembly::MatrixPair;
use crate::error::{Error, Result};

/// Eigen-decomposition of the overlap, columns by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct Orthogonalization {
    pub v: DMatrix<f64>,
    pub gamma: DVector<f64>,
    /// Leading columns with `γ > threshold · max γ`.
    pub kept: usize,
}

impl Orthogonalization {
    /// `V_kept γ_kept^{-1/2}`, the map from the orthonormal working basis
    /// back to the raw basis.
    pub fn transform(&self) -> DMatrix<f64> {
        let mut x = self.v.columns(0, self.kept).into_owned();
        for (j, mut col) in x.column_iter_mut().enumerate() {
            col /= self.gamma[j].sqrt();
        }
        x
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFiniteMatrix { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Sorted symmetric eigendecomposition; `descending` picks the order.
fn sorted_eigen(m: &DMatrix<f64>, descending: bool) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        let o = eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let values = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vectors)
}

pub fn orthogonalize(s: &DMatrix<f64>, threshold: f64) -> Result<Orthogonalization> {
    if !s.is_square() || s.nrows() == 0 {
        return Err(Error::EmptyBasis);
    }
    check_finite(s)?;
    let (gamma, v) = sorted_eigen(s, true);
    let max = gamma[0];
    if !(max > 0.0) {
        return Err(Error::EmptyBasis);
    }
    let kept = gamma.iter().take_while(|&&g| g > threshold * max).count();
    if kept == 0 {
        return Err(Error::EmptyBasis);
    }
    Ok(Orthogonalization { v, gamma, kept })
}

/// Eigenpairs of a [`MatrixPair`], ascending in `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Raw-basis coefficients, `dim × retained`, column `k` is `c^(k)`.
    pub coefficients: DMatrix<f64>,
    /// All overlap eigenvalues, descending.
    pub overlap_eigenvalues: Vec<f64>,
    pub retained: usize,
    pub labels: Vec<String>,
    pub config_hash: String,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn vector(&self, k: usize) -> Result<DVector<f64>> {
        if k >= self.retained {
            return Err(Error::LevelOutOfRange {
                level: k,
                available: self.retained,
            });
        }
        Ok(self.coefficients.column(k).into_owned())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }
}

pub fn solve(pair: &MatrixPair, threshold: f64) -> Result<Spectrum> {
    solve_matrices(&pair.h, &pair.s, threshold).map(|(eigenvalues, coefficients, orth)| Spectrum {
        eigenvalues,
        coefficients,
        overlap_eigenvalues: orth.gamma.iter().copied().collect(),
        retained: orth.kept,
        labels: pair.labels.clone(),
        config_hash: pair.config_hash.clone(),
    })
}

/// Eigenvalues, coefficients and the overlap decomposition for bare
/// matrices.
pub fn solve_matrices(
    h: &DMatrix<f64>,
    s: &DMatrix<f64>,
    threshold: f64,
) -> Result<(Vec<f64>, DMatrix<f64>, Orthogonalization)> {
    if h.shape() != s.shape() {
        return Err(Error::invalid("pair", "H and S differ in shape"));
    }
    check_finite(h)?;
    let orth = orthogonalize(s, threshold)?;
    let x = orth.transform();
    let mut ht = x.transpose() * h * &x;
    // remove rounding asymmetry before the symmetric solver
    let ht_t = ht.transpose();
    ht = (ht + ht_t) * 0.5;
    let (lambda, a) = sorted_eigen(&ht, false);
    let mut c = x * a;
    for mut col in c.column_iter_mut() {
        let lead = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            col.neg_mut();
        }
    }
    Ok((lambda.iter().copied().collect(), c, orth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let s = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = (&b + b.transpose()) * 0.5;
        (h, s)
    }

    #[test]
    fn identity_overlap() {
        let o = orthogonalize(&DMatrix::identity(4, 4), 1e-6).unwrap();
        assert_eq!(o.kept, 4);
        assert!(o.gamma.iter().all(|&g| (g - 1.0).abs() < 1e-15));
    }

    #[test]
    fn two_by_two_overlap() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let o = orthogonalize(&s, 1e-6).unwrap();
        assert_relative_eq!(o.gamma[0], 1.5, max_relative = 1e-14);
        assert_relative_eq!(o.gamma[1], 0.5, max_relative = 1e-14);
        let (l, _, _) = solve_matrices(&DMatrix::identity(2, 2), &s, 1e-6).unwrap();
        assert_relative_eq!(l[0], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(l[1], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn diagonal_hamiltonian() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let (l, c, _) = solve_matrices(&h, &DMatrix::identity(2, 2), 1e-6).unwrap();
        assert_eq!(l, vec![1.0, 2.0]);
        assert_relative_eq!(c[(1, 0)], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (_, s) = random_spd(&mut rng, 8);
            let o = orthogonalize(&s, 1e-6).unwrap();
            let back = &o.v * DMatrix::from_diagonal(&o.gamma) * o.v.transpose();
            assert!((back - &s).amax() <= 1e-12 * s.amax());
            assert!(o.gamma.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(matches!(
            orthogonalize(&DMatrix::zeros(3, 3), 1e-6),
            Err(Error::EmptyBasis)
        ));
        let mut h = DMatrix::identity(2, 2);
        h[(0, 1)] = f64::NAN;
        assert!(matches!(
            solve_matrices(&h, &DMatrix::identity(2, 2), 1e-6),
            Err(Error::NonFiniteMatrix { row: 0, col: 1 })
        ));
    }

    #[test]
    fn threshold_drops_near_null_directions() {
        // third function duplicates the first
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 1.0, 0.2, 1.0, 0.2, 1.0, 0.2, 1.0]);
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 1.0, 0.1, 2.0, 0.1, 1.0, 0.1, 1.0]);
        let (l, c, o) = solve_matrices(&h, &s, 1e-6).unwrap();
        assert_eq!(o.kept, 2);
        assert_eq!(l.len(), 2);
        assert_eq!(c.shape(), (3, 2));
    }

    #[test]
    fn spectrum_serialization_and_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (h, s) = random_spd(&mut rng, 5);
        let pair = MatrixPair {
            h,
            s,
            h_err: DMatrix::zeros(5, 5),
            s_err: DMatrix::zeros(5, 5),
            labels: (0..5).map(|i| i.to_string()).collect(),
            config_hash: "abc".into(),
        };
        let sp = solve(&pair, 1e-6).unwrap();
        assert_eq!(Spectrum::from_json(&sp.to_json().unwrap()).unwrap(), sp);
        assert!(sp.vector(4).is_ok());
        assert!(matches!(sp.vector(5), Err(Error::LevelOutOfRange { level: 5, available: 5 })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn defining_properties(seed in any::<u64>(), n in 1usize..24) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (h, s) = random_spd(&mut rng, n);
            let (l, c, _) = solve_matrices(&h, &s, 1e-10).unwrap();
            prop_assert!(l.windows(2).all(|w| w[0] <= w[1]));
            let ortho = c.transpose() * &s * &c;
            prop_assert!((ortho - DMatrix::identity(n, n)).amax() <= 1e-8);
            let hn = h.norm();
            for k in 0..n {
                let ck = c.column(k);
                let res = &h * ck - &s * ck * l[k];
                prop_assert!(res.norm() <= 1e-8 * hn);
                let lead = ck.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
                prop_assert!(lead > 0.0);
            }
        }

        #[test]
        fn permutation_invariance(seed in any::<u64>(), n in 2usize..16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (h, s) = random_spd(&mut rng, n);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let hp = DMatrix::from_fn(n, n, |i, j| h[(perm[i], perm[j])]);
            let sp = DMatrix::from_fn(n, n, |i, j| s[(perm[i], perm[j])]);
            let (l, _, _) = solve_matrices(&h, &s, 1e-10).unwrap();
            let (lp, _, _) = solve_matrices(&hp, &sp, 1e-10).unwrap();
            for (a, b) in l.iter().zip(&lp) {
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }

        #[test]
        fn raising_threshold_never_lowers_ground_level(seed in any::<u64>(), n in 2usize..16) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (h, s) = random_spd(&mut rng, n);
            let mut last = f64::NEG_INFINITY;
            for t in [1e-12, 1e-6, 1e-3, 1e-2, 1e-1, 0.5] {
                let (l, _, _) = solve_matrices(&h, &s, t).unwrap();
                prop_assert!(l[0] >= last - 1e-12 * l[0].abs().max(1.0));
                last = l[0];
            }
        }
    }
}
