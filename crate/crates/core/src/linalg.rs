//! Small dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{mismatch, numerical, Result};

/// Dense complex matrix used for every channel, precoder and receiver.
pub type CMat = DMatrix<Complex64>;

/// Largest condition number accepted by the Hermitian solvers.
pub const CONDITION_LIMIT: f64 = 1e12;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v)),
    ))
}

/// Real parts of the diagonal.
pub fn diag_re(m: &CMat) -> Vec<f64> {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).collect()
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entrywise deviation of `Q^H Q` from the identity.
pub fn unitarity_error(q: &CMat) -> f64 {
    let g = q.adjoint() * q;
    max_abs(&(g - identity(q.ncols())))
}

/// Sum of squared magnitudes of the off-diagonal entries.
pub fn off_diagonal_mass(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                acc += m[(i, j)].norm_sqr();
            }
        }
    }
    acc
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues down to
/// `-1e-12` are treated as zero; anything more negative is rejected.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    if m.nrows() != m.ncols() {
        return Err(mismatch("square root of a non-square matrix"));
    }
    let (values, vectors) = hermitian_eig(m);
    let mut roots = Vec::with_capacity(values.len());
    for v in values {
        if v < -1e-12 {
            return Err(numerical(format!("matrix is not PSD (eigenvalue {v:e})")));
        }
        roots.push(v.max(0.0).sqrt());
    }
    Ok(&vectors * real_diag(&roots) * vectors.adjoint())
}

/// Solve `A X = B` for Hermitian positive definite `A` through a Cholesky
/// factorization, refusing systems whose estimated condition exceeds
/// [`CONDITION_LIMIT`].
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(mismatch(format!(
            "solve: {}x{} system with {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let chol = cholesky_checked(a)?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive definite matrix (used only where the
/// inverse itself is the requested quantity, e.g. an MSE matrix).
pub fn inverse_hpd(a: &CMat) -> Result<CMat> {
    let chol = cholesky_checked(a)?;
    Ok(hermitian_part(&chol.inverse()))
}

pub fn cholesky_checked(a: &CMat) -> Result<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = nalgebra::Cholesky::new(hermitian_part(a))
        .ok_or_else(|| numerical("matrix is not positive definite"))?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..l.nrows() {
        let d = l[(i, i)].re;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    // (max/min diag of L)^2 is a lower bound on the condition number.
    if !(lo > 0.0) || (hi / lo).powi(2) > CONDITION_LIMIT {
        return Err(numerical(format!(
            "ill-conditioned system (condition estimate {:e})",
            (hi / lo).powi(2)
        )));
    }
    Ok(chol)
}

/// Frobenius norm.
pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Serde adapters storing a complex matrix as nested rows of `[re, im]` pairs.
pub mod serde_cmat {
    use super::CMat;
    use num_complex::Complex64;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMat, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if nrows == 0 || ncols == 0 {
            return Err("matrix must have at least one entry".into());
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err("non-finite matrix entry".into());
        }
        Ok(CMat::from_fn(nrows, ncols, |i, j| {
            Complex64::new(rows[i][j][0], rows[i][j][1])
        }))
    }

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(to_rows).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMat>, D::Error> {
            Option::<Vec<Vec<[f64; 2]>>>::deserialize(d)?
                .map(|rows| from_rows(&rows).map_err(D::Error::custom))
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_matches_direct_product() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[c(4.0), Complex64::new(1.0, 1.0), Complex64::new(1.0, -1.0), c(3.0)],
        );
        let x = CMat::from_row_slice(2, 1, &[Complex64::new(0.5, -2.0), c(1.0)]);
        let b = &a * &x;
        let got = solve_hpd(&a, &b).unwrap();
        assert!(max_abs(&(got - x)) < 1e-12);
    }

    #[test]
    fn ill_conditioned_system_is_rejected() {
        let a = real_diag(&[1.0, 1e-14]);
        assert!(solve_hpd(&a, &identity(2)).is_err());
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0), c(1.0), c(1.0), c(2.0)]);
        let r = psd_sqrt(&a).unwrap();
        assert!(max_abs(&(&r * &r - a)) < 1e-12);
        assert!(psd_sqrt(&real_diag(&[1.0, -1e-13])).is_ok());
        assert!(psd_sqrt(&real_diag(&[1.0, -1e-6])).is_err());
    }
}
