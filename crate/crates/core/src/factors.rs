//! Unitary rotations with prescribed diagonals and triangular factorizations
//! with prescribed diagonals.
//!
//! All constructions are greedy sequences of two-coordinate rotations: each
//! step fixes one diagonal entry exactly and leaves the rest of the problem
//! in the same (diagonal) form, so `K - 1` rotations suffice.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, serde_cmat, CMat};

/// Unitary `s` together with the diagonal of `S diag(lambda) S^H` it
/// actually achieves and the largest deviation from the requested diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationResult {
    #[serde(with = "serde_cmat")]
    pub s: CMat,
    pub achieved_diag: Vec<f64>,
    pub residual: f64,
}

/// Upper triangular factorization `diag(sigma) = q r p^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularFactors {
    pub q: CMat,
    pub r: CMat,
    pub p: CMat,
}

const UNITARY_TOL: f64 = 1e-10;

fn is_power_of_two(k: usize) -> bool {
    k != 0 && k & (k - 1) == 0
}

/// Constant-modulus unitary: Sylvester-Hadamard for powers of two, the DFT
/// matrix otherwise. Every entry has magnitude `1/sqrt(k)`.
pub fn dft_or_hadamard(k: usize) -> CMat {
    assert!(k >= 1, "size must be positive");
    let scale = 1.0 / (k as f64).sqrt();
    if is_power_of_two(k) {
        CMat::from_fn(k, k, |i, j| {
            let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            c(sign * scale)
        })
    } else {
        CMat::from_fn(k, k, |i, j| {
            let phase = -2.0 * std::f64::consts::PI * ((i * j) % k) as f64 / k as f64;
            Complex64::from_polar(scale, phase)
        })
    }
}

/// Diagonal of `S diag(lambda) S^H`.
pub fn rotated_diagonal(s: &CMat, lambda: &[f64]) -> Vec<f64> {
    (0..s.nrows())
        .map(|i| {
            s.row(i)
                .iter()
                .zip(lambda)
                .map(|(z, l)| z.norm_sqr() * l)
                .sum()
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Pivot {
    /// Neighbours of the target in value order.
    Adjacent,
    /// Current extreme values.
    Extremes,
}

/// Greedy Schur-Horn construction. Returns a real orthogonal `s` (as a
/// complex matrix) with `diag(S diag(lambda) S^H) = target`.
fn schur_horn_core(lambda: &[f64], target: &[f64], pivot: Pivot) -> Result<CMat> {
    let k = lambda.len();
    let mut m = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_column_slice(lambda));
    let mut s = DMatrix::<f64>::identity(k, k);
    let mut remaining: Vec<usize> = (0..k).collect();
    // position in the working matrix -> index of the target it carries
    let mut assigned = vec![usize::MAX; k];

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| target[a].total_cmp(&target[b]));
    let scale = lambda.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));

    for (step, &t_idx) in order.iter().enumerate() {
        let t = target[t_idx];
        if step + 1 == k {
            assigned[remaining[0]] = t_idx;
            break;
        }
        if let Some(pos) = remaining
            .iter()
            .position(|&i| (m[(i, i)] - t).abs() <= 1e-15 * scale)
        {
            let i = remaining.remove(pos);
            assigned[i] = t_idx;
            continue;
        }
        let above = remaining.iter().copied().filter(|&i| m[(i, i)] > t);
        let below = remaining.iter().copied().filter(|&i| m[(i, i)] < t);
        let (p, q) = match pivot {
            Pivot::Adjacent => (
                above.min_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)])),
                below.max_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)])),
            ),
            Pivot::Extremes => (
                above.max_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)])),
                below.min_by(|&a, &b| m[(a, a)].total_cmp(&m[(b, b)])),
            ),
        };
        let (Some(p), Some(q)) = (p, q) else {
            return Err(Error::Infeasible(format!(
                "no eigenvalue pair brackets target {t}"
            )));
        };
        let (a, b) = (m[(p, p)], m[(q, q)]);
        let cs2 = ((t - b) / (a - b)).clamp(0.0, 1.0);
        let (cs, sn) = (cs2.sqrt(), (1.0 - cs2).sqrt());
        rotate_rows(&mut s, p, q, cs, sn);
        rotate_rows(&mut m, p, q, cs, sn);
        rotate_cols(&mut m, p, q, cs, sn);
        m[(p, p)] = t;
        m[(q, q)] = a + b - t;
        remaining.retain(|&i| i != p);
        assigned[p] = t_idx;
    }

    // Reorder rows so that row j carries target j.
    let mut perm = vec![0; k];
    for (pos, &t_idx) in assigned.iter().enumerate() {
        perm[t_idx] = pos;
    }
    Ok(CMat::from_fn(k, k, |i, j| c(s[(perm[i], j)])))
}

/// rows (p, q) <- [[cs, sn], [-sn, cs]] * rows (p, q)
fn rotate_rows(m: &mut DMatrix<f64>, p: usize, q: usize, cs: f64, sn: f64) {
    for j in 0..m.ncols() {
        let (x, y) = (m[(p, j)], m[(q, j)]);
        m[(p, j)] = cs * x + sn * y;
        m[(q, j)] = -sn * x + cs * y;
    }
}

fn rotate_cols(m: &mut DMatrix<f64>, p: usize, q: usize, cs: f64, sn: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = cs * x + sn * y;
        m[(i, q)] = -sn * x + cs * y;
    }
}

fn finish(s: CMat, lambda: &[f64], target: &[f64]) -> Result<RotationResult> {
    if linalg::unitarity_error(&s) > UNITARY_TOL {
        return Err(Error::Numerical("rotation lost unitarity".into()));
    }
    let achieved_diag = rotated_diagonal(&s, lambda);
    let residual = achieved_diag
        .iter()
        .zip(target)
        .map(|(a, t)| (a - t).abs())
        .fold(0.0, f64::max);
    Ok(RotationResult {
        s,
        achieved_diag,
        residual,
    })
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{what} must be a non-empty finite vector")));
    }
    Ok(())
}

/// Rotation making every diagonal entry of `S diag(lambda) S^H` equal to the
/// mean of `lambda`, built by merging the current largest and smallest entries.
pub fn mean_equalizing_rotation(lambda: &[f64]) -> Result<RotationResult> {
    check_finite(lambda, "eigenvalues")?;
    let mean = lambda.iter().sum::<f64>() / lambda.len() as f64;
    let target = vec![mean; lambda.len()];
    let s = schur_horn_core(lambda, &target, Pivot::Extremes)?;
    finish(s, lambda, &target)
}

/// True when `target` is majorized by `lambda` (ascending partial sums of
/// `lambda` never exceed those of `target`), up to `tol`.
pub fn is_majorized(lambda: &[f64], target: &[f64], tol: f64) -> bool {
    let mut l = lambda.to_vec();
    let mut t = target.to_vec();
    l.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    let (mut sl, mut st) = (0.0, 0.0);
    l.iter().zip(&t).all(|(a, b)| {
        sl += a;
        st += b;
        sl <= st + tol
    })
}

/// Rotation with `diag(S diag(lambda) S^H) = target` (Schur-Horn).
pub fn schur_horn_rotation(lambda: &[f64], target: &[f64]) -> Result<RotationResult> {
    check_finite(lambda, "eigenvalues")?;
    check_finite(target, "target diagonal")?;
    if lambda.len() != target.len() {
        return Err(invalid("eigenvalue and target lengths differ"));
    }
    let scale = lambda.iter().chain(target).fold(1.0_f64, |a, v| a.max(v.abs()));
    let trace_gap = lambda.iter().sum::<f64>() - target.iter().sum::<f64>();
    if trace_gap.abs() > 1e-9 * scale {
        return Err(invalid(format!("trace mismatch {trace_gap:e}")));
    }
    if !is_majorized(lambda, target, 1e-12 * scale) {
        return Err(Error::Infeasible(
            "target diagonal is not majorized by the eigenvalues".into(),
        ));
    }
    let s = schur_horn_core(lambda, target, Pivot::Adjacent)?;
    finish(s, lambda, target)
}

/// True when `target` is multiplicatively majorized by `sigma`: descending
/// partial products of `target` never exceed those of `sigma`, with equal
/// total products (relative tolerance `tol`).
pub fn is_mult_majorized(sigma: &[f64], target: &[f64], tol: f64) -> bool {
    let mut s: Vec<f64> = sigma.iter().map(|x| x.ln()).collect();
    let mut t: Vec<f64> = target.iter().map(|x| x.ln()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    t.sort_by(|a, b| b.total_cmp(a));
    let (mut ss, mut st) = (0.0, 0.0);
    let prefix_ok = s.iter().zip(&t).all(|(a, b)| {
        ss += a;
        st += b;
        st <= ss + tol
    });
    prefix_ok && (ss - st).abs() <= tol
}

/// Generalized triangular decomposition of `diag(sigma)`: `q r p^H` with `r`
/// upper triangular and `diag(r) = target` in the given order.
pub fn gtd(sigma: &[f64], target: &[f64]) -> Result<TriangularFactors> {
    check_finite(sigma, "singular values")?;
    check_finite(target, "target diagonal")?;
    if sigma.len() != target.len() {
        return Err(invalid("singular value and target lengths differ"));
    }
    if sigma.iter().chain(target).any(|&x| x <= 0.0) {
        return Err(invalid("singular values and targets must be positive"));
    }
    if !is_mult_majorized(sigma, target, 1e-9) {
        return Err(Error::Infeasible(
            "target diagonal is not multiplicatively majorized by the singular values".into(),
        ));
    }

    let k = sigma.len();
    let mut r = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_column_slice(sigma));
    let mut q = DMatrix::<f64>::identity(k, k);
    let mut p = DMatrix::<f64>::identity(k, k);

    for pos in 0..k.saturating_sub(1) {
        let t = target[pos];
        let free = pos..k;
        if let Some(j) = free
            .clone()
            .find(|&j| (r[(j, j)] - t).abs() <= 1e-15 * t.max(r[(j, j)]))
        {
            swap_index(&mut r, &mut q, &mut p, pos, j);
            continue;
        }
        let hi = free
            .clone()
            .filter(|&j| r[(j, j)] > t)
            .min_by(|&a, &b| r[(a, a)].total_cmp(&r[(b, b)]));
        let lo = free
            .filter(|&j| r[(j, j)] < t)
            .max_by(|&a, &b| r[(a, a)].total_cmp(&r[(b, b)]));
        let (Some(hi), Some(lo)) = (hi, lo) else {
            return Err(Error::Infeasible(format!("no singular value pair brackets {t}")));
        };
        swap_index(&mut r, &mut q, &mut p, pos, hi);
        let lo = if lo == pos { hi } else { lo };
        swap_index(&mut r, &mut q, &mut p, pos + 1, lo);

        let (d1, d2) = (r[(pos, pos)], r[(pos + 1, pos + 1)]);
        let cs2 = ((t * t - d2 * d2) / (d1 * d1 - d2 * d2)).clamp(0.0, 1.0);
        let (cs, sn) = (cs2.sqrt(), (1.0 - cs2).sqrt());
        // right rotation G1 = [[cs, -sn], [sn, cs]] on columns (pos, pos+1)
        for i in 0..k {
            for m in [&mut r, &mut p] {
                let (x, y) = (m[(i, pos)], m[(i, pos + 1)]);
                m[(i, pos)] = cs * x + sn * y;
                m[(i, pos + 1)] = -sn * x + cs * y;
            }
        }
        // left rotation G2^T = [[cs d1, sn d2], [-sn d2, cs d1]] / t on rows
        let (a11, a12, a21, a22) = (cs * d1 / t, sn * d2 / t, -sn * d2 / t, cs * d1 / t);
        for j in 0..k {
            let (x, y) = (r[(pos, j)], r[(pos + 1, j)]);
            r[(pos, j)] = a11 * x + a12 * y;
            r[(pos + 1, j)] = a21 * x + a22 * y;
        }
        // Q <- Q G2, G2 = transpose of the row operator
        for i in 0..k {
            let (x, y) = (q[(i, pos)], q[(i, pos + 1)]);
            q[(i, pos)] = a11 * x + a12 * y;
            q[(i, pos + 1)] = a21 * x + a22 * y;
        }
        r[(pos, pos)] = t;
        r[(pos + 1, pos)] = 0.0;
        r[(pos + 1, pos + 1)] = d1 * d2 / t;
    }

    let to_c = |m: &DMatrix<f64>| CMat::from_fn(k, k, |i, j| c(m[(i, j)]));
    let factors = TriangularFactors {
        q: to_c(&q),
        r: to_c(&r),
        p: to_c(&p),
    };
    if linalg::unitarity_error(&factors.q) > UNITARY_TOL
        || linalg::unitarity_error(&factors.p) > UNITARY_TOL
    {
        return Err(Error::Numerical("triangular factorization lost unitarity".into()));
    }
    Ok(factors)
}

/// Symmetric swap of indices `a` and `b` of the trailing diagonal block.
fn swap_index(
    r: &mut DMatrix<f64>,
    q: &mut DMatrix<f64>,
    p: &mut DMatrix<f64>,
    a: usize,
    b: usize,
) {
    if a == b {
        return;
    }
    r.swap_rows(a, b);
    r.swap_columns(a, b);
    q.swap_columns(a, b);
    p.swap_columns(a, b);
}

/// Geometric mean decomposition: [`gtd`] with every target equal to the
/// geometric mean of `sigma`.
pub fn gmd(sigma: &[f64]) -> Result<TriangularFactors> {
    check_finite(sigma, "singular values")?;
    if sigma.iter().any(|&x| x <= 0.0) {
        return Err(invalid("singular values must be positive"));
    }
    let geo = (sigma.iter().map(|x| x.ln()).sum::<f64>() / sigma.len() as f64).exp();
    gtd(sigma, &vec![geo; sigma.len()])
}
