//! Small dense vector/matrix kernels on slices.
//!
//! Matrices are stored column-major unless a function says otherwise.

use crate::Scalar;

#[inline]
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = T::zero();
    for (a, b) in x.iter().zip(y) {
        acc = acc + *a * *b;
    }
    acc
}

#[inline]
pub fn norm_sq<T: Scalar>(x: &[T]) -> T {
    dot(x, x)
}

#[inline]
pub fn norm<T: Scalar>(x: &[T]) -> T {
    norm_sq(x).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for v in x {
        *v = *v * alpha;
    }
}

/// Euclidean distance `||x - y||`.
pub fn distance<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = T::zero();
    for (a, b) in x.iter().zip(y) {
        let d = *a - *b;
        acc = acc + d * d;
    }
    acc.sqrt()
}

pub fn all_finite<T: Scalar>(x: &[T]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// `C = Aᵀ B` for column-major `A` (rows × ca) and `B` (rows × cb); `C` is ca × cb.
pub fn at_b<T: Scalar>(a: &[T], b: &[T], rows: usize, ca: usize, cb: usize) -> Vec<T> {
    let mut c = vec![T::zero(); ca * cb];
    for j in 0..cb {
        let bj = &b[j * rows..(j + 1) * rows];
        for i in 0..ca {
            c[j * ca + i] = dot(&a[i * rows..(i + 1) * rows], bj);
        }
    }
    c
}

/// `C = A B` for column-major `A` (rows × inner) and `B` (inner × cols).
pub fn mat_mul<T: Scalar>(a: &[T], b: &[T], rows: usize, inner: usize, cols: usize) -> Vec<T> {
    let mut c = vec![T::zero(); rows * cols];
    for j in 0..cols {
        let cj = &mut c[j * rows..(j + 1) * rows];
        for k in 0..inner {
            let bkj = b[j * inner + k];
            if bkj != T::zero() {
                axpy(bkj, &a[k * rows..(k + 1) * rows], cj);
            }
        }
    }
    c
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ` of a column-major
/// `rows × cols` matrix with `rows >= cols`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Vec<T>,
    pub singular_values: Vec<T>,
    pub v: Vec<T>,
    pub rows: usize,
    pub cols: usize,
}

/// One-sided Jacobi SVD. Accurate to working precision for the small
/// matrices used here (Procrustes alignment, spectral norms).
pub fn svd_jacobi<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Svd<T> {
    assert!(rows >= cols, "svd_jacobi expects rows >= cols");
    assert_eq!(a.len(), rows * cols);
    let mut w = a.to_vec();
    let mut v = vec![T::zero(); cols * cols];
    for j in 0..cols {
        v[j * cols + j] = T::one();
    }
    let eps = T::epsilon();
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let cp = &w[p * rows..(p + 1) * rows];
                    let cq = &w[q * rows..(q + 1) * rows];
                    (norm_sq(cp), norm_sq(cq), dot(cp, cq))
                };
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut w, rows, p, q, c, s);
                rotate_columns(&mut v, cols, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let mut singular_values = Vec::with_capacity(cols);
    let mut u = w;
    for j in 0..cols {
        let col = &mut u[j * rows..(j + 1) * rows];
        let s = norm(col);
        singular_values.push(s);
        if s > T::zero() {
            scale(T::one() / s, col);
        }
    }
    complete_orthonormal(&mut u, rows, cols, &singular_values);
    Svd {
        u,
        singular_values,
        v,
        rows,
        cols,
    }
}

fn rotate_columns<T: Scalar>(m: &mut [T], rows: usize, p: usize, q: usize, c: T, s: T) {
    for k in 0..rows {
        let xp = m[p * rows + k];
        let xq = m[q * rows + k];
        m[p * rows + k] = c * xp - s * xq;
        m[q * rows + k] = s * xp + c * xq;
    }
}

/// Replaces columns with a zero singular value by unit vectors orthogonal to
/// the remaining columns (Gram-Schmidt against the standard basis).
fn complete_orthonormal<T: Scalar>(u: &mut [T], rows: usize, cols: usize, sv: &[T]) {
    let tiny = T::epsilon() * sv.iter().fold(T::zero(), |m, &s| m.max(s));
    let mut basis = 0usize;
    for j in 0..cols {
        if sv[j] > tiny && sv[j] > T::zero() {
            continue;
        }
        while basis < rows {
            let mut cand = vec![T::zero(); rows];
            cand[basis] = T::one();
            basis += 1;
            for _ in 0..2 {
                for k in 0..cols {
                    if k == j || (k > j && !(sv[k] > tiny && sv[k] > T::zero())) {
                        continue;
                    }
                    let col = &u[k * rows..(k + 1) * rows];
                    let proj = dot(col, &cand);
                    axpy(-proj, col, &mut cand);
                }
            }
            let nrm = norm(&cand);
            if nrm > T::lit(1e-6) {
                scale(T::one() / nrm, &mut cand);
                u[j * rows..(j + 1) * rows].copy_from_slice(&cand);
                break;
            }
        }
    }
}

/// Largest singular value of a column-major `rows × cols` matrix.
pub fn spectral_norm<T: Scalar>(a: &[T], rows: usize, cols: usize) -> T {
    let s = if rows >= cols {
        svd_jacobi(a, rows, cols)
    } else {
        svd_jacobi(&transpose(a, rows, cols), cols, rows)
    };
    s.singular_values
        .into_iter()
        .fold(T::zero(), |m, v| m.max(v))
}

pub fn transpose<T: Scalar>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            t[i * cols + j] = a[j * rows + i];
        }
    }
    t
}

/// Orthogonal `R` (r × r, column-major) minimizing `||B - A R||_F`, where
/// `A` and `B` are column-major `n × r`.
pub fn procrustes_rotation<T: Scalar>(a: &[T], b: &[T], n: usize, r: usize) -> Vec<T> {
    // Aᵀ B = W Σ Vᵀ  =>  R = W Vᵀ
    let m = at_b(a, b, n, r, r);
    let svd = svd_jacobi(&m, r, r);
    let mut rot = vec![T::zero(); r * r];
    for j in 0..r {
        for i in 0..r {
            let mut acc = T::zero();
            for k in 0..r {
                acc = acc + svd.u[k * r + i] * svd.v[k * r + j];
            }
            rot[j * r + i] = acc;
        }
    }
    rot
}
