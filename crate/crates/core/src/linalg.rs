//! Small dense linear algebra on row-major slices.

use crate::scalar::Real;

#[inline]
fn det2<T: Real>(a: T, b: T, c: T, d: T) -> T {
    a * d - b * c
}

/// Determinant of an `n × n` matrix (cofactor expansion for n ≤ 4, LU beyond).
pub fn det<T: Real>(n: usize, a: &[T]) -> T {
    match n {
        0 => T::one(),
        1 => a[0],
        2 => det2(a[0], a[1], a[2], a[3]),
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        4 => {
            let mut s = T::zero();
            let mut m = [T::zero(); 9];
            for j in 0..4 {
                minor(4, a, 0, j, &mut m);
                let c = a[j] * det(3, &m);
                s = if j % 2 == 0 { s + c } else { s - c };
            }
            s
        }
        _ => lu_det(n, a),
    }
}

fn minor<T: Real>(n: usize, a: &[T], r: usize, c: usize, out: &mut [T]) {
    let mut k = 0;
    for i in 0..n {
        if i == r {
            continue;
        }
        for j in 0..n {
            if j == c {
                continue;
            }
            out[k] = a[i * n + j];
            k += 1;
        }
    }
}

fn lu_det<T: Real>(n: usize, a: &[T]) -> T {
    let mut m = a.to_vec();
    let mut d = T::one();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i * n + k].abs().partial_cmp(&m[j * n + k].abs()).unwrap()).unwrap();
        if m[p * n + k] == T::zero() {
            return T::zero();
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            d = -d;
        }
        d *= m[k * n + k];
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            for j in k..n {
                let v = m[k * n + j];
                m[i * n + j] -= f * v;
            }
        }
    }
    d
}

/// Inverse via the adjugate for n ≤ 4. Returns the determinant; `out` is untouched if singular.
pub fn inverse<T: Real>(n: usize, a: &[T], out: &mut [T]) -> T {
    assert!(n <= 4, "cofactor inverse only for n <= 4");
    let d = det(n, a);
    if d == T::zero() {
        return d;
    }
    if n == 1 {
        out[0] = T::one() / a[0];
        return d;
    }
    let mut m = [T::zero(); 9];
    for i in 0..n {
        for j in 0..n {
            minor(n, a, i, j, &mut m);
            let c = det(n - 1, &m[..(n - 1) * (n - 1)]);
            let c = if (i + j) % 2 == 0 { c } else { -c };
            out[j * n + i] = c / d;
        }
    }
    d
}

/// Leading principal minors `Δ_1..Δ_n`.
pub fn leading_minors<T: Real>(n: usize, a: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(n);
    let mut sub = vec![T::zero(); n * n];
    for k in 1..=n {
        for i in 0..k {
            for j in 0..k {
                sub[i * k + j] = a[i * n + j];
            }
        }
        out.push(det(k, &sub[..k * k]));
    }
    out
}

/// Gaussian elimination with partial pivoting; `None` if singular.
pub fn solve<T: Real>(n: usize, a: &[T], b: &[T]) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i * n + k].abs().partial_cmp(&m[j * n + k].abs()).unwrap())?;
        if m[p * n + k] == T::zero() {
            return None;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            for j in k..n {
                let v = m[k * n + j];
                m[i * n + j] -= f * v;
            }
            let v = x[k];
            x[i] -= f * v;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[k * n + j] * x[j];
        }
        x[k] = s / m[k * n + k];
    }
    Some(x)
}

/// `C = A B` with `A: m×k`, `B: k×n`.
pub fn matmul<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T], c: &mut [T]) {
    for i in 0..m {
        for j in 0..n {
            let mut s = T::zero();
            for l in 0..k {
                s += a[i * k + l] * b[l * n + j];
            }
            c[i * n + j] = s;
        }
    }
}

/// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix by cyclic Jacobi.
pub fn sym_eigen<T: Real>(n: usize, a: &[T]) -> (Vec<T>, Vec<T>) {
    let mut m = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let tiny = T::epsilon() * T::epsilon();
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..n {
            diag += m[i * n + i] * m[i * n + i];
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off <= tiny * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (newc, &oldc) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + newc] = v[k * n + oldc];
        }
    }
    (vals, vecs)
}

/// Singular values (descending) of an `m × n` matrix by one-sided Jacobi.
pub fn singular_values<T: Real>(m: usize, n: usize, a: &[T]) -> Vec<T> {
    // work on columns of A
    let mut u = a.to_vec();
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let up = u[i * n + p];
                    let uq = u[i * n + q];
                    alpha += up * up;
                    beta += uq * uq;
                    gamma += up * uq;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let t = if zeta == T::zero() { T::one() } else { t };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let up = u[i * n + p];
                    let uq = u[i * n + q];
                    u[i * n + p] = c * up - s * uq;
                    u[i * n + q] = s * up + c * uq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = (0..n).map(|j| (0..m).map(|i| u[i * n + j] * u[i * n + j]).sum::<T>().sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Frobenius norm.
pub fn frobenius<T: Real>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_4x4() {
        let a: [f64; 16] = [4.0, 1.0, 0.5, 0.0, 1.0, 3.0, 0.2, 0.1, 0.5, 0.2, 2.0, 0.3, 0.0, 0.1, 0.3, 1.5];
        let mut inv = [0.0f64; 16];
        let d = inverse(4, &a, &mut inv);
        assert!((d - lu_det(4, &a)).abs() < 1e-12);
        let mut p = [0.0f64; 16];
        matmul(4, 4, 4, &a, &inv, &mut p);
        for i in 0..4 {
            for j in 0..4 {
                let e: f64 = if i == j { 1.0 } else { 0.0 };
                assert!((p[i * 4 + j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eigen_of_known_matrix() {
        let (vals, vecs) = sym_eigen(2, &[2.0f64, 1.0, 1.0, 2.0]);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        assert!((vecs[0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn svd_tall() {
        // columns (1,0,0), (1,1,0): Gram [[1,1],[1,2]] -> eigen (3±√5)/2
        let a = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0];
        let s = singular_values(3, 2, &a);
        assert!((s[0] * s[0] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-13);
        assert!((s[1] * s[1] - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn solve_and_minors() {
        let a = [2.0f64, 1.0, 1.0, 3.0];
        let x = solve(2, &a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert_eq!(leading_minors(2, &a), vec![2.0, 5.0]);
        assert!(solve(2, &[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]).is_none());
    }
}
