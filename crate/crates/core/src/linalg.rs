//! Thin wrappers over `matrixmultiply::dgemm` for row-major slices.

/// `c = a · b + beta · c` where `a` is `m×k`, `b` is `k×n`.
pub(crate) fn gemm_nn(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: slice lengths checked above; strides describe row-major layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = aᵀ · b + beta · c` where `a` is `k×m`, `b` is `k×n`.
pub(crate) fn gemm_tn(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: as above; `a` is read column-wise through swapped strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c = a · bᵀ + beta · c` where `a` is `m×k`, `b` is `n×k`.
pub(crate) fn gemm_nt(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    b: &[f64],
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: as above; `b` is read column-wise through swapped strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}


#[cfg(test)]
mod shape_tests {
    use super::*;
    use alloc::vec::Vec;

    fn naive(
        m: usize,
        k: usize,
        n: usize,
        a: impl Fn(usize, usize) -> f64,
        b: impl Fn(usize, usize) -> f64,
    ) -> Vec<f64> {
        let mut c = alloc::vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| a(i, p) * b(p, j)).sum();
            }
        }
        c
    }

    #[test]
    fn rectangular_shapes_match_naive() {
        for m in 1..5 {
            for k in 1..5 {
                for n in 1..5 {
                    let a: Vec<f64> = (0..m * k).map(|v| (v as f64 * 0.37).sin()).collect();
                    let b: Vec<f64> = (0..k * n).map(|v| (v as f64 * 0.91).cos()).collect();
                    let close =
                        |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (p - q).abs() < 1e-12);

                    let mut c = alloc::vec![0.0; m * n];
                    gemm_nn(m, k, n, &a, &b, 0.0, &mut c);
                    assert!(
                        close(
                            &c,
                            &naive(m, k, n, |i, p| a[i * k + p], |p, j| b[p * n + j])
                        ),
                        "nn {m} {k} {n}"
                    );

                    // a stored k×m, b stored k×n
                    let mut c = alloc::vec![0.0; m * n];
                    gemm_tn(m, k, n, &a, &b, 0.0, &mut c);
                    assert!(
                        close(
                            &c,
                            &naive(m, k, n, |i, p| a[p * m + i], |p, j| b[p * n + j])
                        ),
                        "tn {m} {k} {n}"
                    );

                    // a stored m×k, b stored n×k
                    let mut c = alloc::vec![0.0; m * n];
                    gemm_nt(m, k, n, &a, &b, 0.0, &mut c);
                    assert!(
                        close(
                            &c,
                            &naive(m, k, n, |i, p| a[i * k + p], |p, j| b[j * k + p])
                        ),
                        "nt {m} {k} {n}"
                    );
                }
            }
        }
    }
}
