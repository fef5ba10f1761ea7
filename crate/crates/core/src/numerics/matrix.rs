/// Row-major `c = op(a)·op(b) + beta·c` where `op(a)` is `m×k` and `op(b)` is
/// `k×n`. With `a_t` set, `a` is stored as `k×m`; likewise `b_t` means `b` is
/// stored as `n×k`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "gemm: lhs shape");
    assert_eq!(b.len(), k * n, "gemm: rhs shape");
    assert_eq!(c.len(), m * n, "gemm: output shape");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the kernel touches by the
    // slice lengths, and `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> alloc::vec::Vec<f64> {
        let mut c = alloc::vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    fn transpose(r: usize, c: usize, x: &[f64]) -> alloc::vec::Vec<f64> {
        let mut t = alloc::vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = x[i * c + j];
            }
        }
        t
    }

    #[test]
    fn matches_naive_with_transposes() {
        let (m, k, n) = (3, 5, 4);
        let a: alloc::vec::Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: alloc::vec::Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        let want = naive(m, k, n, &a, &b);
        for (at, bt) in [(false, false), (true, false), (false, true), (true, true)] {
            let aa = if at { transpose(m, k, &a) } else { a.clone() };
            let bb = if bt { transpose(k, n, &b) } else { b.clone() };
            let mut c = alloc::vec![0.0; m * n];
            gemm(m, k, n, &aa, at, &bb, bt, 0.0, &mut c);
            for (x, y) in c.iter().zip(&want) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
