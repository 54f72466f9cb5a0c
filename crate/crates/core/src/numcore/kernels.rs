//! Dense inner loops. Reductions use a fixed evaluation order so results are
//! reproducible run to run.

/// `c[m×n] += a[m×k] · b[k×n]`
pub(crate) fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// `c[m×k] += a[m×n] · b[k×n]ᵀ`
pub(crate) fn gemm_acc_bt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, n: usize, k: usize) {
    // transpose b once so the hot loop is a contiguous axpy
    let mut bt = alloc::vec![0.0; n * k];
    for p in 0..k {
        for j in 0..n {
            bt[j * k + p] = b[p * n + j];
        }
    }
    gemm_acc(a, &bt, c, m, n, k);
}

/// `c[k×n] += a[m×k]ᵀ · b[m×n]`
pub(crate) fn gemm_acc_at(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let c_row = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn gemm_variants_agree_with_naive() {
        let (m, k, n) = (3, 4, 2);
        let a: alloc::vec::Vec<f64> = (0..m * k).map(|v| v as f64 * 0.5 - 1.0).collect();
        let b: alloc::vec::Vec<f64> = (0..k * n).map(|v| (v as f64).sin()).collect();
        let mut c = vec![0.0; m * n];
        gemm_acc(&a, &b, &mut c, m, k, n);
        for i in 0..m {
            for j in 0..n {
                let s: f64 = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
                assert!((c[i * n + j] - s).abs() < 1e-12);
            }
        }
        // a·b·bᵀ via bt kernel
        let mut abt = vec![0.0; m * k];
        gemm_acc_bt(&c, &b, &mut abt, m, n, k);
        for i in 0..m {
            for p in 0..k {
                let s: f64 = (0..n).map(|j| c[i * n + j] * b[p * n + j]).sum();
                assert!((abt[i * k + p] - s).abs() < 1e-12);
            }
        }
        let mut atc = vec![0.0; k * n];
        gemm_acc_at(&a, &c, &mut atc, m, k, n);
        for p in 0..k {
            for j in 0..n {
                let s: f64 = (0..m).map(|i| a[i * k + p] * c[i * n + j]).sum();
                assert!((atc[p * n + j] - s).abs() < 1e-12);
            }
        }
    }
}
