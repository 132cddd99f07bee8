//! Flat-slice dense kernels for the coordinate networks.
//!
//! All matrices are row-major `f64` slices. The inner loops are written as
//! contiguous axpy updates so they autovectorize; the gemm skips zero
//! left-hand entries, which pays off on ReLU-sparse activation batches.

/// `c (+)= a * b` for `a: n x q`, `b: q x p`, `c: n x p`. With
/// `accumulate = false` the output is overwritten.
pub(crate) fn gemm(
    c: &mut [f64],
    accumulate: bool,
    a: &[f64],
    b: &[f64],
    n: usize,
    q: usize,
    p: usize,
) {
    debug_assert_eq!(a.len(), n * q);
    debug_assert_eq!(b.len(), q * p);
    debug_assert_eq!(c.len(), n * p);
    if !accumulate {
        c.fill(0.0);
    }
    for r in 0..n {
        let a_row = &a[r * q..(r + 1) * q];
        let c_row = &mut c[r * p..(r + 1) * p];
        for (k, &s) in a_row.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let b_row = &b[k * p..(k + 1) * p];
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += s * bv;
            }
        }
    }
}

/// Accumulates the input-major weight gradient of one affine layer:
/// `dwt[i][o] += sum_r x[r][i] * dy[r][o]`.
pub(crate) fn rank1_acc(
    dwt: &mut [f64],
    x: &[f64],
    dy: &[f64],
    n: usize,
    in_dim: usize,
    out_dim: usize,
) {
    debug_assert_eq!(dwt.len(), in_dim * out_dim);
    debug_assert_eq!(x.len(), n * in_dim);
    debug_assert_eq!(dy.len(), n * out_dim);
    for r in 0..n {
        let x_row = &x[r * in_dim..(r + 1) * in_dim];
        let dy_row = &dy[r * out_dim..(r + 1) * out_dim];
        for (i, &xv) in x_row.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let w_row = &mut dwt[i * out_dim..(i + 1) * out_dim];
            for (wv, &dv) in w_row.iter_mut().zip(dy_row) {
                *wv += xv * dv;
            }
        }
    }
}

/// `dst = src^T` for a row-major `rows x cols` source.
pub(crate) fn transpose(src: &[f64], rows: usize, cols: usize, dst: &mut [f64]) {
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), src.len());
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// Broadcast bias add: `y[r][o] += b[o]`.
pub(crate) fn add_bias(y: &mut [f64], b: &[f64], n: usize) {
    let out = b.len();
    debug_assert_eq!(y.len(), n * out);
    for r in 0..n {
        let row = &mut y[r * out..(r + 1) * out];
        for (yv, &bv) in row.iter_mut().zip(b) {
            *yv += bv;
        }
    }
}

/// Bias gradient: `db[o] += sum_r dy[r][o]`.
pub(crate) fn bias_grad(db: &mut [f64], dy: &[f64], n: usize) {
    let out = db.len();
    debug_assert_eq!(dy.len(), n * out);
    for r in 0..n {
        let row = &dy[r * out..(r + 1) * out];
        for (bv, &dv) in db.iter_mut().zip(row) {
            *bv += dv;
        }
    }
}

/// Elementwise rectifier: `out = max(z, 0)`.
pub(crate) fn relu(z: &[f64], out: &mut [f64]) {
    debug_assert_eq!(z.len(), out.len());
    for (o, &v) in out.iter_mut().zip(z) {
        *o = if v > 0.0 { v } else { 0.0 };
    }
}

/// Gates a gradient through the rectifier in place: `da[i] = 0` wherever
/// `z[i] <= 0`.
pub(crate) fn relu_backward(z: &[f64], da: &mut [f64]) {
    debug_assert_eq!(z.len(), da.len());
    for (d, &v) in da.iter_mut().zip(z) {
        if v <= 0.0 {
            *d = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_hand_product() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0; 4];
        gemm(&mut c, false, &a, &b, 2, 2, 2);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(&mut c, true, &a, &b, 2, 2, 2);
        assert_eq!(c, [38.0, 44.0, 86.0, 100.0]);
    }

    #[test]
    fn rank1_acc_matches_explicit_sum() {
        let x = [1.0, 2.0, 3.0, 4.0]; // 2 rows x 2 in
        let dy = [0.5, -1.0, 2.0, 0.25]; // 2 rows x 2 out
        let mut dwt = [0.0; 4];
        rank1_acc(&mut dwt, &x, &dy, 2, 2, 2);
        // dwt[i][o] = x[0][i] dy[0][o] + x[1][i] dy[1][o]
        assert_eq!(dwt, [6.5, -0.25, 9.0, -1.0]);
    }

    #[test]
    fn transpose_round_trip() {
        let src = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut t = [0.0; 6];
        let mut back = [0.0; 6];
        transpose(&src, 2, 3, &mut t);
        assert_eq!(t, [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        transpose(&t, 3, 2, &mut back);
        assert_eq!(back, src);
    }

    #[test]
    fn relu_and_gate() {
        let z = [-1.0, 0.0, 2.0];
        let mut a = [0.0; 3];
        relu(&z, &mut a);
        assert_eq!(a, [0.0, 0.0, 2.0]);
        let mut g = [5.0, 5.0, 5.0];
        relu_backward(&z, &mut g);
        assert_eq!(g, [0.0, 0.0, 5.0]);
    }

    #[test]
    fn bias_ops() {
        let mut y = [0.0, 0.0, 1.0, 1.0];
        add_bias(&mut y, &[0.5, -0.5], 2);
        assert_eq!(y, [0.5, -0.5, 1.5, 0.5]);
        let mut db = [0.0, 0.0];
        bias_grad(&mut db, &y, 2);
        assert_eq!(db, [2.0, 0.0]);
    }
}
