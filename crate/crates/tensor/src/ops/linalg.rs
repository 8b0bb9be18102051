use std::sync::Arc;

use crate::error::{shape_err, Result};
use crate::par;
use crate::real::Real;
use crate::tensor::Tensor;

/// `c (+)= op(a) * op(b)` with `op(a)` of size `m x k` and `op(b)` of size
/// `k x n`, all row-major. `trans_*` means the stored matrix is the transpose.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(m: usize, k: usize, n: usize, a: &[T], trans_a: bool, b: &[T], trans_b: bool, c: &mut [T], accumulate: bool) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { T::one() } else { T::zero() };
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every index the strides can reach, and
    // `c` is a distinct mutable borrow.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
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

impl<T: Real> Tensor<T> {
    /// `[n, k] x [k, m] -> [n, m]`.
    pub fn matmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        let (a, b) = (self.shape(), other.shape());
        if a.len() != 2 || b.len() != 2 || a[1] != b[0] {
            return shape_err("matmul", a, b);
        }
        let (m, k, n) = (a[0], a[1], b[1]);
        let mut out = vec![T::zero(); m * n];
        gemm(m, k, n, self.data(), false, other.data(), false, &mut out, false);
        let (ad, bd) = (self.data_arc(), other.data_arc());
        Ok(Tensor::from_op(
            "matmul",
            vec![m, n],
            Arc::new(out),
            vec![self.clone(), other.clone()],
            move |g, need| {
                let ga = need[0].then(|| {
                    let mut ga = vec![T::zero(); m * k];
                    gemm(m, n, k, g, false, &bd, true, &mut ga, false);
                    ga
                });
                let gb = need[1].then(|| {
                    let mut gb = vec![T::zero(); k * n];
                    gemm(k, m, n, &ad, true, g, false, &mut gb, false);
                    gb
                });
                vec![ga, gb]
            },
        ))
    }

    /// Affine map on rows: `x [n, din] * w [din, dout] + b [dout]`.
    pub fn linear(&self, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let (xs, ws, bs) = (self.shape(), w.shape(), b.shape());
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
            return shape_err("linear", xs, ws);
        }
        if bs != [ws[1]] {
            return shape_err("linear(bias)", ws, bs);
        }
        let (n, din, dout) = (xs[0], xs[1], ws[1]);
        let mut out = Vec::with_capacity(n * dout);
        for _ in 0..n {
            out.extend_from_slice(b.data());
        }
        gemm(n, din, dout, self.data(), false, w.data(), false, &mut out, true);
        let (xd, wd) = (self.data_arc(), w.data_arc());
        Ok(Tensor::from_op(
            "linear",
            vec![n, dout],
            Arc::new(out),
            vec![self.clone(), w.clone(), b.clone()],
            move |g, need| {
                let gx = need[0].then(|| {
                    let mut gx = vec![T::zero(); n * din];
                    gemm(n, dout, din, g, false, &wd, true, &mut gx, false);
                    gx
                });
                let gw = need[1].then(|| {
                    let mut gw = vec![T::zero(); din * dout];
                    gemm(din, n, dout, &xd, true, g, false, &mut gw, false);
                    gw
                });
                let gb = need[2].then(|| {
                    let mut gb = vec![T::zero(); dout];
                    for row in g.chunks(dout) {
                        gb.iter_mut().zip(row).for_each(|(a, &b)| *a = *a + b);
                    }
                    gb
                });
                vec![gx, gw, gb]
            },
        ))
    }

    /// Batched matmul: `[b, n, k] x [b, k, m]`, or `[b, n, k] x [b, m, k]^T`
    /// when `trans_b` is set.
    pub fn bmm(&self, other: &Tensor<T>, trans_b: bool) -> Result<Tensor<T>> {
        let (a, b) = (self.shape(), other.shape());
        let ok = a.len() == 3 && b.len() == 3 && a[0] == b[0] && if trans_b { a[2] == b[2] } else { a[2] == b[1] };
        if !ok {
            return shape_err("bmm", a, b);
        }
        let batch = a[0];
        let (n, k) = (a[1], a[2]);
        let m = if trans_b { b[1] } else { b[2] };
        let mut out = vec![T::zero(); batch * n * m];
        {
            let (ad, bd) = (self.data(), other.data());
            par::for_each_chunk(&mut out, n * m, |i, c| {
                gemm(n, k, m, &ad[i * n * k..], false, &bd[i * k * m..], trans_b, c, false);
            });
        }
        let (ad, bd) = (self.data_arc(), other.data_arc());
        Ok(Tensor::from_op(
            "bmm",
            vec![batch, n, m],
            Arc::new(out),
            vec![self.clone(), other.clone()],
            move |g, need| {
                let ga = need[0].then(|| {
                    let mut ga = vec![T::zero(); batch * n * k];
                    // ga = g * op(b)^T
                    par::for_each_chunk(&mut ga, n * k, |i, c| {
                        gemm(n, m, k, &g[i * n * m..], false, &bd[i * k * m..], !trans_b, c, false);
                    });
                    ga
                });
                let gb = need[1].then(|| {
                    let mut gb = vec![T::zero(); batch * k * m];
                    par::for_each_chunk(&mut gb, k * m, |i, c| {
                        if trans_b {
                            // gb [m, k] = g^T a
                            gemm(m, n, k, &g[i * n * m..], true, &ad[i * n * k..], false, c, false);
                        } else {
                            // gb [k, m] = a^T g
                            gemm(k, n, m, &ad[i * n * k..], true, &g[i * n * m..], false, c, false);
                        }
                    });
                    gb
                });
                vec![ga, gb]
            },
        ))
    }
}
