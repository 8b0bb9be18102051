use std::sync::Arc;

use crate::error::{config_err, Result};
use crate::real::Real;
use crate::tensor::Tensor;

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
// 1 / sqrt(2 pi)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl<T: Real> Tensor<T> {
    pub fn relu(&self) -> Tensor<T> {
        let out: Vec<T> = self.data().iter().map(|&v| v.max(T::zero())).collect();
        let xd = self.data_arc();
        Tensor::from_op("relu", self.shape().to_vec(), Arc::new(out), vec![self.clone()], move |g, _| {
            vec![Some(
                g.iter()
                    .zip(xd.iter())
                    .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                    .collect(),
            )]
        })
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&self) -> Tensor<T> {
        let half = T::of(0.5);
        let k = T::of(INV_SQRT_2);
        let out: Vec<T> = self.data().iter().map(|&x| half * x * (T::one() + (x * k).erf())).collect();
        let xd = self.data_arc();
        Tensor::from_op("gelu", self.shape().to_vec(), Arc::new(out), vec![self.clone()], move |g, _| {
            let c = T::of(INV_SQRT_2PI);
            vec![Some(
                g.iter()
                    .zip(xd.iter())
                    .map(|(&g, &x)| {
                        let cdf = half * (T::one() + (x * k).erf());
                        let pdf = c * (-half * x * x).exp();
                        g * (cdf + x * pdf)
                    })
                    .collect(),
            )]
        })
    }

    /// Softmax along the last axis, max-shifted per row.
    pub fn softmax_last(&self) -> Result<Tensor<T>> {
        let Some(&n) = self.shape().last() else {
            return config_err("softmax", "scalar input has no axis");
        };
        if n == 0 {
            return config_err("softmax", "empty axis");
        }
        let mut out = self.to_vec();
        for row in out.chunks_mut(n) {
            let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut s = T::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s = s + *v;
            }
            let inv = T::one() / s;
            row.iter_mut().for_each(|v| *v = *v * inv);
        }
        let out = Arc::new(out);
        let y = Arc::clone(&out);
        Ok(Tensor::from_op(
            "softmax",
            self.shape().to_vec(),
            out,
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![T::zero(); g.len()];
                for ((gx, g), y) in gx.chunks_mut(n).zip(g.chunks(n)).zip(y.chunks(n)) {
                    let dot = g.iter().zip(y).fold(T::zero(), |a, (&g, &y)| a + g * y);
                    for ((o, &g), &y) in gx.iter_mut().zip(g).zip(y) {
                        *o = y * (g - dot);
                    }
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Softmax along `axis`; only the last axis is supported.
    pub fn softmax(&self, axis: usize) -> Result<Tensor<T>> {
        if axis + 1 != self.ndim() {
            return config_err("softmax", format!("axis {axis} is not the last axis of {:?}", self.shape()));
        }
        self.softmax_last()
    }
}
