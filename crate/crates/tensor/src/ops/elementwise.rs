use std::sync::Arc;

use crate::error::{shape_err, Result};
use crate::real::Real;
use crate::tensor::Tensor;

fn unary<T: Real>(op: &'static str, x: &Tensor<T>, f: impl Fn(T) -> T, df: impl Fn(T) -> T + Send + Sync + 'static) -> Tensor<T> {
    let out: Vec<T> = x.data().iter().map(|&v| f(v)).collect();
    let xd = x.data_arc();
    Tensor::from_op(op, x.shape().to_vec(), Arc::new(out), vec![x.clone()], move |g, _| {
        vec![Some(g.iter().zip(xd.iter()).map(|(&g, &v)| g * df(v)).collect())]
    })
}

impl<T: Real> Tensor<T> {
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.same_shape(other, "add")?;
        let out: Vec<T> = self.data().iter().zip(other.data()).map(|(&a, &b)| a + b).collect();
        Ok(Tensor::from_op(
            "add",
            self.shape().to_vec(),
            Arc::new(out),
            vec![self.clone(), other.clone()],
            |g, need| vec![need[0].then(|| g.to_vec()), need[1].then(|| g.to_vec())],
        ))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.same_shape(other, "sub")?;
        let out: Vec<T> = self.data().iter().zip(other.data()).map(|(&a, &b)| a - b).collect();
        Ok(Tensor::from_op(
            "sub",
            self.shape().to_vec(),
            Arc::new(out),
            vec![self.clone(), other.clone()],
            |g, need| vec![need[0].then(|| g.to_vec()), need[1].then(|| g.iter().map(|&v| -v).collect())],
        ))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.same_shape(other, "mul")?;
        let out: Vec<T> = self.data().iter().zip(other.data()).map(|(&a, &b)| a * b).collect();
        let (ad, bd) = (self.data_arc(), other.data_arc());
        Ok(Tensor::from_op(
            "mul",
            self.shape().to_vec(),
            Arc::new(out),
            vec![self.clone(), other.clone()],
            move |g, need| {
                vec![
                    need[0].then(|| g.iter().zip(bd.iter()).map(|(&g, &b)| g * b).collect()),
                    need[1].then(|| g.iter().zip(ad.iter()).map(|(&g, &a)| g * a).collect()),
                ]
            },
        ))
    }

    pub fn scale(&self, c: T) -> Tensor<T> {
        unary("scale", self, |v| v * c, move |_| c)
    }

    pub fn add_scalar(&self, c: T) -> Tensor<T> {
        unary("add_scalar", self, |v| v + c, |_| T::one())
    }

    pub fn neg(&self) -> Tensor<T> {
        self.scale(-T::one())
    }

    pub fn square(&self) -> Tensor<T> {
        unary("square", self, |v| v * v, |v| v + v)
    }

    /// `|x|`, with subgradient 0 at 0.
    pub fn abs(&self) -> Tensor<T> {
        unary(
            "abs",
            self,
            |v| v.abs(),
            |v| {
                if v > T::zero() {
                    T::one()
                } else if v < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn sum(&self) -> Tensor<T> {
        let s = self.data().iter().fold(T::zero(), |a, &b| a + b);
        let n = self.numel();
        Tensor::from_op("sum", vec![], Arc::new(vec![s]), vec![self.clone()], move |g, _| {
            vec![Some(vec![g[0]; n])]
        })
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = T::of(self.numel() as f64);
        self.sum().scale(T::one() / n)
    }

    /// Multiplies by a fixed tensor (a mask or a constant weight); no gradient
    /// flows into `weights`.
    pub fn mul_const(&self, weights: &[T]) -> Result<Tensor<T>> {
        if weights.len() != self.numel() {
            return shape_err("mul_const", self.shape(), &[weights.len()]);
        }
        let w = Arc::new(weights.to_vec());
        let out: Vec<T> = self.data().iter().zip(w.iter()).map(|(&a, &b)| a * b).collect();
        Ok(Tensor::from_op(
            "mul_const",
            self.shape().to_vec(),
            Arc::new(out),
            vec![self.clone()],
            move |g, _| vec![Some(g.iter().zip(w.iter()).map(|(&g, &w)| g * w).collect())],
        ))
    }

    /// Where `mask` is nonzero take `values`, elsewhere keep `self`.
    /// Gradient flows to `self` only at unmasked positions.
    pub fn masked_replace(&self, values: &[T], mask: &[bool]) -> Result<Tensor<T>> {
        if values.len() != self.numel() || mask.len() != self.numel() {
            return shape_err("masked_replace", self.shape(), &[values.len(), mask.len()]);
        }
        let out: Vec<T> = self
            .data()
            .iter()
            .zip(values)
            .zip(mask)
            .map(|((&p, &v), &m)| if m { v } else { p })
            .collect();
        let mask = Arc::new(mask.to_vec());
        Ok(Tensor::from_op(
            "masked_replace",
            self.shape().to_vec(),
            Arc::new(out),
            vec![self.clone()],
            move |g, _| {
                vec![Some(
                    g.iter().zip(mask.iter()).map(|(&g, &m)| if m { T::zero() } else { g }).collect(),
                )]
            },
        ))
    }

    /// Adds a per-head bias `[h, n, n]` to batched scores `[b*h, n, n]`,
    /// where batch index `i` uses head `i % h`.
    pub fn add_head_bias(&self, bias: &Tensor<T>) -> Result<Tensor<T>> {
        let (s, b) = (self.shape(), bias.shape());
        if s.len() != 3 || b.len() != 3 || s[1..] != b[1..] || b[0] == 0 || s[0] % b[0] != 0 {
            return shape_err("add_head_bias", s, b);
        }
        let heads = b[0];
        let plane = s[1] * s[2];
        let bd = bias.data();
        let mut out = self.to_vec();
        for (i, chunk) in out.chunks_mut(plane).enumerate() {
            let h = i % heads;
            chunk
                .iter_mut()
                .zip(&bd[h * plane..(h + 1) * plane])
                .for_each(|(o, &b)| *o = *o + b);
        }
        let batch = s[0];
        Ok(Tensor::from_op(
            "add_head_bias",
            s.to_vec(),
            Arc::new(out),
            vec![self.clone(), bias.clone()],
            move |g, need| {
                let gb = need[1].then(|| {
                    let mut gb = vec![T::zero(); heads * plane];
                    for i in 0..batch {
                        let h = i % heads;
                        gb[h * plane..(h + 1) * plane]
                            .iter_mut()
                            .zip(&g[i * plane..(i + 1) * plane])
                            .for_each(|(a, &b)| *a = *a + b);
                    }
                    gb
                });
                vec![need[0].then(|| g.to_vec()), gb]
            },
        ))
    }
}
