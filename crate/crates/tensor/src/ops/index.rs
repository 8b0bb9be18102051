//! Shape changes and index-driven data movement.

use std::sync::Arc;

use crate::error::{config_err, shape_err, Result};
use crate::real::Real;
use crate::tensor::{numel, Tensor};

impl<T: Real> Tensor<T> {
    /// Same data, new shape. Shares storage with `self`.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != self.numel() {
            return shape_err("reshape", self.shape(), shape);
        }
        Ok(Tensor::from_op(
            "reshape",
            shape.to_vec(),
            self.data_arc(),
            vec![self.clone()],
            |g, _| vec![Some(g.to_vec())],
        ))
    }

    /// `out[i] = self[index[i]]`; the gradient scatters back with addition.
    pub fn gather(&self, index: Arc<Vec<usize>>, shape: &[usize]) -> Result<Tensor<T>> {
        if numel(shape) != index.len() {
            return shape_err("gather", shape, &[index.len()]);
        }
        let n = self.numel();
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return config_err("gather", format!("index {bad} out of range for {n} elements"));
        }
        let src = self.data();
        let out: Vec<T> = index.iter().map(|&i| src[i]).collect();
        Ok(Tensor::from_op(
            "gather",
            shape.to_vec(),
            Arc::new(out),
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![T::zero(); n];
                for (&i, &g) in index.iter().zip(g) {
                    gx[i] = gx[i] + g;
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Reorders axes: output axis `k` is input axis `dims[k]`.
    pub fn permute(&self, dims: &[usize]) -> Result<Tensor<T>> {
        let shape = self.shape();
        let nd = shape.len();
        let mut seen = vec![false; nd];
        if dims.len() != nd || dims.iter().any(|&d| d >= nd || std::mem::replace(&mut seen[d], true)) {
            return config_err("permute", format!("{dims:?} is not a permutation of {nd} axes"));
        }
        let mut in_strides = vec![1usize; nd];
        for k in (0..nd.saturating_sub(1)).rev() {
            in_strides[k] = in_strides[k + 1] * shape[k + 1];
        }
        let out_shape: Vec<usize> = dims.iter().map(|&d| shape[d]).collect();
        let strides: Vec<usize> = dims.iter().map(|&d| in_strides[d]).collect();
        let mut index = Vec::with_capacity(self.numel());
        let mut pos = vec![0usize; nd];
        for _ in 0..self.numel() {
            index.push(pos.iter().zip(&strides).map(|(p, s)| p * s).sum());
            for k in (0..nd).rev() {
                pos[k] += 1;
                if pos[k] < out_shape[k] {
                    break;
                }
                pos[k] = 0;
            }
        }
        self.gather(Arc::new(index), &out_shape)
    }

    /// Swaps the two axes of a matrix.
    pub fn transpose2(&self) -> Result<Tensor<T>> {
        if self.ndim() != 2 {
            return config_err("transpose2", format!("expected a matrix, got {:?}", self.shape()));
        }
        self.permute(&[1, 0])
    }
}
