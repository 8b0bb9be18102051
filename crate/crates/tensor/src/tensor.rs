//! The tensor value type and the reverse-mode tape.
//!
//! Every tensor produced by an operation on gradient-tracking inputs keeps a
//! [`Node`] holding its parents and a closure mapping the output gradient to
//! parent gradients. `backward` walks that graph once in reverse topological
//! order; leaves accumulate into their `grad` cell.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{shape_err, Result, TensorError};
use crate::real::Real;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording any graph on this thread.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|g| g.set(self.0));
        }
    }
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let _restore = Restore(prev);
    f()
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

pub(crate) type BackwardFn<T> = Box<dyn Fn(&[T], &[bool]) -> Vec<Option<Vec<T>>> + Send + Sync>;

pub(crate) struct Node<T: Real> {
    op: &'static str,
    parents: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Inner<T: Real> {
    id: u64,
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<T>>>,
    node: Option<Node<T>>,
}

/// Dense row-major n-dimensional array with optional gradient tracking.
///
/// Cloning is cheap (reference counted) and values are immutable once built.
pub struct Tensor<T: Real = f64> {
    inner: Arc<Inner<T>>,
}

impl<T: Real> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Self {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Real> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Tensor");
        d.field("shape", &self.inner.shape);
        if let Some(node) = &self.inner.node {
            d.field("op", &node.op);
        }
        if self.numel() <= 16 {
            d.field("data", &self.inner.data);
        }
        d.field("requires_grad", &self.inner.requires_grad).finish()
    }
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Real> Tensor<T> {
    fn build(shape: Vec<usize>, data: Arc<Vec<T>>, requires_grad: bool, node: Option<Node<T>>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Self {
            inner: Arc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                requires_grad,
                grad: Mutex::new(None),
                node,
            }),
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return shape_err("from_vec", shape, &[data.len()]);
        }
        Ok(Self::build(shape.to_vec(), Arc::new(data), false, None))
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::from_vec(shape, data.iter().map(|&v| T::of(v)).collect())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::build(shape.to_vec(), Arc::new(vec![value; numel(shape)]), false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::build(vec![], Arc::new(vec![value]), false, None)
    }

    /// A trainable leaf.
    pub fn param(shape: &[usize], data: Vec<T>) -> Result<Self> {
        Ok(Self::from_vec(shape, data)?.requires_grad())
    }

    /// Returns a leaf sharing this tensor's data with gradient tracking on.
    pub fn requires_grad(self) -> Self {
        Self::build(self.inner.shape.clone(), Arc::clone(&self.inner.data), true, None)
    }

    /// Returns a leaf sharing this tensor's data, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::build(self.inner.shape.clone(), Arc::clone(&self.inner.data), false, None)
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn ndim(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.inner.data
    }

    pub(crate) fn data_arc(&self) -> Arc<Vec<T>> {
        Arc::clone(&self.inner.data)
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.inner.data.to_vec()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.inner.data.iter().map(|v| v.as_f64()).collect()
    }

    /// Detached copy in another precision.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        let data = self.inner.data.iter().map(|v| U::of(v.as_f64())).collect();
        Tensor::build(self.inner.shape.clone(), Arc::new(data), false, None)
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        self.inner.data[0]
    }

    pub fn is_tracked(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.node.is_none()
    }

    pub fn op_name(&self) -> Option<&'static str> {
        self.inner.node.as_ref().map(|n| n.op)
    }

    pub fn all_finite(&self) -> bool {
        self.inner.data.iter().all(|v| v.is_finite())
    }

    /// Accumulated gradient of a tracked leaf, if any backward reached it.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.lock().unwrap().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock().unwrap() = None;
    }

    pub fn same_shape(&self, other: &Tensor<T>, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return shape_err(op, self.shape(), other.shape());
        }
        Ok(())
    }

    /// Builds the result of an operation, recording a tape node when any
    /// parent tracks gradients and recording is enabled.
    pub(crate) fn from_op<F>(op: &'static str, shape: Vec<usize>, data: Arc<Vec<T>>, parents: Vec<Tensor<T>>, backward: F) -> Self
    where
        F: Fn(&[T], &[bool]) -> Vec<Option<Vec<T>>> + Send + Sync + 'static,
    {
        let track = grad_enabled() && parents.iter().any(|p| p.inner.requires_grad);
        if !track {
            return Self::build(shape, data, false, None);
        }
        let node = Node {
            op,
            parents,
            backward: Box::new(backward),
        };
        Self::build(shape, data, true, Some(node))
    }

    /// Reverse-mode pass from a scalar. Every tracked leaf reachable from
    /// `self` receives `d self / d leaf`, added to any gradient it already
    /// holds.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::Contract(format!(
                "backward requires a scalar, got shape {:?}",
                self.shape()
            )));
        }
        if !self.inner.requires_grad {
            return Ok(());
        }
        let order = self.topo_order();
        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.id(), vec![T::one()]);
        for t in order.iter().rev() {
            let Some(g) = grads.remove(&t.id()) else {
                continue;
            };
            match &t.inner.node {
                Some(node) => {
                    let needs: Vec<bool> = node.parents.iter().map(|p| p.inner.requires_grad).collect();
                    let pgrads = (node.backward)(&g, &needs);
                    debug_assert_eq!(pgrads.len(), node.parents.len(), "{}", node.op);
                    for ((p, pg), need) in node.parents.iter().zip(pgrads).zip(needs) {
                        let Some(pg) = pg else { continue };
                        if !need {
                            continue;
                        }
                        debug_assert_eq!(pg.len(), p.numel(), "{}", node.op);
                        match grads.get_mut(&p.id()) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a = *a + *b),
                            None => {
                                grads.insert(p.id(), pg);
                            }
                        }
                    }
                }
                None => {
                    let mut slot = t.inner.grad.lock().unwrap();
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b),
                        None => *slot = Some(g),
                    }
                }
            }
        }
        Ok(())
    }

    // Iterative post-order DFS over tracked nodes.
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        seen.insert(self.id());
        while let Some((t, next)) = stack.pop() {
            let parents = t.inner.node.as_ref().map(|n| n.parents.as_slice()).unwrap_or(&[]);
            if next < parents.len() {
                let p = parents[next].clone();
                stack.push((t, next + 1));
                if p.inner.requires_grad && seen.insert(p.id()) {
                    stack.push((p, 0));
                }
            } else {
                order.push(t);
            }
        }
        order
    }
}

// Long chains of nodes would otherwise drop recursively.
impl<T: Real> Drop for Inner<T> {
    fn drop(&mut self) {
        let mut pending: Vec<Node<T>> = self.node.take().into_iter().collect();
        while let Some(mut node) = pending.pop() {
            for p in node.parents.drain(..) {
                if let Ok(mut inner) = Arc::try_unwrap(p.inner) {
                    if let Some(n) = inner.node.take() {
                        pending.push(n);
                    }
                }
            }
        }
    }
}
