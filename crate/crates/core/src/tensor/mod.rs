//! Minimal reverse-mode automatic differentiation over 4-D float tensors.
//!
//! Values live in [`Tensor`]s laid out as `(batch, channels, height, width)`.
//! Differentiable computation is recorded on a [`Tape`]; every operation
//! pushes a node holding its output value and a backward rule, so the tape
//! is always in topological order. [`Tape::backward`] walks it in reverse.
//!
//! Parameters are owned outside the tape. Each iteration they are copied in
//! with [`Tape::leaf`], and after the backward pass their gradients are read
//! back with [`Tape::accumulate_grad`].

mod conv;
mod elementwise;
mod gemm;
mod grid_sample;
mod optim;
pub mod resize;
mod tape;

use std::fmt;

pub use grid_sample::grid_sample_bilinear;
pub use optim::{Adam, AdamConfig};
pub use resize::{BlurKernel, Downsampler};
pub use tape::{Backward, Tape, Var};

/// Tensor dimensions as `(batch, channels, height, width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape(pub [usize; 4]);

impl Shape {
    pub const SCALAR: Shape = Shape([1, 1, 1, 1]);

    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape([n, c, h, w])
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn n(&self) -> usize {
        self.0[0]
    }

    pub fn c(&self) -> usize {
        self.0[1]
    }

    pub fn h(&self) -> usize {
        self.0[2]
    }

    pub fn w(&self) -> usize {
        self.0[3]
    }

    /// Elements in one `(h, w)` plane.
    pub fn plane(&self) -> usize {
        self.0[2] * self.0[3]
    }

    pub fn with_channels(&self, c: usize) -> Self {
        Shape([self.0[0], c, self.0[2], self.0[3]])
    }

    pub fn with_spatial(&self, h: usize, w: usize) -> Self {
        Shape([self.0[0], self.0[1], h, w])
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [n, c, h, w] = self.0;
        write!(f, "[{n}, {c}, {h}, {w}]")
    }
}

/// A dense `f32` tensor with an optional gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f32>,
    requires_grad: bool,
    grad: Option<Vec<f32>>,
}

impl Tensor {
    /// Panics if `data.len()` does not match the shape.
    pub fn new(shape: Shape, data: Vec<f32>) -> Self {
        assert_eq!(
            shape.numel(),
            data.len(),
            "tensor data length does not match shape {shape}"
        );
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor::new(shape, vec![0.0; shape.numel()])
    }

    pub fn full(shape: Shape, value: f32) -> Self {
        Tensor::new(shape, vec![value; shape.numel()])
    }

    pub fn scalar(value: f32) -> Self {
        Tensor::new(Shape::SCALAR, vec![value])
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut([usize; 4]) -> f32) -> Self {
        let [n, c, h, w] = shape.0;
        let mut data = Vec::with_capacity(shape.numel());
        for b in 0..n {
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        data.push(f([b, ch, y, x]));
                    }
                }
            }
        }
        Tensor::new(shape, data)
    }

    /// Marks the tensor as a trainable parameter.
    pub fn requires_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.requires_grad = flag;
    }

    pub fn is_trainable(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[f32]) {
        assert_eq!(g.len(), self.data.len(), "gradient length mismatch");
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => self.grad = Some(g.to_vec()),
        }
    }

    pub fn reshape(mut self, shape: Shape) -> Self {
        assert_eq!(shape.numel(), self.data.len(), "reshape to {shape} changes size");
        self.shape = shape;
        if let Some(g) = &self.grad {
            debug_assert_eq!(g.len(), self.data.len());
        }
        self
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, cs, hs, ws] = self.shape.0;
        ((n * cs + c) * hs + y) * ws + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(n, c, y, x)]
    }

    /// The `(h, w)` plane for batch `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let p = self.shape.plane();
        let start = (n * self.shape.c() + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let p = self.shape.plane();
        let start = (n * self.shape.c() + c) * p;
        &mut self.data[start..start + p]
    }

    /// Copies channel `c` of every batch item into a new single-channel tensor.
    pub fn channel(&self, c: usize) -> Tensor {
        let s = self.shape;
        let mut out = Vec::with_capacity(s.n() * s.plane());
        for n in 0..s.n() {
            out.extend_from_slice(self.plane(n, c));
        }
        Tensor::new(s.with_channels(1), out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor::new(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn mean(&self) -> f32 {
        (self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64) as f32
    }

    /// Detached copy: same values, no gradient state.
    pub fn detached(&self) -> Tensor {
        Tensor::new(self.shape, self.data.clone())
    }
}
