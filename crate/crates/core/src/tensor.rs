//! Dense 4-D tensors in (batch, channels, height, width) layout.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Float;

use crate::error::{Error, Result};

/// Scalar type for tensor data. `f64` in tests and gradient checks,
/// `f32` on production paths.
pub trait Real:
    Float + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline(always)]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Dense 4-D array in row-major (n, c, h, w) order. Images, feature maps,
/// gradients, and kernels are all carried by this one type.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Real> {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

/// Shape tuple (n, c, h, w) used in error messages and validation.
pub type Shape = (usize, usize, usize, usize);

pub(crate) fn shape_str(s: Shape) -> alloc::string::String {
    format!("({}, {}, {}, {})", s.0, s.1, s.2, s.3)
}

impl<T: Real> Tensor<T> {
    /// Zero-filled tensor. All dims must be >= 1.
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        assert!(n >= 1 && c >= 1 && h >= 1 && w >= 1, "tensor dims must be >= 1");
        Tensor {
            n,
            c,
            h,
            w,
            data: vec![T::zero(); n * c * h * w],
        }
    }

    /// Constant-filled tensor.
    pub fn filled(n: usize, c: usize, h: usize, w: usize, value: T) -> Self {
        let mut t = Self::zeros(n, c, h, w);
        t.data.iter_mut().for_each(|v| *v = value);
        t
    }

    /// Wrap an existing buffer; the length must equal n*c*h*w.
    pub fn from_vec(n: usize, c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * c * h * w {
            return Err(Error::ShapeMismatch {
                context: "Tensor::from_vec",
                expected: format!("{} elements for {}", n * c * h * w, shape_str((n, c, h, w))),
                got: format!("{} elements", data.len()),
            });
        }
        if n == 0 || c == 0 || h == 0 || w == 0 {
            return Err(Error::ShapeMismatch {
                context: "Tensor::from_vec",
                expected: format!("all dims >= 1"),
                got: shape_str((n, c, h, w)),
            });
        }
        Ok(Tensor { n, c, h, w, data })
    }

    #[inline(always)]
    pub fn shape(&self) -> Shape {
        (self.n, self.c, self.h, self.w)
    }

    #[inline(always)]
    pub fn batch(&self) -> usize {
        self.n
    }
    #[inline(always)]
    pub fn channels(&self) -> usize {
        self.c
    }
    #[inline(always)]
    pub fn height(&self) -> usize {
        self.h
    }
    #[inline(always)]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline(always)]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline(always)]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline(always)]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline(always)]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline(always)]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        self.data[((n * self.c + c) * self.h + y) * self.w + x]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, n: usize, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[((n * self.c + c) * self.h + y) * self.w + x]
    }

    /// One (c, y) row of w contiguous values.
    #[inline(always)]
    pub fn row(&self, n: usize, c: usize, y: usize) -> &[T] {
        let base = ((n * self.c + c) * self.h + y) * self.w;
        &self.data[base..base + self.w]
    }

    /// Contiguous (h*w) plane of one channel.
    #[inline(always)]
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let base = (n * self.c + c) * self.h * self.w;
        &self.data[base..base + self.h * self.w]
    }

    #[inline(always)]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let base = (n * self.c + c) * self.h * self.w;
        let hw = self.h * self.w;
        &mut self.data[base..base + hw]
    }

    /// Elementwise map into a new tensor.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Clamp all values into [lo, hi].
    pub fn clamp(&self, lo: T, hi: T) -> Self {
        self.map(|v| if v < lo { lo } else if v > hi { hi } else { v })
    }

    /// Convert element type (used at weight-file and image boundaries).
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            n: self.n,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64_lossy())).collect(),
        }
    }

    /// Extract one batch item as an n=1 tensor.
    pub fn item(&self, n: usize) -> Self {
        assert!(n < self.n);
        let chw = self.c * self.h * self.w;
        Tensor {
            n: 1,
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data[n * chw..(n + 1) * chw].to_vec(),
        }
    }

    /// Elementwise sum with a same-shaped tensor.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "Tensor::add")?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a = *a + *b;
        }
        Ok(out)
    }

    /// Multiply every element by a scalar.
    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    /// Sum of all elements accumulated in f64.
    pub fn sum_f64(&self) -> f64 {
        self.data.iter().map(|v| v.to_f64_lossy()).sum()
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                context,
                expected: shape_str(self.shape()),
                got: shape_str(other.shape()),
            });
        }
        Ok(())
    }
}
