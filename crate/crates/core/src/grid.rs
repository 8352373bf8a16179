//! Dense grids and stacked frame vectors.
//!
//! Everything is row-major and 0-based. A stack of `k` frames of side `m`
//! stores frame `i` in the contiguous block `[i*m*m, (i+1)*m*m)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Linear index of `(alpha, beta)` inside an `m`x`m` frame.
pub fn index_linear(alpha: usize, beta: usize, m: usize) -> Result<usize> {
    if alpha >= m {
        return Err(Error::IndexOutOfRange { what: "alpha", value: alpha, bound: m });
    }
    if beta >= m {
        return Err(Error::IndexOutOfRange { what: "beta", value: beta, bound: m });
    }
    Ok(alpha * m + beta)
}

/// Position of pixel `r_linear` of frame `k` in the stacked vector.
pub fn index_ell(k: usize, r_linear: usize, m: usize, frames: usize) -> Result<usize> {
    if k >= frames {
        return Err(Error::IndexOutOfRange { what: "k", value: k, bound: frames });
    }
    if r_linear >= m * m {
        return Err(Error::IndexOutOfRange { what: "r_linear", value: r_linear, bound: m * m });
    }
    Ok(k * m * m + r_linear)
}

/// Inverse of [`index_ell`].
pub fn split_ell(ell: usize, m: usize) -> (usize, usize) {
    (ell / (m * m), ell % (m * m))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn constant(rows: usize, cols: usize, value: C64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "grid {}x{} needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite grid entry at {pos}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn scale(&mut self, s: C64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }
}

/// `k` complex frames of side `m`, stored back to back.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameStack {
    k: usize,
    m: usize,
    data: Vec<C64>,
}

impl FrameStack {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self { k, m, data: vec![C64::new(0.0, 0.0); k * m * m] }
    }

    pub fn from_vec(k: usize, m: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != k * m * m {
            return Err(Error::Shape(format!(
                "stack of {k} frames {m}x{m} needs {} values, got {}",
                k * m * m,
                data.len()
            )));
        }
        Ok(Self { k, m, data })
    }

    pub fn frames(&self) -> usize {
        self.k
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn frame(&self, i: usize) -> &[C64] {
        let n = self.m * self.m;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn frame_mut(&mut self, i: usize) -> &mut [C64] {
        let n = self.m * self.m;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn same_shape(&self, other_k: usize, other_m: usize) -> bool {
        self.k == other_k && self.m == other_m
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { k: self.k, m: self.m, data: self.data.iter().map(|z| z * s).collect() }
    }
}

/// Non-negative amplitudes laid out like a [`FrameStack`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementStack {
    k: usize,
    m: usize,
    data: Vec<f64>,
}

impl MeasurementStack {
    pub fn from_vec(k: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * m * m {
            return Err(Error::Shape(format!(
                "measurement of {k} frames {m}x{m} needs {} values, got {}",
                k * m * m,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("amplitude entry {pos} is negative or non-finite")));
        }
        Ok(Self { k, m, data })
    }

    pub fn frames(&self) -> usize {
        self.k
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        let n = self.m * self.m;
        &self.data[i * n..(i + 1) * n]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn frame_norm(&self, i: usize) -> f64 {
        self.frame(i).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<u, v> = sum conj(u) v`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn dist(u: &[C64], v: &[C64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}
