//! Dense row-major matrices and `(L, N, h, d)` tensors with a small binary
//! dump format.
//!
//! File layout (little endian): magic `FMHT`, `u16` version, `u8` precision
//! (0 = f32, 1 = f16), `u8` reserved, four `u64` dims `L N h d`, then the
//! elements in row-major `(L, N, h, d)` order.

use std::io::{self, Read, Write};

use half::f16;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::layout::{IntTuple, Layout};

pub const TENSOR_MAGIC: [u8; 4] = *b"FMHT";
pub const TENSOR_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Copy of rows `start..start + count`.
    pub fn row_block(&self, start: usize, count: usize) -> Matrix {
        Matrix {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        }
    }

    pub fn set_row_block(&mut self, start: usize, block: &Matrix) {
        assert_eq!(block.cols, self.cols);
        self.data[start * self.cols..(start + block.rows) * self.cols].copy_from_slice(&block.data);
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// A `(L, N, h, d)` tensor stored row-major, the global-memory layout of
/// `Q`, `K`, `V` and `O`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f32>,
}

impl Tensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f32>) -> Self {
        assert_eq!(
            data.len(),
            dims.iter().product::<usize>(),
            "tensor data length"
        );
        Tensor4 { dims, data }
    }

    /// Standard normal entries drawn in storage order.
    pub fn gaussian<R: Rng>(dims: [usize; 4], rng: &mut R) -> Self {
        let data = (0..dims.iter().product())
            .map(|_| rng.sample::<f32, _>(StandardNormal))
            .collect();
        Tensor4 { dims, data }
    }

    /// `[L, N, h, d]`.
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// `(N, d, h, L):(d·h, 1, d, h·N·d)`: sequence, head-dim, head, batch.
    pub fn gmem_layout(&self) -> Layout {
        let [l, n, h, d] = self.dims;
        Layout::new(
            IntTuple::ints(&[n, d, h, l]),
            IntTuple::ints(&[d * h, 1, d, h * n * d]),
        )
        .expect("gmem layout is congruent")
    }

    fn head_origin(&self, batch: usize, head: usize) -> (usize, usize) {
        let layout = self.gmem_layout();
        let base = layout
            .call_md(&IntTuple::ints(&[0, 0, head, batch]))
            .expect("head index in range");
        let row_stride = layout.stride().flatten()[0];
        (base, row_stride)
    }

    /// The `N × d` matrix of one (batch, head).
    pub fn head(&self, batch: usize, head: usize) -> Matrix {
        let [_, n, _, d] = self.dims;
        let (base, row_stride) = self.head_origin(batch, head);
        let mut m = Matrix::zeros(n, d);
        for r in 0..n {
            let start = base + r * row_stride;
            m.row_mut(r).copy_from_slice(&self.data[start..start + d]);
        }
        m
    }

    pub fn set_head(&mut self, batch: usize, head: usize, m: &Matrix) {
        let [_, n, _, d] = self.dims;
        assert_eq!((m.rows(), m.cols()), (n, d));
        let (base, row_stride) = self.head_origin(batch, head);
        for r in 0..n {
            let start = base + r * row_stride;
            self.data[start..start + d].copy_from_slice(m.row(r));
        }
    }

    /// Element at `(batch, seq, head, dim)`.
    pub fn get(&self, idx: [usize; 4]) -> f32 {
        let [_, n, h, d] = self.dims;
        self.data[((idx[0] * n + idx[1]) * h + idx[2]) * d + idx[3]]
    }

    pub fn write_to<W: Write>(&self, mut w: W, storage: StoragePrecision) -> io::Result<()> {
        w.write_all(&TENSOR_MAGIC)?;
        w.write_all(&TENSOR_VERSION.to_le_bytes())?;
        w.write_all(&[storage as u8, 0])?;
        for &d in &self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        match storage {
            StoragePrecision::F32 => {
                for &x in &self.data {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
            StoragePrecision::F16 => {
                for &x in &self.data {
                    w.write_all(&f16::from_f32(x).to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> io::Result<(Tensor4, StoragePrecision)> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        let mut head = [0u8; 8];
        r.read_exact(&mut head)?;
        if head[..4] != TENSOR_MAGIC {
            return Err(bad("not a tensor file"));
        }
        if u16::from_le_bytes([head[4], head[5]]) != TENSOR_VERSION {
            return Err(bad("unsupported tensor file version"));
        }
        let storage = match head[6] {
            0 => StoragePrecision::F32,
            1 => StoragePrecision::F16,
            _ => return Err(bad("unknown precision tag")),
        };
        let mut dims = [0usize; 4];
        for d in &mut dims {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *d = usize::try_from(u64::from_le_bytes(b)).map_err(|_| bad("dimension too large"))?;
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad("dimensions overflow"))?;
        let mut data = Vec::with_capacity(count);
        match storage {
            StoragePrecision::F32 => {
                let mut b = [0u8; 4];
                for _ in 0..count {
                    r.read_exact(&mut b)?;
                    data.push(f32::from_le_bytes(b));
                }
            }
            StoragePrecision::F16 => {
                let mut b = [0u8; 2];
                for _ in 0..count {
                    r.read_exact(&mut b)?;
                    data.push(f16::from_le_bytes(b).to_f32());
                }
            }
        }
        Ok((Tensor4 { dims, data }, storage))
    }
}

/// Element encoding in the binary tensor format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StoragePrecision {
    F32 = 0,
    F16 = 1,
}
