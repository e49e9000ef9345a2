use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Dense third-order tensor. Entry `(i, j, k)` lives at
/// `i + I₁·(j + I₂·k)`, so mode-1 fibers are contiguous and the mode-1
/// unfolding shares the storage layout exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

/// Tensor mode selector (1-based as in the usual unfolding notation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    pub fn from_index(mode: usize) -> Result<Self> {
        match mode {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            _ => Err(Error::InvalidArgument(format!("tensor mode {mode} not in 1..=3"))),
        }
    }
}

const MAGIC: &[u8; 4] = b"TNS3";
const FORMAT_VERSION: u32 = 1;

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::DimensionMismatch {
                context: "Tensor3::from_vec",
                expected: n,
                found: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let idx = t.index(i, j, k);
                    t.data[idx] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        super::norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        super::all_finite(&self.data)
    }

    /// Matricization along `mode`. Mode 1 is a straight copy of the storage;
    /// modes 2 and 3 permute entries into column-major order with column
    /// index `i + I₁·k` (mode 2) or `i + I₁·j` (mode 3).
    pub fn unfold(&self, mode: Mode) -> DenseMatrix {
        let [i1, i2, i3] = self.dims;
        match mode {
            Mode::One => DenseMatrix::from_col_major(i1, i2 * i3, self.data.clone())
                .expect("storage matches mode-1 shape"),
            Mode::Two => DenseMatrix::from_fn(i2, i1 * i3, |j, c| self.get(c % i1, j, c / i1)),
            Mode::Three => DenseMatrix::from_fn(i3, i1 * i2, |k, c| self.get(c % i1, c / i1, k)),
        }
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(m: &DenseMatrix, dims: [usize; 3], mode: Mode) -> Result<Self> {
        let [i1, i2, i3] = dims;
        let expected = match mode {
            Mode::One => (i1, i2 * i3),
            Mode::Two => (i2, i1 * i3),
            Mode::Three => (i3, i1 * i2),
        };
        if m.shape() != expected {
            return Err(Error::InvalidArgument(format!(
                "cannot fold {:?} matrix into {:?} along {:?}",
                m.shape(),
                dims,
                mode
            )));
        }
        Ok(match mode {
            Mode::One => Self {
                dims,
                data: m.as_slice().to_vec(),
            },
            Mode::Two => Self::from_fn(dims, |i, j, k| m.get(j, i + i1 * k)),
            Mode::Three => Self::from_fn(dims, |i, j, k| m.get(k, i + i1 * j)),
        })
    }

    /// Writes the binary layout: magic `TNS3`, `u32` version, three `u64`
    /// dims, then `f64` entries, all little endian, mode-1 fibers first.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for d in self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidArgument("not a TNS3 tensor file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported tensor format version {version}"
            )));
        }
        let mut dims = [0usize; 3];
        let mut b8 = [0u8; 8];
        for d in &mut dims {
            r.read_exact(&mut b8)?;
            *d = u64::from_le_bytes(b8) as usize;
        }
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::InvalidArgument("tensor dims overflow".into()))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        Ok(Self { dims, data })
    }
}
