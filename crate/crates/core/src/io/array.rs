use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, FrameStack, MeasurementStack, C64};

const MAGIC: &[u8; 4] = b"PTYC";
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Complex(Vec<C64>),
    Real(Vec<f64>),
}

/// An n-dimensional float64 array, real or complex, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayFile {
    pub dims: Vec<usize>,
    pub data: ArrayData,
}

impl ArrayFile {
    pub fn complex(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        Self::checked(dims, ArrayData::Complex(data))
    }

    pub fn real(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::checked(dims, ArrayData::Real(data))
    }

    fn checked(dims: Vec<usize>, data: ArrayData) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(Error::Format(format!("{} dimensions", dims.len())));
        }
        let want: usize = dims.iter().product();
        let have = match &data {
            ArrayData::Complex(v) => v.len(),
            ArrayData::Real(v) => v.len(),
        };
        if want != have {
            return Err(Error::Shape(format!("dims {dims:?} need {want} values, got {have}")));
        }
        Ok(Self { dims, data })
    }

    pub fn from_grid(g: &ComplexGrid) -> Self {
        Self { dims: vec![g.rows(), g.cols()], data: ArrayData::Complex(g.as_slice().to_vec()) }
    }

    pub fn from_frames(z: &FrameStack) -> Self {
        Self { dims: vec![z.frames(), z.side(), z.side()], data: ArrayData::Complex(z.as_slice().to_vec()) }
    }

    pub fn from_measurements(a: &MeasurementStack) -> Self {
        Self { dims: vec![a.frames(), a.side(), a.side()], data: ArrayData::Real(a.as_slice().to_vec()) }
    }

    pub fn to_grid(&self) -> Result<ComplexGrid> {
        match (&self.data, self.dims.as_slice()) {
            (ArrayData::Complex(v), &[r, c]) => ComplexGrid::from_vec(r, c, v.clone()),
            _ => Err(Error::Format(format!("expected a complex 2-D array, got dims {:?}", self.dims))),
        }
    }

    pub fn to_measurements(&self) -> Result<MeasurementStack> {
        match (&self.data, self.dims.as_slice()) {
            (ArrayData::Real(v), &[k, m, m2]) if m == m2 => MeasurementStack::from_vec(k, m, v.clone()),
            _ => Err(Error::Format(format!("expected a real [K, m, m] array, got dims {:?}", self.dims))),
        }
    }

    pub fn real_data(&self) -> Result<&[f64]> {
        match &self.data {
            ArrayData::Real(v) => Ok(v),
            ArrayData::Complex(_) => Err(Error::Format("expected a real array".into())),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (dtype, count) = match &self.data {
            ArrayData::Complex(v) => (1u8, v.len() * 2),
            ArrayData::Real(v) => (2u8, v.len()),
        };
        let mut out = Vec::with_capacity(7 + 8 * self.dims.len() + 8 * count);
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(dtype);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match &self.data {
            ArrayData::Complex(v) => {
                for z in v {
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            ArrayData::Real(v) => {
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 7 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing PTYC magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        let dtype = bytes[5];
        let ndim = bytes[6] as usize;
        let header = 7 + 8 * ndim;
        if bytes.len() < header {
            return Err(Error::Format("truncated header".into()));
        }
        let dims: Vec<usize> = bytes[7..header]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let width = match dtype {
            1 => 16,
            2 => 8,
            t => return Err(Error::Format(format!("unknown dtype {t}"))),
        };
        let payload = &bytes[header..];
        if count.and_then(|c| c.checked_mul(width)) != Some(payload.len()) {
            return Err(Error::Format(format!("payload of {} bytes does not match dims {dims:?}", payload.len())));
        }
        let floats: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let data = if dtype == 1 {
            ArrayData::Complex(floats.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect())
        } else {
            ArrayData::Real(floats)
        };
        Ok(Self { dims, data })
    }
}

/// Writes to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::Format(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_array(path: &Path, array: &ArrayFile) -> Result<()> {
    write_atomic(path, &array.to_bytes())
}

pub fn read_array(path: &Path) -> Result<ArrayFile> {
    ArrayFile::from_bytes(&fs::read(path)?)
}
