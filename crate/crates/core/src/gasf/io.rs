//! Binary tensor container (magic "GASF1").
//!
//! Layout, little-endian: magic (5 bytes) | channel count u8 | side u16 |
//! channel-major row-major f64 entries | norm record (min f64, max f64,
//! degenerate u8). The encoding is canonical, so round trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GasfError, GasfTensor, NormRecord};
use crate::market::{CHANNEL_COUNT, WINDOW_LEN};

pub const TENSOR_MAGIC: &[u8; 5] = b"GASF1";

pub fn write_tensor_to(mut out: impl Write, tensor: &GasfTensor) -> Result<(), GasfError> {
    out.write_all(TENSOR_MAGIC)?;
    out.write_all(&[CHANNEL_COUNT as u8])?;
    out.write_all(&(WINDOW_LEN as u16).to_le_bytes())?;
    for matrix in &tensor.channels {
        for row in matrix {
            for value in row {
                out.write_all(&value.to_le_bytes())?;
            }
        }
    }
    let norm = tensor.norm_record();
    out.write_all(&norm.min.to_le_bytes())?;
    out.write_all(&norm.max.to_le_bytes())?;
    out.write_all(&[norm.degenerate as u8])?;
    Ok(())
}

pub fn write_tensor(path: &Path, tensor: &GasfTensor) -> Result<(), GasfError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_tensor_to(&mut out, tensor)?;
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N], GasfError> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|_| GasfError::BadContainer("file truncated".to_string()))?;
    Ok(buf)
}

pub fn read_tensor_from(mut input: impl Read) -> Result<GasfTensor, GasfError> {
    let magic = read_exact::<5>(&mut input)?;
    if &magic != TENSOR_MAGIC {
        return Err(GasfError::BadContainer(format!(
            "bad magic {:?}: expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(TENSOR_MAGIC),
        )));
    }
    let channels = read_exact::<1>(&mut input)?[0] as usize;
    let side = u16::from_le_bytes(read_exact::<2>(&mut input)?) as usize;
    if channels != CHANNEL_COUNT || side != WINDOW_LEN {
        return Err(GasfError::BadContainer(format!(
            "unsupported shape {channels}x{side}x{side}, expected {CHANNEL_COUNT}x{WINDOW_LEN}x{WINDOW_LEN}"
        )));
    }
    let mut data = [[[0.0; WINDOW_LEN]; WINDOW_LEN]; CHANNEL_COUNT];
    for matrix in data.iter_mut() {
        for row in matrix.iter_mut() {
            for value in row.iter_mut() {
                *value = f64::from_le_bytes(read_exact::<8>(&mut input)?);
            }
        }
    }
    let min = f64::from_le_bytes(read_exact::<8>(&mut input)?);
    let max = f64::from_le_bytes(read_exact::<8>(&mut input)?);
    let degenerate = read_exact::<1>(&mut input)?[0] != 0;
    Ok(GasfTensor { channels: data, norm: NormRecord { min, max, degenerate } })
}

pub fn read_tensor(path: &Path) -> Result<GasfTensor, GasfError> {
    read_tensor_from(BufReader::new(File::open(path)?))
}
