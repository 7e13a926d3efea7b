//! Canonical binary checkpoints (magic "GCNN1").
//!
//! Layout, little-endian: magic | arch (seven u32 fields) | layer manifest
//! (count u32, then name len u8 + name + element count u64 per tensor) |
//! parameter blob (count u64 + f64 entries in canonical order) | metadata
//! (seed u64, epochs u32, best epoch u32, best validation accuracy f64,
//! final train loss f64, channel-order string, config-echo string). Strings
//! are u32 length + UTF-8. Serialization is canonical: load then save
//! reproduces the file byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Arch, LayerStack};
use super::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"GCNN1";

/// Training provenance stored with the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: u32,
    pub best_epoch: u32,
    pub best_valid_accuracy: f64,
    pub final_train_loss: f64,
    /// Input channel order the model was trained with.
    pub channel_order: String,
    pub config_echo: String,
}

impl Default for TrainMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 0,
            best_epoch: 0,
            best_valid_accuracy: 0.0,
            final_train_loss: 0.0,
            channel_order: "open,high,low,close".to_string(),
            config_echo: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: LayerStack,
    pub meta: TrainMeta,
}

fn write_string(out: &mut impl Write, s: &str) -> std::io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

pub fn write_checkpoint_to(mut out: impl Write, checkpoint: &Checkpoint) -> Result<(), NnError> {
    let arch = checkpoint.model.arch();
    out.write_all(CHECKPOINT_MAGIC)?;
    for field in [
        arch.input.0,
        arch.input.1,
        arch.input.2,
        arch.conv_filters,
        arch.kernel,
        arch.dense_units,
        arch.classes,
    ] {
        out.write_all(&(field as u32).to_le_bytes())?;
    }

    let layout = checkpoint.model.param_layout();
    out.write_all(&(layout.len() as u32).to_le_bytes())?;
    for (name, count) in &layout {
        out.write_all(&[name.len() as u8])?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(*count as u64).to_le_bytes())?;
    }

    let params = checkpoint.model.params_vec();
    out.write_all(&(params.len() as u64).to_le_bytes())?;
    for value in &params {
        out.write_all(&value.to_le_bytes())?;
    }

    let meta = &checkpoint.meta;
    out.write_all(&meta.seed.to_le_bytes())?;
    out.write_all(&meta.epochs.to_le_bytes())?;
    out.write_all(&meta.best_epoch.to_le_bytes())?;
    out.write_all(&meta.best_valid_accuracy.to_le_bytes())?;
    out.write_all(&meta.final_train_loss.to_le_bytes())?;
    write_string(&mut out, &meta.channel_order)?;
    write_string(&mut out, &meta.config_echo)?;
    Ok(())
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), NnError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_checkpoint_to(&mut out, checkpoint)?;
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N], NnError> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|_| NnError::BadCheckpoint("file truncated".to_string()))?;
    Ok(buf)
}

fn read_u32(input: &mut impl Read) -> Result<u32, NnError> {
    Ok(u32::from_le_bytes(read_exact::<4>(input)?))
}

fn read_f64(input: &mut impl Read) -> Result<f64, NnError> {
    Ok(f64::from_le_bytes(read_exact::<8>(input)?))
}

fn read_string(input: &mut impl Read) -> Result<String, NnError> {
    let len = read_u32(input)? as usize;
    let mut buf = vec![0u8; len];
    input
        .read_exact(&mut buf)
        .map_err(|_| NnError::BadCheckpoint("file truncated".to_string()))?;
    String::from_utf8(buf).map_err(|_| NnError::BadCheckpoint("string is not UTF-8".to_string()))
}

pub fn read_checkpoint_from(mut input: impl Read) -> Result<Checkpoint, NnError> {
    let magic = read_exact::<5>(&mut input)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::BadCheckpoint(format!(
            "bad magic {:?}: expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(CHECKPOINT_MAGIC),
        )));
    }
    let fields: Vec<usize> = (0..7).map(|_| read_u32(&mut input).map(|v| v as usize)).collect::<Result<_, _>>()?;
    let arch = Arch {
        input: (fields[0], fields[1], fields[2]),
        conv_filters: fields[3],
        kernel: fields[4],
        dense_units: fields[5],
        classes: fields[6],
    };

    let mut model = LayerStack::new(arch, 0);
    let expected_layout = model.param_layout();

    let layer_count = read_u32(&mut input)? as usize;
    if layer_count != expected_layout.len() {
        return Err(NnError::BadCheckpoint(format!(
            "manifest lists {layer_count} tensors, architecture has {}",
            expected_layout.len()
        )));
    }
    for (name, count) in &expected_layout {
        let name_len = read_exact::<1>(&mut input)?[0] as usize;
        let mut name_buf = vec![0u8; name_len];
        input
            .read_exact(&mut name_buf)
            .map_err(|_| NnError::BadCheckpoint("file truncated".to_string()))?;
        let got_name = String::from_utf8_lossy(&name_buf).to_string();
        let got_count = u64::from_le_bytes(read_exact::<8>(&mut input)?) as usize;
        if got_name != *name || got_count != *count {
            return Err(NnError::BadCheckpoint(format!(
                "manifest entry {got_name}({got_count}) does not match {name}({count})"
            )));
        }
    }

    let param_count = u64::from_le_bytes(read_exact::<8>(&mut input)?) as usize;
    if param_count != model.param_count() {
        return Err(NnError::BadCheckpoint(format!(
            "parameter blob has {param_count} values, architecture needs {}",
            model.param_count()
        )));
    }
    let mut params = Vec::with_capacity(param_count);
    for _ in 0..param_count {
        params.push(read_f64(&mut input)?);
    }
    model.set_params_vec(&params)?;

    let meta = TrainMeta {
        seed: u64::from_le_bytes(read_exact::<8>(&mut input)?),
        epochs: read_u32(&mut input)?,
        best_epoch: read_u32(&mut input)?,
        best_valid_accuracy: read_f64(&mut input)?,
        final_train_loss: read_f64(&mut input)?,
        channel_order: read_string(&mut input)?,
        config_echo: read_string(&mut input)?,
    };
    Ok(Checkpoint { model, meta })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    read_checkpoint_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_checkpoint() -> Checkpoint {
        let arch = Arch { input: (6, 6, 2), conv_filters: 3, kernel: 3, dense_units: 10, classes: 4 };
        Checkpoint {
            model: LayerStack::new(arch, 77),
            meta: TrainMeta {
                seed: 9,
                epochs: 12,
                best_epoch: 8,
                best_valid_accuracy: 0.825,
                final_train_loss: 0.31,
                config_echo: "[optimizer]\nepochs = 12\n".to_string(),
                ..TrainMeta::default()
            },
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let checkpoint = sample_checkpoint();
        let mut bytes = Vec::new();
        write_checkpoint_to(&mut bytes, &checkpoint).unwrap();

        let loaded = read_checkpoint_from(bytes.as_slice()).unwrap();
        assert_eq!(loaded, checkpoint);

        let mut again = Vec::new();
        write_checkpoint_to(&mut again, &loaded).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let checkpoint = sample_checkpoint();
        let mut bytes = Vec::new();
        write_checkpoint_to(&mut bytes, &checkpoint).unwrap();
        let loaded = read_checkpoint_from(bytes.as_slice()).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (h, w, c) = checkpoint.model.arch().input;
        let data = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let input = Tensor3::new((h, w, c), data).unwrap();
        assert_eq!(
            checkpoint.model.forward(&input).unwrap(),
            loaded.model.forward(&input).unwrap()
        );
    }

    #[test]
    fn bad_magic_is_rejected() {
        let err = read_checkpoint_from(&b"WRONG....."[..]).unwrap_err();
        assert!(err.to_string().contains("GCNN1"));
    }
}
