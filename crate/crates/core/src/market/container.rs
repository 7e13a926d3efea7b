//! Versioned binary dataset container (magic "GAFL1").
//!
//! Layout, all little-endian:
//! magic (5 bytes) | split tag u8 | seed u64 | config-echo len u32 + UTF-8 |
//! sample count u64 | samples. Each sample is a label byte followed by ten
//! bars of four f64 prices plus an i64 timestamp (i64::MIN marks "none").
//! Writing is canonical, so equal datasets produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, LabeledWindow, MarketError, OhlcBar, SplitTag, Window, WINDOW_LEN};
use crate::patterns::PatternLabel;

pub const DATASET_MAGIC: &[u8; 5] = b"GAFL1";

const NO_TIMESTAMP: i64 = i64::MIN;

pub fn write_dataset_to(
    mut out: impl Write,
    dataset: &Dataset,
    config_echo: &str,
) -> Result<(), MarketError> {
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&[dataset.split.code()])?;
    out.write_all(&dataset.seed.to_le_bytes())?;
    let echo = config_echo.as_bytes();
    out.write_all(&(echo.len() as u32).to_le_bytes())?;
    out.write_all(echo)?;
    out.write_all(&(dataset.samples.len() as u64).to_le_bytes())?;
    for sample in &dataset.samples {
        out.write_all(&[sample.label.code()])?;
        for bar in sample.window.bars() {
            out.write_all(&bar.open.to_le_bytes())?;
            out.write_all(&bar.high.to_le_bytes())?;
            out.write_all(&bar.low.to_le_bytes())?;
            out.write_all(&bar.close.to_le_bytes())?;
            out.write_all(&bar.timestamp.unwrap_or(NO_TIMESTAMP).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_dataset(path: &Path, dataset: &Dataset, config_echo: &str) -> Result<(), MarketError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset_to(&mut out, dataset, config_echo)?;
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N], MarketError> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            MarketError::BadContainer("file truncated".to_string())
        } else {
            MarketError::Io(e)
        }
    })?;
    Ok(buf)
}

fn read_f64(input: &mut impl Read) -> Result<f64, MarketError> {
    Ok(f64::from_le_bytes(read_exact::<8>(input)?))
}

/// Read a dataset plus the config echo stored alongside it.
pub fn read_dataset_from(mut input: impl Read) -> Result<(Dataset, String), MarketError> {
    let magic = read_exact::<5>(&mut input)?;
    if &magic != DATASET_MAGIC {
        return Err(MarketError::BadContainer(format!(
            "bad magic {:?}: expected {:?} (not a GAFL1 dataset file)",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(DATASET_MAGIC),
        )));
    }
    let split_code = read_exact::<1>(&mut input)?[0];
    let split = SplitTag::from_code(split_code)
        .ok_or_else(|| MarketError::BadContainer(format!("unknown split tag {split_code}")))?;
    let seed = u64::from_le_bytes(read_exact::<8>(&mut input)?);

    let echo_len = u32::from_le_bytes(read_exact::<4>(&mut input)?) as usize;
    let mut echo = vec![0u8; echo_len];
    input.read_exact(&mut echo).map_err(|_| MarketError::BadContainer("file truncated".into()))?;
    let echo = String::from_utf8(echo)
        .map_err(|_| MarketError::BadContainer("config echo is not UTF-8".to_string()))?;

    let count = u64::from_le_bytes(read_exact::<8>(&mut input)?) as usize;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let code = read_exact::<1>(&mut input)?[0];
        let label = PatternLabel::from_code(code).ok_or_else(|| {
            MarketError::BadContainer(format!("sample {i}: label code {code} out of range"))
        })?;
        let mut bars = Vec::with_capacity(WINDOW_LEN);
        for _ in 0..WINDOW_LEN {
            let open = read_f64(&mut input)?;
            let high = read_f64(&mut input)?;
            let low = read_f64(&mut input)?;
            let close = read_f64(&mut input)?;
            let ts = i64::from_le_bytes(read_exact::<8>(&mut input)?);
            let timestamp = (ts != NO_TIMESTAMP).then_some(ts);
            bars.push(OhlcBar::new(open, high, low, close, timestamp).map_err(|e| {
                MarketError::BadContainer(format!("sample {i}: {e}"))
            })?);
        }
        samples.push(LabeledWindow { window: Window::new(bars)?, label });
    }
    Ok((Dataset { samples, split, seed }, echo))
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, String), MarketError> {
    read_dataset_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::synth::{generate_dataset, GeneratorConfig};
    use crate::patterns::Thresholds;

    fn sample_dataset() -> Dataset {
        generate_dataset(17, 2, &GeneratorConfig::default(), &Thresholds::default()).unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let data = sample_dataset();
        let mut bytes = Vec::new();
        write_dataset_to(&mut bytes, &data, "tick = 0.00001\n").unwrap();

        let (loaded, echo) = read_dataset_from(bytes.as_slice()).unwrap();
        assert_eq!(loaded, data);
        assert_eq!(echo, "tick = 0.00001\n");

        let mut again = Vec::new();
        write_dataset_to(&mut again, &loaded, &echo).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn bad_magic_is_reported() {
        let err = read_dataset_from(&b"NOPE1rest-of-file"[..]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("GAFL1"), "message should name the expected magic: {msg}");
    }

    #[test]
    fn truncated_file_is_reported() {
        let data = sample_dataset();
        let mut bytes = Vec::new();
        write_dataset_to(&mut bytes, &data, "").unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            read_dataset_from(bytes.as_slice()),
            Err(MarketError::BadContainer(_))
        ));
    }
}
