//! CSV ingestion with a configurable column mapping.
//!
//! Malformed rows (non-numeric prices, OHLC ordering violations) are
//! collected with their line numbers and skipped; a missing column in the
//! header is a hard schema error.

use std::io::Read;

use chrono::NaiveDateTime;

use super::{MarketError, OhlcBar};

/// Column names for the price fields; `timestamp` is optional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub timestamp: Option<String>,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: Some("timestamp".to_string()),
            open: "open".to_string(),
            high: "high".to_string(),
            low: "low".to_string(),
            close: "close".to_string(),
        }
    }
}

/// One skipped row and why.
#[derive(Debug, Clone)]
pub struct RowError {
    /// 1-based line number in the input (the header is line 1).
    pub line: u64,
    pub reason: String,
}

/// Parse result: bars in file order plus the skipped rows.
#[derive(Debug)]
pub struct CsvParse {
    pub bars: Vec<OhlcBar>,
    pub errors: Vec<RowError>,
}

const TIMESTAMP_FORMATS: [&str; 4] =
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y.%m.%d %H:%M:%S", "%Y.%m.%d %H:%M"];

fn parse_timestamp(field: &str) -> Option<i64> {
    if let Ok(ms) = field.trim().parse::<i64>() {
        return Some(ms);
    }
    for fmt in TIMESTAMP_FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(field.trim(), fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    None
}

/// Read UTF-8 CSV (RFC-4180 quoting, '.' decimal separator, header row) into
/// bars. Returns the bars in file order together with per-row errors.
pub fn parse_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<CsvParse, MarketError> {
    let mut rdr = ::csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);

    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize, MarketError> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| MarketError::Schema(format!("column {name:?} not found in header")))
    };

    let open_col = column(&schema.open)?;
    let high_col = column(&schema.high)?;
    let low_col = column(&schema.low)?;
    let close_col = column(&schema.close)?;
    let ts_col = match &schema.timestamp {
        Some(name) => Some(column(name)?),
        None => None,
    };

    let mut bars = Vec::new();
    let mut errors = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);

        let field = |col: usize| -> Result<f64, String> {
            let raw = record
                .get(col)
                .ok_or_else(|| format!("row has {} fields, need column {}", record.len(), col + 1))?;
            raw.trim().parse::<f64>().map_err(|_| format!("non-numeric price {raw:?}"))
        };

        let prices = (|| -> Result<(f64, f64, f64, f64), String> {
            Ok((field(open_col)?, field(high_col)?, field(low_col)?, field(close_col)?))
        })();
        let (open, high, low, close) = match prices {
            Ok(p) => p,
            Err(reason) => {
                errors.push(RowError { line, reason });
                continue;
            }
        };

        let timestamp = ts_col.and_then(|col| record.get(col)).and_then(parse_timestamp);
        match OhlcBar::new(open, high, low, close, timestamp) {
            Ok(bar) => bars.push(bar),
            Err(e) => errors.push(RowError { line, reason: e.to_string() }),
        }
    }

    Ok(CsvParse { bars, errors })
}
