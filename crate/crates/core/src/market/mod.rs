//! 10-bar OHLC windows: bar validation, CSV ingestion, sliding, synthetic
//! generation, stratified splitting, and the on-disk dataset container.

pub mod container;
pub mod csv;
pub mod synth;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::patterns::PatternLabel;

/// Bars per window. The final three bars carry the candlestick pattern, the
/// first seven establish the trend running into it.
pub const WINDOW_LEN: usize = 10;
/// Bars at the head of the window that set the trend context.
pub const TREND_LEN: usize = 7;
/// Price channels per bar, in fixed order: open, high, low, close.
pub const CHANNEL_COUNT: usize = 4;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("invalid bar: {0}")]
    InvalidBar(String),
    #[error("window must contain exactly {WINDOW_LEN} bars, got {0}")]
    BadWindowLen(usize),
    #[error("need at least {WINDOW_LEN} bars to slide windows, got {0}")]
    NotEnoughBars(usize),
    #[error("stride must be positive")]
    ZeroStride,
    #[error("csv schema: {0}")]
    Schema(String),
    #[error("csv read: {0}")]
    Csv(#[from] ::csv::Error),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadTrainFraction(f64),
    #[error("label {label} has {count} sample(s); a stratified split needs at least 2 per class")]
    Stratification { label: u8, count: usize },
    #[error("could not synthesize a window for label {label} within {retries} attempts")]
    GenerationFailure { label: u8, retries: u32 },
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset file: {0}")]
    BadContainer(String),
}

/// One of the four price channels of a bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Open,
    High,
    Low,
    Close,
}

impl Channel {
    /// Fixed channel order used everywhere a window becomes a tensor.
    pub const ALL: [Channel; CHANNEL_COUNT] =
        [Channel::Open, Channel::High, Channel::Low, Channel::Close];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Open => "open",
            Channel::High => "high",
            Channel::Low => "low",
            Channel::Close => "close",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::Open => 0,
            Channel::High => 1,
            Channel::Low => 2,
            Channel::Close => 3,
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "open" => Ok(Channel::Open),
            "high" => Ok(Channel::High),
            "low" => Ok(Channel::Low),
            "close" => Ok(Channel::Close),
            other => Err(format!("unknown channel {other:?} (expected open|high|low|close)")),
        }
    }
}

/// One candlestick. Prices are strictly positive and satisfy
/// `low <= min(open, close) <= max(open, close) <= high`; the timestamp is
/// optional epoch milliseconds kept for provenance only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcBar {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub timestamp: Option<i64>,
}

impl OhlcBar {
    pub fn new(
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        timestamp: Option<i64>,
    ) -> Result<Self, MarketError> {
        let prices = [open, high, low, close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(MarketError::InvalidBar(format!(
                "prices must be strictly positive and finite, got o={open} h={high} l={low} c={close}"
            )));
        }
        if low > open.min(close) || high < open.max(close) {
            return Err(MarketError::InvalidBar(format!(
                "ordering violated: need low <= min(open, close) and high >= max(open, close), \
                 got o={open} h={high} l={low} c={close}"
            )));
        }
        Ok(Self { open, high, low, close, timestamp })
    }

    pub fn price(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Open => self.open,
            Channel::High => self.high,
            Channel::Low => self.low,
            Channel::Close => self.close,
        }
    }
}

/// Exactly ten bars, ordered oldest to newest.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    bars: [OhlcBar; WINDOW_LEN],
}

impl Window {
    pub fn new(bars: Vec<OhlcBar>) -> Result<Self, MarketError> {
        let len = bars.len();
        let bars: [OhlcBar; WINDOW_LEN] =
            bars.try_into().map_err(|_| MarketError::BadWindowLen(len))?;
        Ok(Self { bars })
    }

    pub fn bars(&self) -> &[OhlcBar; WINDOW_LEN] {
        &self.bars
    }

    /// The ten values of one price channel, oldest first.
    pub fn channel_values(&self, channel: Channel) -> [f64; WINDOW_LEN] {
        std::array::from_fn(|i| self.bars[i].price(channel))
    }

    /// (min, max) over all 40 prices of the window.
    pub fn price_range(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for bar in &self.bars {
            min = min.min(bar.low);
            max = max.max(bar.high);
        }
        (min, max)
    }

    /// Same window with every price multiplied by `k` (timestamps kept).
    pub fn scale_prices(&self, k: f64) -> Result<Window, MarketError> {
        let bars = self
            .bars
            .iter()
            .map(|b| OhlcBar::new(b.open * k, b.high * k, b.low * k, b.close * k, b.timestamp))
            .collect::<Result<Vec<_>, _>>()?;
        Window::new(bars)
    }
}

/// A window paired with its rule-oracle label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub window: Window,
    pub label: PatternLabel,
}

/// Which side of a train/test split a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
    All,
}

impl SplitTag {
    pub(crate) fn code(self) -> u8 {
        match self {
            SplitTag::Train => 0,
            SplitTag::Test => 1,
            SplitTag::All => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SplitTag::Train),
            1 => Some(SplitTag::Test),
            2 => Some(SplitTag::All),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
            SplitTag::All => "all",
        }
    }
}

/// A labeled sample collection plus the seed that produced or shuffled it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledWindow>,
    pub split: SplitTag,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count per label code 0..=8.
    pub fn class_counts(&self) -> [usize; 9] {
        let mut counts = [0usize; 9];
        for sample in &self.samples {
            counts[sample.label.code() as usize] += 1;
        }
        counts
    }
}

/// All length-10 windows at offsets `0, stride, 2*stride, ...`; a partial
/// tail is dropped.
pub fn slide_windows(bars: &[OhlcBar], stride: usize) -> Result<Vec<Window>, MarketError> {
    if stride == 0 {
        return Err(MarketError::ZeroStride);
    }
    if bars.len() < WINDOW_LEN {
        return Err(MarketError::NotEnoughBars(bars.len()));
    }
    let mut windows = Vec::with_capacity((bars.len() - WINDOW_LEN) / stride + 1);
    let mut offset = 0;
    while offset + WINDOW_LEN <= bars.len() {
        windows.push(Window::new(bars[offset..offset + WINDOW_LEN].to_vec())?);
        offset += stride;
    }
    Ok(windows)
}

/// Stratified train/test split. Per class, `floor(train_fraction * n)`
/// samples (clamped so both sides stay non-empty) go to the train side;
/// assignment is shuffled by `seed` but the within-split sample order follows
/// the input dataset.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), MarketError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MarketError::BadTrainFraction(train_fraction));
    }

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); 9];
    for (idx, sample) in dataset.samples.iter().enumerate() {
        by_label[sample.label.code() as usize].push(idx);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut to_train = vec![false; dataset.samples.len()];
    for (label, indices) in by_label.iter_mut().enumerate() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < 2 {
            return Err(MarketError::Stratification { label: label as u8, count: indices.len() });
        }
        indices.shuffle(&mut rng);
        let take = ((train_fraction * indices.len() as f64).floor() as usize)
            .clamp(1, indices.len() - 1);
        for &idx in indices.iter().take(take) {
            to_train[idx] = true;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, sample) in dataset.samples.iter().enumerate() {
        if to_train[idx] {
            train.push(sample.clone());
        } else {
            test.push(sample.clone());
        }
    }
    Ok((
        Dataset { samples: train, split: SplitTag::Train, seed },
        Dataset { samples: test, split: SplitTag::Test, seed },
    ))
}
