//! Synthetic pattern windows.
//!
//! Trend bars come from a drifted random walk (down-trend for the bullish
//! reversal family, up-trend for the bearish one); the last three bars are
//! built from per-pattern templates with jittered body and shadow
//! proportions. Every candidate is re-labeled by the rule oracle and
//! resampled until the oracle agrees with the requested label, so stored
//! labels are correct by construction.
//!
//! All prices snap to a tick grid (FX-style pipettes). Besides realism this
//! keeps normalized values well separated, which the codec's round-trip
//! tolerances rely on.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, LabeledWindow, MarketError, OhlcBar, SplitTag, Window, TREND_LEN};
use crate::patterns::{detect_pattern, PatternLabel, Thresholds, TrendDirection};

/// Tunables for the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    /// Price level the walk starts near.
    pub base_price: f64,
    /// Price grid; every generated price is a multiple of this.
    pub tick: f64,
    /// Mean per-bar close move of the trend bars, as a fraction of base price.
    pub trend_step: f64,
    /// Resampling cap before a generation-failure error.
    pub max_retries: u32,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { base_price: 1.0, tick: 1e-5, trend_step: 0.004, max_retries: 100 }
    }
}

fn snap(price: f64, tick: f64) -> f64 {
    (price / tick).round() * tick
}

/// Build a valid bar on the tick grid; high/low are widened if rounding or
/// the template left them inside the body.
fn make_bar(open: f64, high: f64, low: f64, close: f64, tick: f64) -> Result<OhlcBar, MarketError> {
    let open = snap(open, tick);
    let close = snap(close, tick);
    let high = snap(high, tick).max(open).max(close);
    let low = snap(low, tick).min(open).min(close);
    OhlcBar::new(open, high, low, close, None)
}

struct TrendPlan {
    bars: Vec<OhlcBar>,
    /// Mean body of the trend bars, the unit the pattern templates scale by.
    mean_body: f64,
    last_close: f64,
}

/// Seven bars whose closes drift by `dir * step` per bar plus noise.
/// `dir = 0` produces a near-flat walk.
fn trend_bars(rng: &mut ChaCha8Rng, dir: f64, config: &GeneratorConfig) -> Result<TrendPlan, MarketError> {
    let step = config.base_price * config.trend_step;
    let mut close = config.base_price * (1.0 + rng.gen_range(-0.05..0.05));
    let mut bars = Vec::with_capacity(TREND_LEN);
    for _ in 0..TREND_LEN {
        let open = close + step * rng.gen_range(-0.15..0.15);
        close += dir * step * rng.gen_range(0.8..1.2) + step * rng.gen_range(-0.3..0.3);
        let top = open.max(close);
        let bottom = open.min(close);
        let high = top + step * rng.gen_range(0.05..0.35);
        let low = bottom - step * rng.gen_range(0.05..0.35);
        bars.push(make_bar(open, high, low, close, config.tick)?);
    }
    let mean_body = bars.iter().map(|b| (b.close - b.open).abs()).sum::<f64>() / TREND_LEN as f64;
    let last_close = bars.last().unwrap().close;
    Ok(TrendPlan { bars, mean_body, last_close })
}

/// A mid-sized bar that no detector treats as tall or small.
fn neutral_bar(
    rng: &mut ChaCha8Rng,
    around: f64,
    mean_body: f64,
    dir_hint: f64,
    config: &GeneratorConfig,
) -> Result<OhlcBar, MarketError> {
    let body = mean_body * rng.gen_range(0.5..0.95);
    let open = around + mean_body * rng.gen_range(-0.2..0.2);
    let close = open + body * if rng.gen_bool(0.5) { 1.0 } else { -1.0 } + dir_hint * mean_body * 0.2;
    let top = open.max(close);
    let bottom = open.min(close);
    // generous shadows keep the body fraction under the "tall" cutoff
    let high = top + body * rng.gen_range(0.35..0.6);
    let low = bottom - body * rng.gen_range(0.35..0.6);
    make_bar(open, high, low, close, config.tick)
}

/// Tall bar: body well above both tall thresholds, slim shadows.
/// `sign` +1 builds a white bar, -1 a black one.
fn tall_bar(
    rng: &mut ChaCha8Rng,
    open: f64,
    sign: f64,
    mean_body: f64,
    config: &GeneratorConfig,
) -> Result<OhlcBar, MarketError> {
    let body = mean_body * rng.gen_range(1.8..2.6);
    let close = open + sign * body;
    let top = open.max(close);
    let bottom = open.min(close);
    let high = top + body * rng.gen_range(0.02..0.12);
    let low = bottom - body * rng.gen_range(0.02..0.12);
    make_bar(open, high, low, close, config.tick)
}

/// Small-bodied bar with moderate wicks (the star's middle candle).
fn small_bar(
    rng: &mut ChaCha8Rng,
    around: f64,
    mean_body: f64,
    config: &GeneratorConfig,
) -> Result<OhlcBar, MarketError> {
    let body = mean_body * rng.gen_range(0.08..0.22);
    let open = around + mean_body * rng.gen_range(-0.2..0.2);
    let close = open + body * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let top = open.max(close);
    let bottom = open.min(close);
    let high = top + mean_body * rng.gen_range(0.2..0.5);
    let low = bottom - mean_body * rng.gen_range(0.2..0.5);
    make_bar(open, high, low, close, config.tick)
}

/// One long shadow at least 2.2x the body, the other nearly absent.
/// `shadow_up` picks the long side; `sign` the body color.
fn hammer_family_bar(
    rng: &mut ChaCha8Rng,
    around: f64,
    shadow_up: bool,
    mean_body: f64,
    config: &GeneratorConfig,
) -> Result<OhlcBar, MarketError> {
    let body = mean_body * rng.gen_range(0.5..0.9);
    let open = around + mean_body * rng.gen_range(-0.15..0.15);
    let close = open + body * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let top = open.max(close);
    let bottom = open.min(close);
    let long = body * rng.gen_range(2.3..3.2);
    let tiny = body * rng.gen_range(0.0..0.18);
    let (high, low) = if shadow_up { (top + long, bottom - tiny) } else { (top + tiny, bottom - long) };
    make_bar(open, high, low, close, config.tick)
}

fn pattern_tail(
    rng: &mut ChaCha8Rng,
    target: PatternLabel,
    plan: &TrendPlan,
    config: &GeneratorConfig,
) -> Result<[OhlcBar; 3], MarketError> {
    let mb = plan.mean_body.max(config.base_price * config.trend_step * 0.5);
    let at = plan.last_close;
    let tick = config.tick;
    match target {
        PatternLabel::MorningStar => {
            let open8 = at + mb * rng.gen_range(-0.2..0.2);
            let b8 = tall_bar(rng, open8, -1.0, mb, config)?;
            let around9 = b8.close - mb * rng.gen_range(0.0..0.4);
            let b9 = small_bar(rng, around9, mb, config)?;
            let open10 = b8.close + mb * rng.gen_range(-0.2..0.2);
            let b10 = tall_bar(rng, open10, 1.0, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::EveningStar => {
            let open8 = at + mb * rng.gen_range(-0.2..0.2);
            let b8 = tall_bar(rng, open8, 1.0, mb, config)?;
            let around9 = b8.close + mb * rng.gen_range(0.0..0.4);
            let b9 = small_bar(rng, around9, mb, config)?;
            let open10 = b8.close + mb * rng.gen_range(-0.2..0.2);
            let b10 = tall_bar(rng, open10, -1.0, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::Hammer => {
            let b8 = neutral_bar(rng, at, mb, -1.0, config)?;
            let b9 = neutral_bar(rng, b8.close, mb, -1.0, config)?;
            let b10 = hammer_family_bar(rng, b9.close, false, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::InvertedHammer => {
            let b8 = neutral_bar(rng, at, mb, -1.0, config)?;
            let b9 = neutral_bar(rng, b8.close, mb, -1.0, config)?;
            let b10 = hammer_family_bar(rng, b9.close, true, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::ShootingStar => {
            let b8 = neutral_bar(rng, at, mb, 1.0, config)?;
            let b9 = neutral_bar(rng, b8.close, mb, 1.0, config)?;
            let b10 = hammer_family_bar(rng, b9.close, true, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::HangingMan => {
            let b8 = neutral_bar(rng, at, mb, 1.0, config)?;
            let b9 = neutral_bar(rng, b8.close, mb, 1.0, config)?;
            let b10 = hammer_family_bar(rng, b9.close, false, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::BullishEngulfing => {
            let b8 = neutral_bar(rng, at, mb, -1.0, config)?;
            // smallish black bar, then a tall white body swallowing it
            let open9 = b8.close + mb * rng.gen_range(-0.1..0.2);
            let body9 = mb * rng.gen_range(0.35..0.6);
            let b9 = make_bar(
                open9,
                open9 + body9 * rng.gen_range(0.1..0.3),
                open9 - body9 - body9 * rng.gen_range(0.1..0.3),
                open9 - body9,
                tick,
            )?;
            let open10 = b9.close - mb * rng.gen_range(0.05..0.25);
            let b10 = tall_bar(rng, open10, 1.0, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::BearishEngulfing => {
            let b8 = neutral_bar(rng, at, mb, 1.0, config)?;
            let open9 = b8.close + mb * rng.gen_range(-0.2..0.1);
            let body9 = mb * rng.gen_range(0.35..0.6);
            let b9 = make_bar(
                open9,
                open9 + body9 + body9 * rng.gen_range(0.1..0.3),
                open9 - body9 * rng.gen_range(0.1..0.3),
                open9 + body9,
                tick,
            )?;
            let open10 = b9.close + mb * rng.gen_range(0.05..0.25);
            let b10 = tall_bar(rng, open10, -1.0, mb, config)?;
            Ok([b8, b9, b10])
        }
        PatternLabel::None => {
            let b8 = neutral_bar(rng, at, mb, 0.0, config)?;
            let b9 = neutral_bar(rng, b8.close, mb, 0.0, config)?;
            let b10 = neutral_bar(rng, b9.close, mb, 0.0, config)?;
            Ok([b8, b9, b10])
        }
    }
}

fn trend_dir_for(target: PatternLabel, rng: &mut ChaCha8Rng) -> f64 {
    match target {
        PatternLabel::MorningStar
        | PatternLabel::Hammer
        | PatternLabel::InvertedHammer
        | PatternLabel::BullishEngulfing => -1.0,
        PatternLabel::EveningStar
        | PatternLabel::BearishEngulfing
        | PatternLabel::ShootingStar
        | PatternLabel::HangingMan => 1.0,
        // "none" windows mix flat walks with mild drifts
        PatternLabel::None => match rng.gen_range(0..4u8) {
            0 => -0.3,
            1 => 0.3,
            _ => 0.0,
        },
    }
}

/// Sample one window whose oracle label equals `target`, resampling up to
/// `config.max_retries` times before giving up.
pub fn synthesize_window(
    rng: &mut ChaCha8Rng,
    target: PatternLabel,
    config: &GeneratorConfig,
    thresholds: &Thresholds,
) -> Result<LabeledWindow, MarketError> {
    for _ in 0..config.max_retries {
        let dir = trend_dir_for(target, rng);
        let plan = trend_bars(rng, dir, config)?;

        // the drift must actually register as a trend before the tail is built
        if dir < -0.5 || dir > 0.5 {
            let probe_tail = [*plan.bars.last().unwrap(); 3];
            let mut probe = plan.bars.clone();
            probe.extend_from_slice(&probe_tail);
            let probe_window = Window::new(probe)?;
            let want = if dir < 0.0 { TrendDirection::Down } else { TrendDirection::Up };
            if crate::patterns::trend(&probe_window, thresholds).direction != want {
                continue;
            }
        }

        let tail = pattern_tail(rng, target, &plan, config)?;
        let mut bars = plan.bars;
        bars.extend_from_slice(&tail);
        let window = Window::new(bars)?;
        if detect_pattern(&window, thresholds) == target {
            return Ok(LabeledWindow { window, label: target });
        }
    }
    Err(MarketError::GenerationFailure { label: target.code(), retries: config.max_retries })
}

/// Generate `per_label` samples for each of the eight patterns and
/// `2 * per_label` label-0 samples, in label-major order.
pub fn generate_dataset(
    seed: u64,
    per_label: usize,
    config: &GeneratorConfig,
    thresholds: &Thresholds,
) -> Result<Dataset, MarketError> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for label in PatternLabel::ALL {
        let count = if label == PatternLabel::None { per_label * 2 } else { per_label };
        for _ in 0..count {
            samples.push(synthesize_window(&mut rng, label, config, thresholds)?);
        }
    }
    Ok(Dataset { samples, split: SplitTag::All, seed })
}
