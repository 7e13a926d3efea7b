//! Rule oracle for eight candlestick reversal patterns over 10-bar windows.
//!
//! The last three bars of a window carry the pattern, the first seven set the
//! trend running into it. Every detector is built from price ratios and
//! orderings only, so labels are invariant under rescaling all prices and
//! under adding a constant level.

use crate::market::{OhlcBar, Window, TREND_LEN, WINDOW_LEN};

/// Relative tolerance under which open and close count as equal (doji).
pub const DOJI_REL_TOL: f64 = 1e-9;

/// The nine classes: eight named patterns plus "none".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PatternLabel {
    None = 0,
    MorningStar = 1,
    EveningStar = 2,
    Hammer = 3,
    InvertedHammer = 4,
    BullishEngulfing = 5,
    BearishEngulfing = 6,
    ShootingStar = 7,
    HangingMan = 8,
}

impl PatternLabel {
    pub const ALL: [PatternLabel; 9] = [
        PatternLabel::None,
        PatternLabel::MorningStar,
        PatternLabel::EveningStar,
        PatternLabel::Hammer,
        PatternLabel::InvertedHammer,
        PatternLabel::BullishEngulfing,
        PatternLabel::BearishEngulfing,
        PatternLabel::ShootingStar,
        PatternLabel::HangingMan,
    ];

    /// The eight pattern classes, excluding `None`.
    pub const PATTERNS: [PatternLabel; 8] = [
        PatternLabel::MorningStar,
        PatternLabel::EveningStar,
        PatternLabel::Hammer,
        PatternLabel::InvertedHammer,
        PatternLabel::BullishEngulfing,
        PatternLabel::BearishEngulfing,
        PatternLabel::ShootingStar,
        PatternLabel::HangingMan,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        PatternLabel::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternLabel::None => "none",
            PatternLabel::MorningStar => "morning-star",
            PatternLabel::EveningStar => "evening-star",
            PatternLabel::Hammer => "hammer",
            PatternLabel::InvertedHammer => "inverted-hammer",
            PatternLabel::BullishEngulfing => "bullish-engulfing",
            PatternLabel::BearishEngulfing => "bearish-engulfing",
            PatternLabel::ShootingStar => "shooting-star",
            PatternLabel::HangingMan => "hanging-man",
        }
    }
}

impl std::fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Quantitative thresholds behind the prose rules ("tall", "small", "little
/// or no shadow", trend strength). Immutable after load; exposed as the
/// `[patterns]` block of the config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// A tall body fills at least this fraction of its bar's high-low range.
    pub tall_body_frac: f64,
    /// ... and is at least this multiple of the mean body of the trend bars.
    pub tall_body_mult: f64,
    /// A small body is at most this multiple of the mean body of the trend bars.
    pub small_body_frac: f64,
    /// "Little or no shadow": shadow at most this fraction of the body.
    pub tiny_shadow_frac: f64,
    /// Trend fires when |least-squares slope| exceeds this fraction of the
    /// window price range per bar.
    pub trend_slope_frac: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tall_body_frac: 0.6,
            tall_body_mult: 1.2,
            small_body_frac: 0.3,
            tiny_shadow_frac: 0.25,
            trend_slope_frac: 0.02,
        }
    }
}

/// Which side of the open the close finished on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarDirection {
    /// close > open
    White,
    /// close < open
    Black,
    /// open == close within [`DOJI_REL_TOL`]
    Doji,
}

/// Body/shadow decomposition of a single bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarAnatomy {
    pub body: f64,
    pub upper_shadow: f64,
    pub lower_shadow: f64,
    pub direction: BarDirection,
}

/// Decompose a bar into body, shadows, and direction.
pub fn anatomy(bar: &OhlcBar) -> BarAnatomy {
    let top = bar.open.max(bar.close);
    let bottom = bar.open.min(bar.close);
    let direction = if (bar.close - bar.open).abs() <= DOJI_REL_TOL * bar.close {
        BarDirection::Doji
    } else if bar.close > bar.open {
        BarDirection::White
    } else {
        BarDirection::Black
    };
    BarAnatomy {
        body: top - bottom,
        upper_shadow: bar.high - top,
        lower_shadow: bottom - bar.low,
        direction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendDirection {
    Up,
    Down,
    Flat,
}

/// Least-squares trend of the first seven closes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendContext {
    /// Slope in price units per bar.
    pub slope: f64,
    pub direction: TrendDirection,
}

/// Fit a least-squares line through the closes of bars 1..=7 and classify it
/// against `trend_slope_frac` of the window price range.
pub fn trend(window: &Window, thresholds: &Thresholds) -> TrendContext {
    let closes: Vec<f64> = window.bars()[..TREND_LEN].iter().map(|b| b.close).collect();
    let n = TREND_LEN as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = closes.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in closes.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    let slope = num / den;

    let (min, max) = window.price_range();
    let threshold = thresholds.trend_slope_frac * (max - min);
    let direction = if slope > threshold {
        TrendDirection::Up
    } else if slope < -threshold {
        TrendDirection::Down
    } else {
        TrendDirection::Flat
    };
    TrendContext { slope, direction }
}

struct WindowView<'a> {
    bars: &'a [OhlcBar; WINDOW_LEN],
    anatomies: [BarAnatomy; WINDOW_LEN],
    /// Mean body of the seven trend bars.
    mean_body: f64,
    trend: TrendDirection,
}

impl<'a> WindowView<'a> {
    fn new(window: &'a Window, thresholds: &Thresholds) -> Self {
        let bars = window.bars();
        let anatomies = std::array::from_fn(|i| anatomy(&bars[i]));
        let mean_body =
            anatomies[..TREND_LEN].iter().map(|a| a.body).sum::<f64>() / TREND_LEN as f64;
        Self { bars, anatomies, mean_body, trend: trend(window, thresholds).direction }
    }

    fn is_tall(&self, i: usize, th: &Thresholds) -> bool {
        let a = &self.anatomies[i];
        let range = self.bars[i].high - self.bars[i].low;
        a.body >= th.tall_body_frac * range && a.body >= th.tall_body_mult * self.mean_body
    }

    fn is_small(&self, i: usize, th: &Thresholds) -> bool {
        self.anatomies[i].body <= th.small_body_frac * self.mean_body
    }

    fn body_top(&self, i: usize) -> f64 {
        self.bars[i].open.max(self.bars[i].close)
    }

    fn body_bottom(&self, i: usize) -> f64 {
        self.bars[i].open.min(self.bars[i].close)
    }

    fn body_mid(&self, i: usize) -> f64 {
        (self.bars[i].open + self.bars[i].close) / 2.0
    }
}

// Bar indices of the pattern region: single-bar rules look at bar 10,
// two-bar rules at bars 9-10, three-bar rules at bars 8-10.
const B8: usize = WINDOW_LEN - 3;
const B9: usize = WINDOW_LEN - 2;
const B10: usize = WINDOW_LEN - 1;

fn morning_star(v: &WindowView, th: &Thresholds) -> bool {
    v.trend == TrendDirection::Down
        && v.anatomies[B8].direction == BarDirection::Black
        && v.is_tall(B8, th)
        && v.is_small(B9, th)
        && v.anatomies[B10].direction == BarDirection::White
        && v.is_tall(B10, th)
        && v.bars[B10].close > v.body_mid(B8)
}

fn evening_star(v: &WindowView, th: &Thresholds) -> bool {
    v.trend == TrendDirection::Up
        && v.anatomies[B8].direction == BarDirection::White
        && v.is_tall(B8, th)
        && v.is_small(B9, th)
        && v.anatomies[B10].direction == BarDirection::Black
        && v.is_tall(B10, th)
        && v.bars[B10].close < v.body_mid(B8)
}

fn bullish_engulfing(v: &WindowView, th: &Thresholds) -> bool {
    v.trend == TrendDirection::Down
        && v.anatomies[B9].direction == BarDirection::Black
        && v.anatomies[B10].direction == BarDirection::White
        && v.is_tall(B10, th)
        && v.body_bottom(B10) <= v.body_bottom(B9)
        && v.body_top(B10) >= v.body_top(B9)
        && v.anatomies[B10].body > v.anatomies[B9].body
}

fn bearish_engulfing(v: &WindowView, th: &Thresholds) -> bool {
    v.trend == TrendDirection::Up
        && v.anatomies[B9].direction == BarDirection::White
        && v.anatomies[B10].direction == BarDirection::Black
        && v.is_tall(B10, th)
        && v.body_bottom(B10) <= v.body_bottom(B9)
        && v.body_top(B10) >= v.body_top(B9)
        && v.anatomies[B10].body > v.anatomies[B9].body
}

/// Long lower shadow, little or no upper shadow (hammer / hanging man shape).
fn hammer_shape(a: &BarAnatomy, th: &Thresholds) -> bool {
    a.lower_shadow >= 2.0 * a.body && a.upper_shadow <= th.tiny_shadow_frac * a.body
}

/// Long upper shadow, little or no lower shadow (inverted hammer / shooting
/// star shape).
fn inverted_hammer_shape(a: &BarAnatomy, th: &Thresholds) -> bool {
    a.upper_shadow >= 2.0 * a.body && a.lower_shadow <= th.tiny_shadow_frac * a.body
}

/// Evaluate the eight detectors on the last bars of the window and return the
/// unique match under the fixed priority order (three-bar patterns, then
/// two-bar, then one-bar; lowest code within a tier), or `None` (label 0).
pub fn detect_pattern(window: &Window, thresholds: &Thresholds) -> PatternLabel {
    let v = WindowView::new(window, thresholds);

    if morning_star(&v, thresholds) {
        return PatternLabel::MorningStar;
    }
    if evening_star(&v, thresholds) {
        return PatternLabel::EveningStar;
    }
    if bullish_engulfing(&v, thresholds) {
        return PatternLabel::BullishEngulfing;
    }
    if bearish_engulfing(&v, thresholds) {
        return PatternLabel::BearishEngulfing;
    }

    let last = &v.anatomies[B10];
    match v.trend {
        TrendDirection::Down => {
            if hammer_shape(last, thresholds) {
                return PatternLabel::Hammer;
            }
            if inverted_hammer_shape(last, thresholds) {
                return PatternLabel::InvertedHammer;
            }
        }
        TrendDirection::Up => {
            if inverted_hammer_shape(last, thresholds) {
                return PatternLabel::ShootingStar;
            }
            if hammer_shape(last, thresholds) {
                return PatternLabel::HangingMan;
            }
        }
        TrendDirection::Flat => {}
    }
    PatternLabel::None
}
