//! Gramian angular summation field codec for 10-bar OHLC windows.
//!
//! A window is min-max rescaled into [0, 1] jointly across its four price
//! channels, each rescaled value is lifted to a polar angle
//! `phi_i = arccos(x_i)`, and the field is the symmetric matrix
//! `G[i][j] = cos(phi_i + phi_j)`. Every diagonal entry
//! `G[i][i] = 2 x_i^2 - 1` depends on a single timestep, so the diagonal
//! decodes back to a unique series in [0, 1] — the property the
//! diagonal-constrained attack builds on.

pub mod io;

use thiserror::Error;

use crate::market::{Channel, MarketError, OhlcBar, Window, CHANNEL_COUNT, WINDOW_LEN};

/// Slack tolerated when validating that inputs sit in their domains.
pub const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GasfError {
    #[error("normalized value {value} at index {index} outside [0, 1] by more than {DOMAIN_TOL}")]
    OutOfUnitRange { index: usize, value: f64 },
    #[error("diagonal value {value} at index {index} outside [-1, 1] by more than {DOMAIN_TOL}")]
    OutOfDiagonalRange { index: usize, value: f64 },
    #[error("degenerate normalization record (max == min): original prices cannot be recovered")]
    DegenerateRecord,
    #[error("invalid bar after denormalization: {0}")]
    Market(#[from] MarketError),
    #[error("tensor io: {0}")]
    Io(#[from] std::io::Error),
    #[error("tensor file: {0}")]
    BadContainer(String),
}

/// The joint min-max used to rescale a window, kept so the exact prices can
/// be recovered. `degenerate` marks an all-equal window that was mapped to
/// the midpoint 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

/// Four rescaled channels of a window, every value in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    channels: [[f64; WINDOW_LEN]; CHANNEL_COUNT],
    norm: NormRecord,
}

impl NormalizedSeries {
    /// Build from raw channel values; each must lie in [0, 1] within
    /// [`DOMAIN_TOL`].
    pub fn new(
        channels: [[f64; WINDOW_LEN]; CHANNEL_COUNT],
        norm: NormRecord,
    ) -> Result<Self, GasfError> {
        for channel in &channels {
            check_unit_range(channel)?;
        }
        Ok(Self { channels, norm })
    }

    pub fn channel(&self, channel: Channel) -> &[f64; WINDOW_LEN] {
        &self.channels[channel.index()]
    }

    pub fn norm_record(&self) -> NormRecord {
        self.norm
    }
}

/// Polar representation of one rescaled series: angles `arccos(x_i)` and
/// radii `t_i / N` for 1-based timestamps. The radii are carried for
/// completeness; the field itself depends only on the angles.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSeries {
    pub angles: Vec<f64>,
    pub radii: Vec<f64>,
}

/// A 10x10 field matrix for one channel.
pub type GasfMatrix = [[f64; WINDOW_LEN]; WINDOW_LEN];

/// Four field matrices (open, high, low, close order) plus the normalization
/// record needed to decode back to prices.
#[derive(Debug, Clone, PartialEq)]
pub struct GasfTensor {
    pub(crate) channels: [GasfMatrix; CHANNEL_COUNT],
    norm: NormRecord,
}

impl GasfTensor {
    pub fn channel(&self, channel: Channel) -> &GasfMatrix {
        &self.channels[channel.index()]
    }

    pub fn diagonal(&self, channel: Channel) -> [f64; WINDOW_LEN] {
        let m = &self.channels[channel.index()];
        std::array::from_fn(|i| m[i][i])
    }

    pub fn norm_record(&self) -> NormRecord {
        self.norm
    }

    /// Decode every channel's diagonal back to the normalized series.
    pub fn decode(&self) -> Result<NormalizedSeries, GasfError> {
        let mut channels = [[0.0; WINDOW_LEN]; CHANNEL_COUNT];
        for (out, matrix) in channels.iter_mut().zip(&self.channels) {
            let diag: Vec<f64> = (0..WINDOW_LEN).map(|i| matrix[i][i]).collect();
            let decoded = decode_diagonal(&diag)?;
            out.copy_from_slice(&decoded);
        }
        Ok(NormalizedSeries { channels, norm: self.norm })
    }

    /// Largest absolute entrywise difference against another tensor.
    pub fn max_abs_diff(&self, other: &GasfTensor) -> f64 {
        let mut worst = 0.0f64;
        for (a, b) in self.channels.iter().zip(&other.channels) {
            for (ra, rb) in a.iter().zip(b) {
                for (va, vb) in ra.iter().zip(rb) {
                    worst = worst.max((va - vb).abs());
                }
            }
        }
        worst
    }
}

fn check_unit_range(values: &[f64]) -> Result<(), GasfError> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() || value < -DOMAIN_TOL || value > 1.0 + DOMAIN_TOL {
            return Err(GasfError::OutOfUnitRange { index, value });
        }
    }
    Ok(())
}

/// Joint min-max rescale of all 40 prices into [0, 1]. A flat window (max ==
/// min) maps every value to 0.5 and raises the degenerate flag instead of
/// failing.
pub fn normalize(window: &Window) -> NormalizedSeries {
    let (min, max) = window.price_range();
    let span = max - min;
    let degenerate = span == 0.0;
    let mut channels = [[0.0; WINDOW_LEN]; CHANNEL_COUNT];
    for (out, channel) in channels.iter_mut().zip(Channel::ALL) {
        let values = window.channel_values(channel);
        for (slot, value) in out.iter_mut().zip(values) {
            *slot = if degenerate { 0.5 } else { (value - min) / span };
        }
    }
    NormalizedSeries { channels, norm: NormRecord { min, max, degenerate } }
}

/// Map a normalized series back to prices: `x * (max - min) + min`. Bars are
/// repaired so high/low straddle the body again (diagonal perturbations can
/// push individual channels past each other).
pub fn denormalize(series: &NormalizedSeries) -> Result<Window, GasfError> {
    if series.norm.degenerate {
        return Err(GasfError::DegenerateRecord);
    }
    let span = series.norm.max - series.norm.min;
    let price = |x: f64| x * span + series.norm.min;
    let mut bars = Vec::with_capacity(WINDOW_LEN);
    for i in 0..WINDOW_LEN {
        let open = price(series.channels[Channel::Open.index()][i]);
        let high = price(series.channels[Channel::High.index()][i]);
        let low = price(series.channels[Channel::Low.index()][i]);
        let close = price(series.channels[Channel::Close.index()][i]);
        let high = high.max(open).max(low).max(close);
        let low = low.min(open).min(high).min(close);
        bars.push(OhlcBar::new(open, high, low, close, None)?);
    }
    Ok(Window::new(bars)?)
}

/// Polar form of one rescaled series: `angles[i] = arccos(x_i)` in
/// [0, pi/2] for x in [0, 1], `radii[i] = (i + 1) / n`.
pub fn polar(values: &[f64]) -> Result<PolarSeries, GasfError> {
    check_unit_range(values)?;
    let n = values.len() as f64;
    let angles = values.iter().map(|&x| x.clamp(0.0, 1.0).acos()).collect();
    let radii = (1..=values.len()).map(|t| t as f64 / n).collect();
    Ok(PolarSeries { angles, radii })
}

/// Field matrix of one series via the angle form `cos(phi_i + phi_j)`,
/// returned row-major. Entries are computed once per (i, j) pair and
/// mirrored, so the output is exactly symmetric.
pub fn gasf_matrix(values: &[f64]) -> Result<Vec<f64>, GasfError> {
    let phi = polar(values)?.angles;
    let n = values.len();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = (phi[i] + phi[j]).cos();
            matrix[i * n + j] = v;
            matrix[j * n + i] = v;
        }
    }
    Ok(matrix)
}

/// Field matrix via the algebraic form
/// `x_i x_j - sqrt(1 - x_i^2) sqrt(1 - x_j^2)`, the rank-two outer-product
/// route. Kept alongside [`gasf_matrix`] as an independent cross-check.
pub fn gasf_matrix_algebraic(values: &[f64]) -> Result<Vec<f64>, GasfError> {
    check_unit_range(values)?;
    let n = values.len();
    let x: Vec<f64> = values.iter().map(|&v| v.clamp(0.0, 1.0)).collect();
    let s: Vec<f64> = x.iter().map(|&v| (1.0 - v * v).max(0.0).sqrt()).collect();
    let mut matrix = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = x[i] * x[j] - s[i] * s[j];
            matrix[i * n + j] = v;
            matrix[j * n + i] = v;
        }
    }
    Ok(matrix)
}

/// Invert the diagonal law: `x_i = sqrt((1 + d_i) / 2)`, the unique value in
/// [0, 1] with `2 x_i^2 - 1 = d_i` (equivalently `cos(arccos(d_i) / 2)`).
pub fn decode_diagonal(diag: &[f64]) -> Result<Vec<f64>, GasfError> {
    for (index, &value) in diag.iter().enumerate() {
        if !value.is_finite() || value < -1.0 - DOMAIN_TOL || value > 1.0 + DOMAIN_TOL {
            return Err(GasfError::OutOfDiagonalRange { index, value });
        }
    }
    Ok(diag.iter().map(|&d| ((1.0 + d.clamp(-1.0, 1.0)) / 2.0).sqrt()).collect())
}

/// Encode all four channels of a normalized series.
pub fn encode(series: &NormalizedSeries) -> Result<GasfTensor, GasfError> {
    let mut channels = [[[0.0; WINDOW_LEN]; WINDOW_LEN]; CHANNEL_COUNT];
    for (out, values) in channels.iter_mut().zip(&series.channels) {
        let flat = gasf_matrix(values)?;
        for (i, row) in out.iter_mut().enumerate() {
            row.copy_from_slice(&flat[i * WINDOW_LEN..(i + 1) * WINDOW_LEN]);
        }
    }
    Ok(GasfTensor { channels, norm: series.norm })
}

/// Normalize then encode in one step.
pub fn encode_window(window: &Window) -> Result<GasfTensor, GasfError> {
    encode(&normalize(window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::OhlcBar;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window_from_closes(closes: &[f64; WINDOW_LEN], spread: f64) -> Window {
        let bars = closes
            .iter()
            .map(|&c| OhlcBar::new(c - spread, c + 2.0 * spread, c - 2.0 * spread, c, None).unwrap())
            .collect();
        Window::new(bars).unwrap()
    }

    /// Random window with tick-quantized prices, mirroring real market data.
    fn random_window(rng: &mut ChaCha8Rng) -> Window {
        let tick = 1e-5;
        let base = 1.0 + rng.gen_range(-0.2..0.2f64);
        let bars = (0..WINDOW_LEN)
            .map(|_| {
                let snap = |p: f64| (p / tick).round() * tick;
                let open = snap(base * (1.0 + rng.gen_range(-0.01..0.01)));
                let close = snap(base * (1.0 + rng.gen_range(-0.01..0.01)));
                let high = snap(open.max(close) + base * rng.gen_range(0.0..0.005) + tick);
                let low = snap(open.min(close) - base * rng.gen_range(0.0..0.005) - tick);
                OhlcBar::new(open, high, low, close, None).unwrap()
            })
            .collect();
        Window::new(bars).unwrap()
    }

    #[test]
    fn normalize_maps_extremes_to_unit_interval() {
        // joint min 1, max 3 across the window: lows hit 1, highs hit 3
        let bars: Vec<OhlcBar> = (0..WINDOW_LEN)
            .map(|_| OhlcBar::new(1.5, 3.0, 1.0, 2.0, None).unwrap())
            .collect();
        let series = normalize(&Window::new(bars).unwrap());
        for i in 0..WINDOW_LEN {
            assert_eq!(series.channel(Channel::Low)[i], 0.0);
            assert_eq!(series.channel(Channel::High)[i], 1.0);
            assert_eq!(series.channel(Channel::Open)[i], 0.25);
            assert_eq!(series.channel(Channel::Close)[i], 0.5);
        }
        assert!(!series.norm_record().degenerate);
    }

    #[test]
    fn normalize_flat_window_is_degenerate_midpoint() {
        let bars: Vec<OhlcBar> =
            (0..WINDOW_LEN).map(|_| OhlcBar::new(2.0, 2.0, 2.0, 2.0, None).unwrap()).collect();
        let series = normalize(&Window::new(bars).unwrap());
        assert!(series.norm_record().degenerate);
        for channel in Channel::ALL {
            assert!(series.channel(channel).iter().all(|&x| x == 0.5));
        }
        assert!(matches!(denormalize(&series), Err(GasfError::DegenerateRecord)));
    }

    #[test]
    fn normalize_denormalize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let window = random_window(&mut rng);
            let recovered = denormalize(&normalize(&window)).unwrap();
            for (a, b) in window.bars().iter().zip(recovered.bars()) {
                for (pa, pb) in
                    [(a.open, b.open), (a.high, b.high), (a.low, b.low), (a.close, b.close)]
                {
                    assert!((pa - pb).abs() <= 1e-9 * pa.abs(), "{pa} vs {pb}");
                }
            }
        }
    }

    #[test]
    fn encode_boundary_values() {
        assert_eq!(gasf_matrix(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(gasf_matrix(&[0.0]).unwrap(), vec![-1.0]);

        let m = gasf_matrix(&[1.0, 0.0]).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-15); // cos(0 + 0)
        assert!(m[1].abs() < 1e-15); // cos(0 + pi/2)
        assert!(m[2].abs() < 1e-15);
        assert!((m[3] + 1.0).abs() < 1e-15); // cos(pi)
    }

    #[test]
    fn encode_rejects_out_of_domain() {
        assert!(matches!(
            gasf_matrix(&[0.5, 1.1]),
            Err(GasfError::OutOfUnitRange { index: 1, .. })
        ));
        assert!(gasf_matrix(&[0.5, 1.0 + 1e-13]).is_ok()); // inside tolerance
    }

    #[test]
    fn trig_and_algebraic_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let values: Vec<f64> = (0..WINDOW_LEN).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let a = gasf_matrix(&values).unwrap();
            let b = gasf_matrix_algebraic(&values).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn diagonal_law_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let values: Vec<f64> = (0..WINDOW_LEN).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let m = gasf_matrix(&values).unwrap();
            for (i, &x) in values.iter().enumerate() {
                let expected = 2.0 * x * x - 1.0;
                assert!((m[i * WINDOW_LEN + i] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_diagonal_closed_forms() {
        assert_eq!(decode_diagonal(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(decode_diagonal(&[-1.0]).unwrap(), vec![0.0]);
        let x = decode_diagonal(&[-0.5]).unwrap()[0];
        assert!((x - 0.5).abs() < 1e-15);
        assert!(matches!(
            decode_diagonal(&[0.0, -1.01]),
            Err(GasfError::OutOfDiagonalRange { index: 1, .. })
        ));
    }

    #[test]
    fn decode_matches_half_angle_route() {
        // independent route: x = cos(arccos(d) / 2)
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let d: f64 = rng.gen_range(-1.0..=1.0);
            let ours = decode_diagonal(&[d]).unwrap()[0];
            let trig = (d.acos() / 2.0).cos();
            assert!((ours - trig).abs() < 1e-12, "d={d}: {ours} vs {trig}");
        }
    }

    #[test]
    fn window_encode_decode_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let window = random_window(&mut rng);
            let series = normalize(&window);
            let tensor = encode(&series).unwrap();
            let decoded = tensor.decode().unwrap();
            for channel in Channel::ALL {
                for (a, b) in series.channel(channel).iter().zip(decoded.channel(channel)) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn tensor_entries_symmetric_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let tensor = encode_window(&random_window(&mut rng)).unwrap();
            for channel in Channel::ALL {
                let m = tensor.channel(channel);
                for i in 0..WINDOW_LEN {
                    for j in 0..WINDOW_LEN {
                        assert_eq!(m[i][j], m[j][i], "exact symmetry at ({i},{j})");
                        assert!((-1.0..=1.0).contains(&m[i][j]));
                    }
                }
            }
        }
    }

    #[test]
    fn denormalize_repairs_ohlc_ordering() {
        // close pushed above high: repair lifts high to cover it
        let mut channels = [[0.5; WINDOW_LEN]; CHANNEL_COUNT];
        channels[Channel::High.index()] = [0.6; WINDOW_LEN];
        channels[Channel::Low.index()] = [0.4; WINDOW_LEN];
        channels[Channel::Close.index()] = [0.9; WINDOW_LEN];
        let series =
            NormalizedSeries::new(channels, NormRecord { min: 1.0, max: 2.0, degenerate: false })
                .unwrap();
        let window = denormalize(&series).unwrap();
        for bar in window.bars() {
            assert_eq!(bar.close, bar.high, "high must be raised to the close");
            assert!(bar.low <= bar.open.min(bar.close));
        }
    }

    #[test]
    fn denormalize_known_values() {
        // x = [0, 0.5, 1] with record (1, 3) -> prices [1, 2, 3]
        let mut closes = [0.5; WINDOW_LEN];
        closes[0] = 1.0;
        closes[1] = 2.0;
        closes[2] = 3.0;
        for slot in closes.iter_mut().skip(3) {
            *slot = 2.0;
        }
        let window = window_from_closes(&closes, 0.0);
        // direct check of the affine inverse on a handmade series
        let mut channels = [[0.0; WINDOW_LEN]; CHANNEL_COUNT];
        for ch in channels.iter_mut() {
            ch[1] = 0.5;
            ch[2] = 1.0;
        }
        let series =
            NormalizedSeries::new(channels, NormRecord { min: 1.0, max: 3.0, degenerate: false })
                .unwrap();
        let out = denormalize(&series).unwrap();
        assert_eq!(out.bars()[0].close, 1.0);
        assert_eq!(out.bars()[1].close, 2.0);
        assert_eq!(out.bars()[2].close, 3.0);
        drop(window);
    }

    proptest! {
        /// decode then re-apply the diagonal law: the round trip holds on a
        /// 1e-4 grid (market prices are tick-quantized, so normalized values
        /// never crowd the representability limit near the endpoints).
        #[test]
        fn prop_diagonal_round_trip(steps in proptest::collection::vec(0u32..=10_000, 1..=10)) {
            let values: Vec<f64> = steps.iter().map(|&k| k as f64 / 10_000.0).collect();
            let m = gasf_matrix(&values).unwrap();
            let n = values.len();
            let diag: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
            let decoded = decode_diagonal(&diag).unwrap();
            for (a, b) in values.iter().zip(&decoded) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        /// Strict monotonicity of the diagonal decode for separated inputs.
        #[test]
        fn prop_decode_monotone(a in -1.0f64..1.0, gap in 1e-9f64..0.5) {
            let b = (a + gap).min(1.0);
            prop_assume!(b > a);
            let xa = decode_diagonal(&[a]).unwrap()[0];
            let xb = decode_diagonal(&[b]).unwrap()[0];
            prop_assert!(xa < xb, "decode({a})={xa} !< decode({b})={xb}");
        }

        /// Symmetry and range over arbitrary unit-interval series.
        #[test]
        fn prop_symmetry_and_range(values in proptest::collection::vec(0.0f64..=1.0, 2..=10)) {
            let n = values.len();
            let m = gasf_matrix(&values).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(m[i * n + j], m[j * n + i]);
                    prop_assert!((-1.0 - 1e-15..=1.0 + 1e-15).contains(&m[i * n + j]));
                }
            }
        }
    }
}
