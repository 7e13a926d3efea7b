//! Deterministic SVG rendering: candlestick panels and field heatmaps.
//!
//! No timestamps, no randomness: identical inputs produce identical bytes.
//! Coordinates are fixed-precision, colors come from a closed-form diverging
//! map, and text is XML-escaped.

use crate::gasf::GasfTensor;
use crate::market::{Channel, Window, WINDOW_LEN};
use crate::patterns::BarDirection;

const PANEL_W: f64 = 300.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 26.0;
const TITLE_H: f64 = 22.0;

fn esc(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}

/// Map [-1, 1] onto a blue-white-red diverging scale as "#rrggbb".
pub fn diverging_color(value: f64) -> String {
    let t = ((value.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    let (r, g, b) = if t < 0.5 {
        // #2166ac -> #f7f7f7
        let u = t / 0.5;
        (lerp(33.0, 247.0, u), lerp(102.0, 247.0, u), lerp(172.0, 247.0, u))
    } else {
        // #f7f7f7 -> #b2182b
        let u = (t - 0.5) / 0.5;
        (lerp(247.0, 178.0, u), lerp(247.0, 24.0, u), lerp(247.0, 43.0, u))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn panel_candles(window: &Window, title: &str, ox: f64) -> String {
    let (min, max) = window.price_range();
    let range = max - min;
    let (lo, span) = if range == 0.0 {
        (min - 0.5, 1.0) // flat window: center the line
    } else {
        (min - 0.05 * range, 1.1 * range)
    };
    let plot_h = PANEL_H - TITLE_H - 2.0 * MARGIN;
    let plot_w = PANEL_W - 2.0 * MARGIN;
    let y = |price: f64| TITLE_H + MARGIN + plot_h * (1.0 - (price - lo) / span);
    let slot = plot_w / WINDOW_LEN as f64;
    let body_w = slot * 0.6;

    let mut out = String::new();
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"16\" font-size=\"12\" font-family=\"monospace\">{}</text>\n",
        ox + MARGIN,
        esc(title)
    ));
    out.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#cccccc\"/>\n",
        ox + MARGIN,
        TITLE_H + MARGIN,
        plot_w,
        plot_h
    ));

    for (i, bar) in window.bars().iter().enumerate() {
        let cx = ox + MARGIN + slot * (i as f64 + 0.5);
        // wick spans low..high
        out.push_str(&format!(
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            y(bar.high),
            y(bar.low)
        ));
        let direction = crate::patterns::anatomy(bar).direction;
        match direction {
            BarDirection::Doji => {
                // zero-height body: a horizontal tick at the close
                out.push_str(&format!(
                    "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
                    cx - body_w / 2.0,
                    y(bar.close),
                    cx + body_w / 2.0,
                    y(bar.close)
                ));
            }
            BarDirection::White | BarDirection::Black => {
                let top = y(bar.open.max(bar.close));
                let bottom = y(bar.open.min(bar.close));
                let fill = if direction == BarDirection::White { "white" } else { "black" };
                out.push_str(&format!(
                    "<rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{body_w:.2}\" height=\"{:.2}\" fill=\"{fill}\" stroke=\"black\"/>\n",
                    cx - body_w / 2.0,
                    bottom - top
                ));
            }
        }
    }
    out
}

fn panel_heatmap(tensor: &GasfTensor, channel: Channel, title: &str, ox: f64) -> String {
    let plot_w = PANEL_W - 2.0 * MARGIN;
    let plot_h = PANEL_H - TITLE_H - 2.0 * MARGIN;
    let cell = (plot_w / WINDOW_LEN as f64).min(plot_h / WINDOW_LEN as f64);
    let matrix = tensor.channel(channel);

    let mut out = String::new();
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"16\" font-size=\"12\" font-family=\"monospace\">{}</text>\n",
        ox + MARGIN,
        esc(title)
    ));
    for (i, row) in matrix.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            let x = ox + MARGIN + cell * j as f64;
            let y = TITLE_H + MARGIN + cell * i as f64;
            // diagonal cells are outlined: they are the attackable region
            let stroke = if i == j { "black" } else { "none" };
            out.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{}\" stroke=\"{stroke}\"/>\n",
                diverging_color(value)
            ));
        }
    }
    out
}

fn document(width: f64, height: f64, provenance: &str, body: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width:.0} {height:.0}\" width=\"{width:.0}\" height=\"{height:.0}\">\n"
    ));
    if !provenance.is_empty() {
        out.push_str(&format!("<desc>{}</desc>\n", esc(provenance)));
    }
    out.push_str(body);
    out.push_str("</svg>\n");
    out
}

/// One candlestick panel: ten bars left (oldest) to right (newest), hollow
/// bodies when the close is above the open, filled when below, wicks from
/// low to high, and 5% vertical margin around the price range.
pub fn render_candles(window: &Window, annotation: &str) -> String {
    document(PANEL_W, PANEL_H, "", &panel_candles(window, annotation, 0.0))
}

/// One heatmap panel of the selected channel on the diverging [-1, 1] scale;
/// the ten diagonal cells are outlined.
pub fn render_gasf(tensor: &GasfTensor, channel: Channel, annotation: &str) -> String {
    document(PANEL_W, PANEL_H, "", &panel_heatmap(tensor, channel, annotation, 0.0))
}

/// What a comparison panel shows.
pub enum PanelContent<'a> {
    Candles(&'a Window),
    Heatmap(&'a GasfTensor, Channel),
}

/// A titled panel of a comparison figure.
pub struct Panel<'a> {
    pub content: PanelContent<'a>,
    pub title: String,
}

/// Side-by-side original/adversarial figure with a provenance block.
pub struct FigureSpec<'a> {
    pub left: Panel<'a>,
    pub right: Panel<'a>,
    pub provenance: String,
}

pub fn render_figure(spec: &FigureSpec) -> String {
    let mut body = String::new();
    for (panel, ox) in [(&spec.left, 0.0), (&spec.right, PANEL_W)] {
        match panel.content {
            PanelContent::Candles(window) => {
                body.push_str(&panel_candles(window, &panel.title, ox));
            }
            PanelContent::Heatmap(tensor, channel) => {
                body.push_str(&panel_heatmap(tensor, channel, &panel.title, ox));
            }
        }
    }
    document(2.0 * PANEL_W, PANEL_H, &spec.provenance, &body)
}
