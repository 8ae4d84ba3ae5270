//! Deterministic SVG rendering of explanations.
//!
//! Attributions are drawn as a heatmap of per-timestep background cells
//! under the channel's line plot, one row per channel. Signed scores use a
//! diverging blue-white-red map and unit scores a sequential white-red
//! map, so the two ranges cannot be confused. Counterfactuals overlay the
//! original and the counterfactual curve; for multivariate series only the
//! changed channels are drawn.
//!
//! Output is SVG 1.1 with every number printed to four decimals, so equal
//! inputs produce byte-identical documents.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::explanation::{Attribution, CounterfactualResult, RangeKind};
use crate::series::{ClassId, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const WHITE: Rgb = Rgb(0xFF, 0xFF, 0xFF);
    pub const BLUE: Rgb = Rgb(0x1F, 0x77, 0xB4);
    pub const RED: Rgb = Rgb(0xD6, 0x27, 0x28);
    pub const PINK: Rgb = Rgb(0xE3, 0x77, 0xC2);

    pub fn hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.0, self.1, self.2)
    }

    /// Linear interpolation from `self` (`f = 0`) to `other` (`f = 1`).
    pub fn mix(self, other: Rgb, f: f64) -> Rgb {
        let f = f.clamp(0.0, 1.0);
        let ch = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
        Rgb(
            ch(self.0, other.0),
            ch(self.1, other.1),
            ch(self.2, other.2),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    /// -1 blue, 0 white, +1 red.
    DivergingBlueWhiteRed,
    /// 0 white, 1 red.
    SequentialWhiteRed,
}

impl Colormap {
    /// The only map allowed for a range kind.
    pub fn for_range(kind: RangeKind) -> Colormap {
        match kind {
            RangeKind::Signed => Colormap::DivergingBlueWhiteRed,
            RangeKind::Unit => Colormap::SequentialWhiteRed,
        }
    }

    pub fn color(self, s: f64) -> Rgb {
        match self {
            Colormap::DivergingBlueWhiteRed if s < 0.0 => Rgb::WHITE.mix(Rgb::BLUE, -s),
            Colormap::DivergingBlueWhiteRed | Colormap::SequentialWhiteRed => {
                Rgb::WHITE.mix(Rgb::RED, s)
            }
        }
    }

    fn domain(self) -> (f64, f64) {
        match self {
            Colormap::DivergingBlueWhiteRed => (-1.0, 1.0),
            Colormap::SequentialWhiteRed => (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub width: f64,
    /// Height of one channel row.
    pub row_height: f64,
    /// `None` picks the map matching the attribution's range kind; a
    /// mismatching explicit choice is rejected.
    pub colormap: Option<Colormap>,
    pub original_color: Rgb,
    pub cf_color: Rgb,
    /// Shown in the counterfactual legend when known.
    pub original_label: Option<ClassId>,
}

impl Default for PlotStyle {
    fn default() -> Self {
        PlotStyle {
            width: 800.0,
            row_height: 160.0,
            colormap: None,
            original_color: Rgb::BLUE,
            cf_color: Rgb::PINK,
            original_label: None,
        }
    }
}

const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 110.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 20.0;
const ROW_GAP: f64 = 10.0;
const COLORBAR_STEPS: usize = 40;

/// Value-to-pixel mapping of one row.
struct RowFrame {
    x0: f64,
    plot_w: f64,
    y0: f64,
    plot_h: f64,
    lo: f64,
    hi: f64,
    len: usize,
}

impl RowFrame {
    fn new(style: &PlotStyle, row: usize, len: usize, values: &[&[f64]]) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.iter().flat_map(|r| r.iter()) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        RowFrame {
            x0: MARGIN_LEFT,
            plot_w: style.width - MARGIN_LEFT - MARGIN_RIGHT,
            y0: MARGIN_TOP + row as f64 * (style.row_height + ROW_GAP),
            plot_h: style.row_height,
            lo: lo - pad,
            hi: hi + pad,
            len,
        }
    }

    fn cell_w(&self) -> f64 {
        self.plot_w / self.len as f64
    }

    /// Center of timestep `t`.
    fn x(&self, t: usize) -> f64 {
        self.x0 + (t as f64 + 0.5) * self.cell_w()
    }

    fn y(&self, v: f64) -> f64 {
        self.y0 + self.plot_h * (self.hi - v) / (self.hi - self.lo)
    }

    fn polyline(&self, values: &[f64], color: Rgb, class: &str) -> String {
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(t, v)| format!("{:.4},{:.4}", self.x(t), self.y(*v)))
            .collect();
        format!(
            "<polyline class=\"{class}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5000\" points=\"{}\"/>",
            color.hex(),
            points.join(" ")
        )
    }

    fn frame(&self, label: &str) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "<rect class=\"frame\" x=\"{:.4}\" y=\"{:.4}\" width=\"{:.4}\" height=\"{:.4}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.5000\"/>",
            self.x0, self.y0, self.plot_w, self.plot_h
        )
        .unwrap();
        writeln!(
            s,
            "<text x=\"{:.4}\" y=\"{:.4}\" font-size=\"12.0000\" text-anchor=\"end\">{label}</text>",
            self.x0 - 6.0,
            self.y0 + self.plot_h / 2.0
        )
        .unwrap();
        for v in [self.hi, self.lo] {
            writeln!(
                s,
                "<text x=\"{:.4}\" y=\"{:.4}\" font-size=\"9.0000\" text-anchor=\"end\">{:.2}</text>",
                self.x0 - 6.0,
                self.y(v) + if v == self.hi { 9.0 } else { -2.0 },
                v
            )
            .unwrap();
        }
        s
    }
}

fn open_svg(width: f64, height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.4}\" height=\"{height:.4}\" viewBox=\"0 0 {width:.4} {height:.4}\" font-family=\"sans-serif\">\n<rect class=\"background\" x=\"0.0000\" y=\"0.0000\" width=\"{width:.4}\" height=\"{height:.4}\" fill=\"#FFFFFF\"/>\n"
    )
}

fn total_height(style: &PlotStyle, rows: usize) -> f64 {
    MARGIN_TOP + MARGIN_BOTTOM + rows as f64 * style.row_height + (rows - 1) as f64 * ROW_GAP
}

fn colorbar(style: &PlotStyle, map: Colormap, height: f64) -> String {
    let (lo, hi) = map.domain();
    let x = style.width - MARGIN_RIGHT + 30.0;
    let bar_w = 16.0;
    let top = MARGIN_TOP;
    let bar_h = height - MARGIN_TOP - MARGIN_BOTTOM;
    let step_h = bar_h / COLORBAR_STEPS as f64;
    let mut s = String::from("<g class=\"colorbar\">\n");
    for i in 0..COLORBAR_STEPS {
        // top of the bar is the high end
        let v = hi - (i as f64 + 0.5) / COLORBAR_STEPS as f64 * (hi - lo);
        writeln!(
            s,
            "<rect x=\"{x:.4}\" y=\"{:.4}\" width=\"{bar_w:.4}\" height=\"{step_h:.4}\" fill=\"{}\"/>",
            top + i as f64 * step_h,
            map.color(v).hex()
        )
        .unwrap();
    }
    writeln!(
        s,
        "<rect x=\"{x:.4}\" y=\"{top:.4}\" width=\"{bar_w:.4}\" height=\"{bar_h:.4}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.5000\"/>"
    )
    .unwrap();
    for k in 0..=4 {
        let v = hi - k as f64 / 4.0 * (hi - lo);
        let y = top + k as f64 / 4.0 * bar_h;
        writeln!(
            s,
            "<line x1=\"{:.4}\" y1=\"{y:.4}\" x2=\"{:.4}\" y2=\"{y:.4}\" stroke=\"#000000\" stroke-width=\"0.5000\"/>",
            x + bar_w,
            x + bar_w + 4.0
        )
        .unwrap();
        writeln!(
            s,
            "<text class=\"tick\" x=\"{:.4}\" y=\"{:.4}\" font-size=\"10.0000\">{v:.2}</text>",
            x + bar_w + 6.0,
            y + 3.5
        )
        .unwrap();
    }
    s.push_str("</g>\n");
    s
}

/// Heatmap of `a` under the line plot of `x`, one row per channel.
pub fn render_attribution(x: &Series, a: &Attribution, style: &PlotStyle) -> Result<String> {
    if a.shape() != x.shape() {
        return Err(Error::ShapeMismatch(0));
    }
    let kind = a.range_kind();
    let map = Colormap::for_range(kind);
    if style.colormap.is_some_and(|c| c != map) {
        return Err(Error::BadParams(format!(
            "{} attributions must use {map:?}",
            kind.as_str()
        )));
    }
    for d in 0..x.channels() {
        for (t, v) in a.row(d).iter().enumerate() {
            if !kind.contains(*v) {
                return Err(Error::RangeViolation {
                    channel: d,
                    timestep: t,
                    value: *v,
                });
            }
        }
    }

    let (channels, len) = x.shape();
    let height = total_height(style, channels);
    let mut svg = open_svg(style.width, height);
    writeln!(
        svg,
        "<text class=\"title\" x=\"{MARGIN_LEFT:.4}\" y=\"18.0000\" font-size=\"13.0000\">attribution ({})</text>",
        kind.as_str()
    )
    .unwrap();
    for d in 0..channels {
        let frame = RowFrame::new(style, d, len, &[x.row(d)]);
        writeln!(svg, "<g class=\"channel-row\" id=\"channel-{d}\">").unwrap();
        for (t, score) in a.row(d).iter().enumerate() {
            writeln!(
                svg,
                "<rect class=\"cell\" x=\"{:.4}\" y=\"{:.4}\" width=\"{:.4}\" height=\"{:.4}\" fill=\"{}\"/>",
                frame.x0 + t as f64 * frame.cell_w(),
                frame.y0,
                frame.cell_w(),
                frame.plot_h,
                map.color(*score).hex()
            )
            .unwrap();
        }
        svg.push_str(&frame.polyline(x.row(d), Rgb(0, 0, 0), "series"));
        svg.push('\n');
        svg.push_str(&frame.frame(&format!("ch {d}")));
        svg.push_str("</g>\n");
    }
    svg.push_str(&colorbar(style, map, height));
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Original versus counterfactual. Univariate series share one panel;
/// multivariate series get one row per changed channel.
pub fn render_counterfactual(
    x: &Series,
    r: &CounterfactualResult,
    style: &PlotStyle,
) -> Result<String> {
    if !r.cf.same_shape(x) || r.changed_channels.len() != x.channels() {
        return Err(Error::ShapeMismatch(0));
    }
    let rows: Vec<usize> = (0..x.channels())
        .filter(|&d| r.changed_channels[d])
        .collect();
    if rows.is_empty() {
        return Err(Error::NothingChanged);
    }

    let len = x.len();
    let height = total_height(style, rows.len());
    let mut svg = open_svg(style.width, height);
    for (i, &d) in rows.iter().enumerate() {
        let frame = RowFrame::new(style, i, len, &[x.row(d), r.cf.row(d)]);
        writeln!(svg, "<g class=\"channel-row\" id=\"channel-{d}\">").unwrap();
        svg.push_str(&frame.frame(&format!("ch {d}")));
        svg.push_str(&frame.polyline(x.row(d), style.original_color, "original"));
        svg.push('\n');
        svg.push_str(&frame.polyline(r.cf.row(d), style.cf_color, "counterfactual"));
        svg.push('\n');
        svg.push_str("</g>\n");
    }

    let original = match style.original_label {
        Some(c) => format!("original (class {c})"),
        None => "original".to_string(),
    };
    let entries = [
        (original, style.original_color),
        (
            format!("counterfactual (class {})", r.label),
            style.cf_color,
        ),
    ];
    svg.push_str("<g class=\"legend\">\n");
    for (k, (text, color)) in entries.iter().enumerate() {
        let x0 = MARGIN_LEFT + k as f64 * 220.0;
        writeln!(
            svg,
            "<line x1=\"{x0:.4}\" y1=\"14.0000\" x2=\"{:.4}\" y2=\"14.0000\" stroke=\"{}\" stroke-width=\"2.0000\"/>",
            x0 + 20.0,
            color.hex()
        )
        .unwrap();
        writeln!(
            svg,
            "<text x=\"{:.4}\" y=\"18.0000\" font-size=\"12.0000\">{text}</text>",
            x0 + 26.0
        )
        .unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}
