//! Minimal deterministic SVG plotting: fixed canvas, nice-number ticks,
//! polylines, shaded bands, and a small legend. Every coordinate is printed
//! with fixed precision so identical inputs yield identical bytes.

use std::fmt::Write;

pub(crate) const WIDTH: f64 = 800.0;
pub(crate) const HEIGHT: f64 = 500.0;

/// Plot box of a full-width figure: 10% margins on each side.
pub(crate) const FULL_VIEW: (f64, f64, f64, f64) = (80.0, 50.0, 720.0, 450.0);
/// Plot boxes of a two-panel figure.
pub(crate) const LEFT_VIEW: (f64, f64, f64, f64) = (80.0, 50.0, 390.0, 450.0);
pub(crate) const RIGHT_VIEW: (f64, f64, f64, f64) = (470.0, 50.0, 780.0, 450.0);

/// Fixed palette keyed by method name; unknown series get a neutral teal.
pub(crate) fn method_color(name: &str) -> &'static str {
    match name {
        "baseline" => "#1f77b4",
        "truncation" => "#d62728",
        "self_paced" => "#2ca02c",
        "one_shot" => "#9467bd",
        "step_e" => "#ff7f0e",
        "oracle" => "#7f7f7f",
        _ => "#17becf",
    }
}

/// Largest of 1, 2, 5 times a power of ten that stays at or below covering
/// `raw` intervals (the classic nice-step choice).
fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.abs().log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

/// Tick positions covering [min, max] at a 1-2-5 step, roughly `target` of
/// them. Assumes a nonempty range.
pub(crate) fn ticks(min: f64, max: f64, target: usize) -> Vec<f64> {
    let step = nice_step((max - min) / target.max(1) as f64);
    let eps = step * 1e-9;
    let first = ((min - eps) / step).ceil() as i64;
    let last = ((max + eps) / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_decimals(step: f64) -> usize {
    if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    }
}

/// Expand a data range slightly so curves do not hug the frame; degenerate
/// ranges get a symmetric pad of one half unit.
pub(crate) fn padded_range(min: f64, max: f64) -> (f64, f64) {
    if max > min {
        let pad = (max - min) * 0.05;
        (min - pad, max + pad)
    } else {
        (min - 0.5, max + 0.5)
    }
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

pub(crate) struct Panel {
    view: (f64, f64, f64, f64),
    x_range: (f64, f64),
    y_range: (f64, f64),
    x_label: String,
    y_label: String,
    title: String,
    clip_id: String,
    shapes: String,
    legend: Vec<(String, &'static str, bool)>,
}

impl Panel {
    pub(crate) fn new(
        index: usize,
        view: (f64, f64, f64, f64),
        x_range: (f64, f64),
        y_range: (f64, f64),
        title: &str,
        x_label: &str,
        y_label: &str,
    ) -> Panel {
        Panel {
            view,
            x_range,
            y_range,
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            title: title.to_string(),
            clip_id: format!("plot{index}"),
            shapes: String::new(),
            legend: Vec::new(),
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (left, top, right, bottom) = self.view;
        let fx = (x - self.x_range.0) / (self.x_range.1 - self.x_range.0);
        let fy = (y - self.y_range.0) / (self.y_range.1 - self.y_range.0);
        (left + fx * (right - left), bottom - fy * (bottom - top))
    }

    /// Add a data polyline; a lone point becomes a visible dot instead.
    pub(crate) fn polyline(&mut self, points: &[(f64, f64)], color: &str, dashed: bool) {
        if points.is_empty() {
            return;
        }
        if points.len() == 1 {
            let (cx, cy) = self.map(points[0].0, points[0].1);
            let _ = write!(
                self.shapes,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\" \
                 clip-path=\"url(#{})\"/>",
                px(cx),
                px(cy),
                self.clip_id
            );
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| {
                let (cx, cy) = self.map(x, y);
                format!("{},{}", px(cx), px(cy))
            })
            .collect();
        let dash = if dashed {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        let _ = write!(
            self.shapes,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
             stroke-width=\"1.8\"{dash} clip-path=\"url(#{})\"/>",
            coords.join(" "),
            self.clip_id
        );
    }

    /// Shade the region between two curves sharing the same x values.
    pub(crate) fn band(&mut self, xs: &[f64], low: &[f64], high: &[f64], color: &str) {
        if xs.len() < 2 || xs.len() != low.len() || xs.len() != high.len() {
            return;
        }
        let mut coords = Vec::with_capacity(xs.len() * 2);
        for (&x, &y) in xs.iter().zip(high) {
            let (cx, cy) = self.map(x, y);
            coords.push(format!("{},{}", px(cx), px(cy)));
        }
        for (&x, &y) in xs.iter().zip(low).rev() {
            let (cx, cy) = self.map(x, y);
            coords.push(format!("{},{}", px(cx), px(cy)));
        }
        let _ = write!(
            self.shapes,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.18\" \
             stroke=\"none\" clip-path=\"url(#{})\"/>",
            coords.join(" "),
            self.clip_id
        );
    }

    pub(crate) fn legend_entry(&mut self, label: &str, color: &'static str, dashed: bool) {
        self.legend.push((label.to_string(), color, dashed));
    }

    pub(crate) fn render(&self, out: &mut String) {
        let (left, top, right, bottom) = self.view;
        let _ = write!(
            out,
            "<clipPath id=\"{}\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>",
            self.clip_id,
            px(left),
            px(top),
            px(right - left),
            px(bottom - top)
        );

        // Grid and ticks.
        let x_ticks = ticks(self.x_range.0, self.x_range.1, 8);
        let y_ticks = ticks(self.y_range.0, self.y_range.1, 8);
        let xd = tick_decimals(if x_ticks.len() > 1 {
            x_ticks[1] - x_ticks[0]
        } else {
            1.0
        });
        let yd = tick_decimals(if y_ticks.len() > 1 {
            y_ticks[1] - y_ticks[0]
        } else {
            1.0
        });
        for &tx in &x_ticks {
            let (cx, _) = self.map(tx, self.y_range.0);
            let _ = write!(
                out,
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#dddddd\" stroke-width=\"0.7\"/>\
                 <line x1=\"{0}\" y1=\"{2}\" x2=\"{0}\" y2=\"{3}\" stroke=\"#333333\" stroke-width=\"1\"/>\
                 <text x=\"{0}\" y=\"{4}\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"11\" \
                 fill=\"#333333\" text-anchor=\"middle\">{5:.6$}</text>",
                px(cx),
                px(top),
                px(bottom),
                px(bottom + 5.0),
                px(bottom + 18.0),
                tx,
                xd
            );
        }
        for &ty in &y_ticks {
            let (_, cy) = self.map(self.x_range.0, ty);
            let _ = write!(
                out,
                "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#dddddd\" stroke-width=\"0.7\"/>\
                 <line x1=\"{3}\" y1=\"{2}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333333\" stroke-width=\"1\"/>\
                 <text x=\"{4}\" y=\"{5}\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"11\" \
                 fill=\"#333333\" text-anchor=\"end\">{6:.7$}</text>",
                px(left),
                px(right),
                px(cy),
                px(left - 5.0),
                px(left - 8.0),
                px(cy + 4.0),
                ty,
                yd
            );
        }

        // Frame on the data side.
        let _ = write!(
            out,
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333333\" stroke-width=\"1\"/>\
             <line x1=\"{0}\" y1=\"{2}\" x2=\"{3}\" y2=\"{2}\" stroke=\"#333333\" stroke-width=\"1\"/>",
            px(left),
            px(top),
            px(bottom),
            px(right)
        );

        // Axis labels and title.
        let _ = write!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\" \
             fill=\"#111111\" text-anchor=\"middle\">{}</text>",
            px((left + right) / 2.0),
            px(bottom + 36.0),
            self.x_label
        );
        let _ = write!(
            out,
            "<text x=\"{0}\" y=\"{1}\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\" \
             fill=\"#111111\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>",
            px(left - 48.0),
            px((top + bottom) / 2.0),
            self.y_label
        );
        if !self.title.is_empty() {
            let _ = write!(
                out,
                "<text x=\"{}\" y=\"{}\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"13\" \
                 fill=\"#111111\" text-anchor=\"middle\">{}</text>",
                px((left + right) / 2.0),
                px(top - 14.0),
                self.title
            );
        }

        out.push_str(&self.shapes);

        // Legend in the top-right corner of the plot box.
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let y = top + 16.0 + i as f64 * 16.0;
            let x1 = right - 150.0;
            let dash = if *dashed {
                " stroke-dasharray=\"6,4\""
            } else {
                ""
            };
            let _ = write!(
                out,
                "<line x1=\"{}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\
                 <text x=\"{3}\" y=\"{4}\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"11\" \
                 fill=\"#333333\">{label}</text>",
                px(x1),
                px(y),
                px(x1 + 20.0),
                px(x1 + 26.0),
                px(y + 4.0)
            );
        }
    }
}

/// Assemble panels into one standalone SVG document.
pub(crate) fn document(panels: &[Panel]) -> String {
    let mut out = String::with_capacity(4096);
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\
         <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );
    for panel in panels {
        panel.render(&mut out);
    }
    out.push_str("</svg>\n");
    out
}
