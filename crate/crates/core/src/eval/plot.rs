//! Dependency-free SVG emission for anomaly-score time series and
//! representativeness 2D histograms.

/// Line plot of per-window anomaly scores with the model threshold drawn as
/// a horizontal dotted line and incident-containing windows shaded.
pub fn score_plot_svg(
    title: &str,
    scores: &[f64],
    threshold: f64,
    incident_windows: &[bool],
) -> String {
    let (w, h) = (900.0, 300.0);
    let (ml, mr, mt, mb) = (60.0, 15.0, 30.0, 35.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let n = scores.len().max(1);
    let max_y = scores
        .iter()
        .copied()
        .fold(threshold, f64::max)
        .max(1e-12)
        * 1.05;
    let x_of = |i: usize| ml + pw * i as f64 / (n.max(2) - 1) as f64;
    let y_of = |v: f64| mt + ph * (1.0 - (v / max_y).clamp(0.0, 1.0));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        ml,
        xml_escape(title)
    ));

    // incident shading
    let mut i = 0;
    while i < incident_windows.len() {
        if incident_windows[i] {
            let start = i;
            while i < incident_windows.len() && incident_windows[i] {
                i += 1;
            }
            let x0 = x_of(start);
            let x1 = x_of(i.saturating_sub(1)).max(x0 + 1.0);
            svg.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{mt}\" width=\"{:.1}\" height=\"{ph}\" fill=\"#d62728\" opacity=\"0.15\"/>\n",
                x0,
                x1 - x0
            ));
        } else {
            i += 1;
        }
    }

    // axes
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        mt + ph
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        mt + ph,
        ml + pw,
        mt + ph
    ));
    svg.push_str(&format!(
        "<text x=\"8\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{:.3}</text>\n",
        mt + 10.0,
        max_y
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">window</text>\n",
        ml + pw / 2.0,
        h - 8.0
    ));

    // score polyline
    if !scores.is_empty() {
        let mut points = String::new();
        for (i, s) in scores.iter().enumerate() {
            points.push_str(&format!("{:.1},{:.1} ", x_of(i), y_of(*s)));
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n",
            points.trim_end()
        ));
    }

    // threshold line (dotted red)
    let ty = y_of(threshold);
    svg.push_str(&format!(
        "<line id=\"threshold\" x1=\"{ml}\" y1=\"{ty:.1}\" x2=\"{:.1}\" y2=\"{ty:.1}\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\"/>\n",
        ml + pw
    ));
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">T = {:.4}</text>\n",
        ml + pw - 110.0,
        (ty - 4.0).max(mt + 10.0),
        threshold
    ));
    svg.push_str("</svg>\n");
    svg
}

/// A row of 2D density histograms over the same axes, one panel per named
/// point set (e.g. full training vs scarce training vs test).
pub fn histogram2d_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    panels: &[(String, Vec<(f64, f64)>)],
) -> String {
    const BINS: usize = 40;
    let panel_w = 240.0;
    let panel_h = 240.0;
    let gap = 30.0;
    let ml = 60.0;
    let mt = 46.0;
    let w = ml + panels.len() as f64 * (panel_w + gap);
    let h = mt + panel_h + 50.0;

    // shared axis ranges over all panels
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in panels {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !(xmax > xmin) {
        xmax = xmin + 1.0;
    }
    if !(ymax > ymin) {
        ymax = ymin + 1.0;
    }

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{ml}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        xml_escape(title)
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 {:.0})\">{}</text>\n",
        mt + panel_h / 2.0,
        mt + panel_h / 2.0,
        xml_escape(y_label)
    ));

    for (pi, (name, pts)) in panels.iter().enumerate() {
        let ox = ml + pi as f64 * (panel_w + gap);
        let mut counts = vec![0usize; BINS * BINS];
        for &(x, y) in pts {
            let bx = (((x - xmin) / (xmax - xmin)) * BINS as f64) as usize;
            let by = (((y - ymin) / (ymax - ymin)) * BINS as f64) as usize;
            counts[by.min(BINS - 1) * BINS + bx.min(BINS - 1)] += 1;
        }
        let max_c = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        let cell_w = panel_w / BINS as f64;
        let cell_h = panel_h / BINS as f64;
        for by in 0..BINS {
            for bx in 0..BINS {
                let c = counts[by * BINS + bx];
                if c == 0 {
                    continue;
                }
                // log-scaled blue intensity
                let intensity = ((c as f64).ln_1p() / max_c.ln_1p()).clamp(0.05, 1.0);
                let shade = (255.0 - intensity * 205.0) as u8;
                svg.push_str(&format!(
                    "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb({shade},{shade},255)\"/>\n",
                    ox + bx as f64 * cell_w,
                    mt + panel_h - (by as f64 + 1.0) * cell_h,
                    cell_w + 0.2,
                    cell_h + 0.2,
                ));
            }
        }
        svg.push_str(&format!(
            "<rect x=\"{ox:.1}\" y=\"{mt:.1}\" width=\"{panel_w}\" height=\"{panel_h}\" fill=\"none\" stroke=\"black\"/>\n"
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{} ({} pts)</text>\n",
            ox,
            mt - 6.0,
            xml_escape(name),
            pts.len()
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            ox + panel_w / 2.0 - 30.0,
            mt + panel_h + 24.0,
            xml_escape(x_label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_plot_contains_threshold_line_and_shading() {
        let scores = vec![0.1, 0.2, 0.5, 0.3, 0.9, 0.2];
        let incidents = vec![false, false, true, true, false, false];
        let svg = score_plot_svg("demo", &scores, 0.4, &incidents);
        assert!(svg.contains("id=\"threshold\""));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("opacity=\"0.15\""), "incident shading present");
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn histogram_renders_panels() {
        let pts: Vec<(f64, f64)> = (0..500).map(|i| ((i % 37) as f64, (i % 23) as f64)).collect();
        let svg = histogram2d_svg(
            "rotor temp vs rotor speed",
            "rotor speed",
            "rotor temp",
            &[("full".into(), pts.clone()), ("scarce".into(), pts)],
        );
        assert!(svg.matches("<rect").count() > 10);
        assert!(svg.contains("full (500 pts)"));
    }
}
