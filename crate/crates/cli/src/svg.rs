//! Minimal SVG plots for sweep results.

use std::fmt::Write as _;

use offsetcal::simulator::SweepResult;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

fn header(s: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
}

/// Diverging blue-white-red around 0.5, clamped to [0.4, 0.6].
fn delta_color(delta: f64) -> String {
    let t = ((delta - 0.5) / 0.1).clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let u = -t;
        (255.0 * (1.0 - u), 255.0 * (1.0 - 0.6 * u), 255.0)
    } else {
        (255.0, 255.0 * (1.0 - 0.6 * t), 255.0 * (1.0 - t))
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Heatmap of the average/single trace ratio over the `(N, K)` grid.
pub fn delta_heatmap(result: &SweepResult, title: &str) -> String {
    let mut ns: Vec<usize> = result.cells.iter().map(|c| c.n_sensors).collect();
    let mut ks: Vec<usize> = result.cells.iter().map(|c| c.n_measurements).collect();
    ns.dedup();
    ks.sort_unstable();
    ks.dedup();
    ns.sort_unstable();
    ns.dedup();
    let cell = 48.0;
    let (left, top) = (60.0, 40.0);
    let width = left + cell * ks.len() as f64 + 20.0;
    let height = top + cell * ns.len() as f64 + 50.0;
    let mut s = String::new();
    header(&mut s, width, height);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"20\" {FONT}>{title}</text>");
    for c in &result.cells {
        let col = ks.iter().position(|&k| k == c.n_measurements).unwrap_or(0) as f64;
        let row = ns.iter().position(|&n| n == c.n_sensors).unwrap_or(0) as f64;
        let (x, y) = (left + col * cell, top + row * cell);
        let _ = writeln!(
            s,
            "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"{}\" stroke=\"#888\"/>",
            delta_color(c.delta_hat)
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{:.3}</text>",
            x + cell / 2.0,
            y + cell / 2.0 + 4.0,
            c.delta_hat
        );
    }
    for (i, k) in ks.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{k}</text>",
            left + (i as f64 + 0.5) * cell,
            top + cell * ns.len() as f64 + 16.0
        );
    }
    for (i, n) in ns.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>{n}</text>",
            left - 6.0,
            top + (i as f64 + 0.5) * cell + 4.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>K (measurements)</text>",
        left + cell * ks.len() as f64 / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\" {FONT}>N (sensors)</text>",
        top + cell * ns.len() as f64 / 2.0,
        top + cell * ns.len() as f64 / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Sensors,
    Measurements,
}

/// Log-scale trace curves against `N` or `K`: markers for the empirical
/// traces, lines for the bounds.
pub fn trace_lines(result: &SweepResult, axis: XAxis, title: &str) -> String {
    let xs: Vec<f64> = result
        .cells
        .iter()
        .map(|c| match axis {
            XAxis::Sensors => c.n_sensors as f64,
            XAxis::Measurements => c.n_measurements as f64,
        })
        .collect();
    type Pick = fn(&offsetcal::simulator::CellRecord) -> f64;
    let series: [(&str, &str, bool, Pick); 4] = [
        ("empirical single", "#d62728", false, |c| c.empirical_trace_single),
        ("empirical average", "#1f77b4", false, |c| c.empirical_trace_average),
        ("ccrb single", "#d62728", true, |c| c.ccrb_trace_single),
        ("ccrb average", "#1f77b4", true, |c| c.ccrb_trace_average),
    ];
    let all: Vec<f64> = result
        .cells
        .iter()
        .flat_map(|c| series.iter().map(move |s| (s.3)(c)))
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    let ylo = all.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
    let mut yhi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
    if yhi <= ylo {
        yhi = ylo + 1.0;
    }
    let xlo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut xhi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xhi <= xlo {
        xhi = xlo + 1.0;
    }

    let (left, top, pw, ph) = (70.0, 40.0, 420.0, 280.0);
    let px = |x: f64| left + (x - xlo) / (xhi - xlo) * pw;
    let py = |v: f64| top + (yhi - v.max(1e-300).log10()) / (yhi - ylo) * ph;

    let mut s = String::new();
    header(&mut s, left + pw + 170.0, top + ph + 50.0);
    let _ = writeln!(s, "<text x=\"{left}\" y=\"20\" {FONT}>{title}</text>");
    let _ = writeln!(
        s,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
    );
    let mut e = ylo as i32;
    while e as f64 <= yhi {
        let y = py(10f64.powi(e));
        let _ = writeln!(
            s,
            "<line x1=\"{left}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>",
            left + pw
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" {FONT}>1e{e}</text>",
            left - 6.0,
            y + 4.0
        );
        e += 1;
    }
    let mut ticks = xs.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{x}</text>",
            px(x),
            top + ph + 16.0
        );
    }
    let label = match axis {
        XAxis::Sensors => "N (sensors)",
        XAxis::Measurements => "K (measurements)",
    };
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" {FONT}>{label}</text>",
        left + pw / 2.0,
        top + ph + 40.0
    );

    for (i, (name, color, is_line, pick)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = result
            .cells
            .iter()
            .zip(&xs)
            .map(|(c, &x)| (px(x), py(pick(c))))
            .collect();
        if *is_line {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.join(" ")
            );
        } else {
            for (x, y) in &pts {
                let _ = writeln!(
                    s,
                    "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"none\" stroke=\"{color}\"/>"
                );
            }
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 15.0;
        if *is_line {
            let _ = writeln!(
                s,
                "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                lx + 20.0
            );
        } else {
            let _ = writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{ly}\" r=\"3\" fill=\"none\" stroke=\"{color}\"/>",
                lx + 10.0
            );
        }
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" {FONT}>{name}</text>", lx + 26.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
