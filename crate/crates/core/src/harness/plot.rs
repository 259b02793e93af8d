use std::fmt::Write as _;

use crate::agent::Outcome;

use super::{OutcomeLog, BLOCK_LEN};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#e6c200", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];

/// Per cell count, the fraction of `class` outcomes over the trailing
/// 40-episode window ending at each episode, averaged over trials.
pub fn trailing_mean_curves(log: &OutcomeLog, class: Outcome) -> Vec<(usize, Vec<f64>)> {
    log.cell_counts
        .iter()
        .map(|&cells| {
            let mut hits = vec![0usize; log.episodes];
            for trial in 0..log.trials {
                if let Some(rows) = log.trial(cells, trial) {
                    for (i, r) in rows.iter().enumerate() {
                        hits[i] += usize::from(r.result == class);
                    }
                }
            }
            let mut curve = Vec::with_capacity(log.episodes);
            let mut window = 0usize;
            for e in 0..log.episodes {
                window += hits[e];
                if e >= BLOCK_LEN {
                    window -= hits[e - BLOCK_LEN];
                }
                let n = (e + 1).min(BLOCK_LEN) * log.trials;
                curve.push(window as f64 / n as f64);
            }
            (cells, curve)
        })
        .collect()
}

/// Line chart of rate against episode, one polyline per cell count.
pub fn learning_curve_svg(title: &str, curves: &[(usize, Vec<f64>)]) -> String {
    let episodes = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(1).max(1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |e: usize| LEFT + plot_w * (e as f64 - 1.0) / ((episodes as f64 - 1.0).max(1.0));
    let y = |r: f64| TOP + plot_h * (1.0 - r);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    for i in 0..=4 {
        let r = i as f64 / 4.0;
        let yy = y(r);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{r:.2}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    let mut tick = BLOCK_LEN;
    let mut ticks = vec![1];
    while tick <= episodes {
        ticks.push(tick);
        tick += BLOCK_LEN;
    }
    for t in ticks {
        let xx = x(t);
        let _ = writeln!(
            s,
            r##"<line x1="{xx:.1}" y1="{:.1}" x2="{xx:.1}" y2="{:.1}" stroke="#000000"/><text x="{xx:.1}" y="{:.1}" text-anchor="middle">{t}</text>"##,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#000000"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">episode</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">rate (trailing {BLOCK_LEN}-episode mean)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (k, (cells, curve)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = curve
            .iter()
            .enumerate()
            .map(|(i, &r)| format!("{:.1},{:.1}", x(i + 1), y(r)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{cells} cells</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
