//! Static SVG of `|e_i(t)|` on a log axis, one polyline per node.

use std::fmt::Write as _;

use crate::output::ErrorTable;

/// Values below this are drawn at the floor.
pub const LOG_FLOOR: f64 = 1e-12;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
const MAX_POINTS: usize = 1500;

pub fn render_svg(table: &ErrorTable) -> String {
    let t0 = table.times[0];
    let t1 = *table.times.last().unwrap();
    let span = if t1 > t0 { t1 - t0 } else { 1.0 };
    let logs = |v: f64| v.abs().max(LOG_FLOOR).log10();
    let top = table
        .nodes
        .iter()
        .flatten()
        .map(|&v| logs(v))
        .fold(LOG_FLOOR.log10(), f64::max)
        .ceil()
        .max(LOG_FLOOR.log10() + 1.0);
    let bottom = LOG_FLOOR.log10();
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let x = |t: f64| MARGIN_L + (t - t0) / span * pw;
    let y = |v: f64| MARGIN_T + (top - logs(v)) / (top - bottom) * ph;
    let stride = table.times.len().div_ceil(MAX_POINTS).max(1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let mut decade = bottom as i32;
    while decade as f64 <= top {
        let yy = MARGIN_T + (top - decade as f64) / (top - bottom) * ph;
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{decade}</text>"##,
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            yy + 4.0
        );
        decade += 2;
    }
    for k in 0..=5 {
        let t = t0 + span * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{t:.3}</text>"#,
            x(t),
            HEIGHT - MARGIN_B + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">t (s)</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 8.0
    );
    let n = table.nodes.len();
    for (i, col) in table.nodes.iter().enumerate() {
        let hue = (360.0 * i as f64 / n.max(1) as f64).round();
        let _ = write!(s, r#"<polyline fill="none" stroke="hsl({hue},70%,40%)" stroke-width="1" points=""#);
        let mut first = true;
        let last = table.times.len() - 1;
        for k in (0..table.times.len()).filter(|&k| k % stride == 0 || k == last) {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{:.2},{:.2}", x(table.times[k]), y(col[k]));
        }
        let _ = writeln!(s, r#""><title>node {}</title></polyline>"#, i + 1);
    }
    s.push_str("</svg>\n");
    s
}
