//! Self-contained SVG heatmaps. Colours come from a fixed nine-stop
//! viridis table, interpolated linearly; the lowest value maps to dark
//! purple and the highest to yellow.

use std::fmt::Write as _;

const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

/// Colour for `t` in [0, 1] (clamped).
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    std::array::from_fn(|k| (a[k] as f64 + f * (b[k] as f64 - a[k] as f64)).round() as u8)
}

/// Heatmap of `values[row][col]`; row 0 is drawn at the bottom.
pub fn heatmap(values: &[Vec<f64>], title: &str, x_label: &str, y_label: &str) -> String {
    const CELL: f64 = 12.0;
    const MARGIN: f64 = 50.0;
    let rows = values.len();
    let cols = values.first().map_or(0, Vec::len);
    let (lo, hi) = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (cols as f64 * CELL + 2.0 * MARGIN, rows as f64 * CELL + 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let [red, green, blue] = colormap((v - lo) / scale);
            let x = MARGIN + c as f64 * CELL;
            let y = MARGIN + (rows - 1 - r) as f64 * CELL;
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({red},{green},{blue})"/>"#
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10">min {lo:.3} max {hi:.3}</text>"#,
        MARGIN,
        h - 30.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_ends() {
        assert_eq!(colormap(0.0), VIRIDIS[0]);
        assert_eq!(colormap(1.0), VIRIDIS[8]);
        assert_eq!(colormap(f64::NAN), VIRIDIS[0]);
    }

    #[test]
    fn one_rect_per_cell() {
        let svg = heatmap(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], "a<b", "x", "y");
        assert_eq!(svg.matches("<rect").count(), 6);
        assert!(svg.contains("a&lt;b") && svg.ends_with("</svg>\n"));
    }
}
