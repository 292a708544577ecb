//! Static SVG rendering of a plan.

use std::fmt::Write;

use pisr_core::{Instance, Point, RoutePlan, DEPOT};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];
const DASHES: [&str; 3] = ["", "8 4", "2 4"];

struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: &[Point]) -> Self {
        let (mut min_x, mut max_x, mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            min_x = min_x.min(p.x);
            max_x = max_x.max(p.x);
            min_y = min_y.min(p.y);
            max_y = max_y.max(p.y);
        }
        let span = (max_x - min_x).max(max_y - min_y).max(1e-9);
        Self { min_x, max_y, scale: (SIZE - 2.0 * MARGIN) / span }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (MARGIN + (p.x - self.min_x) * self.scale, MARGIN + (self.max_y - p.y) * self.scale)
    }
}

/// Draws the depot, every task and one closed path per cycle.
/// Constrained tasks get a diamond marker and an `R=` label.
pub fn render_svg(instance: &Instance, plan: &RoutePlan) -> String {
    let nodes: Vec<Point> = (0..=instance.n_tasks()).map(|k| instance.position(k)).collect();
    let frame = Frame::fit(&nodes);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for (k, cycle) in plan.cycles().iter().enumerate() {
        if cycle.is_empty() {
            continue;
        }
        let mut d = String::new();
        for (step, &node) in std::iter::once(&DEPOT).chain(cycle.iter()).enumerate() {
            let (x, y) = frame.map(nodes[node]);
            let _ = write!(d, "{}{x:.2} {y:.2} ", if step == 0 { "M" } else { "L" });
        }
        d.push('Z');
        let dash = DASHES[(k / COLORS.len()) % DASHES.len()];
        let dash = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(
            out,
            r#"<path class="cycle" d="{d}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
            COLORS[k % COLORS.len()]
        );
    }

    for task in instance.task_ids() {
        let (x, y) = frame.map(nodes[task]);
        match instance.revisit_limit(task) {
            Some(r) => {
                let _ = writeln!(
                    out,
                    r#"<polygon class="constrained" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="gold" stroke="black"/>"#,
                    x,
                    y - 8.0,
                    x + 8.0,
                    y,
                    x,
                    y + 8.0,
                    x - 8.0,
                    y
                );
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">R={r:.1}</text>"#,
                    x + 10.0,
                    y + 16.0
                );
            }
            None => {
                let _ = writeln!(out, r#"<circle class="task" cx="{x:.2}" cy="{y:.2}" r="5" fill="black"/>"#);
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">t{task}</text>"#,
            x + 8.0,
            y - 6.0
        );
    }

    let (x, y) = frame.map(nodes[DEPOT]);
    let _ = writeln!(
        out,
        r#"<rect class="depot" x="{:.2}" y="{:.2}" width="14" height="14" fill="white" stroke="black" stroke-width="2"/>"#,
        x - 7.0,
        y - 7.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">depot</text>"#,
        x + 10.0,
        y - 8.0
    );
    out.push_str("</svg>\n");
    out
}
