//! Static SVG rendering of expected-utility and acceptance curves.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const PANEL: f64 = 220.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const GAP: f64 = 50.0;

pub struct CurvePlot<'a> {
    pub title: &'a str,
    pub incentives: &'a [f64],
    pub psi: &'a [f64],
    pub acceptance: &'a [f64],
    pub optimal_incentive: f64,
    pub optimal_psi: f64,
}

struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
        Axis { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], x: &Axis, y: &Axis, colour: &str) {
    out.push_str("<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"");
    out.push_str(colour);
    out.push_str("\" points=\"");
    for (a, b) in xs.iter().zip(ys) {
        let _ = write!(out, "{:.2},{:.2} ", x.map(*a), y.map(*b));
    }
    out.push_str("\"/>\n");
}

fn frame(out: &mut String, top: f64, label: &str, y: &Axis, x: &Axis) {
    let bottom = top + PANEL;
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{top}\" width=\"{:.2}\" height=\"{PANEL}\" fill=\"none\" stroke=\"#444\"/>",
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    );
    for v in [y.lo, 0.5 * (y.lo + y.hi), y.hi] {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 6.0,
            y.map(v) + 4.0,
            tick(v)
        );
    }
    for v in [x.lo, 0.5 * (x.lo + x.hi), x.hi] {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            x.map(v),
            bottom + 14.0,
            tick(v)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.2}\" font-size=\"12\" transform=\"rotate(-90 14 {:.2})\" text-anchor=\"middle\">{label}</text>",
        top + PANEL / 2.0,
        top + PANEL / 2.0
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

impl CurvePlot<'_> {
    pub fn render(&self) -> String {
        let height = MARGIN_TOP + 2.0 * PANEL + GAP + 40.0;
        let x_lo = self.incentives.first().copied().unwrap_or(0.0);
        let x_hi = self.incentives.last().copied().unwrap_or(1.0);
        let x = Axis::new(x_lo, x_hi, MARGIN_LEFT, WIDTH - MARGIN_RIGHT);

        let psi_lo = self.psi.iter().copied().fold(0.0, f64::min);
        let psi_hi = self.psi.iter().copied().fold(0.0, f64::max);
        let top1 = MARGIN_TOP;
        let y_psi = Axis::new(psi_lo, psi_hi, top1 + PANEL, top1);
        let top2 = MARGIN_TOP + PANEL + GAP;
        let y_acc = Axis::new(0.0, 1.0, top2 + PANEL, top2);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">"
        );
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
            WIDTH / 2.0,
            escape(self.title)
        );

        frame(&mut out, top1, "expected utility (EUR)", &y_psi, &x);
        if psi_lo < 0.0 && psi_hi > 0.0 {
            let _ = writeln!(
                out,
                "<line x1=\"{MARGIN_LEFT}\" x2=\"{:.2}\" y1=\"{y0:.2}\" y2=\"{y0:.2}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>",
                WIDTH - MARGIN_RIGHT,
                y0 = y_psi.map(0.0)
            );
        }
        polyline(&mut out, self.incentives, self.psi, &x, &y_psi, "#1f77b4");
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#d62728\"/>",
            x.map(self.optimal_incentive),
            y_psi.map(self.optimal_psi)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#d62728\">I* = {:.2} EUR, psi = {:.2} EUR</text>",
            x.map(self.optimal_incentive) + 6.0,
            y_psi.map(self.optimal_psi) - 6.0,
            self.optimal_incentive,
            self.optimal_psi
        );

        frame(&mut out, top2, "acceptance", &y_acc, &x);
        polyline(&mut out, self.incentives, self.acceptance, &x, &y_acc, "#2ca02c");
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">incentive (EUR)</text>",
            WIDTH / 2.0,
            height - 6.0
        );
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_well_formed_svg() {
        let xs = [0.0, 1.0, 2.0];
        let svg = CurvePlot {
            title: "a <b>",
            incentives: &xs,
            psi: &[-1.0, 2.0, 1.0],
            acceptance: &[0.0, 0.5, 1.0],
            optimal_incentive: 1.0,
            optimal_psi: 2.0,
        }
        .render();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a &lt;b&gt;"));
    }
}
