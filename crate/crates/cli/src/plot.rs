//! Self-contained SVG emission for simulation results. Two figures: the
//! planar trajectory (truth, estimate, waypoints, landmarks, uncertainty
//! ellipses) and stacked per-axis error curves against their 3-sigma
//! envelopes.

use std::fmt::Write as _;

use svrp_ll::sim::{ErrorReport, Trace};

const TRAJ_W: f64 = 640.0;
const TRAJ_H: f64 = 640.0;
const MARGIN: f64 = 40.0;

/// Uniform data-to-pixel mapping that preserves aspect ratio and flips the
/// y axis into screen coordinates.
struct Frame {
    scale: f64,
    x0: f64,
    y0: f64,
    off_x: f64,
    off_y: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = (f64, f64)> + Clone) -> Frame {
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (x, y) in xs {
            min.0 = min.0.min(x);
            min.1 = min.1.min(y);
            max.0 = max.0.max(x);
            max.1 = max.1.max(y);
        }
        let span_x = (max.0 - min.0).max(1e-9);
        let span_y = (max.1 - min.1).max(1e-9);
        let avail = (TRAJ_W - 2.0 * MARGIN, TRAJ_H - 2.0 * MARGIN);
        let scale = (avail.0 / span_x).min(avail.1 / span_y);
        Frame {
            scale,
            x0: min.0,
            y0: min.1,
            off_x: MARGIN + (avail.0 - scale * span_x) / 2.0,
            off_y: MARGIN + (avail.1 - scale * span_y) / 2.0,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.off_x + (x - self.x0) * self.scale
    }

    fn py(&self, y: f64) -> f64 {
        TRAJ_H - self.off_y - (y - self.y0) * self.scale
    }
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, style: &str) -> String {
    let mut pts = String::new();
    for (x, y) in points {
        let _ = write!(pts, "{x:.2},{y:.2} ");
    }
    format!("<polyline fill=\"none\" {style} points=\"{}\"/>\n", pts.trim_end())
}

/// Planar picture of one run. Ellipses are the 3-sigma position
/// uncertainty, drawn from the eigen-decomposition of the 2x2 position
/// covariance at a thinned set of steps.
pub fn trajectory_svg(trace: &Trace) -> String {
    let everything = trace
        .steps
        .iter()
        .flat_map(|s| [(s.truth.x, s.truth.y), (s.estimate.x, s.estimate.y)])
        .chain(trace.waypoints.iter().map(|p| (p.x, p.y)))
        .chain(trace.landmarks.iter().map(|p| (p.x, p.y)));
    let frame = Frame::fit(everything.clone());

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{TRAJ_W}\" height=\"{TRAJ_H}\" \
         viewBox=\"0 0 {TRAJ_W} {TRAJ_H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );

    // Uncertainty ellipses first so the curves draw on top of them.
    let stride = (trace.steps.len() / 40).max(1);
    for s in trace.steps.iter().step_by(stride) {
        let (sxx, syy, sxy) = (s.cov_diag[0], s.cov_diag[1], s.cov_xy);
        let half_gap = (sxx - syy) / 2.0;
        let root = (half_gap * half_gap + sxy * sxy).sqrt();
        let l1 = ((sxx + syy) / 2.0 + root).max(0.0);
        let l2 = ((sxx + syy) / 2.0 - root).max(0.0);
        let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
        let cx = frame.px(s.estimate.x);
        let cy = frame.py(s.estimate.y);
        let rx = 3.0 * l1.sqrt() * frame.scale;
        let ry = 3.0 * l2.sqrt() * frame.scale;
        // The y flip mirrors angles, hence the sign change.
        let deg = -theta.to_degrees();
        let _ = write!(
            svg,
            "<ellipse cx=\"{cx:.2}\" cy=\"{cy:.2}\" rx=\"{rx:.2}\" ry=\"{ry:.2}\" \
             transform=\"rotate({deg:.2} {cx:.2} {cy:.2})\" \
             fill=\"none\" stroke=\"#c8c8e8\" stroke-width=\"1\"/>\n"
        );
    }

    let thin = (trace.steps.len() / 2000).max(1);
    svg.push_str(&polyline(
        trace.steps.iter().step_by(thin).map(|s| (frame.px(s.truth.x), frame.py(s.truth.y))),
        "stroke=\"#1f77b4\" stroke-width=\"1.5\"",
    ));
    svg.push_str(&polyline(
        trace
            .steps
            .iter()
            .step_by(thin)
            .map(|s| (frame.px(s.estimate.x), frame.py(s.estimate.y))),
        "stroke=\"#d62728\" stroke-width=\"1.2\" stroke-dasharray=\"5 3\"",
    ));

    for (i, wp) in trace.waypoints.iter().enumerate() {
        let (cx, cy) = (frame.px(wp.x), frame.py(wp.y));
        let _ = write!(
            svg,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"none\" \
             stroke=\"#2ca02c\" stroke-width=\"1.5\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"9\" fill=\"#2ca02c\">{}</text>\n",
            cx + 5.0,
            cy - 5.0,
            i + 1
        );
    }
    for lm in &trace.landmarks {
        let (cx, cy) = (frame.px(lm.x), frame.py(lm.y));
        let _ = write!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"7\" height=\"7\" fill=\"#9467bd\" \
             transform=\"rotate(45 {cx:.2} {cy:.2})\"/>\n",
            cx - 3.5,
            cy - 3.5
        );
    }

    svg.push_str(concat!(
        "<g font-size=\"11\" fill=\"black\">",
        "<line x1=\"46\" y1=\"14\" x2=\"76\" y2=\"14\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
        "<text x=\"80\" y=\"18\">true path</text>",
        "<line x1=\"166\" y1=\"14\" x2=\"196\" y2=\"14\" stroke=\"#d62728\" ",
        "stroke-width=\"1.2\" stroke-dasharray=\"5 3\"/>",
        "<text x=\"200\" y=\"18\">estimate</text>",
        "<circle cx=\"286\" cy=\"14\" r=\"4\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\"/>",
        "<text x=\"294\" y=\"18\">waypoints</text>",
        "<rect x=\"383\" y=\"11\" width=\"7\" height=\"7\" fill=\"#9467bd\" ",
        "transform=\"rotate(45 386.5 14.5)\"/>",
        "<text x=\"394\" y=\"18\">landmarks</text>",
        "<text x=\"486\" y=\"18\" fill=\"#c8c8e8\">3-sigma ellipses</text>",
        "</g>\n</svg>\n"
    ));
    svg
}

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 200.0;
const PANEL_PAD: f64 = 30.0;

/// Stacked panels of estimation error per axis with the +/-3-sigma
/// envelope from the filter covariance.
pub fn error_svg(report: &ErrorReport) -> String {
    let names = ["x error [units]", "y error [units]", "heading error [rad]"];
    let total_h = 3.0 * PANEL_H + 20.0;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PANEL_W}\" height=\"{total_h}\" \
         viewBox=\"0 0 {PANEL_W} {total_h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let n = report.errors[0].len().max(1);
    let thin = (n / 2000).max(1);
    for axis in 0..3 {
        let top = axis as f64 * PANEL_H + 10.0;
        let bottom = top + PANEL_H - PANEL_PAD;
        let peak = report.errors[axis]
            .iter()
            .chain(report.sigma3[axis].iter())
            .fold(1e-9f64, |m, v| m.max(v.abs()))
            * 1.1;
        let px = |i: usize| MARGIN + i as f64 / (n - 1).max(1) as f64 * (PANEL_W - 2.0 * MARGIN);
        let py = |v: f64| {
            let mid = (top + bottom) / 2.0;
            mid - v / peak * (bottom - top) / 2.0
        };
        let _ = write!(
            svg,
            "<line x1=\"{MARGIN}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\"/>\n\
             <text x=\"{MARGIN}\" y=\"{:.2}\" font-size=\"11\">{} (peak {:.3})</text>\n",
            py(0.0),
            PANEL_W - MARGIN,
            py(0.0),
            top + 10.0,
            names[axis],
            peak / 1.1
        );
        for sign in [1.0, -1.0] {
            svg.push_str(&polyline(
                report.sigma3[axis]
                    .iter()
                    .enumerate()
                    .step_by(thin)
                    .map(|(i, s)| (px(i), py(sign * s))),
                "stroke=\"#d62728\" stroke-width=\"1\" stroke-dasharray=\"4 3\"",
            ));
        }
        svg.push_str(&polyline(
            report.errors[axis]
                .iter()
                .enumerate()
                .step_by(thin)
                .map(|(i, e)| (px(i), py(*e))),
            "stroke=\"#1f77b4\" stroke-width=\"1\"",
        ));
    }
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">step (blue: error, dashed red: 3-sigma)</text>\n</svg>\n",
        MARGIN,
        total_h - 6.0
    );
    svg
}
