//! `osd plot`: render a scene and a result document as a standalone SVG in
//! bird's-eye view, x right and y up.
//!
//! Styles: cloud points are gray dots, ground truth solid dark outlines,
//! known detections dashed blue, unknown detections solid red.

use crate::manifest::{sibling_manifest_path, ManifestBuilder};
use anyhow::Context;
use clap::Args;
use osd_core::data::{load_open_set_doc, load_scene};
use osd_core::geometry::Box7;
use std::fmt::Write as _;
use std::path::PathBuf;

const CANVAS: f64 = 840.0;
const MARGIN: f64 = 40.0;

#[derive(Args)]
pub struct PlotArgs {
    /// Scene document.
    #[arg(long)]
    scene: PathBuf,
    /// Result document (as written by detect).
    #[arg(long)]
    det: PathBuf,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

struct Frame {
    xmin: f64,
    ymax: f64,
    scale: f64,
    x_off: f64,
    y_off: f64,
}

impl Frame {
    /// Uniform world-to-canvas mapping with the data centered; an empty
    /// scene falls back to a 20 m window around the sensor.
    fn fit(xs: &[f64], ys: &[f64]) -> Frame {
        let span = |vals: &[f64]| {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi.is_finite() {
                (lo - 1.0, hi + 1.0)
            } else {
                (-10.0, 10.0)
            }
        };
        let (xmin, xmax) = span(xs);
        let (ymin, ymax) = span(ys);
        let inner = CANVAS - 2.0 * MARGIN;
        let scale = inner / (xmax - xmin).max(ymax - ymin);
        Frame {
            xmin,
            ymax,
            scale,
            x_off: MARGIN + (inner - (xmax - xmin) * scale) / 2.0,
            y_off: MARGIN + (inner - (ymax - ymin) * scale) / 2.0,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.x_off + (x - self.xmin) * self.scale,
            self.y_off + (self.ymax - y) * self.scale,
        )
    }
}

fn polygon(svg: &mut String, frame: &Frame, b: &Box7, style: &str) {
    let mut points = String::new();
    for [x, y] in b.bev_corners() {
        let (px, py) = frame.map(x, y);
        let _ = write!(points, "{px:.2},{py:.2} ");
    }
    let _ = writeln!(svg, "  <polygon points=\"{}\" {style}/>", points.trim_end());
}

fn render(scene: &osd_core::data::Scene, doc: &osd_core::data::OpenSetDoc) -> String {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for p in &scene.points {
        xs.push(p.x);
        ys.push(p.y);
    }
    let boxes = scene
        .gt_boxes
        .iter()
        .chain(doc.known.iter().map(|d| &d.bbox))
        .chain(doc.unknown.iter());
    for b in boxes.clone() {
        for [x, y] in b.bev_corners() {
            xs.push(x);
            ys.push(y);
        }
    }
    let frame = Frame::fit(&xs, &ys);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" \
         viewBox=\"0 0 {CANVAS} {CANVAS}\">"
    );
    let _ = writeln!(
        svg,
        "  <rect x=\"0\" y=\"0\" width=\"{CANVAS}\" height=\"{CANVAS}\" fill=\"white\"/>"
    );
    // axes through the sensor origin, clipped to the plot frame
    let lo = MARGIN;
    let hi = CANVAS - MARGIN;
    let (ox, oy) = frame.map(0.0, 0.0);
    let _ = writeln!(
        svg,
        "  <rect x=\"{lo}\" y=\"{lo}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" \
         stroke=\"#444444\"/>",
        hi - lo,
        hi - lo
    );
    if (lo..=hi).contains(&ox) {
        let _ = writeln!(
            svg,
            "  <line x1=\"{ox:.2}\" y1=\"{lo}\" x2=\"{ox:.2}\" y2=\"{hi}\" \
             stroke=\"#cccccc\"/>"
        );
    }
    if (lo..=hi).contains(&oy) {
        let _ = writeln!(
            svg,
            "  <line x1=\"{lo}\" y1=\"{oy:.2}\" x2=\"{hi}\" y2=\"{oy:.2}\" \
             stroke=\"#cccccc\"/>"
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{lo}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"14\">{}</text>",
        CANVAS - 12.0,
        scene.scene_id
    );

    for p in &scene.points {
        let (px, py) = frame.map(p.x, p.y);
        let _ = writeln!(
            svg,
            "  <circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"1.5\" fill=\"#999999\"/>"
        );
    }
    for b in &scene.gt_boxes {
        polygon(
            &mut svg,
            &frame,
            b,
            "fill=\"none\" stroke=\"#222222\" stroke-width=\"2\"",
        );
    }
    for d in &doc.known {
        polygon(
            &mut svg,
            &frame,
            &d.bbox,
            "fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" stroke-dasharray=\"6 3\"",
        );
    }
    for b in &doc.unknown {
        polygon(
            &mut svg,
            &frame,
            b,
            "fill=\"none\" stroke=\"#d62728\" stroke-width=\"2.5\"",
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn run(args: PlotArgs) -> anyhow::Result<u8> {
    let scene = load_scene(&args.scene)?;
    let doc = load_open_set_doc(&args.det)?;
    let svg = render(&scene, &doc);
    std::fs::write(&args.out, svg).with_context(|| format!("writing {}", args.out.display()))?;

    let config = serde_json::json!({
        "scene_id": scene.scene_id,
        "points": scene.points.len(),
        "gt_boxes": scene.gt_boxes.len(),
        "known": doc.known.len(),
        "unknown": doc.unknown.len(),
    });
    let mut mb = ManifestBuilder::new("plot", config);
    mb.input(&args.scene).input(&args.det).output(&args.out);
    mb.write(&sibling_manifest_path(&args.out))?;
    Ok(0)
}
