//! Files written by `sdot run`. Every file is written to a temporary sibling
//! first and renamed into place, so readers never see a partial file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use sdot_core::functional::Evaluation;
use sdot_core::solver::IterationRecord;
use sdot_core::{ConvexPolygon, Point, SolveReport, TargetMeasure};

pub const TRACE_HEADER: &str = "iter,residual_l2,residual_inf,step_exponent,min_mass,phi";

pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn psi_json(report: &SolveReport) -> String {
    let last = report.iterations.last();
    let doc = json!({
        "schema_version": crate::problem::SCHEMA_VERSION,
        "status": report.status.as_str(),
        "iterations": report.steps(),
        "residual_l2": last.map(|r| r.residual_l2),
        "epsilon0": report.epsilon0,
        "psi": report.psi_final.values(),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("plain JSON values");
    s.push('\n');
    s
}

fn ring(vertices: &[Point]) -> Value {
    let mut coords: Vec<Value> = vertices.iter().map(|p| json!([p.x, p.y])).collect();
    if let Some(first) = coords.first().cloned() {
        coords.push(first);
    }
    Value::Array(coords)
}

/// One feature per site; empty cells get a `null` geometry.
pub fn cells_geojson(eval: &Evaluation, targets: &TargetMeasure) -> String {
    let features: Vec<Value> = eval
        .diagram
        .cells()
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let geometry = if cell.is_empty() {
                Value::Null
            } else {
                json!({ "type": "Polygon", "coordinates": [ring(cell.vertices())] })
            };
            json!({
                "type": "Feature",
                "geometry": geometry,
                "properties": {
                    "site": i,
                    "mass": eval.masses[i],
                    "target_mass": targets.masses()[i],
                },
            })
        })
        .collect();
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let mut s = serde_json::to_string(&doc).expect("plain JSON values");
    s.push('\n');
    s
}

pub fn trace_csv(iterations: &[IterationRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in iterations {
        let step = r.step_exponent.map(|l| l.to_string()).unwrap_or_default();
        // {:?} on f64 prints the shortest string that round-trips
        writeln!(
            out,
            "{},{:?},{:?},{},{:?},{:?}",
            r.iter, r.residual_l2, r.residual_inf, step, r.min_mass, r.phi
        )
        .unwrap();
    }
    out
}

const PALETTE: [&str; 8] = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5"];

/// SVG of the cells at one iterate: one `<polygon>` per site (empty cells
/// have no points) followed by the domain outline.
pub fn frame_svg(eval: &Evaluation, domain: &ConvexPolygon, iter: usize) -> String {
    let [x0, y0, x1, y1] = domain.bbox().expect("validated domain");
    let (w, h) = (x1 - x0, y1 - y0);
    let size = 600.0;
    let scale = size / w.max(h);
    let px = |p: &Point| format!("{:.3},{:.3}", (p.x - x0) * scale, (y1 - p.y) * scale);
    let stroke = 1.0;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        w * scale,
        h * scale,
        w * scale,
        h * scale
    )
    .unwrap();
    writeln!(out, "<title>Laguerre cells, iteration {iter}</title>").unwrap();
    for (i, cell) in eval.diagram.cells().iter().enumerate() {
        let pts: Vec<String> = cell.vertices().iter().map(px).collect();
        writeln!(
            out,
            r##"<polygon class="cell" data-site="{i}" points="{}" fill="{}" stroke="#333" stroke-width="{stroke}"/>"##,
            pts.join(" "),
            PALETTE[i % PALETTE.len()]
        )
        .unwrap();
    }
    let outline: Vec<String> = domain.vertices().iter().map(px).collect();
    writeln!(
        out,
        r##"<polygon class="domain" points="{}" fill="none" stroke="#000" stroke-width="{}"/>"##,
        outline.join(" "),
        2.0 * stroke
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}
