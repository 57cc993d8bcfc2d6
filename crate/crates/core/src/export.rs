//! Profile CSV, ternary geometry documents and their SVG rendering, plus the
//! canonical JSON writer used for machine output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::column::{Column, StreamKind};
use crate::minreflux::MinRefluxResult;
use crate::simulator::{pinch_compositions, ternary, PinchGeometry, SimError, StageProfile};

pub const SCHEMA_VERSION: u32 = 1;

/// JSON with sorted object keys and every float rounded to 9 significant
/// digits, so equal results give byte-equal documents. Non-finite floats
/// become `null`.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// Rounds to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.push_str(&"  ".repeat(n));
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => {
            if n.is_f64() {
                let x = round_sig(n.as_f64().expect("f64 number"));
                match serde_json::Number::from_f64(x) {
                    Some(r) => out.push_str(&r.to_string()),
                    None => out.push_str("null"),
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 1);
                write_value(out, item, indent + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                pad(out, indent + 1);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Stage profile as CSV: `stage,section,x_<name>...,y_<name>...` with stages
/// numbered from 1 at the top and sections from 1.
pub fn profile_csv(column: &Column, profile: &StageProfile) -> String {
    let names = column.components().names();
    let mut out = String::from("stage,section");
    for prefix in ["x", "y"] {
        for n in names {
            write!(out, ",{prefix}_{n}").expect("write to string");
        }
    }
    out.push('\n');
    for (s, (x, y)) in profile.x.iter().zip(&profile.y).enumerate() {
        write!(out, "{},{}", s + 1, profile.section[s] + 1).expect("write to string");
        for v in x.iter().chain(y) {
            write!(out, ",{:.9e}", v).expect("write to string");
        }
        out.push('\n');
    }
    out
}

/// A labelled composition with its triangle coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryPoint {
    pub label: String,
    pub composition: Vec<f64>,
    pub xy: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionTriangle {
    /// One-based section index.
    pub section: usize,
    /// Pinch compositions, one per characteristic root.
    pub vertices: Vec<TernaryPoint>,
    pub pinch_vertex: usize,
    pub fixed_point_residual: f64,
}

/// Pinch simplices, stream and product compositions and an optional stage
/// profile of a three-component column, in triangle coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryDocument {
    pub schema_version: u32,
    /// Component names at the triangle corners (0,0), (1,0), (1/2, sqrt(3)/2).
    pub components: Vec<String>,
    pub v_reb: f64,
    pub reflux: f64,
    pub sections: Vec<SectionTriangle>,
    /// Liquid-equivalent compositions of feeds and sidedraws.
    pub streams: Vec<TernaryPoint>,
    pub products: Vec<TernaryPoint>,
    /// Liquid compositions stage by stage, when a profile is given.
    pub profile: Vec<TernaryPoint>,
}

fn point(label: String, composition: &[f64]) -> Result<TernaryPoint, SimError> {
    let (u, v) = ternary(composition)?;
    Ok(TernaryPoint {
        label,
        composition: composition.to_vec(),
        xy: [u, v],
    })
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

/// Geometry of the shortcut solution at minimum reflux, with the liquid
/// profile of a simulation when one is given.
pub fn ternary_export(
    column: &Column,
    result: &MinRefluxResult,
    profile: Option<&StageProfile>,
) -> Result<TernaryDocument, SimError> {
    let c = column.count();
    if c != 3 {
        return Err(SimError::NotTernary(c));
    }
    let alphas = column.alphas();
    let mut sections = Vec::new();
    for state in &result.evaluation.sections {
        let PinchGeometry {
            section,
            vertices,
            pinch_vertex,
            fixed_point_residual,
        } = pinch_compositions(state, alphas)?;
        let vertices = vertices
            .iter()
            .enumerate()
            .map(|(r, z)| point(format!("Z{}", r + 1), z))
            .collect::<Result<_, _>>()?;
        sections.push(SectionTriangle {
            section,
            vertices,
            pinch_vertex,
            fixed_point_residual,
        });
    }
    let mut streams = Vec::new();
    for s in column.streams() {
        let l = s.liquid_equivalent(alphas)?;
        streams.push(point(s.name.clone(), &normalized(&l))?);
    }
    let mut products = vec![point("distillate".into(), &normalized(column.distillate()))?];
    for s in column.streams().iter().filter(|s| s.kind == StreamKind::Sidedraw) {
        products.push(point(s.name.clone(), &normalized(&s.rates()))?);
    }
    products.push(point("bottoms".into(), &normalized(&column.bottoms()))?);
    let profile = match profile {
        Some(p) => {
            p.x.iter()
                .enumerate()
                .map(|(s, x)| point(format!("stage {}", s + 1), x))
                .collect::<Result<_, _>>()?
        }
        None => Vec::new(),
    };
    Ok(TernaryDocument {
        schema_version: SCHEMA_VERSION,
        components: column.components().names().to_vec(),
        v_reb: result.v_reb_min,
        reflux: result.r_min,
        sections,
        streams,
        products,
        profile,
    })
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

impl TernaryDocument {
    /// SVG drawing: the composition triangle, one dashed pinch simplex per
    /// section, the stage profile as a polyline and labelled stream and
    /// product points. Vertices outside the triangle are drawn as they are.
    pub fn to_svg(&self) -> String {
        let (w, h, margin) = (640.0, 600.0, 80.0);
        let scale = w - 2.0 * margin;
        let map = |p: [f64; 2]| (margin + scale * p[0], h - margin - scale * p[1]);
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        )
        .expect("write to string");
        out.push_str(
            "<defs><clipPath id=\"plot\"><rect x=\"0\" y=\"0\" width=\"640\" height=\"600\"/></clipPath></defs>\n",
        );
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        let pts: Vec<String> = corners
            .iter()
            .map(|c| {
                let (x, y) = map(*c);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            out,
            r#"<polygon points="{}" fill="none" stroke="black"/>"#,
            pts.join(" ")
        )
        .expect("write to string");
        for (name, (corner, (dx, dy))) in
            self.components
                .iter()
                .zip(corners.iter().zip([(-30.0, 18.0), (8.0, 18.0), (-10.0, -10.0)]))
        {
            let (x, y) = map(*corner);
            writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                x + dx,
                y + dy,
                escape(name)
            )
            .expect("write to string");
        }
        out.push_str("<g clip-path=\"url(#plot)\">\n");
        for (k, s) in self.sections.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let pts: Vec<String> = s
                .vertices
                .iter()
                .map(|v| {
                    let (x, y) = map(v.xy);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            writeln!(
                out,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.08" stroke="{color}" stroke-dasharray="5,3"><title>section {}</title></polygon>"#,
                pts.join(" "),
                s.section
            )
            .expect("write to string");
            let (x, y) = map(s.vertices[s.pinch_vertex].xy);
            writeln!(
                out,
                r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"><title>section {} pinch {}</title></circle>"#,
                s.section, s.vertices[s.pinch_vertex].label
            )
            .expect("write to string");
        }
        if !self.profile.is_empty() {
            let pts: Vec<String> = self
                .profile
                .iter()
                .map(|p| {
                    let (x, y) = map(p.xy);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                pts.join(" ")
            )
            .expect("write to string");
        }
        for (p, marker) in self
            .streams
            .iter()
            .map(|p| (p, "#000000"))
            .chain(self.products.iter().map(|p| (p, "#555555")))
        {
            let (x, y) = map(p.xy);
            writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="6" height="6" fill="{marker}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                x - 3.0,
                y - 3.0,
                x + 6.0,
                y - 6.0,
                escape(&p.label)
            )
            .expect("write to string");
        }
        out.push_str("</g>\n</svg>\n");
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
    fn canonical_json_sorts_keys_and_rounds() {
        let v = serde_json::json!({"b": 1.0 / 3.0, "a": [2, 165.95000000001], "c": {"z": null, "y": true}});
        let text = canonical_json(&v).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": [\n    2,\n    165.95\n  ],\n  \"b\": 0.333333333,\n  \"c\": {\n    \"y\": true,\n    \"z\": null\n  }\n}\n"
        );
    }

    #[test]
    fn round_sig_keeps_nine_digits() {
        assert_eq!(round_sig(2.16234567891), 2.16234568);
        assert_eq!(round_sig(-1.0e-20), -1.0e-20);
        assert_eq!(round_sig(0.0), 0.0);
    }
}
