//! SVG overlays of composition canvases and match explanations.
//!
//! Colors: poselines green, cones magenta, action lines yellow, action
//! centers cyan. Every element carries a class naming its layer so viewers
//! can toggle layers with CSS.

use crate::canvas::CompositionCanvas;
use crate::error::{Error, Result};
use crate::geometry::{self, Point, Rect};
use crate::pose::{joint, PoseScene};
use crate::similarity::SimilarityRecord;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const POSELINE_COLOR: &str = "#00a000";
pub const CONE_COLOR: &str = "#ff00ff";
pub const LINE_COLOR: &str = "#ffd700";
pub const CENTER_COLOR: &str = "#00ffff";
pub const REGION_COLOR: &str = "#00ffff";
pub const SKELETON_COLOR: &str = "#ff3030";
pub const CENTER_RADIUS: f64 = 8.0;

const PANEL_GAP: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlayOptions {
    pub poselines: bool,
    pub cones: bool,
    pub regions: bool,
    pub centers: bool,
    pub lines: bool,
    pub latp_skeletons: bool,
    pub stroke_width: f64,
    pub opacity: f64,
    /// Artwork image referenced underneath the overlay.
    pub image_href: Option<String>,
}

impl Default for OverlayOptions {
    fn default() -> Self {
        Self {
            poselines: true,
            cones: true,
            regions: true,
            centers: true,
            lines: true,
            latp_skeletons: false,
            stroke_width: 3.0,
            opacity: 0.25,
            image_href: None,
        }
    }
}

impl OverlayOptions {
    /// Parses a comma-separated layer list such as `poselines,cones,lines`.
    pub fn from_element_list(list: &str) -> Result<Self> {
        let mut o = OverlayOptions {
            poselines: false,
            cones: false,
            regions: false,
            centers: false,
            lines: false,
            latp_skeletons: false,
            ..Default::default()
        };
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "poselines" => o.poselines = true,
                "cones" => o.cones = true,
                "regions" => o.regions = true,
                "centers" => o.centers = true,
                "lines" => o.lines = true,
                "skeletons" => o.latp_skeletons = true,
                other => {
                    return Err(Error::Parameter(format!(
                        "unknown overlay element `{other}`"
                    )))
                }
            }
        }
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        let any = self.poselines
            || self.cones
            || self.regions
            || self.centers
            || self.lines
            || self.latp_skeletons;
        if !any {
            return Err(Error::Parameter(
                "at least one overlay element must be enabled".into(),
            ));
        }
        Ok(())
    }
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn points_attr(poly: &[Point]) -> String {
    poly.iter()
        .map(|p| format!("{},{}", num(p.x), num(p.y)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn line(out: &mut String, class: &str, a: Point, b: Point, color: &str, width: f64, extra: &str) {
    let _ = writeln!(
        out,
        r#"<line class="{class}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="{}"{extra}/>"#,
        num(a.x),
        num(a.y),
        num(b.x),
        num(b.y),
        num(width)
    );
}

/// Draws the canvas layers into `out`, clipped to the image rectangle.
fn draw_layers(
    out: &mut String,
    canvas: &CompositionCanvas,
    scene: Option<&PoseScene>,
    o: &OverlayOptions,
) {
    let rect = canvas.image_rect();
    let sw = o.stroke_width;
    if o.poselines {
        let mut pls = canvas.poselines.clone();
        pls.sort_by_key(|p| p.pose_index);
        for pl in &pls {
            if let Some((a, b)) = geometry::clip_segment_to_rect(pl.top, pl.bottom, &rect) {
                let (class, extra) = if pl.is_fallback {
                    ("poseline fallback", r#" stroke-dasharray="8 6""#)
                } else {
                    ("poseline", "")
                };
                let extra = format!(r#"{extra} data-pose="{}""#, pl.pose_index);
                line(out, class, a, b, POSELINE_COLOR, sw, &extra);
            }
        }
    }
    if o.cones {
        for cone in &canvas.cones {
            let clipped = geometry::clip_convex(&cone.vertices, &rect.corners());
            if clipped.len() >= 3 {
                let _ = writeln!(
                    out,
                    r#"<polygon class="cone" data-pose="{}" points="{}" fill="{CONE_COLOR}" fill-opacity="{}" stroke="{CONE_COLOR}" stroke-width="{}"/>"#,
                    cone.pose_index,
                    points_attr(&clipped),
                    num(o.opacity),
                    num(sw / 2.0)
                );
            }
        }
    }
    if o.regions {
        for (ri, region) in canvas.regions.iter().enumerate() {
            for poly in &region.polygons {
                let clipped = geometry::clip_convex(poly, &rect.corners());
                if clipped.len() >= 3 {
                    let _ = writeln!(
                        out,
                        r#"<polygon class="region" data-region="{ri}" points="{}" fill="{REGION_COLOR}" fill-opacity="{}" stroke="none"/>"#,
                        points_attr(&clipped),
                        num(o.opacity)
                    );
                }
            }
        }
    }
    if o.centers {
        for (ri, region) in canvas.regions.iter().enumerate() {
            let c = region.center;
            if rect.contains(c, 0.0) {
                let _ = writeln!(
                    out,
                    r#"<circle class="center" data-region="{ri}" cx="{}" cy="{}" r="{}" fill="{CENTER_COLOR}"/>"#,
                    num(c.x),
                    num(c.y),
                    num(CENTER_RADIUS)
                );
            }
        }
    }
    if o.lines {
        for al in &canvas.action_lines {
            let extra = format!(r#" data-region="{}""#, al.region_index);
            line(out, "action-line", al.p1, al.p2, LINE_COLOR, sw, &extra);
        }
    }
    if o.latp_skeletons {
        if let Some(scene) = scene {
            let t = canvas.params.conf_threshold;
            for (pi, pose) in scene.poses.iter().enumerate() {
                for (a, b) in joint::LIMBS {
                    let (Some(pa), Some(pb)) = (pose.valid_point(a, t), pose.valid_point(b, t))
                    else {
                        continue;
                    };
                    if let Some((p, q)) = geometry::clip_segment_to_rect(pa, pb, &rect) {
                        let extra = format!(r#" data-pose="{pi}""#);
                        line(out, "skeleton", p, q, SKELETON_COLOR, sw / 2.0, &extra);
                    }
                }
            }
        }
    }
}

fn open_svg(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}">"#,
        num(width),
        num(height)
    );
}

pub fn render_overlay(canvas: &CompositionCanvas, options: &OverlayOptions) -> Result<String> {
    render_overlay_with_scene(canvas, None, options)
}

/// Like [`render_overlay`]; the scene supplies keypoints for skeletons.
pub fn render_overlay_with_scene(
    canvas: &CompositionCanvas,
    scene: Option<&PoseScene>,
    options: &OverlayOptions,
) -> Result<String> {
    options.validate()?;
    let mut out = String::new();
    open_svg(&mut out, canvas.width as f64, canvas.height as f64);
    let _ = writeln!(
        out,
        r#"<g id="canvas" data-image-id="{}">"#,
        escape(&canvas.image_id)
    );
    if let Some(href) = &options.image_href {
        let _ = writeln!(
            out,
            r#"<image class="artwork" href="{}" x="0" y="0" width="{}" height="{}"/>"#,
            escape(href),
            canvas.width,
            canvas.height
        );
    }
    draw_layers(&mut out, canvas, scene, options);
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

/// Side-by-side query and target panels with one labelled connector per
/// matched poseline pair that survived the β filter. The closest pair is
/// highlighted.
pub fn render_match(
    query: &CompositionCanvas,
    target: &CompositionCanvas,
    record: &SimilarityRecord,
) -> Result<String> {
    if record.query_id != query.image_id || record.target_id != target.image_id {
        return Err(Error::Mismatch(format!(
            "record {} → {} vs canvases {} → {}",
            record.query_id, record.target_id, query.image_id, target.image_id
        )));
    }
    let matched = &record.matched;
    for &(qi, ti) in &matched.pairs {
        if qi >= query.poselines.len() || ti >= target.poselines.len() {
            return Err(Error::Mismatch(format!(
                "matched pair ({qi}, {ti}) out of range"
            )));
        }
    }

    let (qw, qh) = (query.width as f64, query.height as f64);
    let offset = qw + PANEL_GAP;
    let width = offset + target.width as f64;
    let height = qh.max(target.height as f64);
    let opts = OverlayOptions {
        cones: false,
        regions: false,
        ..Default::default()
    };

    let mut out = String::new();
    open_svg(&mut out, width, height);
    let _ = writeln!(
        out,
        r#"<g id="query" data-image-id="{}">"#,
        escape(&query.image_id)
    );
    draw_layers(&mut out, query, None, &opts);
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        r#"<g id="target" data-image-id="{}" transform="translate({},0)">"#,
        escape(&target.image_id),
        num(offset)
    );
    draw_layers(&mut out, target, None, &opts);
    out.push_str("</g>\n<g id=\"connectors\">\n");

    let anchor = |c: &CompositionCanvas, idx: usize| {
        let pl = &c.poselines[idx];
        geometry::clip_segment_to_rect(pl.top, pl.bottom, &c.image_rect())
            .map(|(a, b)| a.midpoint(b))
            .unwrap_or_else(|| {
                let m = pl.midpoint();
                let r: Rect = c.image_rect();
                Point::new(m.x.clamp(r.min.x, r.max.x), m.y.clamp(r.min.y, r.max.y))
            })
    };
    let kept: Vec<(usize, f64)> = matched
        .distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d < record.beta)
        .map(|(i, &d)| (i, d))
        .collect();
    let best = kept
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| *i);
    for (i, d) in kept {
        let (qi, ti) = matched.pairs[i];
        let a = anchor(query, qi);
        let b = anchor(target, ti) + Point::new(offset, 0.0);
        let (class, w) = if Some(i) == best {
            ("connector best", 4.0)
        } else {
            ("connector", 2.0)
        };
        let extra = format!(r#" data-query-poseline="{qi}" data-target-poseline="{ti}""#);
        line(&mut out, class, a, b, "#ffffff", w, &extra);
        let m = a.midpoint(b);
        let _ = writeln!(
            out,
            r##"<text class="distance" x="{}" y="{}" fill="#ffffff" font-size="16" text-anchor="middle">{d:.1}</text>"##,
            num(m.x),
            num(m.y)
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}
