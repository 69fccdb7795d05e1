use std::fmt::Write;

use super::Scene;
use crate::geometry::Vec2;

/// Overlays drawn on top of a scene frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Annotation {
    Push { start: Vec2, end: Vec2 },
    /// Closing axis at `theta` radians; `opening` is the finger separation.
    Grasp { center: Vec2, theta: f64, opening: f64 },
    Label { at: Vec2, text: String },
}

const PX_PER_CM: f64 = 10.0;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Deterministic SVG of one frame; y grows upward in the workspace, so rows
/// are flipped on output.
pub fn render_svg(scene: &Scene, annotations: &[Annotation]) -> String {
    let w = scene.workspace();
    let size = w * PX_PER_CM;
    let px = |p: Vec2| (p.x * PX_PER_CM, (w - p.y) * PX_PER_CM);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0}" height="{size:.0}" viewBox="0 0 {size:.3} {size:.3}">"#
    );
    let _ = writeln!(
        out,
        r##"<rect class="workspace" x="0" y="0" width="{size:.3}" height="{size:.3}" fill="#f4f1ea" stroke="#333" stroke-width="2"/>"##
    );
    for (spec, poly) in scene.specs().iter().zip(scene.footprints()) {
        let pts: Vec<String> = poly
            .vertices()
            .iter()
            .map(|v| {
                let (x, y) = px(*v);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let (class, fill) = if spec.is_target {
            ("target", "#2b6cb0")
        } else {
            ("object", "#c9a66b")
        };
        let _ = writeln!(
            out,
            r##"<polygon class="{class}" data-id="{}" points="{}" fill="{fill}" stroke="#222" stroke-width="1"/>"##,
            xml_escape(&spec.id),
            pts.join(" ")
        );
    }
    for a in annotations {
        match a {
            Annotation::Push { start, end } => {
                let (x0, y0) = px(*start);
                let (x1, y1) = px(*end);
                let dir = (*end - *start).normalized().unwrap_or(Vec2::new(1.0, 0.0));
                let side = dir.perp();
                let head = 0.8;
                let l = *end - dir * head + side * (head * 0.5);
                let r = *end - dir * head - side * (head * 0.5);
                let (lx, ly) = px(l);
                let (rx, ry) = px(r);
                let _ = writeln!(
                    out,
                    r##"<path class="push-arrow" d="M{x0:.3},{y0:.3} L{x1:.3},{y1:.3} M{lx:.3},{ly:.3} L{x1:.3},{y1:.3} L{rx:.3},{ry:.3}" fill="none" stroke="#8b3fbf" stroke-width="3"/>"##
                );
            }
            Annotation::Grasp { center, theta, opening } => {
                let u = Vec2::from_angle(*theta);
                let a = *center - u * (opening / 2.0);
                let b = *center + u * (opening / 2.0);
                let (ax, ay) = px(a);
                let (bx, by) = px(b);
                let (cx, cy) = px(*center);
                let _ = writeln!(
                    out,
                    r##"<g class="grasp"><line x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="#d9363e" stroke-width="3"/><circle cx="{cx:.3}" cy="{cy:.3}" r="4" fill="#d9363e"/></g>"##
                );
            }
            Annotation::Label { at, text } => {
                let (x, y) = px(*at);
                let _ = writeln!(
                    out,
                    r##"<text class="label" x="{x:.3}" y="{y:.3}" font-family="monospace" font-size="14" fill="#111">{}</text>"##,
                    xml_escape(text)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::scene::{ObjectSpec, WORKSPACE_CM};

    fn one_target() -> Scene {
        let t = ObjectSpec::boxed("t", 4.0, 4.0, true);
        let n = ObjectSpec::boxed("n", 4.0, 4.0, false);
        Scene::new(
            WORKSPACE_CM,
            vec![(t, Pose2D::new(Vec2::new(22.4, 22.4), 0.0)), (n, Pose2D::new(Vec2::new(28.4, 22.4), 0.3))],
        )
        .unwrap()
    }

    #[test]
    fn empty_scene_has_only_workspace() {
        let svg = render_svg(&Scene::empty(), &[]);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert!(!svg.contains("<polygon"));
    }

    #[test]
    fn one_push_one_arrow() {
        let s = one_target();
        let svg = render_svg(
            &s,
            &[Annotation::Push { start: Vec2::new(10.0, 10.0), end: Vec2::new(15.0, 10.0) }],
        );
        assert_eq!(svg.matches("class=\"push-arrow\"").count(), 1);
        assert_eq!(svg.matches("class=\"target\"").count(), 1);
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = one_target();
        let ann = [
            Annotation::Grasp { center: Vec2::new(22.4, 22.4), theta: 0.4, opening: 8.5 },
            Annotation::Label { at: Vec2::new(1.0, 1.0), text: "step <1>".into() },
        ];
        assert_eq!(render_svg(&s, &ann), render_svg(&s.clone(), &ann));
        assert!(render_svg(&s, &ann).contains("step &lt;1&gt;"));
    }
}
