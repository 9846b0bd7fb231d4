//! Zero level sets of `v_i = α_i + λψ_i` by marching squares.
//!
//! The field is sampled on every grid point of the bounding box; points that
//! are not interior nodes carry the boundary value `α_i`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::io::fmt_f64;
use crate::mesh::DomainMesh;
use crate::solver::SolutionState;

/// One polyline of `{v_i = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    /// 1 or 2.
    pub component: usize,
    pub points: Vec<[f64; 2]>,
    pub closed: bool,
    /// Shoelace area enclosed by the polyline (closed contours only, else 0).
    pub area: f64,
    /// Every vertex lies strictly inside the domain.
    pub interior: bool,
}

fn shoelace(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    let s: f64 = (0..n).map(|k| {
        let (a, b) = (pts[k], pts[(k + 1) % n]);
        a[0] * b[1] - b[0] * a[1]
    })
    .sum();
    0.5 * s.abs()
}

/// Contours of both components; empty for a component with `min v_i ≥ 0`.
pub fn free_boundary_extract(mesh: &DomainMesh, state: &SolutionState) -> Vec<Contour> {
    let mut out = Vec::new();
    for i in 0..2 {
        if state.min_v(i) >= 0.0 {
            continue;
        }
        out.extend(component_contours(mesh, state, i));
    }
    out
}

fn component_contours(mesh: &DomainMesh, state: &SolutionState, comp: usize) -> Vec<Contour> {
    let (nx, ny) = mesh.grid_dims();
    let v = state.v(comp);
    let a = state.alpha[comp];
    let stride = nx + 1;
    let val = |i: usize, j: usize| mesh.node_at(i, j).map_or(a, |k| v[k]);
    let h_edge = |i: usize, j: usize| 2 * (j * stride + i);
    let v_edge = |i: usize, j: usize| 2 * (j * stride + i) + 1;

    let mut points: HashMap<usize, [f64; 2]> = HashMap::new();
    let mut crossing = |id: usize, (i0, j0): (usize, usize), (i1, j1): (usize, usize)| {
        points.entry(id).or_insert_with(|| {
            let (f0, f1) = (val(i0, j0), val(i1, j1));
            let t = f0 / (f0 - f1);
            let (x0, y0) = mesh.grid_point(i0, j0);
            let (x1, y1) = mesh.grid_point(i1, j1);
            [x0 + t * (x1 - x0), y0 + t * (y1 - y0)]
        });
        id
    };

    let mut segments: Vec<[usize; 2]> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let f = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let case = f.iter().enumerate().fold(0, |c, (b, &x)| c | (usize::from(x < 0.0) << b));
            if case == 0 || case == 15 {
                continue;
            }
            let bottom = || h_edge(i, j);
            let right = || v_edge(i + 1, j);
            let top = || h_edge(i, j + 1);
            let left = || v_edge(i, j);
            let center_neg = f.iter().sum::<f64>() < 0.0;
            let pairs: Vec<[usize; 2]> = match case {
                1 | 14 => vec![[left(), bottom()]],
                2 | 13 => vec![[bottom(), right()]],
                3 | 12 => vec![[left(), right()]],
                4 | 11 => vec![[right(), top()]],
                6 | 9 => vec![[bottom(), top()]],
                7 | 8 => vec![[left(), top()]],
                5 if center_neg => vec![[bottom(), right()], [top(), left()]],
                5 => vec![[left(), bottom()], [right(), top()]],
                10 if center_neg => vec![[left(), bottom()], [right(), top()]],
                10 => vec![[bottom(), right()], [top(), left()]],
                _ => unreachable!(),
            };
            for [e0, e1] in pairs {
                for e in [e0, e1] {
                    let (ci, cj) = (e / 2 % stride, e / 2 / stride);
                    let far = if e % 2 == 0 { (ci + 1, cj) } else { (ci, cj + 1) };
                    crossing(e, (ci, cj), far);
                }
                segments.push([e0, e1]);
            }
        }
    }

    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for &e in seg {
            by_edge.entry(e).or_default().push(s);
        }
    }
    let shape = mesh.shape();
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut chain = vec![segments[start][0], segments[start][1]];
        let closed = loop {
            let tail = *chain.last().unwrap();
            if chain.len() > 2 && tail == chain[0] {
                chain.pop();
                break true;
            }
            let next = by_edge[&tail].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break false };
            used[s] = true;
            let seg = segments[s];
            chain.push(if seg[0] == tail { seg[1] } else { seg[0] });
        };
        let pts: Vec<[f64; 2]> = chain.iter().map(|e| points[e]).collect();
        let interior = pts.iter().all(|p| shape.contains(p[0], p[1]));
        out.push(Contour {
            component: comp + 1,
            area: if closed { shoelace(&pts) } else { 0.0 },
            points: pts,
            closed,
            interior,
        });
    }
    out
}

/// Writes the contour vertices as `x,y`; a closed contour repeats its first
/// vertex at the end.
pub fn write_contour_csv(contour: &Contour, path: &Path) -> Result<()> {
    let mut s = String::from("x,y\n");
    let close = contour.closed.then(|| contour.points.first()).flatten();
    for p in contour.points.iter().chain(close) {
        let _ = writeln!(s, "{},{}", fmt_f64(p[0]), fmt_f64(p[1]));
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainShape, GridField};

    #[test]
    fn positive_state_has_no_contours() {
        let mesh = build_mesh(DomainShape::unit_square(), 16).unwrap();
        let s = SolutionState::at_zero(&mesh).unwrap();
        assert!(free_boundary_extract(&mesh, &s).is_empty());
    }

    #[test]
    fn circle_area() {
        let mesh = build_mesh(DomainShape::unit_square(), 64).unwrap();
        let (cx, cy, r) = (0.4, 0.55, 0.2);
        let psi = mesh.field_from_fn(|x, y| (x - cx).powi(2) + (y - cy).powi(2) - r * r - 1.0).unwrap();
        let s = SolutionState { lambda: 1.0, alpha: [1.0, 1.0], psi: [psi.clone(), GridField::zeros(psi.len())] };
        let cs = free_boundary_extract(&mesh, &s);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(c.component, 1);
        assert!(c.closed && c.interior);
        let exact = std::f64::consts::PI * r * r;
        assert!((c.area - exact).abs() / exact < 5e-3, "{}", c.area);
        for p in &c.points {
            let d = ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
            assert!((d - r).abs() < 1e-3);
        }
    }

    #[test]
    fn negative_boundary_value_gives_closed_contour() {
        let mesh = build_mesh(DomainShape::Disk, 40).unwrap();
        let psi = mesh.torsion().unwrap();
        let top = psi.max();
        let s = SolutionState { lambda: 1.0, alpha: [-0.5 * top, -0.5 * top], psi: [psi.clone(), psi] };
        let cs = free_boundary_extract(&mesh, &s);
        assert_eq!(cs.len(), 2);
        assert!(cs.iter().all(|c| c.closed && c.interior && c.area > 0.0));
    }

    #[test]
    fn csv_closes_polyline() {
        let c = Contour {
            component: 1,
            points: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            closed: true,
            area: 0.5,
            interior: true,
        };
        assert_eq!(shoelace(&c.points), 0.5);
        let dir = std::env::temp_dir().join(format!("fbsys-contour-{}.csv", std::process::id()));
        write_contour_csv(&c, &dir).unwrap();
        let text = std::fs::read_to_string(&dir).unwrap();
        std::fs::remove_file(&dir).ok();
        assert_eq!(text.lines().count(), 5);
    }
}
