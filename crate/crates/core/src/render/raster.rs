use nalgebra::Vector3;

use crate::geometry::CameraIntrinsics;

use super::{DepthBuffer, Mask};

/// Geometry closer to the camera than this is clipped away.
pub const NEAR_PLANE: f64 = 1e-4;

const NO_OWNER: u32 = u32::MAX;

/// A projected vertex: pixel coordinates plus camera-frame depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreenVertex {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// One triangle edge, evaluated in a canonical direction so that two triangles sharing the edge
/// see exactly negated values.
#[derive(Clone, Copy)]
struct Edge {
    ox: f64,
    oy: f64,
    dx: f64,
    dy: f64,
    sign: f64,
    /// Pixels exactly on the edge belong to the triangle.
    owns_boundary: bool,
}

impl Edge {
    fn new(a: &ScreenVertex, b: &ScreenVertex) -> Edge {
        // Top-left rule for a positively oriented triangle in y-down pixel space.
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let owns_boundary = dy < 0.0 || (dy == 0.0 && dx > 0.0);
        let flip = (a.y, a.x) > (b.y, b.x);
        let (o, e) = if flip { (b, a) } else { (a, b) };
        Edge { ox: o.x, oy: o.y, dx: e.x - o.x, dy: e.y - o.y, sign: if flip { -1.0 } else { 1.0 }, owns_boundary }
    }

    #[inline]
    fn eval(&self, px: f64, py: f64) -> f64 {
        self.sign * (self.dx * (py - self.oy) - self.dy * (px - self.ox))
    }

    #[inline]
    fn covers(&self, value: f64) -> bool {
        value > 0.0 || (value == 0.0 && self.owns_boundary)
    }
}

/// Depth-tested triangle rasterizer over pixel centers.
///
/// Coverage uses the top-left rule, so triangles sharing an edge cover each pixel on it once.
/// Depth is interpolated perspective-correctly. Equal depths go to the lower triangle id,
/// which makes the result independent of submission order.
pub struct Rasterizer {
    width: u32,
    height: u32,
    depth: Vec<f64>,
    owner: Vec<u32>,
}

impl Rasterizer {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Rasterizer { width, height, depth: vec![f64::INFINITY; n], owner: vec![NO_OWNER; n] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Rasterizes an already projected triangle. Vertex `z` must be positive.
    pub fn draw_screen_triangle(&mut self, v: &[ScreenVertex; 3], id: u32) {
        let (a, mut b, mut c) = (v[0], v[1], v[2]);
        let mut area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if !area.is_finite() || area == 0.0 {
            return;
        }
        if area < 0.0 {
            std::mem::swap(&mut b, &mut c);
            area = -area;
        }
        let min_x = a.x.min(b.x).min(c.x);
        let max_x = a.x.max(b.x).max(c.x);
        let min_y = a.y.min(b.y).min(c.y);
        let max_y = a.y.max(b.y).max(c.y);
        let Some((x0, x1)) = pixel_span(min_x, max_x, self.width) else { return };
        let Some((y0, y1)) = pixel_span(min_y, max_y, self.height) else { return };

        let (e_bc, e_ca, e_ab) = (Edge::new(&b, &c), Edge::new(&c, &a), Edge::new(&a, &b));
        let inv = [1.0 / a.z, 1.0 / b.z, 1.0 / c.z];
        let w = self.width as usize;
        for py in y0..=y1 {
            let cy = f64::from(py) + 0.5;
            let row = py as usize * w;
            for px in x0..=x1 {
                let cx = f64::from(px) + 0.5;
                let wa = e_bc.eval(cx, cy);
                if !e_bc.covers(wa) {
                    continue;
                }
                let wb = e_ca.eval(cx, cy);
                if !e_ca.covers(wb) {
                    continue;
                }
                let wc = e_ab.eval(cx, cy);
                if !e_ab.covers(wc) {
                    continue;
                }
                let inv_z = (wa * inv[0] + wb * inv[1] + wc * inv[2]) / area;
                let z = 1.0 / inv_z;
                let i = row + px as usize;
                let cur = self.depth[i];
                if z < cur || (z == cur && id < self.owner[i]) {
                    self.depth[i] = z;
                    self.owner[i] = id;
                }
            }
        }
    }

    /// Clips a camera-frame triangle against the near plane, projects it and rasterizes it.
    pub fn draw_camera_triangle(&mut self, tri: &[Vector3<f64>; 3], k: &CameraIntrinsics, id: u32) {
        let project = |p: &Vector3<f64>| ScreenVertex { x: k.fx * p.x / p.z + k.cx, y: k.fy * p.y / p.z + k.cy, z: p.z };
        if tri.iter().all(|p| p.z >= NEAR_PLANE) {
            self.draw_screen_triangle(&[project(&tri[0]), project(&tri[1]), project(&tri[2])], id);
            return;
        }
        if tri.iter().all(|p| p.z < NEAR_PLANE) {
            return;
        }
        let poly = clip_near(tri);
        for i in 1..poly.len() - 1 {
            self.draw_screen_triangle(&[project(&poly[0]), project(&poly[i]), project(&poly[i + 1])], id);
        }
    }

    pub fn depth(&self) -> DepthBuffer {
        DepthBuffer { width: self.width, height: self.height, values: self.depth.clone() }
    }

    pub fn mask(&self) -> Mask {
        Mask { width: self.width, height: self.height, bits: self.owner.iter().map(|&o| o != NO_OWNER).collect() }
    }

    /// Winning triangle id per pixel, `None` where empty.
    pub fn owner(&self, x: u32, y: u32) -> Option<u32> {
        let o = self.owner[y as usize * self.width as usize + x as usize];
        (o != NO_OWNER).then_some(o)
    }

    pub fn into_buffers(self) -> (Mask, DepthBuffer) {
        let mask = self.mask();
        (mask, DepthBuffer { width: self.width, height: self.height, values: self.depth })
    }
}

/// Pixel indices whose centers may fall in `[lo, hi]`, clamped to the image.
fn pixel_span(lo: f64, hi: f64, size: u32) -> Option<(u32, u32)> {
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(f64::from(size) - 1.0);
    (first <= last).then_some((first as u32, last as u32))
}

/// Sutherland-Hodgman against `z >= NEAR_PLANE`. Returns 3 or 4 vertices.
fn clip_near(tri: &[Vector3<f64>; 3]) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let cur = tri[i];
        let next = tri[(i + 1) % 3];
        let cur_in = cur.z >= NEAR_PLANE;
        let next_in = next.z >= NEAR_PLANE;
        if cur_in {
            out.push(cur);
        }
        if cur_in != next_in {
            let t = (NEAR_PLANE - cur.z) / (next.z - cur.z);
            let mut p = cur + (next - cur) * t;
            p.z = NEAR_PLANE;
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(x: f64, y: f64, z: f64) -> ScreenVertex {
        ScreenVertex { x, y, z }
    }

    #[test]
    fn shared_edge_covered_once() {
        // A 4x4 square split along its diagonal; pixel centers on the diagonal belong to one half.
        let mut first = Rasterizer::new(8, 8);
        first.draw_screen_triangle(&[sv(0.5, 0.5, 1.0), sv(4.5, 0.5, 1.0), sv(4.5, 4.5, 1.0)], 0);
        let mut second = Rasterizer::new(8, 8);
        second.draw_screen_triangle(&[sv(0.5, 0.5, 1.0), sv(4.5, 4.5, 1.0), sv(0.5, 4.5, 1.0)], 1);
        let (a, b) = (first.mask(), second.mask());
        assert_eq!(a.intersection(&b).unwrap().count(), 0);
        assert_eq!(a.union(&b).unwrap().count(), 16);
    }

    #[test]
    fn winding_does_not_matter() {
        let mut cw = Rasterizer::new(16, 16);
        cw.draw_screen_triangle(&[sv(1.0, 1.0, 1.0), sv(12.0, 3.0, 1.0), sv(4.0, 14.0, 1.0)], 0);
        let mut ccw = Rasterizer::new(16, 16);
        ccw.draw_screen_triangle(&[sv(1.0, 1.0, 1.0), sv(4.0, 14.0, 1.0), sv(12.0, 3.0, 1.0)], 0);
        assert_eq!(cw.mask(), ccw.mask());
    }

    #[test]
    fn depth_tie_goes_to_lower_id() {
        let tri = [sv(0.0, 0.0, 2.0), sv(8.0, 0.0, 2.0), sv(0.0, 8.0, 2.0)];
        let mut r = Rasterizer::new(8, 8);
        r.draw_screen_triangle(&tri, 5);
        r.draw_screen_triangle(&tri, 3);
        assert_eq!(r.owner(1, 1), Some(3));
        let mut r = Rasterizer::new(8, 8);
        r.draw_screen_triangle(&tri, 3);
        r.draw_screen_triangle(&tri, 5);
        assert_eq!(r.owner(1, 1), Some(3));
    }

    #[test]
    fn clipping_keeps_the_visible_part() {
        let k = CameraIntrinsics::new(10.0, 10.0, 8.0, 8.0, 16, 16).unwrap();
        // One vertex behind the camera; the visible part still covers the principal point.
        let tri = [Vector3::new(-1.0, -1.0, 1.0), Vector3::new(1.0, -1.0, 1.0), Vector3::new(0.0, 1.0, -0.2)];
        let mut r = Rasterizer::new(16, 16);
        r.draw_camera_triangle(&tri, &k, 0);
        assert!(r.owner(8, 8).is_some());
        assert!(r.depth().values.iter().all(|&z| z == f64::INFINITY || z >= NEAR_PLANE));
        let behind = tri.map(|mut p| {
            p.z = -1.0;
            p
        });
        let mut r = Rasterizer::new(16, 16);
        r.draw_camera_triangle(&behind, &k, 0);
        assert!(r.mask().is_empty());
    }

    #[test]
    fn degenerate_triangle_draws_nothing() {
        let mut r = Rasterizer::new(8, 8);
        r.draw_screen_triangle(&[sv(0.0, 0.0, 1.0), sv(4.0, 4.0, 1.0), sv(8.0, 8.0, 1.0)], 0);
        assert!(r.mask().is_empty());
    }
}
