use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;

use super::ModelError;

/// Indexed triangle mesh in meters. An empty mesh is valid (a link without visuals).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Checks index bounds and coordinate finiteness.
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self, ModelError> {
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(ModelError::MalformedMesh("non-finite vertex coordinate".into()));
        }
        let n = vertices.len() as u64;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| u64::from(i) >= n)) {
            return Err(ModelError::BadFaceIndex(format!("triangle {t:?} with {n} vertices")));
        }
        Ok(TriangleMesh { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Merges bit-identical vertex positions and drops unreferenced ones.
    pub fn welded(&self) -> TriangleMesh {
        let mut index: HashMap<[u64; 3], u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut remap = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            let id = *index.entry(key).or_insert_with(|| {
                vertices.push(*v);
                (vertices.len() - 1) as u32
            });
            remap.push(id);
        }
        let triangles = self
            .triangles
            .iter()
            .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
            .collect();
        TriangleMesh { vertices, triangles }
    }

    pub fn scaled(&self, s: &Vector3<f64>) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v.component_mul(s)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Axis-aligned box centered at the origin.
    pub fn cuboid(size: [f64; 3]) -> TriangleMesh {
        let h = Vector3::from(size) * 0.5;
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8u32 {
            let sx = if i & 1 == 0 { -h.x } else { h.x };
            let sy = if i & 2 == 0 { -h.y } else { h.y };
            let sz = if i & 4 == 0 { -h.z } else { h.z };
            vertices.push(Vector3::new(sx, sy, sz));
        }
        let quads = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh { vertices, triangles }
    }

    /// Cylinder along z centered at the origin, `segments` around the axis, capped.
    pub fn cylinder(radius: f64, length: f64, segments: u32) -> TriangleMesh {
        let half = 0.5 * length;
        let mut vertices = vec![Vector3::new(0.0, 0.0, -half), Vector3::new(0.0, 0.0, half)];
        for i in 0..segments {
            let a = 2.0 * PI * f64::from(i) / f64::from(segments);
            let (s, c) = a.sin_cos();
            vertices.push(Vector3::new(radius * c, radius * s, -half));
            vertices.push(Vector3::new(radius * c, radius * s, half));
        }
        let mut triangles = Vec::with_capacity(4 * segments as usize);
        for i in 0..segments {
            let j = (i + 1) % segments;
            let (b0, t0, b1, t1) = (2 + 2 * i, 3 + 2 * i, 2 + 2 * j, 3 + 2 * j);
            triangles.push([b0, b1, t1]);
            triangles.push([b0, t1, t0]);
            triangles.push([0, b1, b0]);
            triangles.push([1, t0, t1]);
        }
        TriangleMesh { vertices, triangles }
    }

    /// UV sphere with `segments` longitudes and `segments / 2` latitude bands.
    pub fn sphere(radius: f64, segments: u32) -> TriangleMesh {
        let stacks = (segments / 2).max(2);
        let mut vertices = vec![Vector3::new(0.0, 0.0, radius), Vector3::new(0.0, 0.0, -radius)];
        for s in 1..stacks {
            let polar = PI * f64::from(s) / f64::from(stacks);
            let (sp, cp) = polar.sin_cos();
            for i in 0..segments {
                let a = 2.0 * PI * f64::from(i) / f64::from(segments);
                let (sa, ca) = a.sin_cos();
                vertices.push(Vector3::new(radius * sp * ca, radius * sp * sa, radius * cp));
            }
        }
        let ring = |s: u32, i: u32| 2 + (s - 1) * segments + (i % segments);
        let mut triangles = Vec::new();
        for i in 0..segments {
            triangles.push([0, ring(1, i), ring(1, i + 1)]);
            triangles.push([1, ring(stacks - 1, i + 1), ring(stacks - 1, i)]);
        }
        for s in 1..stacks - 1 {
            for i in 0..segments {
                let (a, b, c, d) = (ring(s, i), ring(s, i + 1), ring(s + 1, i), ring(s + 1, i + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        TriangleMesh { vertices, triangles }
    }

    /// Wavefront OBJ text with `v`/`f` statements only. Coordinates round-trip exactly.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }
}

/// Parses binary or ASCII STL into a triangle soup (three fresh vertices per facet).
pub fn parse_stl(bytes: &[u8]) -> Result<TriangleMesh, ModelError> {
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as u64;
        if 84 + 50 * count == bytes.len() as u64 {
            return parse_binary_stl(&bytes[84..], count as usize);
        }
    }
    let looks_ascii = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .map(|i| bytes[i..].starts_with(b"solid"))
        .unwrap_or(false);
    if looks_ascii {
        if let Ok(text) = std::str::from_utf8(bytes) {
            if text.contains("facet") || text.contains("endsolid") {
                return parse_ascii_stl(text);
            }
        }
    }
    if bytes.len() < 84 {
        return Err(ModelError::TruncatedFile(format!("{} bytes, binary STL header needs 84", bytes.len())));
    }
    let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as u64;
    Err(ModelError::TruncatedFile(format!(
        "declared {count} triangles ({} bytes) but file has {} bytes",
        84 + 50 * count,
        bytes.len()
    )))
}

fn parse_binary_stl(body: &[u8], count: usize) -> Result<TriangleMesh, ModelError> {
    let mut vertices = Vec::with_capacity(3 * count);
    let mut triangles = Vec::with_capacity(count);
    for rec in body.chunks_exact(50) {
        let f = |o: usize| f64::from(f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]));
        let base = vertices.len() as u32;
        for k in 0..3 {
            let o = 12 + 12 * k;
            vertices.push(Vector3::new(f(o), f(o + 4), f(o + 8)));
        }
        triangles.push([base, base + 1, base + 2]);
    }
    TriangleMesh::new(vertices, triangles)
}

fn parse_ascii_stl(text: &str) -> Result<TriangleMesh, ModelError> {
    let mut vertices = Vec::new();
    let mut tokens = text.split_ascii_whitespace();
    while let Some(tok) = tokens.next() {
        if tok != "vertex" {
            continue;
        }
        let mut c = [0.0; 3];
        for slot in &mut c {
            let t = tokens
                .next()
                .ok_or_else(|| ModelError::TruncatedFile("vertex with fewer than 3 coordinates".into()))?;
            *slot = t
                .parse()
                .map_err(|_| ModelError::MalformedMesh(format!("bad STL coordinate `{t}`")))?;
        }
        vertices.push(Vector3::from(c));
    }
    if vertices.len() % 3 != 0 {
        return Err(ModelError::TruncatedFile(format!("{} vertices is not a whole number of facets", vertices.len())));
    }
    let triangles = (0..vertices.len() as u32 / 3).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
    TriangleMesh::new(vertices, triangles)
}

/// Parses the `v` and `f` statements of a Wavefront OBJ file; polygons are fan-triangulated.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, ModelError> {
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut parts = line.split_ascii_whitespace();
        match parts.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for slot in &mut c {
                    let t = parts
                        .next()
                        .ok_or_else(|| ModelError::MalformedMesh(format!("line {}: short vertex", lineno + 1)))?;
                    *slot = t
                        .parse()
                        .map_err(|_| ModelError::MalformedMesh(format!("line {}: bad coordinate `{t}`", lineno + 1)))?;
                }
                vertices.push(Vector3::from(c));
            }
            Some("f") => {
                let n = vertices.len() as i64;
                let idx = parts
                    .map(|p| {
                        let first = p.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|_| ModelError::BadFaceIndex(format!("line {}: `{p}`", lineno + 1)))?;
                        let resolved = if i < 0 { n + i } else { i - 1 };
                        if i == 0 || resolved < 0 || resolved >= n {
                            return Err(ModelError::BadFaceIndex(format!(
                                "line {}: index {i} with {n} vertices",
                                lineno + 1
                            )));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                if idx.len() < 3 {
                    return Err(ModelError::BadFaceIndex(format!("line {}: face with {} vertices", lineno + 1, idx.len())));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_ascii_stl() -> String {
        let cube = TriangleMesh::cuboid([1.0, 1.0, 1.0]);
        let mut s = String::from("solid cube\n");
        for t in &cube.triangles {
            s.push_str("  facet normal 0 0 0\n    outer loop\n");
            for &i in t {
                let v = cube.vertices[i as usize];
                s.push_str(&format!("      vertex {} {} {}\n", v.x, v.y, v.z));
            }
            s.push_str("    endloop\n  endfacet\n");
        }
        s.push_str("endsolid cube\n");
        s
    }

    fn binary_stl(declared: u32, records: usize) -> Vec<u8> {
        let mut b = vec![0u8; 80];
        b.extend_from_slice(&declared.to_le_bytes());
        for r in 0..records {
            let mut rec = [0u8; 50];
            for k in 0..3 {
                let o = 12 + 12 * k;
                rec[o..o + 4].copy_from_slice(&(r as f32 + k as f32).to_le_bytes());
            }
            b.extend_from_slice(&rec);
        }
        b
    }

    #[test]
    fn ascii_cube_welds_to_eight_vertices() {
        let mesh = parse_stl(cube_ascii_stl().as_bytes()).unwrap();
        assert_eq!(mesh.triangles.len(), 12);
        assert_eq!(mesh.vertices.len(), 36);
        assert_eq!(mesh.welded().vertices.len(), 8);
    }

    #[test]
    fn binary_stl_roundtrip_count() {
        let mesh = parse_stl(&binary_stl(10, 10)).unwrap();
        assert_eq!(mesh.triangles.len(), 10);
    }

    #[test]
    fn binary_stl_missing_record_is_truncated() {
        assert!(matches!(parse_stl(&binary_stl(10, 9)), Err(ModelError::TruncatedFile(_))));
        assert!(matches!(parse_stl(&[0u8; 20]), Err(ModelError::TruncatedFile(_))));
    }

    #[test]
    fn binary_header_starting_with_solid_is_still_binary() {
        let mut b = binary_stl(2, 2);
        b[..5].copy_from_slice(b"solid");
        assert_eq!(parse_stl(&b).unwrap().triangles.len(), 2);
    }

    #[test]
    fn obj_quad_fans_preserving_winding() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_slash_and_negative_indices() {
        let mesh = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nvn 0 0 1\nf -3/1/1 -2//1 -1/2\n").unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_out_of_range_index() {
        assert!(matches!(parse_obj("v 0 0 0\nf 1 2 3\n"), Err(ModelError::BadFaceIndex(_))));
        assert!(matches!(parse_obj("v 0 0 0\nf 0 1 1\n"), Err(ModelError::BadFaceIndex(_))));
    }

    #[test]
    fn obj_roundtrip_is_exact() {
        let m = TriangleMesh::sphere(0.123456789, 32);
        assert_eq!(parse_obj(&m.to_obj()).unwrap(), m);
    }

    #[test]
    fn primitive_counts() {
        assert_eq!(TriangleMesh::cylinder(0.1, 0.5, 32).triangles.len(), 128);
        let s = TriangleMesh::sphere(1.0, 32);
        assert_eq!(s.triangles.len(), 2 * 32 * 15);
        assert!(s.vertices.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }
}
