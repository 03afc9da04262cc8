use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::Vector3;
use roxmltree::{Document, Node};

use super::mesh::{parse_obj, parse_stl};
use super::{JointKind, JointSpec, Link, ModelError, RobotModel, TriangleMesh, Visual};
use crate::geometry::Transform;

/// Tessellation used for URDF cylinder and sphere primitives.
pub const PRIMITIVE_SEGMENTS: u32 = 32;

const CONTINUOUS_LIMIT: f64 = 2.0 * std::f64::consts::PI;

/// A parsed URDF together with the elements that were skipped.
#[derive(Debug)]
pub struct ParsedUrdf {
    pub model: RobotModel,
    pub warnings: Vec<String>,
}

/// Parses the visual/kinematic subset of URDF. Mesh paths resolve against `asset_root`.
pub fn parse_urdf(text: &str, asset_root: &Path) -> Result<RobotModel, ModelError> {
    parse_urdf_with_warnings(text, asset_root).map(|p| p.model)
}

pub fn parse_urdf_file(path: &Path, asset_root: Option<&Path>) -> Result<RobotModel, ModelError> {
    let text = fs::read_to_string(path).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
    let root = match asset_root {
        Some(r) => r.to_path_buf(),
        None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let parsed = parse_urdf_with_warnings(&text, &root)?;
    for w in &parsed.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(parsed.model)
}

pub fn parse_urdf_with_warnings(text: &str, asset_root: &Path) -> Result<ParsedUrdf, ModelError> {
    let doc = Document::parse(text).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ModelError::MalformedXml(format!("root element is <{}>, expected <robot>", robot.tag_name().name())));
    }
    let name = robot.attribute("name").unwrap_or("robot");
    let mut warnings = Vec::new();
    let mut meshes = MeshCache { root: asset_root.to_path_buf(), loaded: HashMap::new() };
    let mut links = Vec::new();
    let mut joints = Vec::new();
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => links.push(parse_link(node, &mut meshes, &mut warnings)?),
            "joint" => joints.push(parse_joint(node, &mut warnings)?),
            "material" => {}
            other => warnings.push(format!("ignored <{other}>")),
        }
    }
    let model = RobotModel::new(name, links, joints)?;
    Ok(ParsedUrdf { model, warnings })
}

struct MeshCache {
    root: PathBuf,
    loaded: HashMap<PathBuf, Arc<TriangleMesh>>,
}

impl MeshCache {
    fn load(&mut self, filename: &str) -> Result<Arc<TriangleMesh>, ModelError> {
        let rel = filename
            .strip_prefix("package://")
            .or_else(|| filename.strip_prefix("file://"))
            .unwrap_or(filename);
        let path = if Path::new(rel).is_absolute() { PathBuf::from(rel) } else { self.root.join(rel) };
        if let Some(m) = self.loaded.get(&path) {
            return Ok(m.clone());
        }
        if !path.is_file() {
            return Err(ModelError::MissingMeshFile(path.display().to_string()));
        }
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
        let bytes = fs::read(&path).map_err(|e| ModelError::Io(path.display().to_string(), e))?;
        let mesh = match ext.as_str() {
            "stl" => parse_stl(&bytes)?,
            "obj" => parse_obj(&String::from_utf8_lossy(&bytes))?,
            _ => return Err(ModelError::UnsupportedMeshFormat(path.display().to_string())),
        };
        let mesh = Arc::new(mesh);
        self.loaded.insert(path, mesh.clone());
        Ok(mesh)
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == tag)
}

fn floats<const N: usize>(node: Node, attr: &str, default: [f64; N]) -> Result<[f64; N], ModelError> {
    let Some(text) = node.attribute(attr) else {
        return Ok(default);
    };
    let vals: Vec<f64> = text
        .split_ascii_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| ModelError::MalformedXml(format!("<{}> {attr}=\"{text}\" is not numeric", node.tag_name().name())))?;
    vals.try_into()
        .map_err(|_| ModelError::MalformedXml(format!("<{}> {attr}=\"{text}\" needs {N} values", node.tag_name().name())))
}

fn float(node: Node, attr: &str) -> Result<Option<f64>, ModelError> {
    node.attribute(attr)
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| ModelError::MalformedXml(format!("<{}> {attr}=\"{t}\" is not numeric", node.tag_name().name())))
        })
        .transpose()
}

fn parse_origin(node: Node) -> Result<Transform, ModelError> {
    match child(node, "origin") {
        None => Ok(Transform::identity()),
        Some(o) => {
            let xyz = floats(o, "xyz", [0.0; 3])?;
            let [r, p, y] = floats(o, "rpy", [0.0; 3])?;
            Ok(Transform::from_rpy(r, p, y, xyz))
        }
    }
}

fn parse_link(node: Node, meshes: &mut MeshCache, warnings: &mut Vec<String>) -> Result<Link, ModelError> {
    let name = node
        .attribute("name")
        .ok_or_else(|| ModelError::MalformedXml("<link> without name".into()))?;
    let mut link = Link::new(name);
    for el in node.children().filter(Node::is_element) {
        match el.tag_name().name() {
            "visual" => {
                let origin = parse_origin(el)?;
                let geom = child(el, "geometry")
                    .and_then(|g| g.children().find(Node::is_element))
                    .ok_or_else(|| ModelError::MalformedXml(format!("link `{name}`: <visual> without geometry")))?;
                let mesh = match geom.tag_name().name() {
                    "box" => Arc::new(TriangleMesh::cuboid(floats(geom, "size", [0.0; 3])?)),
                    "cylinder" => Arc::new(TriangleMesh::cylinder(
                        float(geom, "radius")?.unwrap_or(0.0),
                        float(geom, "length")?.unwrap_or(0.0),
                        PRIMITIVE_SEGMENTS,
                    )),
                    "sphere" => Arc::new(TriangleMesh::sphere(float(geom, "radius")?.unwrap_or(0.0), PRIMITIVE_SEGMENTS)),
                    "mesh" => {
                        let file = geom
                            .attribute("filename")
                            .ok_or_else(|| ModelError::MalformedXml(format!("link `{name}`: <mesh> without filename")))?;
                        let m = meshes.load(file)?;
                        let scale = floats(geom, "scale", [1.0; 3])?;
                        if scale == [1.0; 3] {
                            m
                        } else {
                            Arc::new(m.scaled(&Vector3::from(scale)))
                        }
                    }
                    other => return Err(ModelError::MalformedXml(format!("link `{name}`: unknown geometry <{other}>"))),
                };
                link.visuals.push(Visual { mesh, origin });
            }
            "inertial" => {}
            other => warnings.push(format!("link `{name}`: ignored <{other}>")),
        }
    }
    Ok(link)
}

fn parse_joint(node: Node, warnings: &mut Vec<String>) -> Result<JointSpec, ModelError> {
    let name = node
        .attribute("name")
        .ok_or_else(|| ModelError::MalformedXml("<joint> without name".into()))?;
    let ty = node.attribute("type").unwrap_or("");
    let kind = match ty {
        "revolute" | "continuous" => JointKind::Revolute,
        "prismatic" => JointKind::Prismatic,
        "fixed" => JointKind::Fixed,
        other => return Err(ModelError::UnsupportedJointType(name.into(), other.into())),
    };
    let link_attr = |tag: &str| {
        child(node, tag)
            .and_then(|n| n.attribute("link"))
            .map(str::to_string)
            .ok_or_else(|| ModelError::MalformedXml(format!("joint `{name}` missing <{tag} link=..>")))
    };
    let parent_link = link_attr("parent")?;
    let child_link = link_attr("child")?;
    let origin = parse_origin(node)?;
    let axis = match child(node, "axis") {
        Some(a) => Vector3::from(floats(a, "xyz", [1.0, 0.0, 0.0])?),
        None => Vector3::x(),
    };
    let axis = if kind.is_fixed() {
        Vector3::z()
    } else {
        let n = axis.norm();
        if n == 0.0 {
            return Err(ModelError::InvalidJoint(name.into(), "zero axis".into()));
        }
        axis / n
    };
    let limits = match (kind, ty) {
        (JointKind::Fixed, _) => [0.0, 0.0],
        (_, "continuous") => [-CONTINUOUS_LIMIT, CONTINUOUS_LIMIT],
        _ => {
            let lim = child(node, "limit")
                .ok_or_else(|| ModelError::InvalidJoint(name.into(), "missing <limit>".into()))?;
            [float(lim, "lower")?.unwrap_or(0.0), float(lim, "upper")?.unwrap_or(0.0)]
        }
    };
    for el in node.children().filter(Node::is_element) {
        let tag = el.tag_name().name();
        if !matches!(tag, "origin" | "parent" | "child" | "axis" | "limit") {
            warnings.push(format!("joint `{name}`: ignored <{tag}>"));
        }
    }
    Ok(JointSpec { name: name.into(), kind, parent_link, child_link, origin, axis, limits })
}

fn origin_xml(t: &Transform) -> String {
    let (r, p, y) = t.to_rpy();
    let v = t.translation();
    format!(r#"<origin xyz="{:?} {:?} {:?}" rpy="{r:?} {p:?} {y:?}"/>"#, v.x, v.y, v.z)
}

/// Serializes `model` to URDF text. Every visual becomes a mesh reference named by
/// `mesh_name(link, visual_index)`; the caller writes those meshes (see [`write_urdf`]).
pub fn to_urdf(model: &RobotModel, mesh_name: impl Fn(&str, usize) -> String) -> String {
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0"?>"#);
    let _ = writeln!(out, r#"<robot name="{}">"#, model.name());
    for link in model.links() {
        let _ = writeln!(out, r#"  <link name="{}">"#, link.name);
        for (i, v) in link.visuals.iter().enumerate() {
            let _ = writeln!(
                out,
                "    <visual>\n      {}\n      <geometry><mesh filename=\"{}\"/></geometry>\n    </visual>",
                origin_xml(&v.origin),
                mesh_name(&link.name, i)
            );
        }
        let _ = writeln!(out, "  </link>");
    }
    for j in model.joints() {
        let ty = match j.kind {
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
            JointKind::Fixed => "fixed",
        };
        let _ = writeln!(out, r#"  <joint name="{}" type="{ty}">"#, j.name);
        let _ = writeln!(out, r#"    <parent link="{}"/>"#, j.parent_link);
        let _ = writeln!(out, r#"    <child link="{}"/>"#, j.child_link);
        let _ = writeln!(out, "    {}", origin_xml(&j.origin));
        if !j.kind.is_fixed() {
            let _ = writeln!(out, r#"    <axis xyz="{:?} {:?} {:?}"/>"#, j.axis.x, j.axis.y, j.axis.z);
            let _ = writeln!(out, r#"    <limit lower="{:?}" upper="{:?}" effort="0" velocity="0"/>"#, j.limits[0], j.limits[1]);
        }
        let _ = writeln!(out, "  </joint>");
    }
    out.push_str("</robot>\n");
    out
}

/// Writes `<dir>/<name>.urdf` plus one OBJ per visual under `<dir>/meshes/`.
pub fn write_urdf(model: &RobotModel, dir: &Path) -> Result<PathBuf, ModelError> {
    let io = |p: &Path, e| ModelError::Io(p.display().to_string(), e);
    let mesh_dir = dir.join("meshes");
    fs::create_dir_all(&mesh_dir).map_err(|e| io(&mesh_dir, e))?;
    let file_name = |link: &str, i: usize| format!("meshes/{}_{}_{i}.obj", model.name(), link);
    for link in model.links() {
        for (i, v) in link.visuals.iter().enumerate() {
            let p = dir.join(file_name(&link.name, i));
            fs::write(&p, v.mesh.to_obj()).map_err(|e| io(&p, e))?;
        }
    }
    let path = dir.join(format!("{}.urdf", model.name()));
    fs::write(&path, to_urdf(model, file_name)).map_err(|e| io(&path, e))?;
    Ok(path)
}
