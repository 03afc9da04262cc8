//! Robot descriptions: URDF subset, STL/OBJ meshes, and arm + gripper embodiments.

mod embodiment;
mod mesh;
mod model;
mod urdf;

pub(crate) use embodiment::Drive;
pub use embodiment::{attach_gripper, Embodiment, EmbodimentFile};
pub use mesh::{parse_obj, parse_stl, TriangleMesh};
pub use model::{JointKind, JointSpec, Link, RobotModel, Visual};
pub use urdf::{parse_urdf, parse_urdf_file, parse_urdf_with_warnings, to_urdf, write_urdf, ParsedUrdf, PRIMITIVE_SEGMENTS};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("malformed URDF: {0}")]
    MalformedXml(String),
    #[error("kinematic cycle through joint `{0}`")]
    CyclicKinematics(String),
    #[error("invalid kinematic tree: {0}")]
    InvalidTree(String),
    #[error("joint `{0}`: {1}")]
    InvalidJoint(String, String),
    #[error("mesh file not found: {0}")]
    MissingMeshFile(String),
    #[error("unsupported mesh format: {0}")]
    UnsupportedMeshFormat(String),
    #[error("joint `{0}` has unsupported type `{1}`")]
    UnsupportedJointType(String, String),
    #[error("truncated mesh file: {0}")]
    TruncatedFile(String),
    #[error("bad face index: {0}")]
    BadFaceIndex(String),
    #[error("malformed mesh: {0}")]
    MalformedMesh(String),
    #[error("embodiment file: {0}")]
    Schema(String),
    #[error("reading {0}: {1}")]
    Io(String, #[source] std::io::Error),
}
