//! Ray-cast renderer over analytic primitives.

pub mod geometry;
pub mod randomize;
pub mod raycast;
pub mod scene;
pub mod shapes;
pub mod texture;

pub use geometry::{robot_geometry, screwdriver_primitives, ScrewdriverSpec};
pub use randomize::{randomize_scene, RenderMode, SceneDraw, SceneRandomization};
pub use raycast::{render, trace, IdMap, Layers, RenderOutput, Trace};
pub use scene::{InstanceId, Lighting, Material, Primitive, Scene};
pub use shapes::Shape;
pub use texture::{TexturePattern, TextureRegistry};
