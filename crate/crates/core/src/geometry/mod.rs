//! Chart-based manifolds and vector bundles, Riemannian distance,
//! compact-set sampling and the banks of test objects.

pub mod atlas;
pub mod atlas_file;
pub mod bank;
pub mod bundle;
pub mod compact;
pub mod distance;
pub mod pou;

pub use atlas::{Atlas, Chart, ManifoldPoint, TransitionKind};
pub use atlas_file::{load_atlas, parse_atlas};
pub use bank::{density_bank, make_bump, make_bump_in, scalar_bank, Density, ScalarTest};
pub use bundle::{make_vbhom_test, vbhom_bank, VBAtlas, VbHomTest};
pub use compact::CompactSet;
pub use distance::riemannian_distance;
pub use pou::{partition_of_unity, PartitionOfUnity};
