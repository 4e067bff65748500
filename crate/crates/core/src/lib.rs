pub mod book_engine;
pub mod bounds;
pub mod colouring;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod real;
pub mod vertex_set;

pub use colouring::{product_colouring, random_colouring, EdgeColouring};
pub use error::{Error, Result};
pub use par::Exec;
pub use vertex_set::VertexSet;
