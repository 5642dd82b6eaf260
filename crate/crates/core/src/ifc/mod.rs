//! Native IFC substrate: STEP parsing and serialization, the entity graph,
//! GlobalIds, selectors, structural checks and diffing.

pub mod check;
pub mod diff;
pub mod guid;
pub mod model;
pub mod schema_table;
pub mod select;
pub mod spf;
pub mod value;

pub use check::{schema_check, CheckReport, Violation, ViolationKind};
pub use diff::entity_diff;
pub use model::{Header, IfcEntity, IfcModel, SchemaId, SourcePos};
pub use select::{select, SelectError, Selector};
pub use spf::{parse, serialize, ParseError, ParseErrorKind};
pub use value::SpfValue;
