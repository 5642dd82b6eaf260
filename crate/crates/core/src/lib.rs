pub mod exec;
pub mod harness;
pub mod ifc;
pub mod mcp;
pub mod schemas;
pub mod stack;
pub mod store;
