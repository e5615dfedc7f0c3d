//! Response generation: connectors for mock and remote models, the plan
//! executor, and append-only record sinks.

pub mod connector;
pub mod executor;
pub mod remote;
pub mod sink;
