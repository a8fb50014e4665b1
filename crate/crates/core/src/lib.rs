//! Turn: a compiled language and actor runtime for programs that call
//! language models as typed, fallible, confidence-scored operations.

pub mod actors;
pub mod compiler;
pub mod contextmem;
pub mod drivers;
pub mod durable;
pub mod experiments;
pub mod frontend;
pub mod host;
pub mod schema;
pub mod stdlib;
pub mod vm;
