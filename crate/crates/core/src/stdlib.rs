//! The standard library: seven modules written in Turn, embedded in the
//! binary and compiled on first use. Call them as `call("std/net.get", ...)`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};

use crate::compiler::{compile_source, Program};
use crate::schema::StaticFetcher;
use crate::vm::{ErrorKind, RuntimeError};

pub struct StdModule {
    pub name: &'static str,
    pub source: &'static str,
    /// Identity classes accepted by the module's I/O functions.
    pub required_classes: &'static [&'static str],
    pub api: &'static [&'static str],
}

pub const MODULES: [StdModule; 7] = [
    StdModule {
        name: "std/net",
        source: include_str!("../stdlib/net.tn"),
        required_classes: &["network", "oauth"],
        api: &["get", "post"],
    },
    StdModule {
        name: "std/fs",
        source: include_str!("../stdlib/fs.tn"),
        required_classes: &["filesystem"],
        api: &["read", "write"],
    },
    StdModule {
        name: "std/json",
        source: include_str!("../stdlib/json.tn"),
        required_classes: &[],
        api: &["parse", "stringify"],
    },
    StdModule {
        name: "std/time",
        source: include_str!("../stdlib/time.tn"),
        required_classes: &[],
        api: &["now", "sleep"],
    },
    StdModule {
        name: "std/env",
        source: include_str!("../stdlib/env.tn"),
        required_classes: &["environment"],
        api: &["get", "set"],
    },
    StdModule {
        name: "std/regex",
        source: include_str!("../stdlib/regex.tn"),
        required_classes: &[],
        api: &["matches", "replace"],
    },
    StdModule {
        name: "std/math",
        source: include_str!("../stdlib/math.tn"),
        required_classes: &[],
        api: &["max", "min", "abs"],
    },
];

/// Per-runtime module cache. Concurrent first uses compile once.
#[derive(Default)]
pub struct StdLib {
    cells: [OnceLock<Arc<Program>>; 7],
    compiles: AtomicUsize,
}

impl StdLib {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_std(name: &str) -> bool {
        MODULES.iter().any(|m| m.name == name)
    }

    pub fn load(&self, name: &str) -> Result<Arc<Program>, RuntimeError> {
        let i = MODULES
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| RuntimeError::new(ErrorKind::UnknownTool, format!("no library module {name}")))?;
        let program = self.cells[i].get_or_init(|| {
            self.compiles.fetch_add(1, Ordering::SeqCst);
            let m = &MODULES[i];
            Arc::new(
                compile_source(m.source, m.name, &StaticFetcher::default())
                    .unwrap_or_else(|e| panic!("embedded module {} does not compile: {e}", m.name)),
            )
        });
        Ok(Arc::clone(program))
    }

    /// Number of module compilations performed so far.
    pub fn compile_count(&self) -> usize {
        self.compiles.load(Ordering::SeqCst)
    }
}
