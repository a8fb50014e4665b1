//! Semantic analysis and bytecode generation.

mod analysis;
mod bytecode;
mod codegen;
mod disasm;

use thiserror::Error;

use crate::frontend::{parse_source, FrontendError};
use crate::schema::{expand_schemas, SchemaError, SchemaFetcher};

pub use analysis::{analyze, Analyzed};
pub use bytecode::{Chunk, Constant, Instruction, Program, StructEntry};
pub use codegen::generate;
pub use disasm::{disassemble, disassemble_chunk, instruction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct AnalysisError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl CompileError {
    /// Source line of the error when known.
    pub fn line(&self) -> Option<u32> {
        match self {
            CompileError::Frontend(e) => Some(e.location().0),
            CompileError::Schema(
                SchemaError::Fetch { span, .. }
                | SchemaError::Parse { span, .. }
                | SchemaError::UnsupportedProtocol { span, .. },
            ) => Some(span.line),
            CompileError::Schema(_) => None,
            CompileError::Analysis(e) => Some(e.line),
        }
    }
}

/// Full front half of the pipeline: parse, expand `use schema`, analyze,
/// generate. Schema expansion precedes analysis so synthesized structs are
/// visible to `infer`.
pub fn compile_source(source: &str, module: &str, fetcher: &dyn SchemaFetcher) -> Result<Program, CompileError> {
    let mut block = parse_source(source)?;
    let synthesized = expand_schemas(&mut block, fetcher)?;
    let analyzed = analyze(block, synthesized)?;
    Ok(generate(&analyzed, module)?)
}

#[cfg(test)]
mod tests {
    use super::Instruction as I;
    use super::*;
    use crate::schema::StaticFetcher;

    fn compile(src: &str) -> Program {
        compile_source(src, "main", &StaticFetcher::default()).unwrap()
    }

    #[test]
    fn suspend_lowers_to_single_opcode() {
        let p = compile("suspend");
        assert_eq!(p.main().code, vec![I::Suspend, I::Halt]);
        assert!(disassemble_chunk(&p, 0).starts_with("0000 SUSPEND\n"));
    }

    #[test]
    fn empty_program_halts() {
        assert_eq!(disassemble_chunk(&compile(""), 0), "0000 HALT\n");
    }

    #[test]
    fn echo_sum() {
        let p = compile("echo 1 + 2");
        assert_eq!(p.main().code, vec![I::Const(0), I::Const(1), I::Add, I::Echo, I::Halt]);
    }

    #[test]
    fn confidence_of_local() {
        let p = compile("let x = 1\nlet c = confidence x");
        assert_eq!(
            &p.main().code[2..5],
            &[I::LoadLocal(0), I::Confidence, I::StoreLocal(1)]
        );
    }

    #[test]
    fn infer_embeds_schema() {
        let p = compile("struct Thesis { score: Num }\nlet t = infer Thesis { \"go\" }");
        let listing = disassemble_chunk(&p, 0);
        let expected = crate::schema::generate_schema(&p.structs[0].def, &[p.structs[0].def.clone()].into_iter().collect())
            .unwrap()
            .canonical()
            .len();
        assert!(listing.contains(&format!("INFER Thesis schema=<{expected} bytes>")), "{listing}");
    }

    #[test]
    fn shadowed_let_resolves_inner() {
        let p = compile("let x = 1\nif true { let x = 2\necho x }\necho x");
        let loads: Vec<_> = p.main().code.iter().filter(|i| matches!(i, I::LoadLocal(_))).collect();
        assert_eq!(loads, vec![&I::LoadLocal(1), &I::LoadLocal(0)]);
    }

    #[test]
    fn unknown_variable() {
        let e = compile_source("echo nope", "main", &StaticFetcher::default()).unwrap_err();
        assert_eq!(e.to_string(), "1:6: unknown variable nope");
    }

    #[test]
    fn closures_capture_enclosing_locals() {
        let p = compile("let a = 1\nlet b = 2\nlet f = turn() { return b }");
        let child = &p.chunks[1];
        assert_eq!(child.captures, vec![(1, 0)]);
        assert_eq!(child.locals, 1);
    }

    #[test]
    fn nested_capture_threads_through_intermediate() {
        let p = compile("let a = 1\nlet f = turn() { return turn() { return a } }");
        // outer closure captures `a` so the inner one can
        assert_eq!(p.chunks[1].captures, vec![(0, 0)]);
        assert_eq!(p.chunks[2].captures, vec![(0, 0)]);
    }

    #[test]
    fn named_turns_are_hoisted_and_do_not_capture() {
        let p = compile("echo f()\nturn f() { return g() }\nturn g() { return 1 }");
        assert_eq!(p.export("f"), Some(1));
        assert!(compile_source("let a = 1\nturn f() { return a }", "main", &StaticFetcher::default()).is_err());
    }

    #[test]
    fn compilation_is_deterministic() {
        let src = "struct S { a: Num, b: Str }\nlet x = infer S { \"p\" }\nlet r = spawn_each([1, 2], turn(v) { return v * 2 })\necho x.a";
        assert_eq!(serde_json::to_string(&compile(src)).unwrap(), serde_json::to_string(&compile(src)).unwrap());
        assert_eq!(compile(src).hash(), compile(src).hash());
    }

    #[test]
    fn try_catch_layout() {
        let p = compile("try { throw 1 } catch e { echo e }");
        assert_eq!(
            p.main().code,
            vec![
                I::TryPush(5),
                I::Const(0),
                I::Throw,
                I::TryPop,
                I::Jump(8),
                I::StoreLocal(0),
                I::LoadLocal(0),
                I::Echo,
                I::Halt
            ]
        );
    }
}
