//! Human-readable bytecode listing with resolved operands. The format is
//! stable so that it can be compared against golden text.

use std::fmt::Write;

use super::bytecode::{Constant, Instruction as I, Program};

fn constant(c: &Constant) -> String {
    match c {
        Constant::Null => "null".into(),
        Constant::Num(n) => format!("{n}"),
        Constant::Str(s) => format!("{s:?}"),
        Constant::Bool(b) => b.to_string(),
    }
}

/// Render one instruction, e.g. `INFER Thesis schema=<34 bytes>`.
pub fn instruction(program: &Program, ins: &I) -> String {
    let name = |i: &u32| program.names.get(*i as usize).map_or("?", String::as_str);
    let strukt = |i: &u32| program.structs.get(*i as usize).map_or("?", |s| s.def.name.as_str());
    let chunk = |i: &u32| program.chunks.get(*i as usize).map_or("?", |c| c.name.as_str());
    match ins {
        I::Const(i) => format!(
            "CONST {}",
            program.constants.get(*i as usize).map_or_else(|| "?".into(), constant)
        ),
        I::LoadLocal(s) => format!("LOAD_LOCAL {s}"),
        I::StoreLocal(s) => format!("STORE_LOCAL {s}"),
        I::Pop => "POP".into(),
        I::MakeList(n) => format!("MAKE_LIST {n}"),
        I::MakeMap(n) => format!("MAKE_MAP {n}"),
        I::MakeStruct(s, n) => format!("MAKE_STRUCT {} {n}", strukt(s)),
        I::GetField(f) => format!("GET_FIELD {}", name(f)),
        I::Index => "INDEX".into(),
        I::Add => "ADD".into(),
        I::Sub => "SUB".into(),
        I::Mul => "MUL".into(),
        I::Div => "DIV".into(),
        I::Neg => "NEG".into(),
        I::CmpLt => "CMP_LT".into(),
        I::CmpLe => "CMP_LE".into(),
        I::CmpGt => "CMP_GT".into(),
        I::CmpGe => "CMP_GE".into(),
        I::CmpEq => "CMP_EQ".into(),
        I::And => "AND".into(),
        I::Or => "OR".into(),
        I::Not => "NOT".into(),
        I::Jump(t) => format!("JUMP {t:04}"),
        I::JumpIfFalse(t) => format!("JUMP_IF_FALSE {t:04}"),
        I::CallTool(n, argc) => format!("CALL_TOOL {} {argc}", name(n)),
        I::Call(argc) => format!("CALL {argc}"),
        I::MakeClosure(c) => format!("MAKE_CLOSURE {}", chunk(c)),
        I::LoadTurn(c) => format!("LOAD_TURN {}", chunk(c)),
        I::Echo => "ECHO".into(),
        I::Throw => "THROW".into(),
        I::TryPush(t) => format!("TRY_PUSH {t:04}"),
        I::TryPop => "TRY_POP".into(),
        I::Return => "RETURN".into(),
        I::Halt => "HALT".into(),
        I::Infer(s) => format!(
            "INFER {} schema=<{} bytes>",
            strukt(s),
            program.structs.get(*s as usize).map_or(0, |e| e.schema.canonical().len())
        ),
        I::Confidence => "CONFIDENCE".into(),
        I::Spawn(c) => format!("SPAWN {}", chunk(c)),
        I::SpawnLink(c) => format!("SPAWN_LINK {}", chunk(c)),
        I::SpawnEach(c) => format!("SPAWN_EACH {}", chunk(c)),
        I::Send => "SEND".into(),
        I::Receive => "RECEIVE".into(),
        I::SelfPid => "SELF".into(),
        I::Remember => "REMEMBER".into(),
        I::Recall => "RECALL".into(),
        I::GrantIdentity(c, p) => format!("GRANT_IDENTITY {} {:?}", name(c), name(p)),
        I::Suspend => "SUSPEND".into(),
        I::ContextAppend => "CONTEXT_APPEND".into(),
        I::ContextSystem => "CONTEXT_SYSTEM".into(),
    }
}

/// Listing of one chunk: `NNNN OPCODE operands` per line.
pub fn disassemble_chunk(program: &Program, index: usize) -> String {
    let mut out = String::new();
    for (i, ins) in program.chunks[index].code.iter().enumerate() {
        let _ = writeln!(out, "{i:04} {}", instruction(program, ins));
    }
    out
}

/// Listing of every chunk, each under a `== name ==` header.
pub fn disassemble(program: &Program) -> String {
    let mut out = String::new();
    for (i, c) in program.chunks.iter().enumerate() {
        let _ = writeln!(out, "== {} (chunk {i}, arity {}, locals {}) ==", c.name, c.arity, c.locals);
        out.push_str(&disassemble_chunk(program, i));
    }
    out
}
