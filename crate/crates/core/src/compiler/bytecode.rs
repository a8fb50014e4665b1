//! Compiled program representation.
//!
//! A [`Program`] is a flat table of [`Chunk`]s (index 0 is the top-level
//! body, the rest are turn bodies) sharing one constant pool, one name
//! table and one struct table with pre-generated schemas.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::schema::{JsonSchema, StructDef};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    // plumbing
    Const(u32),
    LoadLocal(u32),
    StoreLocal(u32),
    Pop,
    /// `n` key/value pairs on the stack, key first.
    MakeList(u32),
    MakeMap(u32),
    /// Struct index and field-pair count; pairs are `name, value`.
    MakeStruct(u32, u32),
    GetField(u32),
    Index,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    CmpLt,
    CmpLe,
    CmpGt,
    CmpGe,
    CmpEq,
    And,
    Or,
    Not,
    /// Absolute instruction index.
    Jump(u32),
    JumpIfFalse(u32),
    /// Tool name (name table index) and argument count.
    CallTool(u32, u32),
    /// Invoke a closure: callee below `argc` arguments.
    Call(u32),
    /// Build a closure over chunk `n`, capturing its free locals.
    MakeClosure(u32),
    /// Reference to a hoisted named turn.
    LoadTurn(u32),
    Echo,
    Throw,
    /// Handler address.
    TryPush(u32),
    TryPop,
    Return,
    Halt,
    // domain
    Infer(u32),
    Confidence,
    Spawn(u32),
    SpawnLink(u32),
    SpawnEach(u32),
    Send,
    Receive,
    SelfPid,
    Remember,
    Recall,
    /// Class and provider name, both name table indices.
    GrantIdentity(u32, u32),
    Suspend,
    ContextAppend,
    ContextSystem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Constant {
    Null,
    Num(f64),
    Str(String),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub name: String,
    pub arity: u32,
    /// `(enclosing slot, own slot)` copied when the closure is created.
    pub captures: Vec<(u32, u32)>,
    pub locals: u32,
    pub code: Vec<Instruction>,
    /// Source line per instruction.
    pub lines: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructEntry {
    pub def: StructDef,
    /// Generated at compile time and embedded in the program.
    pub schema: JsonSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub module: String,
    pub constants: Vec<Constant>,
    pub names: Vec<String>,
    pub structs: Vec<StructEntry>,
    pub chunks: Vec<Chunk>,
    /// Named top-level turns and their chunk indices.
    pub exports: Vec<(String, u32)>,
}

impl Program {
    pub fn main(&self) -> &Chunk {
        &self.chunks[0]
    }

    /// Chunk of a public named turn; names starting with `_` are private.
    pub fn export(&self, name: &str) -> Option<u32> {
        if name.starts_with('_') {
            return None;
        }
        self.exports.iter().find(|(n, _)| n == name).map(|(_, c)| *c)
    }

    pub fn struct_index(&self, name: &str) -> Option<usize> {
        self.structs.iter().position(|s| s.def.name == name)
    }

    /// SHA-256 of the serialized program, hex encoded. Used to refuse
    /// resuming a snapshot against different code.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("program serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
