//! Instrumented-V8 bytecode log parsing.
//!
//! A log file is a blank-line-separated sequence of records. Each record
//! carries the identity headers emitted by the instrumented engine followed
//! by the function's opcode mnemonics, comma-separated and possibly wrapped
//! across physical lines:
//!
//! ```text
//! Script URL: https://example.com/fpjs.js
//! Script ID: 3
//! Function name: gatherFingerprint
//! Bytecode:
//! Parameter count 1
//! Register count 4
//! Frame size 32
//! DefineNamedOwnProperty,LdaGlobal,Star,GetNamedProperty,
//! ...,Ldar,Return
//! ```
//!
//! Only instruction names are logged; operands, offsets and addresses are
//! deliberately absent from the instrumented output.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Reserved token ID for padding. Never emitted by [`tokenize`].
pub const PAD_ID: u32 = 0;
/// Reserved token ID for mnemonics missing from the vocabulary.
pub const UNK_ID: u32 = 1;

/// Default tokenizer cap for single functions.
pub const FUNCTION_MAX_LEN: usize = 512;
/// Default tokenizer cap for concatenated script sequences.
pub const SCRIPT_MAX_LEN: usize = 4096;

/// Identity triple shared by bytecode records and execution traces.
///
/// Script IDs are only stable within one crawl session, so the triple as a
/// whole is the join key; no component is meaningful alone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionKey {
    pub script_url: String,
    pub script_id: u64,
    pub function_name: String,
}

/// One compiled function as logged by the instrumented engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionRecord {
    pub script_url: String,
    pub script_id: u64,
    /// Empty string for anonymous functions.
    pub function_name: String,
    pub parameter_count: u32,
    pub register_count: u32,
    /// Interpreter frame size in bytes.
    pub frame_size: u32,
    /// Opcode mnemonics in instruction order; never empty.
    pub opcodes: Vec<String>,
}

impl FunctionRecord {
    pub fn key(&self) -> FunctionKey {
        FunctionKey {
            script_url: self.script_url.clone(),
            script_id: self.script_id,
            function_name: self.function_name.clone(),
        }
    }

    /// Anonymous functions lack a reliable name and are dropped before the
    /// trace join.
    pub fn is_anonymous(&self) -> bool {
        self.function_name.trim().is_empty()
    }
}

/// A record the parser had to skip, with the 1-based line number where it
/// started and what went wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRecord {
    pub line_no: usize,
    pub reason: String,
}

#[derive(Debug, Default, Clone)]
pub struct ParseDiagnostics {
    pub malformed: Vec<MalformedRecord>,
}

impl ParseDiagnostics {
    pub fn malformed_count(&self) -> usize {
        self.malformed.len()
    }
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<&'a str> {
        let l = self.peek();
        if l.is_some() {
            self.pos += 1;
        }
        l
    }

    /// 1-based number of the line `peek` would return.
    fn line_no(&self) -> usize {
        self.pos + 1
    }
}

fn is_blank(line: &str) -> bool {
    line.trim().is_empty()
}

fn is_record_start(line: &str) -> bool {
    line.starts_with("Script URL:")
}

fn header_rest<'a>(line: &'a str, prefix: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(prefix)?;
    if rest.is_empty() {
        Some("")
    } else {
        rest.strip_prefix(' ').or(Some(rest))
    }
}

fn parse_int_header(line: Option<&str>, prefix: &str, line_no: usize) -> Result<u64, MalformedRecord> {
    let line = line.ok_or_else(|| MalformedRecord {
        line_no,
        reason: format!("missing '{prefix}' header"),
    })?;
    let rest = header_rest(line, prefix).ok_or_else(|| MalformedRecord {
        line_no,
        reason: format!("expected '{prefix}' header, found {line:?}"),
    })?;
    rest.trim().parse::<u64>().map_err(|_| MalformedRecord {
        line_no,
        reason: format!("invalid integer in '{prefix}' header"),
    })
}

/// Parse a full log file into function records.
///
/// Malformed records are skipped and reported in the diagnostics; parsing
/// resumes at the next blank line or record header. Concatenating two
/// well-formed log files parses to the concatenation of their records.
pub fn parse_log(raw_text: &str) -> (Vec<FunctionRecord>, ParseDiagnostics) {
    let mut cursor = Lines {
        lines: raw_text.lines().collect(),
        pos: 0,
    };
    let mut records = Vec::new();
    let mut diags = ParseDiagnostics::default();

    loop {
        while matches!(cursor.peek(), Some(l) if is_blank(l)) {
            cursor.next();
        }
        if cursor.peek().is_none() {
            break;
        }
        match parse_record(&mut cursor) {
            Ok(rec) => records.push(rec),
            Err(err) => {
                diags.malformed.push(err);
                // Resync at the next record boundary.
                while let Some(l) = cursor.peek() {
                    if is_blank(l) || is_record_start(l) {
                        break;
                    }
                    cursor.next();
                }
            }
        }
    }
    (records, diags)
}

fn parse_record(cursor: &mut Lines<'_>) -> Result<FunctionRecord, MalformedRecord> {
    let start = cursor.line_no();
    let url_line = cursor.next().expect("caller ensured a non-blank line");
    let script_url = header_rest(url_line, "Script URL:")
        .ok_or_else(|| MalformedRecord {
            line_no: start,
            reason: format!("expected 'Script URL:' header, found {url_line:?}"),
        })?
        .trim()
        .to_string();

    let script_id = parse_int_header(cursor.next(), "Script ID:", cursor.line_no() - 1)?;

    let name_no = cursor.line_no();
    let name_line = cursor.next().ok_or_else(|| MalformedRecord {
        line_no: name_no,
        reason: "missing 'Function name:' header".into(),
    })?;
    let function_name = header_rest(name_line, "Function name:")
        .ok_or_else(|| MalformedRecord {
            line_no: name_no,
            reason: format!("expected 'Function name:' header, found {name_line:?}"),
        })?
        .trim()
        .to_string();

    let bc_no = cursor.line_no();
    let bc_line = cursor.next().ok_or_else(|| MalformedRecord {
        line_no: bc_no,
        reason: "missing 'Bytecode:' header".into(),
    })?;
    if bc_line.trim() != "Bytecode:" {
        return Err(MalformedRecord {
            line_no: bc_no,
            reason: format!("expected 'Bytecode:' header, found {bc_line:?}"),
        });
    }

    let parameter_count = parse_int_header(cursor.next(), "Parameter count", cursor.line_no() - 1)? as u32;
    let register_count = parse_int_header(cursor.next(), "Register count", cursor.line_no() - 1)? as u32;
    let frame_size = parse_int_header(cursor.next(), "Frame size", cursor.line_no() - 1)? as u32;

    // Opcode section: everything up to a blank line, EOF, or the next record
    // header. Wrapped lines are joined; trailing commas are tolerated.
    let mut opcodes = Vec::new();
    while let Some(line) = cursor.peek() {
        if is_blank(line) || is_record_start(line) {
            break;
        }
        let op_no = cursor.line_no();
        cursor.next();
        for tok in line.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            if tok.chars().any(char::is_whitespace) {
                return Err(MalformedRecord {
                    line_no: op_no,
                    reason: format!("mnemonic contains whitespace: {tok:?}"),
                });
            }
            opcodes.push(tok.to_string());
        }
    }
    if opcodes.is_empty() {
        return Err(MalformedRecord {
            line_no: start,
            reason: "empty opcode list".into(),
        });
    }

    Ok(FunctionRecord {
        script_url,
        script_id,
        function_name,
        parameter_count,
        register_count,
        frame_size,
        opcodes,
    })
}

/// Serialize one record into the instrumented-log layout.
///
/// Opcodes are emitted on a single line, so `parse(serialize(r)) == r` and
/// serializing again is byte-identical. Re-serialized multi-line records
/// collapse to this canonical single-line form.
pub fn serialize_record(rec: &FunctionRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Script URL: {}", rec.script_url);
    let _ = writeln!(out, "Script ID: {}", rec.script_id);
    let _ = writeln!(out, "Function name: {}", rec.function_name);
    out.push_str("Bytecode: \n");
    let _ = writeln!(out, "Parameter count {}", rec.parameter_count);
    let _ = writeln!(out, "Register count {}", rec.register_count);
    let _ = writeln!(out, "Frame size {}", rec.frame_size);
    let _ = writeln!(out, "{}", rec.opcodes.join(","));
    out
}

/// Serialize a whole log: records separated by exactly one blank line.
pub fn serialize_log(records: &[FunctionRecord]) -> String {
    records.iter().map(serialize_record).collect::<Vec<_>>().join("\n")
}

/// Bijection between opcode mnemonics and dense integer IDs.
///
/// IDs 0 and 1 are reserved for PAD and UNK; real mnemonics occupy the
/// contiguous range starting at 2, in first-occurrence order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: IndexMap<String, u32>,
}

impl Vocabulary {
    pub fn pad_id(&self) -> u32 {
        PAD_ID
    }

    pub fn unk_id(&self) -> u32 {
        UNK_ID
    }

    /// Number of real mnemonics (excluding PAD/UNK).
    pub fn mnemonic_count(&self) -> usize {
        self.id_of.len()
    }

    /// Total ID range, i.e. embedding-table row count: mnemonics + 2.
    pub fn total_size(&self) -> usize {
        self.id_of.len() + 2
    }

    pub fn id_of(&self, mnemonic: &str) -> Option<u32> {
        self.id_of.get(mnemonic).copied()
    }

    /// ID for a mnemonic, falling back to [`UNK_ID`].
    pub fn lookup(&self, mnemonic: &str) -> u32 {
        self.id_of(mnemonic).unwrap_or(UNK_ID)
    }

    pub fn mnemonic_of(&self, id: u32) -> Option<&str> {
        if id < 2 {
            return None;
        }
        self.id_of.get_index(id as usize - 2).map(|(m, _)| m.as_str())
    }

    pub fn mnemonics(&self) -> impl Iterator<Item = &str> {
        self.id_of.keys().map(String::as_str)
    }

    /// One mnemonic per line; line number + 2 is the ID.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in self.id_of.keys() {
            out.push_str(m);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Self {
        let mut id_of = IndexMap::new();
        for line in text.lines() {
            let m = line.trim();
            if m.is_empty() {
                continue;
            }
            let next = id_of.len() as u32 + 2;
            id_of.entry(m.to_string()).or_insert(next);
        }
        Vocabulary { id_of }
    }

    pub fn from_mnemonics<I, S>(mnemonics: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut id_of = IndexMap::new();
        for m in mnemonics {
            let next = id_of.len() as u32 + 2;
            id_of.entry(m.as_ref().to_string()).or_insert(next);
        }
        Vocabulary { id_of }
    }
}

/// Assign IDs 2..V+1 to mnemonics in first-occurrence order over the records.
pub fn build_vocabulary(records: &[FunctionRecord]) -> Vocabulary {
    Vocabulary::from_mnemonics(records.iter().flat_map(|r| r.opcodes.iter()))
}

/// Map a record's opcodes to token IDs, truncating the tail at `max_len`.
///
/// Unknown mnemonics map to [`UNK_ID`]; PAD is never emitted here, padding
/// is a batching concern.
pub fn tokenize(record: &FunctionRecord, vocab: &Vocabulary, max_len: usize) -> Vec<u32> {
    assert!(max_len >= 1, "max_len must be at least 1");
    record
        .opcodes
        .iter()
        .take(max_len)
        .map(|m| vocab.lookup(m))
        .collect()
}
