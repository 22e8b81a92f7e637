//! Line-oriented gate-list format.
//!
//! One token per line, in algebraic order, so the bottom line acts first:
//!
//! ```text
//! PHASE -1
//! D
//! IT 7
//! IS 0
//! D
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. The JSON rendering is
//! `{"tokens": [...]}` holding the same strings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{FlatSequence, Primitive, Sign};

pub fn tokens(seq: &FlatSequence) -> Vec<String> {
    let mut out = Vec::with_capacity(seq.len() + 1);
    out.push(format!("PHASE {}", seq.sign.as_i32()));
    out.extend(seq.gates.iter().map(|g| g.to_string()));
    out
}

pub fn to_text(seq: &FlatSequence) -> String {
    let mut s = tokens(seq).join("\n");
    s.push('\n');
    s
}

fn parse_index(arg: Option<&str>, line: usize) -> Result<usize> {
    let arg = arg.ok_or_else(|| Error::Parse {
        line,
        msg: "missing basis index".into(),
    })?;
    arg.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad basis index `{arg}`"),
    })
}

fn parse_token(tok: &str, line: usize, sign: &mut Sign) -> Result<Option<Primitive>> {
    let mut parts = tok.split_whitespace();
    let Some(head) = parts.next() else {
        return Ok(None);
    };
    let arg = parts.next();
    if parts.next().is_some() {
        return Err(Error::Parse {
            line,
            msg: format!("trailing input in `{tok}`"),
        });
    }
    let takes_arg = matches!(head, "PHASE" | "IS" | "IT" | "U" | "UINV");
    if !takes_arg && arg.is_some() {
        return Err(Error::Parse {
            line,
            msg: format!("`{head}` takes no argument"),
        });
    }
    let gate = match head {
        "PHASE" => {
            match arg {
                Some("-1") => *sign = -*sign,
                Some("1") | Some("+1") => {}
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("PHASE must be 1 or -1, got {other:?}"),
                    })
                }
            }
            return Ok(None);
        }
        "W" => Primitive::W,
        "I0" => Primitive::I0,
        "D" => Primitive::D,
        "IS" => Primitive::Is(parse_index(arg, line)?),
        "IT" => Primitive::It(parse_index(arg, line)?),
        "U" | "UINV" => {
            let label = arg.ok_or_else(|| Error::Parse {
                line,
                msg: format!("`{head}` needs a label"),
            })?;
            if head == "U" {
                Primitive::u(label)
            } else {
                Primitive::UInv(label.into())
            }
        }
        other => {
            return Err(Error::Parse {
                line,
                msg: format!("unknown token `{other}`"),
            })
        }
    };
    Ok(Some(gate))
}

fn parse_lines<'a>(lines: impl Iterator<Item = &'a str>) -> Result<FlatSequence> {
    let mut sign = Sign::Plus;
    let mut gates = Vec::new();
    for (i, raw) in lines.enumerate() {
        let tok = raw.trim();
        if tok.is_empty() || tok.starts_with('#') {
            continue;
        }
        if let Some(g) = parse_token(tok, i + 1, &mut sign)? {
            gates.push(g);
        }
    }
    Ok(FlatSequence { sign, gates })
}

pub fn from_text(text: &str) -> Result<FlatSequence> {
    parse_lines(text.lines())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateListJson {
    pub tokens: Vec<String>,
}

impl GateListJson {
    pub fn new(seq: &FlatSequence) -> Self {
        Self { tokens: tokens(seq) }
    }

    pub fn to_sequence(&self) -> Result<FlatSequence> {
        parse_lines(self.tokens.iter().map(String::as_str))
    }
}
