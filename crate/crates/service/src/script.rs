//! Headless script language.
//!
//! One step per line or per `;`-separated clause. A line whose first
//! non-blank character is `#` is a comment; elsewhere `#` is the keypad key.
//!
//! ```text
//! # hold forward for 500 ms, then release
//! press 2 500
//! sirc 1 1; wait 40
//! expect pose.x > 0.3
//! ```
//!
//! `press` and `sirc` only queue input; simulated time advances with `wait`.
//! Expectations are checked against the latest telemetry record, with field
//! paths written in its JSON layout (`pose` is short for `true_pose`).

use std::fmt;
use std::str::FromStr;

use serde_json::Value;
use teleop_core::dtmf::KeypadSymbol;
use teleop_core::sirc::SircFrame;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl FromStr for CmpOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            other => return Err(format!("unknown operator {other:?}")),
        })
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub field: String,
    pub op: CmpOp,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Press { symbol: KeypadSymbol, ms: u32 },
    Sirc(SircFrame),
    Wait(u64),
    Expect(Expectation),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptLine {
    pub line: usize,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub steps: Vec<ScriptLine>,
}

fn number<T: FromStr>(token: Option<&str>, what: &str, suffix: &str) -> Result<T, String> {
    let token = token.ok_or_else(|| format!("missing {what}"))?;
    token
        .strip_suffix(suffix)
        .unwrap_or(token)
        .parse()
        .map_err(|_| format!("{what} {token:?} is not a valid number"))
}

fn parse_clause(clause: &str) -> Result<Step, String> {
    let mut words = clause.split_whitespace();
    let verb = words.next().unwrap_or_default();
    let step = match verb {
        "press" => {
            let key = words.next().ok_or("missing digit")?;
            let mut chars = key.chars();
            let symbol = match (chars.next(), chars.next()) {
                (Some(c), None) => KeypadSymbol::from_char(c).map_err(|e| e.to_string())?,
                _ => return Err(format!("{key:?} is not a single keypad symbol")),
            };
            Step::Press {
                symbol,
                ms: number(words.next(), "duration", "ms")?,
            }
        }
        "sirc" => {
            let command: u8 = number(words.next(), "command", "")?;
            let address: u8 = number(words.next(), "address", "")?;
            Step::Sirc(SircFrame::new(command, address).map_err(|e| e.to_string())?)
        }
        "wait" => {
            let ticks = number(words.next(), "tick count", "")?;
            if let Some(unit) = words.next().filter(|w| *w != "ticks" && *w != "tick") {
                return Err(format!("unexpected {unit:?}"));
            }
            Step::Wait(ticks)
        }
        "expect" => {
            let field = words.next().ok_or("missing field")?.to_string();
            let op = words.next().ok_or("missing operator")?.parse()?;
            let value = words.collect::<Vec<_>>().join(" ");
            if value.is_empty() {
                return Err("missing value".into());
            }
            return Ok(Step::Expect(Expectation { field, op, value }));
        }
        other => return Err(format!("unknown step {other:?}")),
    };
    match words.next() {
        Some(extra) => Err(format!("unexpected {extra:?}")),
        None => Ok(step),
    }
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, ScriptError> {
        let mut steps = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim_start().starts_with('#') {
                continue;
            }
            for clause in raw.split(';').map(str::trim).filter(|c| !c.is_empty()) {
                let step = parse_clause(clause).map_err(|message| ScriptError { line: i + 1, message })?;
                steps.push(ScriptLine { line: i + 1, step });
            }
        }
        Ok(Script { steps })
    }
}

fn resolve<'a>(record: &'a Value, field: &str) -> Option<&'a Value> {
    let mut parts = field.split('.');
    let first = match parts.next()? {
        "pose" => "true_pose",
        other => other,
    };
    let mut v = record.get(first)?;
    for part in parts {
        v = match v {
            Value::Array(items) => items.get(part.parse::<usize>().ok()?)?,
            other => other.get(part)?,
        };
    }
    Some(v)
}

/// Strings compare by equality. An enum variant carrying data, such as
/// `{"reversing": 3}`, compares by its variant name.
fn compare(actual: &Value, op: CmpOp, expected: &str) -> Result<bool, String> {
    let ordering = match actual {
        Value::Number(n) => {
            let a = n.as_f64().unwrap_or(f64::NAN);
            let b: f64 = expected.parse().map_err(|_| format!("{expected:?} is not a number"))?;
            a.partial_cmp(&b)
        }
        Value::Bool(a) => {
            let b: bool = expected
                .parse()
                .map_err(|_| format!("{expected:?} is not true or false"))?;
            return match op {
                CmpOp::Eq => Ok(*a == b),
                CmpOp::Ne => Ok(*a != b),
                _ => Err(format!("{op} does not apply to booleans")),
            };
        }
        Value::String(_) | Value::Object(_) => {
            let name = match actual {
                Value::String(s) => s.as_str(),
                Value::Object(map) if map.len() == 1 => map.keys().next().map(String::as_str).unwrap_or_default(),
                _ => return Err("field is not a scalar".into()),
            };
            let expected = expected.trim_matches('"');
            return match op {
                CmpOp::Eq => Ok(name == expected),
                CmpOp::Ne => Ok(name != expected),
                _ => Err(format!("{op} does not apply to names")),
            };
        }
        _ => return Err("field is not a scalar".into()),
    };
    let Some(ordering) = ordering else {
        return Ok(op == CmpOp::Ne);
    };
    use std::cmp::Ordering::*;
    Ok(match op {
        CmpOp::Lt => ordering == Less,
        CmpOp::Le => ordering != Greater,
        CmpOp::Gt => ordering == Greater,
        CmpOp::Ge => ordering != Less,
        CmpOp::Eq => ordering == Equal,
        CmpOp::Ne => ordering != Equal,
    })
}

/// Evaluates `e` against a serialized telemetry record. `Err` means the
/// expectation itself is unusable (unknown field, type mismatch).
pub fn evaluate(e: &Expectation, record: &Value) -> Result<(bool, Value), String> {
    let actual = resolve(record, &e.field).ok_or_else(|| format!("no field {:?} in telemetry", e.field))?;
    let pass = compare(actual, e.op, &e.value)?;
    Ok((pass, actual.clone()))
}
