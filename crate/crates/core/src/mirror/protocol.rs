// SPDX-License-Identifier: Apache-2.0

//! Request grammar and response encoding of the mirror protocol.
//!
//! ```text
//! LIST
//! GET <name>
//! MGET <name> [<name> ...]            (1..=1000 names)
//! SET <name> <decimal>
//! MSET <name>=<decimal> [...]         (1..=1000 pairs)
//! TICK
//! MODE rt|lockstep
//! ADVANCE <ms>
//! ```
//!
//! Tokens are separated by exactly one space; lines end with LF only.

use std::fmt;

use crate::decimal::{format_value, Decimal};
use crate::plant::VariableDescriptor;

pub const MAX_LINE_BYTES: usize = 64 * 1024;
pub const MAX_BATCH: usize = 1000;
pub const MAX_ADVANCE_MS: u64 = 86_400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Rt,
    Lockstep,
}

impl ClockMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ClockMode::Rt => "rt",
            ClockMode::Lockstep => "lockstep",
        }
    }
}

impl std::str::FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rt" => Ok(ClockMode::Rt),
            "lockstep" => Ok(ClockMode::Lockstep),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MirrorRequest {
    List,
    Get(String),
    MGet(Vec<String>),
    Set(String, Decimal),
    MSet(Vec<(String, Decimal)>),
    Tick,
    Mode(ClockMode),
    Advance(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ERR {code} {message}")]
pub struct ProtocolError {
    pub code: u16,
    pub message: String,
}

impl ProtocolError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self { code: 400, message: message.into() }
    }
}

pub fn is_var_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn name(tok: &str) -> Result<String, ProtocolError> {
    if is_var_name(tok) {
        Ok(tok.to_string())
    } else {
        Err(ProtocolError::bad_request(format!("bad name {tok:?}")))
    }
}

fn decimal(tok: &str) -> Result<Decimal, ProtocolError> {
    tok.parse().map_err(|_| ProtocolError::bad_request(format!("bad decimal {tok:?}")))
}

fn batch_len(n: usize) -> Result<(), ProtocolError> {
    if (1..=MAX_BATCH).contains(&n) {
        Ok(())
    } else {
        Err(ProtocolError::bad_request(format!("batch of {n} outside 1..={MAX_BATCH}")))
    }
}

/// Parses one request line (without its LF terminator).
pub fn parse_request(line: &str) -> Result<MirrorRequest, ProtocolError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(ProtocolError::bad_request("line too long"));
    }
    if line.contains(['\r', '\n']) {
        return Err(ProtocolError::bad_request("stray line terminator"));
    }
    let mut parts = line.split(' ');
    let verb = parts.next().unwrap_or_default();
    let args: Vec<&str> = parts.collect();
    if args.iter().any(|a| a.is_empty()) {
        return Err(ProtocolError::bad_request("empty token"));
    }
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(ProtocolError::bad_request(format!("{verb} takes {n} argument(s)")))
        }
    };
    match verb {
        "LIST" => arity(0).map(|_| MirrorRequest::List),
        "TICK" => arity(0).map(|_| MirrorRequest::Tick),
        "GET" => {
            arity(1)?;
            Ok(MirrorRequest::Get(name(args[0])?))
        }
        "SET" => {
            arity(2)?;
            Ok(MirrorRequest::Set(name(args[0])?, decimal(args[1])?))
        }
        "MGET" => {
            batch_len(args.len())?;
            Ok(MirrorRequest::MGet(args.iter().map(|a| name(a)).collect::<Result<_, _>>()?))
        }
        "MSET" => {
            batch_len(args.len())?;
            let pairs = args
                .iter()
                .map(|a| {
                    let (n, v) = a
                        .split_once('=')
                        .ok_or_else(|| ProtocolError::bad_request(format!("expected name=value, got {a:?}")))?;
                    Ok((name(n)?, decimal(v)?))
                })
                .collect::<Result<_, ProtocolError>>()?;
            Ok(MirrorRequest::MSet(pairs))
        }
        "MODE" => {
            arity(1)?;
            args[0].parse().map(MirrorRequest::Mode).map_err(ProtocolError::bad_request)
        }
        "ADVANCE" => {
            arity(1)?;
            let tok = args[0];
            let canonical = !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit()) && !tok.starts_with('0');
            let ms: u64 = if canonical { tok.parse().unwrap_or(0) } else { 0 };
            if ms == 0 || ms > MAX_ADVANCE_MS {
                return Err(ProtocolError::bad_request(format!("bad duration {tok:?}")));
            }
            Ok(MirrorRequest::Advance(ms))
        }
        other => Err(ProtocolError::bad_request(format!("unknown verb {other:?}"))),
    }
}

impl fmt::Display for MirrorRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MirrorRequest::List => f.write_str("LIST"),
            MirrorRequest::Tick => f.write_str("TICK"),
            MirrorRequest::Get(n) => write!(f, "GET {n}"),
            MirrorRequest::Set(n, v) => write!(f, "SET {n} {v}"),
            MirrorRequest::MGet(names) => {
                f.write_str("MGET")?;
                for n in names {
                    write!(f, " {n}")?;
                }
                Ok(())
            }
            MirrorRequest::MSet(pairs) => {
                f.write_str("MSET")?;
                for (n, v) in pairs {
                    write!(f, " {n}={v}")?;
                }
                Ok(())
            }
            MirrorRequest::Mode(m) => write!(f, "MODE {}", m.as_str()),
            MirrorRequest::Advance(ms) => write!(f, "ADVANCE {ms}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MirrorResponse {
    Values(Vec<f64>),
    Time(u64),
    List(Vec<VariableDescriptor>),
    Error(ProtocolError),
}

impl MirrorResponse {
    /// Wire encoding, including every LF terminator.
    pub fn encode(&self) -> String {
        match self {
            MirrorResponse::Values(vs) => {
                let mut s = String::from("OK");
                for v in vs {
                    s.push(' ');
                    s.push_str(&format_value(*v));
                }
                s.push('\n');
                s
            }
            MirrorResponse::Time(t) => format!("OK {t}\n"),
            MirrorResponse::List(ds) => {
                let mut s = format!("OK {}\n", ds.len());
                for d in ds {
                    s.push_str(&format!(
                        "{} {} {} {} {}\n",
                        d.name,
                        d.unit,
                        d.access.code(),
                        format_value(d.min),
                        format_value(d.max)
                    ));
                }
                s.push_str("END\n");
                s
            }
            MirrorResponse::Error(e) => format!("ERR {} {}\n", e.code, e.message),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_examples() {
        assert_eq!(parse_request("GET t_avg_c").unwrap(), MirrorRequest::Get("t_avg_c".into()));
        match parse_request("MSET rod_position=0.5 turbine_throttle=0.9").unwrap() {
            MirrorRequest::MSet(p) => {
                assert_eq!(p.len(), 2);
                assert_eq!(p[0].0, "rod_position");
                assert_eq!(p[1].1.value(), 0.9);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_request("FROB x").unwrap_err().code, 400);
        assert_eq!(parse_request("MODE lockstep").unwrap(), MirrorRequest::Mode(ClockMode::Lockstep));
        assert_eq!(parse_request("ADVANCE 50").unwrap(), MirrorRequest::Advance(50));
    }

    #[test]
    fn rejects_malformed() {
        for line in [
            "",
            "GET",
            "GET a b",
            "GET  a",
            "GET A",
            "GET a\r",
            "SET a x",
            "SET a 1e999",
            "MGET",
            "MSET a",
            "MSET =1",
            "MODE fast",
            "ADVANCE 0",
            "ADVANCE 050",
            "ADVANCE -5",
            "LIST extra",
            "get a",
            "TICK ",
        ] {
            assert_eq!(parse_request(line).unwrap_err().code, 400, "{line:?}");
        }
        let many = format!("MGET{}", " a".repeat(1001));
        assert!(parse_request(&many).is_err());
    }

    #[test]
    fn encodes_responses() {
        assert_eq!(MirrorResponse::Values(vec![1.0, 0.5]).encode(), "OK 1 0.5\n");
        assert_eq!(MirrorResponse::Time(100).encode(), "OK 100\n");
        let e = ProtocolError { code: 403, message: "core_power_mw".into() };
        assert_eq!(MirrorResponse::Error(e).encode(), "ERR 403 core_power_mw\n");
    }
}
