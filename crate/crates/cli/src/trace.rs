//! Trace CSV: `t,tau,support,linf_err`, support indices joined by `;`,
//! `linf_err` empty when the instance has no truth.

use std::fmt::Write as _;
use std::path::Path;

use ait_core::io::format_float;
use ait_core::{Error, IterationRecord};

pub const HEADER: &str = "t,tau,support,linf_err";

pub fn to_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for rec in trace {
        let support = rec
            .support
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(";");
        let err = rec.linf_err.map(format_float).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            rec.t,
            format_float(rec.tau),
            support,
            err
        );
    }
    out
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads a trace written by [`to_csv`]. The records carry no iterate
/// vectors and no pivot index (reported as 0).
pub fn parse_csv(path: &Path, text: &str) -> Result<Vec<IterationRecord>, Error> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(parse_err(path, 1, format!("expected header {HEADER:?}"))),
    }
    let mut trace = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let t = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad iteration index {:?}", fields[0])))?;
        let tau: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad tau {:?}", fields[1])))?;
        let support = if fields[2].trim().is_empty() {
            Vec::new()
        } else {
            fields[2]
                .split(';')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| parse_err(path, lineno, format!("bad support {:?}", fields[2])))?
        };
        let linf_err = match fields[3].trim() {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("bad linf_err {s:?}")))?,
            ),
        };
        trace.push(IterationRecord {
            t,
            tau,
            pivot_index: 0,
            support,
            linf_err,
            state: None,
        });
    }
    Ok(trace)
}
