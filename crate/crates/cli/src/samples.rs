//! Sample files for `reptest test`: one integer, or one `row col` pair, per line.
//!
//! Blank lines and lines starting with `#` are skipped. Pair fields may be
//! separated by whitespace or a comma.

use std::path::Path;

use crate::error::{CliError, CliResult};

fn bad(path: &Path, line: usize, what: &str) -> CliError {
    CliError::Validation(format!("{}:{line}: {what}", path.display()))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read samples {}: {e}", path.display())))
}

pub fn parse_1d(path: &Path, text: &str) -> CliResult<Vec<usize>> {
    lines(text)
        .map(|(i, l)| l.parse().map_err(|_| bad(path, i, &format!("expected a non-negative integer, got `{l}`"))))
        .collect()
}

pub fn parse_2d(path: &Path, text: &str) -> CliResult<Vec<(usize, usize)>> {
    lines(text)
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            match fields.as_slice() {
                [a, b] => match (a.parse(), b.parse()) {
                    (Ok(a), Ok(b)) => Ok((a, b)),
                    _ => Err(bad(path, i, &format!("expected two non-negative integers, got `{l}`"))),
                },
                _ => Err(bad(path, i, &format!("expected `row col`, got `{l}`"))),
            }
        })
        .collect()
}

pub fn read_1d(path: &Path) -> CliResult<Vec<usize>> {
    parse_1d(path, &read(path)?)
}

pub fn read_2d(path: &Path) -> CliResult<Vec<(usize, usize)>> {
    parse_2d(path, &read(path)?)
}
