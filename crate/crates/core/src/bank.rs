//! Claim description bank files: one description per line, `#` comments.

use std::path::Path;

use crate::{Error, Result};

/// The shipped default bank.
pub const DEFAULT_BANK: &str = include_str!("../data/descriptions.txt");

pub fn parse_bank(content: &str) -> Result<Vec<String>> {
    let descriptions: Vec<String> = content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    if descriptions.is_empty() {
        return Err(Error::Config("description bank is empty".into()));
    }
    Ok(descriptions)
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<Vec<String>> {
    parse_bank(&crate::error::read_text(path.as_ref())?)
}

pub fn default_bank() -> Vec<String> {
    parse_bank(DEFAULT_BANK).expect("shipped bank is valid")
}
