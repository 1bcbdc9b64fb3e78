//! The pattern file format and the canonical mask hash.
//!
//! A pattern file is line-oriented `key = value` text. `#` starts a
//! comment, blank lines are ignored. Keys:
//!
//! ```text
//! d = 2
//! L_F = 3
//! removed = (1,1) (0,2)
//! ```
//!
//! `removed` lists level-1 cells dropped from the generator as
//! parenthesised d-tuples of 0-based indices; the key may repeat and
//! accumulates. Omitting it yields the solid-cube pattern.

use anyhow::{bail, Context, Result};
use gsc_core::pattern::GscPattern;
use sha2::{Digest, Sha256};

pub fn parse_pattern(text: &str) -> Result<GscPattern> {
    let mut d: Option<u32> = None;
    let mut len: Option<u32> = None;
    let mut removed: Vec<Vec<u32>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got {raw:?}", lineno + 1);
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "d" => {
                d = Some(value.parse().with_context(|| format!("line {}: bad d", lineno + 1))?)
            }
            "L_F" => {
                len =
                    Some(value.parse().with_context(|| format!("line {}: bad L_F", lineno + 1))?)
            }
            "removed" => {
                for tuple in split_tuples(value)
                    .with_context(|| format!("line {}: bad removed list", lineno + 1))?
                {
                    removed.push(tuple);
                }
            }
            other => bail!("line {}: unknown key {other:?}", lineno + 1),
        }
    }
    let d = d.context("pattern file missing `d`")?;
    let len = len.context("pattern file missing `L_F`")?;
    GscPattern::from_removed(d, len, &removed).map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn load_pattern(path: &std::path::Path) -> Result<GscPattern> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading pattern file {}", path.display()))?;
    parse_pattern(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Render a pattern in the file format (complement representation).
pub fn pattern_to_string(pattern: &GscPattern) -> String {
    let d = pattern.dim();
    let len = pattern.len_factor();
    let mut out = format!("d = {d}\nL_F = {len}\n");
    let mut removed = Vec::new();
    let total = (len as u64).pow(d);
    for rank in 0..total {
        if !pattern.mask()[rank as usize] {
            let mut coords = Vec::with_capacity(d as usize);
            let mut acc = rank;
            for _ in 0..d {
                coords.push(acc % len as u64);
                acc /= len as u64;
            }
            coords.reverse();
            let body =
                coords.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
            removed.push(format!("({body})"));
        }
    }
    if !removed.is_empty() {
        out.push_str("removed = ");
        out.push_str(&removed.join(" "));
        out.push('\n');
    }
    out
}

fn split_tuples(value: &str) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    for part in value.split_whitespace() {
        let inner = part
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .with_context(|| format!("tuple {part:?} must be parenthesised"))?;
        let coords: Result<Vec<u32>, _> =
            inner.split(',').map(|c| c.trim().parse::<u32>()).collect();
        out.push(coords.with_context(|| format!("tuple {part:?} has bad coordinates"))?);
    }
    Ok(out)
}

/// Canonical hash of a pattern: sha256 over a fixed header, the
/// dimensions, and the mask packed one bit per cell in lexicographic
/// cell order (axis 0 slowest, most significant bit first).
pub fn pattern_hash(pattern: &GscPattern) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"gsc-pattern-v1\n");
    hasher.update(pattern.dim().to_le_bytes());
    hasher.update(pattern.len_factor().to_le_bytes());
    hasher.update(pattern.mask_bytes());
    hex(&hasher.finalize())
}

pub fn sha256_file(path: &std::path::Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_standard_carpet() {
        let text = "# the planar carpet\nd = 2\nL_F = 3\nremoved = (1,1)\n";
        let pattern = parse_pattern(text).unwrap();
        assert_eq!(pattern, GscPattern::standard_carpet());
    }

    #[test]
    fn parses_keep_all_without_removed() {
        let pattern = parse_pattern("d = 2\nL_F = 3\n").unwrap();
        assert_eq!(pattern.kept_count(), 9);
    }

    #[test]
    fn accumulates_removed_lines() {
        let text = "d = 3\nL_F = 3\nremoved = (1,1,1) (0,1,1) (2,1,1)\nremoved = (1,0,1) (1,2,1)\nremoved = (1,1,0) (1,1,2)\n";
        let pattern = parse_pattern(text).unwrap();
        assert_eq!(pattern, GscPattern::sponge());
    }

    #[test]
    fn round_trips_through_text() {
        for pattern in [GscPattern::standard_carpet(), GscPattern::sponge()] {
            let text = pattern_to_string(&pattern);
            assert_eq!(parse_pattern(&text).unwrap(), pattern);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_pattern("d = 2\n").is_err());
        assert!(parse_pattern("d = 2\nL_F = 3\nremoved = 1,1\n").is_err());
        assert!(parse_pattern("d = 2\nL_F = 3\nremoved = (1,1,1)\n").is_err());
        assert!(parse_pattern("d = 2\nL_F = 3\nbogus = 1\n").is_err());
        assert!(parse_pattern("d = 2\nL_F = 3\nremoved = (1,1) (1,1)\n").is_err());
    }

    #[test]
    fn hash_depends_on_every_field()  {
        let a = pattern_hash(&GscPattern::standard_carpet());
        let b = pattern_hash(&GscPattern::keep_all(2, 3).unwrap());
        let c = pattern_hash(&GscPattern::keep_all(2, 5).unwrap());
        assert_ne!(a, b);
        assert_ne!(b, c);
        assert_eq!(a, pattern_hash(&GscPattern::standard_carpet()));
        assert_eq!(a.len(), 64);
    }
}
