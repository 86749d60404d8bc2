//! Image naming convention: `<Distro><Version>_<tag>[_<tag>...]`, e.g.
//! `Centos7_dbgap_blessed_desktop`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tags in use today. Parsing accepts any alphanumeric tag.
pub const KNOWN_TAGS: &[&str] = &["vanilla", "dbgap", "blessed", "desktop", "galaxy"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed image name {0:?}")]
pub struct MalformedName(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageName {
    pub distro: String,
    pub version: String,
    pub tags: Vec<String>,
}

impl ImageName {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t.eq_ignore_ascii_case(tag))
    }
}

pub fn parse_image_name(text: &str) -> Result<ImageName, MalformedName> {
    let bad = || MalformedName(text.to_string());
    let mut parts = text.split('_');
    let head = parts.next().ok_or_else(bad)?;
    let split = head.find(|c: char| !c.is_ascii_alphabetic()).ok_or_else(bad)?;
    let (distro, version) = head.split_at(split);
    if distro.is_empty() || version.is_empty() {
        return Err(bad());
    }
    let version_ok = version
        .split('.')
        .all(|seg| !seg.is_empty() && seg.bytes().all(|b| b.is_ascii_digit()));
    if !version_ok {
        return Err(bad());
    }
    let tags: Vec<String> = parts.map(str::to_string).collect();
    if tags.is_empty()
        || tags
            .iter()
            .any(|t| t.is_empty() || !t.bytes().all(|b| b.is_ascii_alphanumeric()))
    {
        return Err(bad());
    }
    Ok(ImageName {
        distro: distro.to_string(),
        version: version.to_string(),
        tags,
    })
}

impl FromStr for ImageName {
    type Err = MalformedName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_image_name(s)
    }
}

impl fmt::Display for ImageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.distro, self.version)?;
        for t in &self.tags {
            write!(f, "_{t}")?;
        }
        Ok(())
    }
}
