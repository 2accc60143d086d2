use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a split was built; carried as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Super-category shared.
    Scs,
    /// Super-category exclusive.
    Sce,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "SCS" => Ok(Scheme::Scs),
            "SCE" => Ok(Scheme::Sce),
            _ => Err(format!("unknown split scheme '{s}'")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Scs => "SCS",
            Scheme::Sce => "SCE",
        })
    }
}

/// Seen/unseen partition of class ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seen: Vec<usize>,
    pub unseen: Vec<usize>,
    pub scheme: Option<Scheme>,
}

impl SplitSpec {
    pub fn new(seen: Vec<usize>, unseen: Vec<usize>, scheme: Option<Scheme>) -> Self {
        Self { seen, unseen, scheme }
    }

    pub fn class_count(&self) -> usize {
        self.seen.len() + self.unseen.len()
    }

    /// Checks that seen and unseen are non-empty, disjoint, duplicate-free
    /// and together cover exactly `0..n_classes`.
    pub fn validate(&self, n_classes: usize) -> Result<()> {
        if self.seen.is_empty() || self.unseen.is_empty() {
            return Err(Error::Validation("split needs seen and unseen classes".into()));
        }
        let seen: BTreeSet<usize> = self.seen.iter().copied().collect();
        let unseen: BTreeSet<usize> = self.unseen.iter().copied().collect();
        if seen.len() != self.seen.len() || unseen.len() != self.unseen.len() {
            return Err(Error::Validation("split lists a class twice".into()));
        }
        if let Some(c) = seen.intersection(&unseen).next() {
            return Err(Error::Validation(format!("class {c} is both seen and unseen")));
        }
        if let Some(c) = seen.union(&unseen).find(|&&c| c >= n_classes) {
            return Err(Error::Validation(format!(
                "class {c} is outside the {n_classes} known classes"
            )));
        }
        if let Some(c) = (0..n_classes).find(|c| !seen.contains(c) && !unseen.contains(c)) {
            return Err(Error::Validation(format!("class {c} is neither seen nor unseen")));
        }
        Ok(())
    }

    /// `seen: ...` and `unseen: ...` lines, optionally `scheme: SCS|SCE`;
    /// `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut seen = None;
        let mut unseen = None;
        let mut scheme = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, rest)) = line.split_once(':') else {
                return Err(Error::parse(origin, i + 1, "expected 'key: values'"));
            };
            let ids = || -> Result<Vec<usize>> {
                rest.split_whitespace()
                    .map(|t| {
                        t.parse()
                            .map_err(|_| Error::parse(origin, i + 1, format!("bad class id '{t}'")))
                    })
                    .collect()
            };
            match key.trim() {
                "seen" => seen = Some(ids()?),
                "unseen" => unseen = Some(ids()?),
                "scheme" => {
                    scheme = Some(
                        rest.trim()
                            .parse()
                            .map_err(|e: String| Error::parse(origin, i + 1, e))?,
                    )
                }
                other => return Err(Error::parse(origin, i + 1, format!("unknown key '{other}'"))),
            }
        }
        match (seen, unseen) {
            (Some(seen), Some(unseen)) => Ok(Self { seen, unseen, scheme }),
            _ => Err(Error::parse(origin, 0, "split file needs 'seen:' and 'unseen:' lines")),
        }
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = format!("seen: {}\nunseen: {}\n", join(&self.seen), join(&self.unseen));
        if let Some(s) = self.scheme {
            out.push_str(&format!("scheme: {s}\n"));
        }
        out
    }
}

/// Parses a split file and validates it as a partition of `0..=max id`.
pub fn load_split(path: &Path) -> Result<SplitSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let split = SplitSpec::parse(&text, path)?;
    let n = split.seen.iter().chain(&split.unseen).max().map_or(0, |m| m + 1);
    split.validate(n)?;
    Ok(split)
}
