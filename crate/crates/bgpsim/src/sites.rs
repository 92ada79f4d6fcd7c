//! Software-defined exchange sites and which of them a path crosses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use prelude_core::{Asn, SdxId};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdxSite {
    pub id: SdxId,
    pub members: BTreeSet<Asn>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SiteError {
    #[error("exchange {0} has fewer than two members")]
    TooFewMembers(SdxId),
    #[error("duplicate exchange id {0}")]
    DuplicateId(SdxId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One crossing of an exchange fabric by a path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Crossing {
    /// Index of `from` in the path.
    pub index: usize,
    pub sdx: SdxId,
    pub from: Asn,
    pub to: Asn,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SdxSites {
    sites: BTreeMap<SdxId, SdxSite>,
    membership: BTreeMap<Asn, BTreeSet<SdxId>>,
}

impl SdxSites {
    pub fn new(sites: impl IntoIterator<Item = SdxSite>) -> Result<Self, SiteError> {
        let mut out = SdxSites::default();
        for s in sites {
            out.insert(s)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, site: SdxSite) -> Result<(), SiteError> {
        if site.members.len() < 2 {
            return Err(SiteError::TooFewMembers(site.id));
        }
        if self.sites.contains_key(&site.id) {
            return Err(SiteError::DuplicateId(site.id));
        }
        for &m in &site.members {
            self.membership.entry(m).or_default().insert(site.id);
        }
        self.sites.insert(site.id, site);
        Ok(())
    }

    pub fn get(&self, id: SdxId) -> Option<&SdxSite> {
        self.sites.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SdxSite> {
        self.sites.values()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn is_member(&self, sdx: SdxId, a: Asn) -> bool {
        self.sites.get(&sdx).is_some_and(|s| s.members.contains(&a))
    }

    pub fn sdxes_of(&self, a: Asn) -> impl Iterator<Item = SdxId> + '_ {
        self.membership.get(&a).into_iter().flat_map(|s| s.iter().copied())
    }

    /// Exchanges where both ASes are members, in id order.
    pub fn common(&self, a: Asn, b: Asn) -> Vec<SdxId> {
        match (self.membership.get(&a), self.membership.get(&b)) {
            (Some(x), Some(y)) => x.intersection(y).copied().collect(),
            _ => Vec::new(),
        }
    }

    /// Every exchange crossed by `path`: a crossing at position `i` for each
    /// exchange shared by `path[i]` and `path[i + 1]`.
    pub fn crossings(&self, path: &[Asn]) -> Vec<Crossing> {
        path.windows(2)
            .enumerate()
            .flat_map(|(index, w)| {
                self.common(w[0], w[1]).into_iter().map(move |sdx| Crossing { index, sdx, from: w[0], to: w[1] })
            })
            .collect()
    }

    /// Parses lines `sdx_id: as1,as2,...`.
    pub fn parse(text: &str) -> Result<SdxSites, SiteError> {
        let mut out = SdxSites::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| SiteError::Parse { line: i + 1, msg };
            let (id, members) = line.split_once(':').ok_or_else(|| err("missing ':'".into()))?;
            let id: u16 = id.trim().parse().map_err(|_| err(format!("bad exchange id {id:?}")))?;
            let members = members
                .split(',')
                .map(|m| m.trim().parse::<u32>().map(Asn).map_err(|_| err(format!("bad AS {m:?}"))))
                .collect::<Result<BTreeSet<_>, _>>()?;
            out.insert(SdxSite { id: SdxId(id), members }).map_err(|e| err(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for site in self.sites.values() {
            let m: Vec<String> = site.members.iter().map(|a| a.0.to_string()).collect();
            let _ = writeln!(s, "{}: {}", site.id.0, m.join(","));
        }
        s
    }
}

/// Ordered exchanges crossed by `path`, one entry per crossing.
pub fn traversed_sdxes(path: &[Asn], sites: &SdxSites) -> Vec<SdxId> {
    sites.crossings(path).into_iter().map(|c| c.sdx).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[u32]) -> BTreeSet<Asn> {
        v.iter().map(|&a| Asn(a)).collect()
    }

    #[test]
    fn crossings_follow_consecutive_members() {
        let sites = SdxSites::new([
            SdxSite { id: SdxId(1), members: set(&[1, 2, 5]) },
            SdxSite { id: SdxId(2), members: set(&[3, 4, 5]) },
        ])
        .unwrap();
        let path = [Asn(4), Asn(2), Asn(5)];
        assert_eq!(traversed_sdxes(&path, &sites), vec![SdxId(1)]);
        assert_eq!(traversed_sdxes(&[Asn(1), Asn(3), Asn(5)], &sites), vec![SdxId(2)]);
        assert_eq!(traversed_sdxes(&[Asn(1), Asn(2)], &sites), vec![SdxId(1)]);
        assert_eq!(traversed_sdxes(&[Asn(1), Asn(4)], &sites), vec![]);
        assert_eq!(traversed_sdxes(&[Asn(1)], &sites), vec![]);
    }

    #[test]
    fn parse_and_validate() {
        let s = SdxSites::parse("1: 10,11,12\n# x\n2: 11, 13\n").unwrap();
        assert_eq!(s.common(Asn(11), Asn(13)), vec![SdxId(2)]);
        assert_eq!(SdxSites::parse(&s.to_text()).unwrap(), s);
        assert!(matches!(SdxSites::parse("1: 10"), Err(SiteError::Parse { .. })));
        assert!(matches!(SdxSites::parse("1: 10,11\n1: 12,13"), Err(SiteError::Parse { line: 2, .. })));
        assert!(matches!(SdxSites::parse("x: 1,2"), Err(SiteError::Parse { .. })));
    }
}
