//! Structured event log. Lines carry identifiers, counts and verdicts but
//! never rule bits.

use std::fmt;

use prelude_core::SdxId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogLine {
    pub time: u64,
    pub sdx: SdxId,
    pub kind: &'static str,
    pub fields: Vec<(&'static str, String)>,
}

impl LogLine {
    pub fn new(time: u64, sdx: SdxId, kind: &'static str) -> Self {
        LogLine { time, sdx, kind, fields: Vec::new() }
    }

    pub fn with(mut self, key: &'static str, value: impl fmt::Display) -> Self {
        self.fields.push((key, value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| *k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for LogLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} sdx={} kind={}", self.time, self.sdx, self.kind)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}
