//! Ternary match rules, the 104-bit flow-field encoding, and the plaintext
//! overlap oracle.
//!
//! A rule of width `w` is a pair `(pattern, mask)`. Mask bit `1` means the
//! rule constrains that packet bit to the pattern bit; mask bit `0` means
//! don't-care. Rules built with [`TernaryRule::new`] are canonical: the
//! pattern is zero wherever the mask is zero.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::bits::Bits;

/// Width of a rule derived from a [`FlowSpec`]: 32+32+16+16+8 bits.
pub const FLOW_WIDTH: usize = 104;

pub const SRC_IP_OFFSET: usize = 0;
pub const DST_IP_OFFSET: usize = 32;
pub const SRC_PORT_OFFSET: usize = 64;
pub const DST_PORT_OFFSET: usize = 80;
pub const PROTO_OFFSET: usize = 96;

pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;
pub const PROTO_ICMP: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },
    #[error("invalid flow spec: {0}")]
    InvalidFlowSpec(String),
    #[error("cannot parse rule literal: {0}")]
    Parse(String),
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TernaryRule {
    pattern: Bits,
    mask: Bits,
}

/// A concrete packet header of a given width.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Packet {
    pub bits: Bits,
}

impl Packet {
    pub fn new(bits: Bits) -> Self {
        Packet { bits }
    }

    pub fn from_uint(value: u64, width: usize) -> Self {
        Packet { bits: Bits::from_uint(value, width) }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }
}

fn check_width(left: usize, right: usize) -> Result<(), RuleError> {
    if left == right {
        Ok(())
    } else {
        Err(RuleError::WidthMismatch { left, right })
    }
}

impl TernaryRule {
    /// Builds a canonical rule; pattern bits under a zero mask are cleared.
    pub fn new(pattern: Bits, mask: Bits) -> Result<Self, RuleError> {
        check_width(pattern.len(), mask.len())?;
        let pattern = pattern.and(&mask);
        Ok(TernaryRule { pattern, mask })
    }

    /// Builds a rule without canonicalising the pattern.
    pub fn from_raw_parts(pattern: Bits, mask: Bits) -> Result<Self, RuleError> {
        check_width(pattern.len(), mask.len())?;
        Ok(TernaryRule { pattern, mask })
    }

    pub fn wildcard(width: usize) -> Self {
        TernaryRule { pattern: Bits::zeros(width), mask: Bits::zeros(width) }
    }

    /// The rule matching exactly one packet.
    pub fn exact(bits: Bits) -> Self {
        let mask = Bits::ones(bits.len());
        TernaryRule { pattern: bits, mask }
    }

    /// Each bit independently uniform over `{0, 1, x}`.
    pub fn random<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Self {
        let mut pattern = Bits::zeros(width);
        let mut mask = Bits::zeros(width);
        for i in 0..width {
            match rng.gen_range(0..3) {
                0 => mask.set(i, true),
                1 => {
                    mask.set(i, true);
                    pattern.set(i, true);
                }
                _ => {}
            }
        }
        TernaryRule { pattern, mask }
    }

    /// Every canonical rule of the given width, in base-3 order over `0`, `1`, `x`.
    pub fn all(width: usize) -> impl Iterator<Item = TernaryRule> {
        let total = 3u64.pow(width as u32);
        (0..total).map(move |mut n| {
            let mut pattern = Bits::zeros(width);
            let mut mask = Bits::zeros(width);
            for i in (0..width).rev() {
                match n % 3 {
                    0 => mask.set(i, true),
                    1 => {
                        mask.set(i, true);
                        pattern.set(i, true);
                    }
                    _ => {}
                }
                n /= 3;
            }
            TernaryRule { pattern, mask }
        })
    }

    pub fn width(&self) -> usize {
        self.mask.len()
    }

    pub fn pattern(&self) -> &Bits {
        &self.pattern
    }

    pub fn mask(&self) -> &Bits {
        &self.mask
    }

    pub fn is_canonical(&self) -> bool {
        self.pattern.and(&self.mask.not()).is_zero()
    }

    pub fn canonical(&self) -> TernaryRule {
        TernaryRule { pattern: self.pattern.and(&self.mask), mask: self.mask.clone() }
    }

    /// True iff some packet matches both rules, i.e. there is no bit where
    /// both rules care and disagree.
    pub fn overlaps(&self, other: &TernaryRule) -> Result<bool, RuleError> {
        check_width(self.width(), other.width())?;
        Ok(self.overlaps_unchecked(other))
    }

    fn overlaps_unchecked(&self, other: &TernaryRule) -> bool {
        let (m1, p1, m2, p2) =
            (self.mask.words(), self.pattern.words(), other.mask.words(), other.pattern.words());
        (0..m1.len()).all(|w| m1[w] & m2[w] & (p1[w] ^ p2[w]) == 0)
    }

    pub fn matches(&self, pkt: &Packet) -> Result<bool, RuleError> {
        check_width(self.width(), pkt.width())?;
        let (m, p, x) = (self.mask.words(), self.pattern.words(), pkt.bits.words());
        Ok((0..m.len()).all(|w| m[w] & (p[w] ^ x[w]) == 0))
    }

    /// The rule matching exactly the packets matched by both, if any.
    ///
    /// # Panics
    /// If the widths differ.
    pub fn intersect(&self, other: &TernaryRule) -> Option<TernaryRule> {
        assert_eq!(self.width(), other.width(), "rule width mismatch");
        if !self.overlaps_unchecked(other) {
            return None;
        }
        let mask = self.mask.or(&other.mask);
        let pattern = self.pattern.and(&self.mask).or(&other.pattern.and(&other.mask));
        Some(TernaryRule { pattern, mask })
    }

    /// True iff every packet matched by `other` is matched by `self`.
    ///
    /// # Panics
    /// If the widths differ.
    pub fn covers(&self, other: &TernaryRule) -> bool {
        assert_eq!(self.width(), other.width(), "rule width mismatch");
        // self's constrained bits must be constrained identically in other.
        let (m1, p1, m2, p2) =
            (self.mask.words(), self.pattern.words(), other.mask.words(), other.pattern.words());
        (0..m1.len()).all(|w| m1[w] & !m2[w] == 0 && m1[w] & (p1[w] ^ p2[w]) == 0)
    }

    /// Disjoint rules whose union is `self` minus `other`.
    ///
    /// # Panics
    /// If the widths differ.
    pub fn subtract(&self, other: &TernaryRule) -> Vec<TernaryRule> {
        assert_eq!(self.width(), other.width(), "rule width mismatch");
        if !self.overlaps_unchecked(other) {
            return vec![self.canonical()];
        }
        let mut out = Vec::new();
        let mut cur = self.canonical();
        for i in 0..self.width() {
            if other.mask.get(i) && !cur.mask.get(i) {
                let want = other.pattern.get(i);
                let mut piece = cur.clone();
                piece.mask.set(i, true);
                piece.pattern.set(i, !want);
                out.push(piece);
                cur.mask.set(i, true);
                cur.pattern.set(i, want);
            }
        }
        out
    }

    /// Number of packets matched, as a power of two exponent.
    pub fn free_bits(&self) -> usize {
        self.width() - self.mask.count_ones()
    }
}

impl fmt::Display for TernaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.width() {
            let c = match (self.mask.get(i), self.pattern.get(i)) {
                (false, _) => 'x',
                (true, false) => '0',
                (true, true) => '1',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TernaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width() == FLOW_WIDTH {
            if let Some(spec) = FlowSpec::decode(self) {
                return write!(f, "TernaryRule({spec})");
            }
        }
        write!(f, "TernaryRule({self})")
    }
}

/// Parses the ternary string form, e.g. `10x1`.
impl FromStr for TernaryRule {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut pattern = Bits::zeros(0);
        let mut mask = Bits::zeros(0);
        for c in s.chars() {
            let (m, p) = match c {
                '0' => (true, false),
                '1' => (true, true),
                'x' | 'X' | '*' => (false, false),
                _ => return Err(RuleError::Parse(format!("unexpected character {c:?} in {s:?}"))),
            };
            mask.push(m);
            pattern.push(p);
        }
        Ok(TernaryRule { pattern, mask })
    }
}

/// A five-tuple match with per-field wildcards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct FlowSpec {
    pub src_ip: Option<Ipv4Addr>,
    pub dst_ip: Option<Ipv4Addr>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub ip_proto: Option<u8>,
}

impl FlowSpec {
    pub fn any() -> Self {
        FlowSpec::default()
    }

    pub fn with_proto(mut self, proto: u8) -> Self {
        self.ip_proto = Some(proto);
        self
    }

    pub fn with_src_port(mut self, port: u16) -> Self {
        self.src_port = Some(port);
        self
    }

    pub fn with_dst_port(mut self, port: u16) -> Self {
        self.dst_port = Some(port);
        self
    }

    pub fn with_src_ip(mut self, ip: Ipv4Addr) -> Self {
        self.src_ip = Some(ip);
        self
    }

    pub fn with_dst_ip(mut self, ip: Ipv4Addr) -> Self {
        self.dst_ip = Some(ip);
        self
    }

    /// Ports are only meaningful for TCP, UDP, or an unconstrained protocol.
    pub fn validate(&self) -> Result<(), RuleError> {
        let has_ports = self.src_port.is_some() || self.dst_port.is_some();
        match self.ip_proto {
            Some(p) if has_ports && p != PROTO_TCP && p != PROTO_UDP => Err(RuleError::InvalidFlowSpec(
                format!("ports given for ip_proto {p}, which has no ports"),
            )),
            _ => Ok(()),
        }
    }

    /// Encodes as a [`FLOW_WIDTH`]-bit rule, fields in the order
    /// `src_ip | dst_ip | src_port | dst_port | ip_proto`, each big-endian.
    pub fn encode(&self) -> Result<TernaryRule, RuleError> {
        self.validate()?;
        let mut pattern = Bits::zeros(0);
        let mut mask = Bits::zeros(0);
        let mut field = |value: Option<u64>, width: usize| match value {
            Some(v) => {
                pattern.push_uint(v, width);
                mask.push_uint(u64::MAX, width);
            }
            None => {
                pattern.push_uint(0, width);
                mask.push_uint(0, width);
            }
        };
        field(self.src_ip.map(|ip| u32::from(ip) as u64), 32);
        field(self.dst_ip.map(|ip| u32::from(ip) as u64), 32);
        field(self.src_port.map(u64::from), 16);
        field(self.dst_port.map(u64::from), 16);
        field(self.ip_proto.map(u64::from), 8);
        Ok(TernaryRule { pattern, mask })
    }

    /// Recovers the flow spec from a rule whose fields are each fully wild or
    /// fully concrete. Returns `None` for any other rule.
    pub fn decode(rule: &TernaryRule) -> Option<FlowSpec> {
        if rule.width() != FLOW_WIDTH {
            return None;
        }
        let field = |start: usize, width: usize| -> Option<Option<u64>> {
            let m = rule.mask.read_uint(start, width);
            let full = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            if m == 0 {
                Some(None)
            } else if m == full {
                Some(Some(rule.pattern.read_uint(start, width)))
            } else {
                None
            }
        };
        let spec = FlowSpec {
            src_ip: field(SRC_IP_OFFSET, 32)?.map(|v| Ipv4Addr::from(v as u32)),
            dst_ip: field(DST_IP_OFFSET, 32)?.map(|v| Ipv4Addr::from(v as u32)),
            src_port: field(SRC_PORT_OFFSET, 16)?.map(|v| v as u16),
            dst_port: field(DST_PORT_OFFSET, 16)?.map(|v| v as u16),
            ip_proto: field(PROTO_OFFSET, 8)?.map(|v| v as u8),
        };
        spec.validate().ok()?;
        Some(spec)
    }

    /// A packet header carrying the given concrete values; wildcard fields are zero.
    pub fn packet(&self) -> Packet {
        let mut bits = Bits::zeros(0);
        bits.push_uint(u32::from(self.src_ip.unwrap_or(Ipv4Addr::UNSPECIFIED)) as u64, 32);
        bits.push_uint(u32::from(self.dst_ip.unwrap_or(Ipv4Addr::UNSPECIFIED)) as u64, 32);
        bits.push_uint(self.src_port.unwrap_or(0) as u64, 16);
        bits.push_uint(self.dst_port.unwrap_or(0) as u64, 16);
        bits.push_uint(self.ip_proto.unwrap_or(0) as u64, 8);
        Packet { bits }
    }
}

fn proto_name(p: u8) -> String {
    match p {
        PROTO_TCP => "tcp".into(),
        PROTO_UDP => "udp".into(),
        PROTO_ICMP => "icmp".into(),
        n => n.to_string(),
    }
}

/// Renders the literal form, omitting wildcard fields; the empty spec is `*`.
impl fmt::Display for FlowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(p) = self.ip_proto {
            parts.push(format!("proto={}", proto_name(p)));
        }
        if let Some(ip) = self.src_ip {
            parts.push(format!("src_ip={ip}"));
        }
        if let Some(ip) = self.dst_ip {
            parts.push(format!("dst_ip={ip}"));
        }
        if let Some(p) = self.src_port {
            parts.push(format!("src_port={p}"));
        }
        if let Some(p) = self.dst_port {
            parts.push(format!("dst_port={p}"));
        }
        if parts.is_empty() {
            f.write_str("*")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

/// Parses a literal such as `proto=tcp,dst_port=80`. A value of `*`, or
/// leaving the key out, is a wildcard.
impl FromStr for FlowSpec {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spec = FlowSpec::default();
        let s = s.trim();
        if s.is_empty() || s == "*" {
            return Ok(spec);
        }
        let bad = |what: &str| RuleError::Parse(format!("{what} in {s:?}"));
        for item in s.split(',') {
            let (key, value) = item.split_once('=').ok_or_else(|| bad("missing '='"))?;
            let (key, value) = (key.trim(), value.trim());
            if value == "*" {
                continue;
            }
            match key {
                "src_ip" => spec.src_ip = Some(value.parse().map_err(|_| bad("bad src_ip"))?),
                "dst_ip" => spec.dst_ip = Some(value.parse().map_err(|_| bad("bad dst_ip"))?),
                "src_port" => spec.src_port = Some(value.parse().map_err(|_| bad("bad src_port"))?),
                "dst_port" => spec.dst_port = Some(value.parse().map_err(|_| bad("bad dst_port"))?),
                "proto" | "ip_proto" => {
                    spec.ip_proto = Some(match value.to_ascii_lowercase().as_str() {
                        "tcp" => PROTO_TCP,
                        "udp" => PROTO_UDP,
                        "icmp" => PROTO_ICMP,
                        n => n.parse().map_err(|_| bad("bad proto"))?,
                    })
                }
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}
