//! Boolean circuits over AND, XOR and NOT gates, and builders for the
//! rule-comparison and value-mapper circuits used by Distinct-Match.
//!
//! Wires are numbered in creation order and every gate drives a fresh wire,
//! so a built circuit is a DAG whose gate list is already topologically
//! sorted.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::bits::Bits;
use crate::rulespace::TernaryRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wire(pub u32);

impl Wire {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Wire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// The two computing parties. In Distinct-Match, `A` is the querier and `B`
/// the rule holder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    And { a: Wire, b: Wire, out: Wire },
    Xor { a: Wire, b: Wire, out: Wire },
    Not { a: Wire, out: Wire },
}

impl Gate {
    pub fn output(&self) -> Wire {
        match *self {
            Gate::And { out, .. } | Gate::Xor { out, .. } | Gate::Not { out, .. } => out,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputGroup {
    pub party: Party,
    pub label: String,
    pub wires: Vec<Wire>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("unknown wire {0}")]
    UnknownWire(Wire),
    #[error("rule width must be at least 1")]
    ZeroWidth,
    #[error("rule count k must be at least 1")]
    ZeroK,
    #[error("identifier width must be between 1 and 64, got {0}")]
    BadIdWidth(usize),
    #[error("party {party:?} supplied {got} input bits, circuit expects {expected}")]
    MissingInput { party: Party, expected: usize, got: usize },
    #[error("malformed circuit: {0}")]
    Malformed(String),
}

/// Shape of a batch query circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CircuitLayout {
    pub k: usize,
    pub width: usize,
    pub id_width: usize,
}

pub const DEFAULT_ID_WIDTH: usize = 48;

impl CircuitLayout {
    pub fn new(k: usize, width: usize, id_width: usize) -> Result<Self, CircuitError> {
        let layout = CircuitLayout { k, width, id_width };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.k == 0 {
            return Err(CircuitError::ZeroK);
        }
        if self.width == 0 {
            return Err(CircuitError::ZeroWidth);
        }
        if self.id_width == 0 || self.id_width > 64 {
            return Err(CircuitError::BadIdWidth(self.id_width));
        }
        Ok(())
    }

    /// Party A's input vector: mask then pattern.
    pub fn querier_input(&self, rule: &TernaryRule) -> Bits {
        assert_eq!(rule.width(), self.width, "query rule width");
        let mut bits = rule.mask().clone();
        bits.extend_from(rule.pattern());
        bits
    }

    /// Party B's input vector: each rule's mask and pattern, then each id,
    /// then the dummy value.
    pub fn holder_input(&self, rules: &[(TernaryRule, u64)], dummy: u64) -> Bits {
        assert_eq!(rules.len(), self.k, "holder rule count");
        let mut bits = Bits::zeros(0);
        for (r, _) in rules {
            assert_eq!(r.width(), self.width, "holder rule width");
            bits.extend_from(r.mask());
            bits.extend_from(r.pattern());
        }
        for (_, id) in rules {
            bits.push_uint(*id, self.id_width);
        }
        bits.push_uint(dummy, self.id_width);
        bits
    }

    /// Splits the `k * id_width` output bits into one value per rule.
    pub fn decode_outputs(&self, out: &Bits) -> Vec<u64> {
        assert_eq!(out.len(), self.k * self.id_width, "output length");
        (0..self.k).map(|i| out.read_uint(i * self.id_width, self.id_width)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanCircuit {
    n_wires: u32,
    gates: Vec<Gate>,
    inputs: Vec<InputGroup>,
    outputs: Vec<Wire>,
}

impl BooleanCircuit {
    pub fn n_wires(&self) -> usize {
        self.n_wires as usize
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_groups(&self) -> &[InputGroup] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Wire] {
        &self.outputs
    }

    /// Input wires of one party, in declaration order.
    pub fn input_wires(&self, party: Party) -> Vec<Wire> {
        self.inputs.iter().filter(|g| g.party == party).flat_map(|g| g.wires.iter().copied()).collect()
    }

    pub fn input_len(&self, party: Party) -> usize {
        self.inputs.iter().filter(|g| g.party == party).map(|g| g.wires.len()).sum()
    }

    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::And { .. })).count()
    }

    pub fn xor_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Xor { .. })).count()
    }

    pub fn not_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Not { .. })).count()
    }

    /// Multiplicative depth of every wire: inputs are at 0, AND adds one.
    pub fn wire_levels(&self) -> Vec<u32> {
        let mut level = vec![0u32; self.n_wires()];
        for g in &self.gates {
            match *g {
                Gate::And { a, b, out } => level[out.index()] = level[a.index()].max(level[b.index()]) + 1,
                Gate::Xor { a, b, out } => level[out.index()] = level[a.index()].max(level[b.index()]),
                Gate::Not { a, out } => level[out.index()] = level[a.index()],
            }
        }
        level
    }

    pub fn and_depth(&self) -> usize {
        self.wire_levels().into_iter().max().unwrap_or(0) as usize
    }

    /// Checks the structural invariants: every wire is driven exactly once
    /// (by an input declaration or a gate), gate inputs are driven earlier,
    /// and outputs are driven.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let n = self.n_wires();
        let mut driven = vec![false; n];
        let drive = |w: Wire, driven: &mut Vec<bool>| -> Result<(), CircuitError> {
            let slot = driven.get_mut(w.index()).ok_or(CircuitError::UnknownWire(w))?;
            if *slot {
                return Err(CircuitError::Malformed(format!("wire {w} driven twice")));
            }
            *slot = true;
            Ok(())
        };
        for g in &self.inputs {
            for &w in &g.wires {
                drive(w, &mut driven)?;
            }
        }
        for g in &self.gates {
            let ins: &[Wire] = match g {
                Gate::And { a, b, .. } | Gate::Xor { a, b, .. } => &[*a, *b],
                Gate::Not { a, .. } => std::slice::from_ref(a),
            };
            for &w in ins {
                if !driven.get(w.index()).copied().unwrap_or(false) || w >= g.output() {
                    return Err(CircuitError::Malformed(format!("gate {} reads undriven {w}", g.output())));
                }
            }
            drive(g.output(), &mut driven)?;
        }
        for &w in &self.outputs {
            if !driven.get(w.index()).copied().unwrap_or(false) {
                return Err(CircuitError::UnknownWire(w));
            }
        }
        if driven.iter().any(|d| !d) {
            return Err(CircuitError::Malformed("undriven wire".into()));
        }
        Ok(())
    }

    /// Assigns each party's input bits to its wires.
    pub fn assign_inputs(&self, a: &Bits, b: &Bits) -> Result<Vec<bool>, CircuitError> {
        let mut values = vec![false; self.n_wires()];
        for (party, bits) in [(Party::A, a), (Party::B, b)] {
            let wires = self.input_wires(party);
            if wires.len() != bits.len() {
                return Err(CircuitError::MissingInput { party, expected: wires.len(), got: bits.len() });
            }
            for (w, v) in wires.into_iter().zip(bits.iter()) {
                values[w.index()] = v;
            }
        }
        Ok(values)
    }

    /// Reference evaluator.
    pub fn evaluate_plaintext(&self, a: &Bits, b: &Bits) -> Result<Bits, CircuitError> {
        let mut v = self.assign_inputs(a, b)?;
        for g in &self.gates {
            match *g {
                Gate::And { a, b, out } => v[out.index()] = v[a.index()] & v[b.index()],
                Gate::Xor { a, b, out } => v[out.index()] = v[a.index()] ^ v[b.index()],
                Gate::Not { a, out } => v[out.index()] = !v[a.index()],
            }
        }
        Ok(Bits::from_bools(self.outputs.iter().map(|w| v[w.index()])))
    }

    /// One line per input group, gate, and the output list.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let join = |ws: &[Wire]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ");
        for g in &self.inputs {
            let _ = writeln!(s, "IN {:?} {} {}", g.party, g.label, join(&g.wires));
        }
        for g in &self.gates {
            let _ = match *g {
                Gate::And { a, b, out } => writeln!(s, "AND {out} <- {a} {b}"),
                Gate::Xor { a, b, out } => writeln!(s, "XOR {out} <- {a} {b}"),
                Gate::Not { a, out } => writeln!(s, "NOT {out} <- {a}"),
            };
        }
        let _ = writeln!(s, "OUT {}", join(&self.outputs));
        s
    }
}

#[derive(Debug, Default)]
pub struct CircuitBuilder {
    n_wires: u32,
    gates: Vec<Gate>,
    inputs: Vec<InputGroup>,
    outputs: Vec<Wire>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self) -> Wire {
        let w = Wire(self.n_wires);
        self.n_wires += 1;
        w
    }

    fn check(&self, w: Wire) -> Result<Wire, CircuitError> {
        if w.0 < self.n_wires {
            Ok(w)
        } else {
            Err(CircuitError::UnknownWire(w))
        }
    }

    pub fn input(&mut self, party: Party, label: impl Into<String>, n: usize) -> Vec<Wire> {
        let wires: Vec<Wire> = (0..n).map(|_| self.fresh()).collect();
        self.inputs.push(InputGroup { party, label: label.into(), wires: wires.clone() });
        wires
    }

    pub fn and(&mut self, a: Wire, b: Wire) -> Result<Wire, CircuitError> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        let out = self.fresh();
        self.gates.push(Gate::And { a, b, out });
        Ok(out)
    }

    pub fn xor(&mut self, a: Wire, b: Wire) -> Result<Wire, CircuitError> {
        let (a, b) = (self.check(a)?, self.check(b)?);
        let out = self.fresh();
        self.gates.push(Gate::Xor { a, b, out });
        Ok(out)
    }

    pub fn not(&mut self, a: Wire) -> Result<Wire, CircuitError> {
        let a = self.check(a)?;
        let out = self.fresh();
        self.gates.push(Gate::Not { a, out });
        Ok(out)
    }

    /// `a OR b` as `NOT(AND(NOT a, NOT b))`: one AND, three NOTs.
    pub fn or(&mut self, a: Wire, b: Wire) -> Result<Wire, CircuitError> {
        let na = self.not(a)?;
        let nb = self.not(b)?;
        let both = self.and(na, nb)?;
        self.not(both)
    }

    /// Balanced OR reduction; AND-depth `ceil(log2 n)`.
    pub fn or_tree(&mut self, wires: &[Wire]) -> Result<Wire, CircuitError> {
        match wires.len() {
            0 => Err(CircuitError::ZeroWidth),
            1 => self.check(wires[0]),
            _ => {
                let mut layer = wires.to_vec();
                while layer.len() > 1 {
                    let mut next = Vec::with_capacity(layer.len().div_ceil(2));
                    for pair in layer.chunks(2) {
                        next.push(match pair {
                            [a, b] => self.or(*a, *b)?,
                            [a] => *a,
                            _ => unreachable!(),
                        });
                    }
                    layer = next;
                }
                Ok(layer[0])
            }
        }
    }

    /// Masked XOR comparator: `(m1 AND m2) AND (p1 XOR p2)`, which is 1
    /// exactly when both rules constrain this bit to different values.
    pub fn bit_distinct(&mut self, m1: Wire, p1: Wire, m2: Wire, p2: Wire) -> Result<Wire, CircuitError> {
        let both = self.and(m1, m2)?;
        let differ = self.xor(p1, p2)?;
        self.and(both, differ)
    }

    /// Per-bit selection `d ? on_one : on_zero` as `z XOR (d AND (z XOR o))`.
    pub fn mux(&mut self, d: Wire, on_zero: &[Wire], on_one: &[Wire]) -> Result<Vec<Wire>, CircuitError> {
        if on_zero.len() != on_one.len() {
            return Err(CircuitError::Malformed("mux operand widths differ".into()));
        }
        on_zero
            .iter()
            .zip(on_one)
            .map(|(&z, &o)| {
                let diff = self.xor(z, o)?;
                let sel = self.and(d, diff)?;
                self.xor(z, sel)
            })
            .collect()
    }

    /// Distinctness bit of two rules given as `(mask, pattern)` wire slices.
    pub fn rules_distinct(
        &mut self,
        (m1, p1): (&[Wire], &[Wire]),
        (m2, p2): (&[Wire], &[Wire]),
    ) -> Result<Wire, CircuitError> {
        let width = m1.len();
        if width == 0 {
            return Err(CircuitError::ZeroWidth);
        }
        if p1.len() != width || m2.len() != width || p2.len() != width {
            return Err(CircuitError::Malformed("rule operand widths differ".into()));
        }
        let per_bit = (0..width)
            .map(|i| self.bit_distinct(m1[i], p1[i], m2[i], p2[i]))
            .collect::<Result<Vec<_>, _>>()?;
        self.or_tree(&per_bit)
    }

    pub fn output(&mut self, w: Wire) -> Result<(), CircuitError> {
        let w = self.check(w)?;
        self.outputs.push(w);
        Ok(())
    }

    pub fn finish(self) -> BooleanCircuit {
        BooleanCircuit { n_wires: self.n_wires, gates: self.gates, inputs: self.inputs, outputs: self.outputs }
    }
}

/// Free-function form of [`CircuitBuilder::bit_distinct`].
pub fn build_bit_distinct(c: &mut CircuitBuilder, m1: Wire, p1: Wire, m2: Wire, p2: Wire) -> Result<Wire, CircuitError> {
    c.bit_distinct(m1, p1, m2, p2)
}

/// One rule per party; single output `d`, 1 iff the rules are distinct.
///
/// Inputs of each party are `mask` then `pattern`.
pub fn build_distinct_pair(width: usize) -> Result<BooleanCircuit, CircuitError> {
    if width == 0 {
        return Err(CircuitError::ZeroWidth);
    }
    let mut c = CircuitBuilder::new();
    let ma = c.input(Party::A, "mask", width);
    let pa = c.input(Party::A, "pattern", width);
    let mb = c.input(Party::B, "mask", width);
    let pb = c.input(Party::B, "pattern", width);
    let d = c.rules_distinct((&ma, &pa), (&mb, &pb))?;
    c.output(d)?;
    Ok(c.finish())
}

/// Batch value-mapper circuit: party A supplies one rule, party B supplies
/// `k` rules with identifiers and a dummy value. Output `i` is the id of
/// rule `i` if it overlaps A's rule, else the dummy.
///
/// See [`CircuitLayout::querier_input`] and [`CircuitLayout::holder_input`]
/// for the input bit order.
pub fn build_batch_query(layout: &CircuitLayout) -> Result<BooleanCircuit, CircuitError> {
    layout.validate()?;
    let CircuitLayout { k, width, id_width } = *layout;
    let mut c = CircuitBuilder::new();
    let mq = c.input(Party::A, "mask", width);
    let pq = c.input(Party::A, "pattern", width);
    let rules: Vec<(Vec<Wire>, Vec<Wire>)> = (0..k)
        .map(|i| (c.input(Party::B, format!("mask[{i}]"), width), c.input(Party::B, format!("pattern[{i}]"), width)))
        .collect();
    let ids: Vec<Vec<Wire>> = (0..k).map(|i| c.input(Party::B, format!("id[{i}]"), id_width)).collect();
    let dummy = c.input(Party::B, "dummy", id_width);
    for (i, (m, p)) in rules.iter().enumerate() {
        let d = c.rules_distinct((&mq, &pq), (m, p))?;
        for w in c.mux(d, &ids[i], &dummy)? {
            c.output(w)?;
        }
    }
    Ok(c.finish())
}
