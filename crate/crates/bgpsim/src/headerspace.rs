//! Sets of packet headers as disjoint unions of ternary cubes.

use prelude_core::{Packet, TernaryRule};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeSet {
    width: usize,
    cubes: Vec<TernaryRule>,
}

impl CubeSet {
    pub fn empty(width: usize) -> Self {
        CubeSet { width, cubes: Vec::new() }
    }

    pub fn full(width: usize) -> Self {
        CubeSet { width, cubes: vec![TernaryRule::wildcard(width)] }
    }

    pub fn from_rule(rule: &TernaryRule) -> Self {
        CubeSet { width: rule.width(), cubes: vec![rule.canonical()] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cubes(&self) -> &[TernaryRule] {
        &self.cubes
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn contains(&self, pkt: &Packet) -> bool {
        self.cubes.iter().any(|c| c.matches(pkt).expect("width"))
    }

    /// Number of headers in the set, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.cubes.iter().fold(0u128, |acc, c| {
            let n = if c.free_bits() >= 128 { u128::MAX } else { 1u128 << c.free_bits() };
            acc.saturating_add(n)
        })
    }

    pub fn overlaps_rule(&self, rule: &TernaryRule) -> bool {
        self.cubes.iter().any(|c| c.overlaps(rule).expect("width"))
    }

    pub fn intersect_rule(&self, rule: &TernaryRule) -> CubeSet {
        CubeSet { width: self.width, cubes: self.cubes.iter().filter_map(|c| c.intersect(rule)).collect() }
    }

    pub fn subtract_rule(&self, rule: &TernaryRule) -> CubeSet {
        CubeSet { width: self.width, cubes: self.cubes.iter().flat_map(|c| c.subtract(rule)).collect() }
    }

    pub fn intersect(&self, other: &CubeSet) -> CubeSet {
        let mut cubes = Vec::new();
        for a in &self.cubes {
            for b in &other.cubes {
                if let Some(c) = a.intersect(b) {
                    cubes.push(c);
                }
            }
        }
        CubeSet { width: self.width, cubes }
    }

    pub fn subtract(&self, other: &CubeSet) -> CubeSet {
        other.cubes.iter().fold(self.clone(), |acc, c| acc.subtract_rule(c))
    }

    pub fn union(&self, other: &CubeSet) -> CubeSet {
        let mut out = self.clone();
        out.cubes.extend(other.subtract(self).cubes);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn members(s: &CubeSet) -> Vec<bool> {
        (0..1u64 << s.width()).map(|v| s.contains(&Packet::from_uint(v, s.width()))).collect()
    }

    fn arb_rule() -> impl Strategy<Value = TernaryRule> {
        proptest::collection::vec(0u8..3, 5).prop_map(|v| {
            v.iter().map(|d| ['0', '1', 'x'][*d as usize]).collect::<String>().parse().unwrap()
        })
    }

    proptest! {
        #[test]
        fn set_algebra_matches_brute_force(a in arb_rule(), b in arb_rule(), c in arb_rule()) {
            let x = CubeSet::from_rule(&a).union(&CubeSet::from_rule(&b));
            let y = CubeSet::from_rule(&c);
            let (mx, my) = (members(&x), members(&y));
            let mu = members(&x.union(&y));
            let mi = members(&x.intersect(&y));
            let md = members(&x.subtract(&y));
            for i in 0..32 {
                prop_assert_eq!(mu[i], mx[i] || my[i]);
                prop_assert_eq!(mi[i], mx[i] && my[i]);
                prop_assert_eq!(md[i], mx[i] && !my[i]);
            }
            // Disjointness makes size exact.
            prop_assert_eq!(x.union(&y).size() as usize, mu.iter().filter(|&&m| m).count());
        }
    }

    #[test]
    fn full_and_empty() {
        assert_eq!(CubeSet::full(8).size(), 256);
        assert!(CubeSet::full(8).subtract(&CubeSet::full(8)).is_empty());
        assert_eq!(CubeSet::full(104).size(), 1u128 << 104);
    }
}
