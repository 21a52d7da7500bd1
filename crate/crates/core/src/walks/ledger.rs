use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Read access to site and oriented-edge local times.
pub trait LedgerView {
    /// Site local time `z(x)`.
    fn z(&self, x: i64) -> u64;
    /// Local time of the oriented edge `(x, x+1)`.
    fn n(&self, x: i64) -> u64;
}

/// A state: site local times `z(x)` and oriented-edge local times
/// `n(x, x+1)` with `n(x, x+1) ≤ z(x+1)`. Zero entries are not stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    #[serde(default)]
    z: BTreeMap<i64, u64>,
    #[serde(default)]
    n: BTreeMap<i64, u64>,
}

impl LedgerView for LedgerState {
    fn z(&self, x: i64) -> u64 {
        self.z.get(&x).copied().unwrap_or(0)
    }

    fn n(&self, x: i64) -> u64 {
        self.n.get(&x).copied().unwrap_or(0)
    }
}

impl LedgerState {
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn new(z: BTreeMap<i64, u64>, n: BTreeMap<i64, u64>) -> Result<Self> {
        let s = Self {
            z: z.into_iter().filter(|&(_, v)| v > 0).collect(),
            n: n.into_iter().filter(|&(_, v)| v > 0).collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LedgerState = serde_json::from_str(text)?;
        Self::new(raw.z, raw.n)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Builds the state left by a nearest-neighbour path from the trivial state,
    /// not counting the final position.
    pub fn from_path(path: &[i64]) -> Result<Self> {
        let mut z = BTreeMap::new();
        let mut n = BTreeMap::new();
        for (i, &x) in path.iter().enumerate() {
            if i + 1 < path.len() {
                *z.entry(x).or_insert(0) += 1;
                match path[i + 1] - x {
                    1 => *n.entry(x).or_insert(0) += 1,
                    -1 => {}
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "path jumps from {x} to {}",
                            path[i + 1]
                        )))
                    }
                }
            }
        }
        Self::new(z, n)
    }

    fn validate(&self) -> Result<()> {
        if self
            .z
            .values()
            .chain(self.n.values())
            .any(|&v| v > i64::MAX as u64)
        {
            return Err(Error::CounterOverflow);
        }
        for (&x, &v) in &self.n {
            if v > self.z(x + 1) {
                return Err(Error::InvalidArgument(format!(
                    "n({x},{}) = {v} exceeds z({}) = {}",
                    x + 1,
                    x + 1,
                    self.z(x + 1)
                )));
            }
        }
        Ok(())
    }

    pub fn is_trivial(&self) -> bool {
        self.z.is_empty() && self.n.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.z.iter().map(|(&x, &v)| (x, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.n.iter().map(|(&x, &v)| (x, v))
    }

    /// Smallest and largest site with a positive local time.
    pub fn support(&self) -> Option<(i64, i64)> {
        Some((*self.z.keys().next()?, *self.z.keys().next_back()?))
    }

    pub fn total(&self) -> u64 {
        self.z.values().sum()
    }

    /// Edge support is an interval `⟦a, b-1⟧` with `a ≤ 0 ≤ b` and
    /// `z(x) = n(x,x+1) + n(x-1,x)` everywhere.
    pub fn is_reachable(&self) -> bool {
        self.reachability().is_ok()
    }

    fn reachability(&self) -> Result<()> {
        if let (Some(&a), Some(&last)) = (self.n.keys().next(), self.n.keys().next_back()) {
            let b = last + 1;
            if a > 0 || b < 0 {
                return Err(Error::NotReachable(format!(
                    "edge support ⟦{a},{last}⟧ does not reach the origin"
                )));
            }
            if (b - a) as usize != self.n.len() {
                return Err(Error::NotReachable("edge support has a gap".into()));
            }
        }
        let sites: std::collections::BTreeSet<i64> = self
            .z
            .keys()
            .copied()
            .chain(self.n.keys().flat_map(|&k| [k, k + 1]))
            .collect();
        for x in sites {
            let want = self.n(x) + self.n(x - 1);
            if self.z(x) != want {
                return Err(Error::NotReachable(format!(
                    "z({x}) = {} but incoming edges sum to {want}",
                    self.z(x)
                )));
            }
        }
        Ok(())
    }

    /// `z(x) = z(-x)` and `n(x,x+1) = n(-x-1,-x)` for all `x ≥ 0`.
    pub fn is_symmetric(&self) -> bool {
        self.z.iter().all(|(&x, &v)| self.z(-x) == v)
            && self.n.iter().all(|(&x, &v)| self.n(-x - 1) == v)
    }

    /// Keeps the edges at and right of the origin, mirrors them to the left and
    /// recomputes the site local times. Needs a reachable state supported on
    /// `⟦-1, b⟧` with `n(0,1) ≥ n(-1,0)`.
    pub fn symmetrize(&self) -> Result<Self> {
        self.reachability()?;
        if let Some((lo, _)) = self.support() {
            if lo < -1 {
                return Err(Error::Precondition(format!(
                    "state reaches site {lo}; expected support in ⟦-1, b⟧"
                )));
            }
        }
        if self.n(0) < self.n(-1) {
            return Err(Error::Precondition(format!(
                "n(0,1) = {} < n(-1,0) = {}",
                self.n(0),
                self.n(-1)
            )));
        }
        let mut n = BTreeMap::new();
        for (&x, &v) in self.n.range(0..) {
            n.insert(x, v);
            n.insert(-x - 1, v);
        }
        let mut z = BTreeMap::new();
        for (&x, &v) in &n {
            *z.entry(x).or_insert(0) += v;
            *z.entry(x + 1).or_insert(0) += v;
        }
        let out = Self::new(z, n)?;
        debug_assert!(out.is_symmetric() && out.is_reachable());
        Ok(out)
    }

    /// The same state translated by `d` sites.
    pub fn shifted(&self, d: i64) -> Self {
        Self {
            z: self.z.iter().map(|(&x, &v)| (x + d, v)).collect(),
            n: self.n.iter().map(|(&x, &v)| (x + d, v)).collect(),
        }
    }

    pub(crate) fn insert_z(&mut self, x: i64, v: u64) {
        if v > 0 {
            self.z.insert(x, v);
        }
    }

    pub(crate) fn insert_n(&mut self, x: i64, v: u64) {
        if v > 0 {
            self.n.insert(x, v);
        }
    }

    pub(crate) fn bump(&mut self, x: i64, edge: bool, up: bool) {
        let map = if edge { &mut self.n } else { &mut self.z };
        let e = map.entry(x).or_insert(0);
        if up {
            *e += 1;
        } else {
            *e -= 1;
            if *e == 0 {
                map.remove(&x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reachable_from_paths() {
        let s = LedgerState::from_path(&[0, 1, 2, 1, 0, -1, 0]).unwrap();
        assert!(s.is_reachable());
        assert_eq!((s.z(0), s.z(1), s.z(2), s.z(-1)), (2, 2, 1, 1));
        assert_eq!((s.n(0), s.n(1), s.n(-1)), (1, 1, 1));
        assert!(LedgerState::trivial().is_reachable());
    }

    #[test]
    fn edge_bound_enforced() {
        let z = BTreeMap::from([(1, 1)]);
        let n = BTreeMap::from([(0, 2)]);
        assert!(LedgerState::new(z, n).is_err());
    }

    #[test]
    fn single_excursion_symmetrizes() {
        let s = LedgerState::from_path(&[0, 1, 0]).unwrap();
        let t = s.symmetrize().unwrap();
        assert_eq!((t.n(0), t.n(-1)), (1, 1));
        assert_eq!((t.z(-1), t.z(0), t.z(1)), (1, 2, 1));
        assert!(t.is_symmetric());
        assert_eq!(
            LedgerState::trivial().symmetrize().unwrap(),
            LedgerState::trivial()
        );
    }

    #[test]
    fn json_round_trip() {
        let s = LedgerState::from_path(&[0, -1, 0, 1, 0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(LedgerState::from_json(&text).unwrap(), s);
        let t = LedgerState::from_json(r#"{"z": {"1": 1}, "n": {"0": 1}}"#).unwrap();
        assert_eq!(t.n(0), 1);
        assert!(LedgerState::from_json(r#"{"z": {}, "n": {"0": 1}}"#).is_err());
    }
}
