use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kind::WalkKind;
use super::ledger::LedgerState;
use crate::error::{Error, Result};
use crate::weights::WeightTable;

pub const MAX_ENUMERATION_STEPS: u32 = 14;

/// A trajectory `X_0, …, X_n` with its exact probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathProb {
    pub path: Vec<i64>,
    pub prob: f64,
}

/// Every trajectory of length `n_steps` with positive probability, by multiplying kernel values.
pub fn enumerate_exact(
    kind: &WalkKind,
    w: &WeightTable,
    initial: &LedgerState,
    n_steps: u32,
) -> Result<Vec<PathProb>> {
    if n_steps > MAX_ENUMERATION_STEPS {
        return Err(Error::InvalidArgument(format!(
            "exact enumeration is limited to {MAX_ENUMERATION_STEPS} steps, got {n_steps}"
        )));
    }
    kind.validate()?;
    let mut led = initial.clone();
    led.bump(0, false, true);
    let mut out = Vec::new();
    let mut path = vec![0];
    walk(kind, w, &mut led, &mut path, 1.0, n_steps, &mut out)?;
    Ok(out)
}

fn walk(
    kind: &WalkKind,
    w: &WeightTable,
    led: &mut LedgerState,
    path: &mut Vec<i64>,
    prob: f64,
    left: u32,
    out: &mut Vec<PathProb>,
) -> Result<()> {
    if left == 0 {
        out.push(PathProb {
            path: path.clone(),
            prob,
        });
        return Ok(());
    }
    let x = *path.last().unwrap();
    let k = kind.kernel(w, &*led, x)?;
    for (to, p) in [(x - 1, k.left), (x, k.hold), (x + 1, k.right)] {
        if p == 0.0 {
            continue;
        }
        if to == x + 1 {
            led.bump(x, true, true);
        }
        led.bump(to, false, true);
        path.push(to);
        walk(kind, w, led, path, prob * p, left - 1, out)?;
        path.pop();
        led.bump(to, false, false);
        if to == x + 1 {
            led.bump(x, true, false);
        }
    }
    Ok(())
}

/// Law of `X_n` from an enumeration.
pub fn endpoint_law(paths: &[PathProb]) -> BTreeMap<i64, f64> {
    let mut law = BTreeMap::new();
    for p in paths {
        *law.entry(*p.path.last().unwrap()).or_insert(0.0) += p.prob;
    }
    law
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSpec;

    #[test]
    fn two_steps_of_linear_vrrw() {
        let w = WeightTable::new(WeightSpec::linear(1.0).unwrap(), 32).unwrap();
        let one = endpoint_law(
            &enumerate_exact(&WalkKind::Vrrw, &w, &LedgerState::trivial(), 1).unwrap(),
        );
        assert_eq!(one, BTreeMap::from([(-1, 0.5), (1, 0.5)]));
        let law = endpoint_law(
            &enumerate_exact(&WalkKind::Vrrw, &w, &LedgerState::trivial(), 2).unwrap(),
        );
        assert!((law[&0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((law[&2] - 1.0 / 6.0).abs() < 1e-15 && (law[&-2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn too_long_rejected() {
        let w = WeightTable::new(WeightSpec::linear(1.0).unwrap(), 32).unwrap();
        assert!(enumerate_exact(&WalkKind::Vrrw, &w, &LedgerState::trivial(), 15).is_err());
    }
}
