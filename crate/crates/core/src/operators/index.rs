use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{classify_tail, Operand, OperatorConfig, Operators, TailClass, Verdict};
use crate::error::{Error, Result};
use crate::grid::{GridFn, TailRule};
use crate::weights::WeightSpec;

/// A localization index: finite, infinite (every examined iterate unbounded),
/// or undetermined (the classifier declined to decide).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum IndexValue {
    Finite(u32),
    Infinite,
    Undetermined,
}

impl IndexValue {
    pub fn finite(self) -> Option<u32> {
        match self {
            IndexValue::Finite(n) => Some(n),
            _ => None,
        }
    }

    /// Shifts a finite value by `d`; other values are unchanged.
    pub fn offset(self, d: i32) -> IndexValue {
        match self {
            IndexValue::Finite(n) => IndexValue::Finite((n as i32 + d) as u32),
            other => other,
        }
    }
}

impl std::fmt::Display for IndexValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IndexValue::Finite(n) => write!(f, "{n}"),
            IndexValue::Infinite => write!(f, "inf"),
            IndexValue::Undetermined => write!(f, "undetermined"),
        }
    }
}

impl Serialize for IndexValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            IndexValue::Finite(n) => s.serialize_u32(*n),
            IndexValue::Infinite => s.serialize_str("inf"),
            IndexValue::Undetermined => s.serialize_str("undetermined"),
        }
    }
}

impl<'de> Deserialize<'de> for IndexValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(IndexValue::Finite(n)),
            Raw::S(s) if s == "inf" => Ok(IndexValue::Infinite),
            Raw::S(s) if s == "undetermined" => Ok(IndexValue::Undetermined),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad index value `{s}`"))),
        }
    }
}

/// Iterates of one route together with their classifications.
#[derive(Clone, Debug)]
pub struct Iteration {
    pub eta: f64,
    /// Level of the first stored iterate (1 for `g`, 2 for `h`).
    pub first_level: u32,
    pub iterates: Vec<GridFn>,
    pub tails: Vec<TailClass>,
    pub index: IndexValue,
}

impl Iteration {
    pub fn level(&self, j: u32) -> Option<&GridFn> {
        j.checked_sub(self.first_level)
            .and_then(|k| self.iterates.get(k as usize))
    }
}

/// One member `Φ_{η,j}` of the family, in W-coordinates and as an x-space view.
#[derive(Clone, Debug)]
pub struct PhiLevel {
    pub j: u32,
    pub phi: GridFn,
    pub view: GridFn,
    pub tail: TailClass,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "eta must lie in (0, 1), got {eta}"
        )))
    }
}

fn undetermined(what: &str, eta: f64, level: u32, tail: TailClass) -> Error {
    Error::Undetermined {
        what: what.into(),
        eta,
        level,
        tail,
    }
}

impl Operators {
    /// `g_{η,1} = η Id`, `g_{η,k+1} = G(g_{η,k})`, stopping at the first bounded
    /// iterate with `k ≥ 2`. The index is left undetermined when the classifier is.
    pub fn g_iteration(&self, eta: f64) -> Result<Iteration> {
        check_eta(eta)?;
        let th = self.config().thresholds;
        let g1 = self.scaled_identity(eta);
        let mut tails = vec![classify_tail(&g1, &th)];
        let mut iterates = vec![g1];
        let mut index = IndexValue::Infinite;
        for k in 2..=self.config().max_level {
            let mut g = self.apply_g(Operand::Grid(iterates.last().unwrap()))?;
            let t = classify_tail(&g, &th);
            if t.verdict == Verdict::Bounded {
                g.set_hi_rule(TailRule::Constant);
            }
            iterates.push(g);
            tails.push(t);
            match t.verdict {
                Verdict::Bounded => {
                    index = IndexValue::Finite(k);
                    break;
                }
                Verdict::Undetermined => {
                    index = IndexValue::Undetermined;
                    break;
                }
                Verdict::Unbounded => {}
            }
        }
        Ok(Iteration {
            eta,
            first_level: 1,
            iterates,
            tails,
            index,
        })
    }

    /// Strict form of [`Self::g_iteration`]: an undetermined verdict is an error.
    pub fn g_sequence(&self, eta: f64) -> Result<Iteration> {
        let it = self.g_iteration(eta)?;
        if it.index == IndexValue::Undetermined {
            let k = it.first_level + it.tails.len() as u32 - 1;
            return Err(undetermined("g", eta, k, *it.tails.last().unwrap()));
        }
        Ok(it)
    }

    /// `h_{η,2} = η Id`, `h_{η,j+1} = η ∫₀ˣ w(W⁻¹(h_{η,j}(u))) / w(η W⁻¹(u)) du`,
    /// so that `h_{η,j} = W ∘ Φ_{η,j} ∘ ⋯ ∘ Φ_{η,1} ∘ W⁻¹`. The index is the first
    /// `j ≥ 3` with `h_{η,j}` bounded.
    pub fn h_iteration(&self, eta: f64) -> Result<Iteration> {
        check_eta(eta)?;
        let th = self.config().thresholds;
        let h2 = self.scaled_identity(eta);
        let mut tails = vec![classify_tail(&h2, &th)];
        let mut iterates = vec![h2];
        let mut index = IndexValue::Infinite;
        for j in 3..=self.config().max_level {
            let mut h = self.apply_hbar(eta, iterates.last().unwrap())?;
            let t = classify_tail(&h, &th);
            if t.verdict == Verdict::Bounded {
                h.set_hi_rule(TailRule::Constant);
            }
            iterates.push(h);
            tails.push(t);
            match t.verdict {
                Verdict::Bounded => {
                    index = IndexValue::Finite(j);
                    break;
                }
                Verdict::Undetermined => {
                    index = IndexValue::Undetermined;
                    break;
                }
                Verdict::Unbounded => {}
            }
        }
        Ok(Iteration {
            eta,
            first_level: 2,
            iterates,
            tails,
            index,
        })
    }

    /// Strict form of [`Self::h_iteration`].
    pub fn conjugate_iterate(&self, eta: f64) -> Result<Iteration> {
        let it = self.h_iteration(eta)?;
        if it.index == IndexValue::Undetermined {
            let j = it.first_level + it.tails.len() as u32 - 1;
            return Err(undetermined("h", eta, j, *it.tails.last().unwrap()));
        }
        Ok(it)
    }

    /// `Φ_{η,1}, Φ_{η,2}, …` up to the first bounded member, computed through
    /// `φ_j = W ∘ Φ_{η,j} ∘ W⁻¹` and returned with x-space views.
    pub fn phi_family(&self, eta: f64) -> Result<Vec<PhiLevel>> {
        check_eta(eta)?;
        let th = self.config().thresholds;
        let mut out: Vec<PhiLevel> = Vec::new();
        let mut phi = self.phi_one(eta)?;
        for j in 1..=self.config().max_level {
            if j > 1 {
                phi = self.phi_next(&out.last().unwrap().phi)?;
            }
            let tail = classify_tail(&phi, &th);
            let rule = match tail.verdict {
                Verdict::Bounded => TailRule::Constant,
                _ => TailRule::Power,
            };
            phi.set_hi_rule(rule);
            let view = self.x_view(&phi, rule)?;
            out.push(PhiLevel {
                j,
                phi: phi.clone(),
                view,
                tail,
            });
            match tail.verdict {
                Verdict::Bounded if j >= 3 => break,
                Verdict::Undetermined => return Err(undetermined("phi", eta, j, tail)),
                Verdict::Bounded => {
                    return Err(Error::CheckFailed(format!(
                        "Φ_{{{eta},{j}}} classified bounded below level 3"
                    )))
                }
                Verdict::Unbounded => {}
            }
        }
        Ok(out)
    }
}

/// Per-η classifier evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaEvidence {
    pub eta: f64,
    pub i: IndexValue,
    pub j: IndexValue,
    /// Tails of `g_{η,1}, g_{η,2}, …`.
    pub g: Vec<TailClass>,
    /// Tails of `h_{η,2}, h_{η,3}, …`.
    pub h: Vec<TailClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub weight: String,
    pub family: String,
    pub params: serde_json::Value,
    pub config: OperatorConfig,
    pub eta: Vec<f64>,
    pub i: Vec<IndexValue>,
    pub j: Vec<IndexValue>,
    pub i_minus: IndexValue,
    pub i_plus: IndexValue,
    pub j_minus: IndexValue,
    pub j_plus: IndexValue,
    /// Finite `j` values form at most two consecutive integers.
    pub two_value: bool,
    /// `j = i + 1` wherever both are finite.
    pub j_is_i_plus_one: bool,
    pub undetermined: usize,
    pub evidence: Vec<EtaEvidence>,
}

fn params_of(spec: &WeightSpec) -> serde_json::Value {
    use crate::weights::Family;
    match &spec.family {
        Family::Linear { c } => serde_json::json!({ "c": c }),
        Family::Power { p } => serde_json::json!({ "p": p }),
        Family::PolyLog { alpha } => serde_json::json!({ "alpha": alpha }),
        Family::Critical => serde_json::json!({}),
        Family::Tabulated { path, x, .. } => serde_json::json!({ "path": path, "points": x.len() }),
    }
}

/// Runs both routes at every η of `etas` (sorted ascending) and derives `i±`, `j±`.
pub fn index_sweep(ops: &Operators, etas: &[f64]) -> Result<IndexReport> {
    if etas.is_empty() || etas.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument(
            "eta grid must be non-empty and strictly increasing".into(),
        ));
    }
    let evidence = etas
        .par_iter()
        .map(|&eta| -> Result<EtaEvidence> {
            let g = ops.g_iteration(eta)?;
            let h = ops.h_iteration(eta)?;
            Ok(EtaEvidence {
                eta,
                i: g.index,
                j: h.index,
                g: g.tails,
                h: h.tails,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let i: Vec<IndexValue> = evidence.iter().map(|e| e.i).collect();
    let j: Vec<IndexValue> = evidence.iter().map(|e| e.j).collect();
    for seq in [&i, &j] {
        let known: Vec<IndexValue> = seq
            .iter()
            .copied()
            .filter(|v| *v != IndexValue::Undetermined)
            .collect();
        if known.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::InconsistentSweep(format!(
                "index decreases along the eta grid: {}",
                seq.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
    }
    let below = etas.iter().rposition(|&e| e < 0.5);
    let above = etas.iter().position(|&e| e > 0.5);
    let pick =
        |seq: &[IndexValue], at: Option<usize>| at.map_or(IndexValue::Undetermined, |k| seq[k]);
    let finite_j: Vec<u32> = j.iter().filter_map(|v| v.finite()).collect();
    let two_value = match (finite_j.iter().min(), finite_j.iter().max()) {
        (Some(a), Some(b)) => b - a <= 1,
        _ => true,
    };
    let j_is_i_plus_one = evidence.iter().all(|e| match (e.i, e.j) {
        (IndexValue::Finite(a), IndexValue::Finite(b)) => b == a + 1,
        _ => true,
    });
    let undetermined = i
        .iter()
        .chain(&j)
        .filter(|v| **v == IndexValue::Undetermined)
        .count();
    Ok(IndexReport {
        weight: ops.spec().to_string(),
        family: ops.spec().family_name().to_string(),
        params: params_of(ops.spec()),
        config: *ops.config(),
        eta: etas.to_vec(),
        i_minus: pick(&i, below),
        i_plus: pick(&i, above),
        j_minus: pick(&j, below),
        j_plus: pick(&j, above),
        i,
        j,
        two_value,
        j_is_i_plus_one,
        undetermined,
        evidence,
    })
}

/// Symmetric sweep `½ ± half_width·k/n_eta`, `k = 0..=n_eta`.
pub fn index_limits(ops: &Operators, half_width: f64, n_eta: usize) -> Result<IndexReport> {
    if !(half_width > 0.0 && half_width < 0.5) || n_eta == 0 {
        return Err(Error::InvalidArgument(
            "need 0 < half_width < 0.5 and n_eta >= 1".into(),
        ));
    }
    let n = n_eta as i64;
    let etas: Vec<f64> = (-n..=n)
        .map(|k| 0.5 + half_width * k as f64 / n as f64)
        .collect();
    index_sweep(ops, &etas)
}
