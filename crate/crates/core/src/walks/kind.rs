use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ledger::LedgerView;
use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::operators::Operators;
use crate::weights::WeightTable;

/// Perturbation data of the hat walk: `ε` and the comparison function `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct HatParams {
    pub epsilon: f64,
    pub f: Arc<GridFn>,
}

impl HatParams {
    pub fn new(epsilon: f64, f: GridFn) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.25) {
            return Err(Error::InvalidArgument(format!(
                "hat walk needs epsilon in (0, 1/4), got {epsilon}"
            )));
        }
        if f.values().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("hat walk needs f >= 0".into()));
        }
        Ok(Self {
            epsilon,
            f: Arc::new(f),
        })
    }

    /// `ε` from [`Operators::choose_epsilon`] unless given, and `f = f_{½+2ε}`
    /// verified on `f_hull`. A chosen `ε` is halved until `f` verifies.
    pub fn build(ops: &Operators, epsilon: Option<f64>) -> Result<Self> {
        let hull = ops.config().f_hull;
        if let Some(e) = epsilon {
            let fe = ops.build_f_eta(0.5 + 2.0 * e, hull)?;
            return Self::new(e, fe.f);
        }
        // smaller ε keeps i_{½+3ε} = i₊, so halve until f_{½+2ε} verifies
        let mut e = ops.choose_epsilon()?;
        let mut last = None;
        for _ in 0..6 {
            match ops.build_f_eta(0.5 + 2.0 * e, hull) {
                Ok(fe) => return Self::new(e, fe.f),
                Err(err) => last = Some(err),
            }
            e /= 2.0;
        }
        Err(last.unwrap())
    }
}

/// Transition mechanism of a walk.
#[derive(Clone, Debug, PartialEq)]
pub enum WalkKind {
    /// VRRW on ℤ.
    Vrrw,
    /// VRRW reflected at -1.
    Reflected,
    /// Left weight from the site local time, right weight from the edge local time; reflected at -1.
    Tilde,
    /// Tilde with the right edge boosted to `N + f(N)` at 0 and `(1+ε)N` beyond.
    Hat(HatParams),
    /// Hat walk reflected at -1 and at `l`.
    HatRestricted { l: i64, params: HatParams },
    /// Tilde walk on `⟦0, ∞⟦` that holds at 0 with probability `1-γ`.
    Breve { gamma: f64 },
    /// VRRW reflected at both `lo` and `hi`.
    Restricted { lo: i64, hi: i64 },
}

/// One-step law at a site. `down` is the outcome chosen when `U ≤ p_down`:
/// a left jump, or a hold for the breve walk at 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    pub left: f64,
    pub hold: f64,
    pub right: f64,
}

impl Kernel {
    fn from_weights(a: f64, b: f64) -> Self {
        let s = a + b;
        Self {
            left: a / s,
            hold: 0.0,
            right: b / s,
        }
    }

    const FORCED_RIGHT: Kernel = Kernel {
        left: 0.0,
        hold: 0.0,
        right: 1.0,
    };
    const FORCED_LEFT: Kernel = Kernel {
        left: 1.0,
        hold: 0.0,
        right: 0.0,
    };

    pub fn p_down(&self) -> f64 {
        if self.hold > 0.0 {
            self.hold
        } else {
            self.left
        }
    }

    pub fn down_is_hold(&self) -> bool {
        self.hold > 0.0
    }

    pub fn total(&self) -> f64 {
        self.left + self.hold + self.right
    }
}

impl WalkKind {
    pub fn name(&self) -> &'static str {
        match self {
            WalkKind::Vrrw => "vrrw",
            WalkKind::Reflected => "reflected",
            WalkKind::Tilde => "tilde",
            WalkKind::Hat(_) => "hat",
            WalkKind::HatRestricted { .. } => "hat-restricted",
            WalkKind::Breve { .. } => "breve",
            WalkKind::Restricted { .. } => "restricted",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WalkKind::Breve { gamma } if !(gamma > 0.0 && gamma < 0.5) => Err(
                Error::InvalidArgument(format!("breve walk needs gamma in (0, 1/2), got {gamma}")),
            ),
            WalkKind::Restricted { lo, hi } if !(lo <= 0 && 0 <= hi && lo < hi) => {
                Err(Error::InvalidArgument(format!(
                    "restricted interval ⟦{lo},{hi}⟧ must contain 0 and two sites"
                )))
            }
            WalkKind::HatRestricted { l, .. } if l < 2 => Err(Error::InvalidArgument(format!(
                "restricted hat walk needs L > 1, got {l}"
            ))),
            _ => Ok(()),
        }
    }

    /// Smallest and largest admissible position.
    pub fn range(&self) -> (i64, i64) {
        match *self {
            WalkKind::Vrrw => (i64::MIN + 1, i64::MAX - 1),
            WalkKind::Reflected | WalkKind::Tilde | WalkKind::Hat(_) => (-1, i64::MAX - 1),
            WalkKind::HatRestricted { l, .. } => (-1, l),
            WalkKind::Breve { .. } => (0, i64::MAX - 1),
            WalkKind::Restricted { lo, hi } => (lo, hi),
        }
    }

    pub fn hat_params(&self) -> Option<&HatParams> {
        match self {
            WalkKind::Hat(p) | WalkKind::HatRestricted { params: p, .. } => Some(p),
            _ => None,
        }
    }

    /// Transition law at `x` given the current local times.
    pub fn kernel<L: LedgerView + ?Sized>(
        &self,
        w: &WeightTable,
        led: &L,
        x: i64,
    ) -> Result<Kernel> {
        let (lo, hi) = self.range();
        if x < lo || x > hi {
            return Err(Error::OutOfRange {
                kind: self.to_string(),
                position: x,
            });
        }
        let vertex = || Kernel::from_weights(w.w_int(led.z(x - 1)), w.w_int(led.z(x + 1)));
        let tilde = || Kernel::from_weights(w.w_int(led.z(x - 1)), w.w_int(led.n(x)));
        let hat = |p: &HatParams| {
            let m = led.n(x) as f64;
            let right = if x == 0 {
                m + p.f.eval(m)
            } else {
                (1.0 + p.epsilon) * m
            };
            Kernel::from_weights(w.w_int(led.z(x - 1)), w.w(right))
        };
        Ok(match self {
            WalkKind::Vrrw => vertex(),
            WalkKind::Reflected => {
                if x == -1 {
                    Kernel::FORCED_RIGHT
                } else {
                    vertex()
                }
            }
            WalkKind::Tilde => {
                if x == -1 {
                    Kernel::FORCED_RIGHT
                } else {
                    tilde()
                }
            }
            WalkKind::Hat(p) => {
                if x == -1 {
                    Kernel::FORCED_RIGHT
                } else {
                    hat(p)
                }
            }
            WalkKind::HatRestricted { l, params } => {
                if x == -1 {
                    Kernel::FORCED_RIGHT
                } else if x == *l {
                    Kernel::FORCED_LEFT
                } else {
                    hat(params)
                }
            }
            WalkKind::Breve { gamma } => {
                if x == 0 {
                    Kernel {
                        left: 0.0,
                        hold: 1.0 - gamma,
                        right: *gamma,
                    }
                } else {
                    tilde()
                }
            }
            WalkKind::Restricted { lo, hi } => {
                if x == *lo {
                    Kernel::FORCED_RIGHT
                } else if x == *hi {
                    Kernel::FORCED_LEFT
                } else {
                    vertex()
                }
            }
        })
    }

    /// Probability of the `down` outcome at `x`: a left jump, or the hold
    /// probability `1-γ` of the breve walk at 0.
    pub fn prob_left<L: LedgerView + ?Sized>(
        &self,
        w: &WeightTable,
        led: &L,
        x: i64,
    ) -> Result<f64> {
        Ok(self.kernel(w, led, x)?.p_down())
    }
}

impl fmt::Display for WalkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalkKind::Hat(p) => write!(f, "hat:{}", p.epsilon),
            WalkKind::HatRestricted { l, params } => {
                write!(f, "hat-restricted:{l}:{}", params.epsilon)
            }
            WalkKind::Breve { gamma } => write!(f, "breve:{gamma}"),
            WalkKind::Restricted { lo, hi } => write!(f, "restricted:{lo}:{hi}"),
            k => f.write_str(k.name()),
        }
    }
}

/// A walk kind as written in configs and on the command line. Hat kinds take
/// an optional `ε`; `f` is built from the weight when resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KindSpec {
    Vrrw,
    Reflected,
    Tilde,
    Hat { epsilon: Option<f64> },
    HatRestricted { l: i64, epsilon: Option<f64> },
    Breve { gamma: f64 },
    Restricted { lo: i64, hi: i64 },
}

impl KindSpec {
    pub fn needs_operators(&self) -> bool {
        matches!(self, KindSpec::Hat { .. } | KindSpec::HatRestricted { .. })
    }

    /// Builds the walk kind; `ops` is only used by hat kinds.
    pub fn resolve(&self, ops: Option<&Operators>) -> Result<WalkKind> {
        let hat = |eps: Option<f64>| -> Result<HatParams> {
            let ops = ops.ok_or_else(|| {
                Error::InvalidArgument("hat walks need the operator calculus".into())
            })?;
            HatParams::build(ops, eps)
        };
        let kind = match *self {
            KindSpec::Vrrw => WalkKind::Vrrw,
            KindSpec::Reflected => WalkKind::Reflected,
            KindSpec::Tilde => WalkKind::Tilde,
            KindSpec::Hat { epsilon } => WalkKind::Hat(hat(epsilon)?),
            KindSpec::HatRestricted { l, epsilon } => WalkKind::HatRestricted {
                l,
                params: hat(epsilon)?,
            },
            KindSpec::Breve { gamma } => WalkKind::Breve { gamma },
            KindSpec::Restricted { lo, hi } => WalkKind::Restricted { lo, hi },
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for KindSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KindSpec::Vrrw => f.write_str("vrrw"),
            KindSpec::Reflected => f.write_str("reflected"),
            KindSpec::Tilde => f.write_str("tilde"),
            KindSpec::Hat { epsilon: None } => f.write_str("hat"),
            KindSpec::Hat { epsilon: Some(e) } => write!(f, "hat:{e}"),
            KindSpec::HatRestricted { l, epsilon: None } => write!(f, "hat-restricted:{l}"),
            KindSpec::HatRestricted {
                l,
                epsilon: Some(e),
            } => write!(f, "hat-restricted:{l}:{e}"),
            KindSpec::Breve { gamma } => write!(f, "breve:{gamma}"),
            KindSpec::Restricted { lo, hi } => write!(f, "restricted:{lo}:{hi}"),
        }
    }
}

impl FromStr for KindSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("walk kind `{s}`: {why}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| bad("missing parameter"))?
                .parse::<f64>()
                .map_err(|e| bad(&e.to_string()))
        };
        let int = |i: usize| -> Result<i64> {
            parts
                .get(i)
                .ok_or_else(|| bad("missing parameter"))?
                .parse::<i64>()
                .map_err(|e| bad(&e.to_string()))
        };
        let spec = match (parts[0], parts.len()) {
            ("vrrw", 1) => KindSpec::Vrrw,
            ("reflected", 1) => KindSpec::Reflected,
            ("tilde", 1) => KindSpec::Tilde,
            ("hat", 1) => KindSpec::Hat { epsilon: None },
            ("hat", 2) => KindSpec::Hat { epsilon: Some(num(1)?) },
            ("hat-restricted", 2) => KindSpec::HatRestricted { l: int(1)?, epsilon: None },
            ("hat-restricted", 3) => KindSpec::HatRestricted { l: int(1)?, epsilon: Some(num(2)?) },
            ("breve", 2) => KindSpec::Breve { gamma: num(1)? },
            ("restricted", 3) => KindSpec::Restricted { lo: int(1)?, hi: int(2)? },
            _ => return Err(bad("expected vrrw, reflected, tilde, hat[:eps], hat-restricted:L[:eps], breve:gamma or restricted:lo:hi")),
        };
        match spec {
            KindSpec::Hat { epsilon: Some(e) }
            | KindSpec::HatRestricted {
                epsilon: Some(e), ..
            } if !(e > 0.0 && e < 0.25) => Err(bad("epsilon must lie in (0, 1/4)")),
            KindSpec::Breve { gamma } if !(gamma > 0.0 && gamma < 0.5) => {
                Err(bad("gamma must lie in (0, 1/2)"))
            }
            KindSpec::Restricted { lo, hi } if !(lo <= 0 && 0 <= hi && lo < hi) => {
                Err(bad("interval must contain 0"))
            }
            KindSpec::HatRestricted { l, .. } if l < 2 => Err(bad("L must exceed 1")),
            s => Ok(s),
        }
    }
}

impl TryFrom<String> for KindSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KindSpec> for String {
    fn from(k: KindSpec) -> String {
        k.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::LedgerState;
    use crate::weights::WeightSpec;

    fn table() -> WeightTable {
        WeightTable::new(WeightSpec::linear(1.0).unwrap(), 64).unwrap()
    }

    #[test]
    fn first_step_is_fair() {
        let t = table();
        let s = LedgerState::trivial();
        for k in [
            WalkKind::Vrrw,
            WalkKind::Reflected,
            WalkKind::Tilde,
            WalkKind::Restricted { lo: -2, hi: 2 },
        ] {
            assert_eq!(k.prob_left(&t, &s, 0).unwrap(), 0.5, "{k}");
        }
    }

    #[test]
    fn vrrw_after_right_step() {
        let t = table();
        // local times after X_0 = 0, X_1 = 1
        let s = LedgerState::new([(0, 1), (1, 1)].into(), [(0, 1)].into()).unwrap();
        assert!((WalkKind::Vrrw.prob_left(&t, &s, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundaries() {
        let t = table();
        let s = LedgerState::trivial();
        assert_eq!(WalkKind::Reflected.prob_left(&t, &s, -1).unwrap(), 0.0);
        assert!(WalkKind::Reflected.prob_left(&t, &s, -2).is_err());
        let r = WalkKind::Restricted { lo: 0, hi: 4 };
        assert_eq!(r.prob_left(&t, &s, 4).unwrap(), 1.0);
        assert_eq!(r.prob_left(&t, &s, 0).unwrap(), 0.0);
        let b = WalkKind::Breve { gamma: 0.4 };
        let k = b.kernel(&t, &s, 0).unwrap();
        assert!(k.down_is_hold() && (k.hold - 0.6).abs() < 1e-15);
        assert!(b.kernel(&t, &s, -1).is_err());
    }

    #[test]
    fn kind_strings_round_trip() {
        for s in [
            "vrrw",
            "reflected",
            "tilde",
            "hat",
            "hat:0.0625",
            "hat-restricted:5",
            "breve:0.4",
            "restricted:0:4",
        ] {
            let k: KindSpec = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        for s in [
            "",
            "breve:0.7",
            "restricted:1:4",
            "hat:0",
            "walk",
            "tilde:1",
        ] {
            assert!(s.parse::<KindSpec>().is_err(), "{s}");
        }
    }
}
