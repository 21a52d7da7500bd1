//! Reinforcement weight functions `w : [0, ∞) → (0, ∞)`.
//!
//! A [`WeightSpec`] is parsed from strings such as `linear:1`, `power:0.5`,
//! `polylog:0.6`, `critical` or `table:path.csv`, and renders back to the
//! same form.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `w(x) = x + c`
    Linear { c: f64 },
    /// `w(x) = (x + 1)^p`
    Power { p: f64 },
    /// `w(x) = x exp(-(ln x)^alpha)` for `x >= e`, `1` below.
    PolyLog { alpha: f64 },
    /// `w(x) = x exp(-ln x / ln ln x)` for `x >= e^2`, constant below.
    Critical,
    /// Piecewise-linear interpolation of `(x, w)` samples.
    Tabulated {
        path: String,
        x: Vec<f64>,
        w: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub family: Family,
    /// Below this point the closed form is replaced by `low_value`.
    pub domain_floor: f64,
    pub low_value: f64,
}

/// Diagnostic returned by [`WeightSpec::check_assumption`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub grid_top: f64,
    pub w_monotone: bool,
    pub ell_eventually_nondecreasing: bool,
    pub slow_variation_ratio: f64,
}

impl AssumptionReport {
    pub fn all_hold(&self, slow_tol: f64) -> bool {
        self.w_monotone
            && self.ell_eventually_nondecreasing
            && self.slow_variation_ratio <= slow_tol
    }
}

const E2: f64 = std::f64::consts::E * std::f64::consts::E;

fn critical_w(x: f64) -> f64 {
    let s = x.ln();
    (s - s / s.ln()).exp()
}

impl WeightSpec {
    pub fn linear(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "linear weight needs c > 0, got {c}"
            )));
        }
        Ok(Self {
            family: Family::Linear { c },
            domain_floor: 0.0,
            low_value: c,
        })
    }

    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "power weight needs p > 0, got {p}"
            )));
        }
        Ok(Self {
            family: Family::Power { p },
            domain_floor: 0.0,
            low_value: 1.0,
        })
    }

    pub fn polylog(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "polylog weight needs alpha in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            family: Family::PolyLog { alpha },
            domain_floor: std::f64::consts::E,
            low_value: 1.0,
        })
    }

    pub fn critical() -> Self {
        Self {
            family: Family::Critical,
            domain_floor: E2,
            low_value: critical_w(E2),
        }
    }

    pub fn tabulated(path: impl Into<String>, x: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let path = path.into();
        if x.len() < 2 || x.len() != w.len() {
            return Err(Error::InvalidArgument(format!(
                "weight table `{path}` needs at least two (x, w) rows"
            )));
        }
        if x.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight table `{path}` has non-finite entries"
            )));
        }
        if x.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidArgument(format!(
                "weight table `{path}` must have strictly increasing x"
            )));
        }
        if x[0] < 0.0 || w.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight table `{path}` needs x >= 0 and w > 0"
            )));
        }
        let (floor, low) = (x[0], w[0]);
        Ok(Self {
            family: Family::Tabulated { path, x, w },
            domain_floor: floor,
            low_value: low,
        })
    }

    /// Reads a headerless or headed two-column CSV of `x,w` rows.
    pub fn from_table_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)?;
        let (mut xs, mut ws) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "{}: row {} has fewer than two columns",
                    path.display(),
                    row + 1
                )));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(x), Ok(w)) => {
                    xs.push(x);
                    ws.push(w);
                }
                // tolerate a header line
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "{}: row {} is not numeric",
                        path.display(),
                        row + 1
                    )))
                }
            }
        }
        Self::tabulated(path.display().to_string(), xs, ws)
    }

    /// Short family name used in file names and logs.
    pub fn family_name(&self) -> &'static str {
        match self.family {
            Family::Linear { .. } => "linear",
            Family::Power { .. } => "power",
            Family::PolyLog { .. } => "polylog",
            Family::Critical => "critical",
            Family::Tabulated { .. } => "table",
        }
    }

    /// Upper end of the region where `w` is defined.
    pub fn domain_top(&self) -> f64 {
        match &self.family {
            Family::Tabulated { x, .. } => *x.last().unwrap(),
            _ => f64::INFINITY,
        }
    }

    /// Points where `w` is continuous but not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match &self.family {
            Family::PolyLog { .. } | Family::Critical => vec![self.domain_floor],
            Family::Tabulated { x, .. } => x.iter().copied().filter(|&v| v > 0.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Evaluates `w(x)`, rejecting negative, non-finite or out-of-table arguments.
    pub fn eval_w(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weight argument must be finite and >= 0, got {x}"
            )));
        }
        if let Family::Tabulated { x: xs, .. } = &self.family {
            let (lo, hi) = (xs[0], *xs.last().unwrap());
            if x < lo || x > hi {
                return Err(Error::OutsideTable { x, lo, hi });
            }
        }
        Ok(self.w(x))
    }

    /// `ℓ(x) = x / w(x)`.
    pub fn eval_ell(&self, x: f64) -> Result<f64> {
        Ok(x / self.eval_w(x)?)
    }

    /// Unchecked evaluation. Tabulated weights are clamped to the table ends;
    /// callers validate the argument range beforehand.
    #[inline]
    pub fn w(&self, x: f64) -> f64 {
        match &self.family {
            Family::Linear { c } => x + c,
            Family::Power { p } => (x + 1.0).powf(*p),
            Family::PolyLog { alpha } => {
                if x < std::f64::consts::E {
                    1.0
                } else {
                    let s = x.ln();
                    x * (-s.powf(*alpha)).exp()
                }
            }
            Family::Critical => {
                if x < E2 {
                    self.low_value
                } else {
                    critical_w(x)
                }
            }
            Family::Tabulated { x: xs, w, .. } => table_interp(xs, w, x),
        }
    }

    /// `ω(s) = ln w(e^s)`, accurate for arguments far beyond the f64 range of `e^s`.
    pub fn log_w_at_log(&self, s: f64) -> f64 {
        match &self.family {
            Family::Linear { c } => {
                if s > 0.0 {
                    s + (c * (-s).exp()).ln_1p()
                } else {
                    (s.exp() + c).ln()
                }
            }
            Family::Power { p } => p * (s.max(0.0) + (-s.abs()).exp().ln_1p()),
            Family::PolyLog { alpha } => {
                if s < 1.0 {
                    0.0
                } else {
                    s - s.powf(*alpha)
                }
            }
            Family::Critical => {
                if s < 2.0 {
                    self.low_value.ln()
                } else {
                    s - s / s.ln()
                }
            }
            Family::Tabulated { .. } => self.w(s.exp()).ln(),
        }
    }

    /// Samples a geometric grid from `1e-3` to `grid_top` (clamped to a table's
    /// hull) and reports monotonicity of `w`, eventual monotonicity of `ℓ` on the
    /// upper half of the grid, and `max |ℓ(2x)/ℓ(x) - 1|` over the top decade.
    pub fn check_assumption(&self, grid_top: f64) -> AssumptionReport {
        let top = grid_top.min(self.domain_top()).max(1e-2);
        let lo: f64 = 1e-3;
        let n = ((top / lo).log10() * 16.0).ceil().max(2.0) as usize;
        let grid: Vec<f64> = (0..=n)
            .map(|k| {
                if k == n {
                    top
                } else {
                    lo * (top / lo).powf(k as f64 / n as f64)
                }
            })
            .collect();
        let ws: Vec<f64> = grid.iter().map(|&x| self.w(x)).collect();
        let w_monotone = ws.windows(2).all(|p| p[1] >= p[0]);
        let ell: Vec<f64> = grid.iter().zip(&ws).map(|(x, w)| x / w).collect();
        let ell_eventually_nondecreasing = ell[n / 2..]
            .windows(2)
            .all(|p| p[1] >= p[0] * (1.0 - 1e-12));
        let mut ratio: f64 = 0.0;
        for k in 0..=32 {
            let x = top / 10.0 * (5.0f64).powf(k as f64 / 32.0);
            let r = (2.0 * x) / self.w(2.0 * x) / (x / self.w(x));
            ratio = ratio.max((r - 1.0).abs());
        }
        AssumptionReport {
            grid_top: top,
            w_monotone,
            ell_eventually_nondecreasing,
            slow_variation_ratio: ratio,
        }
    }
}

fn table_interp(xs: &[f64], ws: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ws[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ws[last];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ws[k] + t * (ws[k + 1] - ws[k])
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Linear { c } => write!(f, "linear:{c}"),
            Family::Power { p } => write!(f, "power:{p}"),
            Family::PolyLog { alpha } => write!(f, "polylog:{alpha}"),
            Family::Critical => write!(f, "critical"),
            Family::Tabulated { path, .. } => write!(f, "table:{path}"),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: &str| Error::ParseWeight {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| bad("missing parameter"))?
                .parse::<f64>()
                .map_err(|_| bad("parameter is not a number"))
        };
        let wrap = |r: Result<Self>| r.map_err(|e| bad(&e.to_string()));
        match name {
            "linear" => wrap(Self::linear(num(arg)?)),
            "power" => wrap(Self::power(num(arg)?)),
            "polylog" => wrap(Self::polylog(num(arg)?)),
            "critical" if arg.is_none() => Ok(Self::critical()),
            "critical" => Err(bad("critical takes no parameter")),
            "table" => {
                let path = arg
                    .filter(|p| !p.is_empty())
                    .ok_or_else(|| bad("missing table path"))?;
                Self::from_table_file(path)
            }
            _ => Err(bad(
                "unknown family (expected linear, power, polylog, critical or table)",
            )),
        }
    }
}

/// Immutable cache of `w(k)` for small integer `k`, shared between walk runs.
#[derive(Clone, Debug)]
pub struct WeightTable {
    spec: WeightSpec,
    ints: Vec<f64>,
}

impl WeightTable {
    /// Caches `w(0), …, w(cap)`. Tabulated weights must cover `cap`.
    pub fn new(spec: WeightSpec, cap: usize) -> Result<Self> {
        let top = spec.domain_top();
        if (cap as f64) > top {
            return Err(Error::OutsideTable {
                x: cap as f64,
                lo: spec.domain_floor,
                hi: top,
            });
        }
        let ints = (0..=cap).map(|k| spec.w(k as f64)).collect();
        Ok(Self { spec, ints })
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    /// Largest argument guaranteed to be inside the weight's domain.
    pub fn reach(&self) -> f64 {
        self.spec.domain_top()
    }

    #[inline]
    pub fn w_int(&self, k: u64) -> f64 {
        match self.ints.get(k as usize) {
            Some(&v) => v,
            None => self.spec.w(k as f64),
        }
    }

    #[inline]
    pub fn w(&self, x: f64) -> f64 {
        self.spec.w(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let lin = WeightSpec::linear(1.0).unwrap();
        assert_eq!(lin.eval_w(3.0).unwrap(), 4.0);
        let pow = WeightSpec::power(2.0).unwrap();
        assert_eq!(pow.eval_w(1.0).unwrap(), 4.0);
        let pl = WeightSpec::polylog(0.5).unwrap();
        assert_eq!(pl.eval_w(1.0).unwrap(), 1.0);
        let x: f64 = 1e4;
        let expect = x * (-(x.ln()).sqrt()).exp();
        assert!((pl.eval_w(x).unwrap() / expect - 1.0).abs() < 1e-14);
        let crit = WeightSpec::critical();
        assert!((crit.low_value - 0.4122).abs() < 1e-3);
        assert_eq!(crit.eval_w(1.0).unwrap(), crit.low_value);
    }

    #[test]
    fn polylog_is_continuous_at_e() {
        let pl = WeightSpec::polylog(0.6).unwrap();
        let e = std::f64::consts::E;
        assert!((pl.w(e) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_w_matches_direct_evaluation() {
        for spec in [
            WeightSpec::linear(1.0).unwrap(),
            WeightSpec::linear(0.25).unwrap(),
            WeightSpec::power(0.5).unwrap(),
            WeightSpec::polylog(0.6).unwrap(),
            WeightSpec::critical(),
        ] {
            for s in [-5.0, -0.3, 0.5, 1.5, 3.0, 10.0, 40.0] {
                let direct = spec.w(f64::exp(s)).ln();
                assert!(
                    (spec.log_w_at_log(s) - direct).abs() < 1e-12,
                    "{spec} at s={s}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let lin = WeightSpec::linear(1.0).unwrap();
        assert!(lin.eval_w(-1.0).is_err());
        assert!(lin.eval_w(f64::NAN).is_err());
        let t = WeightSpec::tabulated("t", vec![0.0, 10.0], vec![1.0, 11.0]).unwrap();
        assert_eq!(t.eval_w(5.0).unwrap(), 6.0);
        assert!(matches!(t.eval_w(11.0), Err(Error::OutsideTable { .. })));
    }

    #[test]
    fn parse_round_trip() {
        for s in ["linear:1", "power:0.5", "polylog:0.6", "critical"] {
            let w: WeightSpec = s.parse().unwrap();
            assert_eq!(w.to_string(), s);
        }
        assert!("polylog:1.5".parse::<WeightSpec>().is_err());
        assert!("cubic:1".parse::<WeightSpec>().is_err());
        assert!("linear".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn assumption_diagnostics() {
        let lin = WeightSpec::linear(1.0).unwrap().check_assumption(1e9);
        assert!(lin.all_hold(1e-6));
        let pow = WeightSpec::power(2.0).unwrap().check_assumption(1e9);
        assert!(!pow.ell_eventually_nondecreasing);
        assert!(pow.slow_variation_ratio > 0.4);
        let pl = WeightSpec::polylog(0.75).unwrap().check_assumption(1e9);
        assert!(pl.w_monotone && pl.ell_eventually_nondecreasing);
        assert!(pl.slow_variation_ratio < 0.5);
    }

    #[test]
    fn integer_cache_agrees() {
        let spec = WeightSpec::polylog(0.6).unwrap();
        let t = WeightTable::new(spec.clone(), 100).unwrap();
        for k in [0u64, 3, 99, 100, 101, 5000] {
            assert_eq!(t.w_int(k), spec.w(k as f64));
        }
    }
}
