use serde::{Deserialize, Serialize};

use crate::grid::GridFn;
use crate::quad::linear_fit;

/// Thresholds of the finite-hull boundedness test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailThresholds {
    /// Bounded needs `f(X) / f(√X) ≤ 1 + tol_sat`.
    pub tol_sat: f64,
    /// Bounded needs the top-two-decade log-log slope at most this.
    pub slope_lo: f64,
    /// Unbounded needs the slope at least this.
    pub slope_hi: f64,
}

impl Default for TailThresholds {
    fn default() -> Self {
        Self {
            tol_sat: 0.02,
            slope_lo: 0.02,
            slope_hi: 0.10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bounded,
    Unbounded,
    Undetermined,
}

/// Classifier evidence for one function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailClass {
    pub verdict: Verdict,
    /// Least-squares slope of `ln f` against `ln x` over `[X/100, X]`.
    pub exponent: f64,
    /// `f(X) / f(√X)`.
    pub saturation: f64,
    pub window_lo: f64,
    pub window_hi: f64,
}

/// Classifies the behaviour of `f` at the top of its grid.
pub fn classify_tail(f: &GridFn, th: &TailThresholds) -> TailClass {
    let top = f.last_node();
    let lo = top / 100.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&x, &v) in f.nodes().iter().zip(f.values()) {
        if x >= lo && x > 0.0 && v > 0.0 {
            xs.push(x.ln());
            ys.push(v.ln());
        }
    }
    let fx = f.eval(top);
    let fm = f.eval(top.sqrt());
    let saturation = if fm > 0.0 && fx > 0.0 {
        fx / fm
    } else {
        f64::INFINITY
    };
    let fit = if xs.len() >= 3 {
        linear_fit(&xs, &ys).map(|(s, _)| s)
    } else {
        None
    };
    let (verdict, exponent) = match fit {
        None => (Verdict::Undetermined, 0.0),
        Some(s) if saturation <= 1.0 + th.tol_sat && s <= th.slope_lo => (Verdict::Bounded, s),
        Some(s) if s >= th.slope_hi => (Verdict::Unbounded, s),
        Some(s) => (Verdict::Undetermined, s),
    };
    TailClass {
        verdict,
        exponent,
        saturation: if saturation.is_finite() {
            saturation
        } else {
            f64::MAX
        },
        window_lo: lo,
        window_hi: top,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{geometric_nodes, TailRule};

    fn grid(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> GridFn {
        GridFn::from_fn(geometric_nodes(1e-3, 1e12, 32), f, df, TailRule::Power).unwrap()
    }

    #[test]
    fn reference_shapes() {
        let th = TailThresholds::default();
        let c = grid(|x| 5.0 * x / (1.0 + x), |x| 5.0 / ((1.0 + x) * (1.0 + x)));
        assert_eq!(classify_tail(&c, &th).verdict, Verdict::Bounded);
        let p = grid(
            |x| x.powf(0.3),
            |x| if x > 0.0 { 0.3 * x.powf(-0.7) } else { 0.0 },
        );
        let t = classify_tail(&p, &th);
        assert_eq!(t.verdict, Verdict::Unbounded);
        assert!((t.exponent - 0.3).abs() < 1e-9);
        let l = grid(|x| x.ln_1p(), |x| 1.0 / (1.0 + x));
        assert_eq!(classify_tail(&l, &th).verdict, Verdict::Undetermined);
    }
}
