//! Tabulated real functions with cubic Hermite interpolation and analytic tails.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extension rule outside the node range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Tail {
    Constant {
        value: f64,
    },
    /// `a + b x`
    Linear {
        a: f64,
        b: f64,
    },
    /// `a + b ln x`
    LinearInLog {
        a: f64,
        b: f64,
    },
    /// `a x^b`
    Power {
        a: f64,
        b: f64,
    },
}

/// Upper-tail rule to fit when a grid is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    Constant,
    Linear,
    LinearInLog,
    Power,
}

impl Tail {
    /// Fits the tail so that value and derivative match at `(x, v, m)`.
    pub fn fit(rule: TailRule, x: f64, v: f64, m: f64) -> Tail {
        match rule {
            TailRule::Constant => Tail::Constant { value: v },
            TailRule::Linear => Tail::Linear { a: v - m * x, b: m },
            TailRule::LinearInLog if x > 0.0 => Tail::LinearInLog {
                a: v - m * x * x.ln(),
                b: m * x,
            },
            TailRule::Power if x > 0.0 && v > 0.0 => {
                let b = m * x / v;
                Tail::Power {
                    a: v / x.powf(b),
                    b,
                }
            }
            _ => Tail::Linear { a: v - m * x, b: m },
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Tail::Constant { value } => value,
            Tail::Linear { a, b } => a + b * x,
            Tail::LinearInLog { a, b } => a + b * x.ln(),
            Tail::Power { a, b } => a * x.powf(b),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Tail::Constant { .. } => 0.0,
            Tail::Linear { b, .. } => b,
            Tail::LinearInLog { b, .. } => b / x,
            Tail::Power { a, b } => a * b * x.powf(b - 1.0),
        }
    }

    /// Solves `tail(x) = y`; `None` when the tail cannot reach `y`.
    pub fn solve(&self, y: f64) -> Option<f64> {
        let x = match *self {
            Tail::Constant { .. } => return None,
            Tail::Linear { a, b } if b != 0.0 => (y - a) / b,
            Tail::LinearInLog { a, b } if b != 0.0 => ((y - a) / b).exp(),
            Tail::Power { a, b } if b != 0.0 && a > 0.0 => (y / a).powf(1.0 / b),
            _ => return None,
        };
        x.is_finite().then_some(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Forward,
    /// The stored table is that of `f`; evaluation returns `f⁻¹`.
    Inverse,
}

/// A function known on a strictly increasing node set.
///
/// Evaluation at a node returns the stored value bit-for-bit. Inverses are
/// views over the same table and are solved by safeguarded Newton iteration,
/// so `f(f⁻¹(y))` is accurate to rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    orientation: Orientation,
    monotone: bool,
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    lo_tail: Tail,
    hi_tail: Tail,
}

impl GridFn {
    pub fn new(
        nodes: Vec<f64>,
        values: Vec<f64>,
        mut slopes: Vec<f64>,
        lo_tail: Tail,
        hi_tail: Tail,
    ) -> Result<Self> {
        let n = nodes.len();
        if n < 2 || values.len() != n || slopes.len() != n {
            return Err(Error::InvalidArgument(format!(
                "grid needs matching node/value/slope arrays of length >= 2 (got {}, {}, {})",
                n,
                values.len(),
                slopes.len()
            )));
        }
        if nodes
            .iter()
            .chain(&values)
            .chain(&slopes)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "grid contains non-finite entries".into(),
            ));
        }
        if let Some(k) = nodes.windows(2).position(|p| p[1] <= p[0]) {
            return Err(Error::InvalidArgument(format!(
                "grid nodes must be strictly increasing (nodes {k} and {})",
                k + 1
            )));
        }
        let monotone = values.windows(2).all(|p| p[1] > p[0]) && slopes.iter().all(|&m| m >= 0.0);
        if monotone {
            limit_slopes(&nodes, &values, &mut slopes);
        }
        Ok(Self {
            orientation: Orientation::Forward,
            monotone,
            nodes,
            values,
            slopes,
            lo_tail,
            hi_tail,
        })
    }

    /// Builds a grid from values and exact slopes, with a linear lower tail and a
    /// fitted upper tail.
    pub fn with_rule(
        nodes: Vec<f64>,
        values: Vec<f64>,
        slopes: Vec<f64>,
        rule: TailRule,
    ) -> Result<Self> {
        if nodes.len() < 2 || values.len() != nodes.len() || slopes.len() != nodes.len() {
            return Err(Error::InvalidArgument(
                "grid arrays must have matching length >= 2".into(),
            ));
        }
        let n = nodes.len() - 1;
        let lo = Tail::fit(TailRule::Linear, nodes[0], values[0], slopes[0]);
        let hi = Tail::fit(rule, nodes[n], values[n], slopes[n]);
        Self::new(nodes, values, slopes, lo, hi)
    }

    /// Samples `f` and `f'` on `nodes`.
    pub fn from_fn(
        nodes: Vec<f64>,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
        rule: TailRule,
    ) -> Result<Self> {
        let values = nodes.iter().map(|&x| f(x)).collect();
        let slopes = nodes.iter().map(|&x| df(x)).collect();
        Self::with_rule(nodes, values, slopes, rule)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Abscissae of the function as evaluated.
    pub fn nodes(&self) -> &[f64] {
        match self.orientation {
            Orientation::Forward => &self.nodes,
            Orientation::Inverse => &self.values,
        }
    }

    /// Ordinates at [`Self::nodes`].
    pub fn values(&self) -> &[f64] {
        match self.orientation {
            Orientation::Forward => &self.values,
            Orientation::Inverse => &self.nodes,
        }
    }

    pub fn first_node(&self) -> f64 {
        self.nodes()[0]
    }

    pub fn last_node(&self) -> f64 {
        *self.nodes().last().unwrap()
    }

    pub fn last_value(&self) -> f64 {
        *self.values().last().unwrap()
    }

    pub fn hi_tail(&self) -> Tail {
        self.hi_tail
    }

    pub fn lo_tail(&self) -> Tail {
        self.lo_tail
    }

    /// Replaces the upper tail, refitting at the last stored node.
    pub fn set_hi_rule(&mut self, rule: TailRule) {
        let n = self.nodes.len() - 1;
        self.hi_tail = Tail::fit(rule, self.nodes[n], self.values[n], self.slopes[n]);
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.orientation {
            Orientation::Forward => self.forward(x),
            Orientation::Inverse => self.solve(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self.orientation {
            Orientation::Forward => self.forward_derivative(x),
            Orientation::Inverse => 1.0 / self.forward_derivative(self.solve(x)),
        }
    }

    /// Evaluates the inverse function; requires strict monotonicity.
    pub fn inverse_eval(&self, y: f64) -> Result<f64> {
        if !self.monotone {
            return Err(Error::NotMonotone("inverse of a non-monotone grid".into()));
        }
        Ok(match self.orientation {
            Orientation::Forward => self.solve(y),
            Orientation::Inverse => self.forward(y),
        })
    }

    /// The inverse function as a view over the same table.
    pub fn inverse(&self) -> Result<GridFn> {
        if !self.monotone {
            return Err(Error::NotMonotone("inverse of a non-monotone grid".into()));
        }
        let mut g = self.clone();
        g.orientation = match self.orientation {
            Orientation::Forward => Orientation::Inverse,
            Orientation::Inverse => Orientation::Forward,
        };
        Ok(g)
    }

    fn cell(&self, x: f64) -> usize {
        let k = self.nodes.partition_point(|&v| v <= x);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }

    fn forward(&self, x: f64) -> f64 {
        let n = self.nodes.len() - 1;
        if x < self.nodes[0] {
            return self.lo_tail.eval(x);
        }
        if x > self.nodes[n] {
            return self.hi_tail.eval(x);
        }
        let k = self.cell(x);
        if x == self.nodes[k] {
            return self.values[k];
        }
        if x == self.nodes[k + 1] {
            return self.values[k + 1];
        }
        let h = self.nodes[k + 1] - self.nodes[k];
        let t = (x - self.nodes[k]) / h;
        hermite(
            t,
            h,
            self.values[k],
            self.values[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
        )
    }

    fn forward_derivative(&self, x: f64) -> f64 {
        let n = self.nodes.len() - 1;
        if x < self.nodes[0] {
            return self.lo_tail.derivative(x);
        }
        if x > self.nodes[n] {
            return self.hi_tail.derivative(x);
        }
        let k = self.cell(x);
        let h = self.nodes[k + 1] - self.nodes[k];
        let t = (x - self.nodes[k]) / h;
        let (y0, y1, m0, m1) = (
            self.values[k],
            self.values[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
        );
        let d00 = 6.0 * t * t - 6.0 * t;
        let d10 = 3.0 * t * t - 4.0 * t + 1.0;
        let d11 = 3.0 * t * t - 2.0 * t;
        d00 * (y0 - y1) / h + d10 * m0 + d11 * m1
    }

    /// Solves `forward(x) = y`. Beyond a constant tail the answer is `+∞`.
    fn solve(&self, y: f64) -> f64 {
        let n = self.values.len() - 1;
        if y < self.values[0] {
            return self.lo_tail.solve(y).unwrap_or(f64::NEG_INFINITY);
        }
        if y > self.values[n] {
            return self.hi_tail.solve(y).unwrap_or(f64::INFINITY);
        }
        let k = self
            .values
            .partition_point(|&v| v <= y)
            .saturating_sub(1)
            .min(n - 1);
        if y == self.values[k] {
            return self.nodes[k];
        }
        if y == self.values[k + 1] {
            return self.nodes[k + 1];
        }
        let h = self.nodes[k + 1] - self.nodes[k];
        let (y0, y1, m0, m1) = (
            self.values[k],
            self.values[k + 1],
            self.slopes[k],
            self.slopes[k + 1],
        );
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = ((y - y0) / (y1 - y0)).clamp(0.0, 1.0);
        for _ in 0..100 {
            let r = hermite(t, h, y0, y1, m0, m1) - y;
            if r == 0.0 {
                break;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d00 = 6.0 * t * t - 6.0 * t;
            let d10 = 3.0 * t * t - 4.0 * t + 1.0;
            let d11 = 3.0 * t * t - 2.0 * t;
            let dr = d00 * (y0 - y1) + h * (d10 * m0 + d11 * m1);
            let mut next = t - r / dr;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-17 || hi - lo <= f64::EPSILON * 0.5 {
                t = next;
                break;
            }
            t = next;
        }
        self.nodes[k] + t * h
    }

    /// CSV with header `x,value,slope`, one row per stored node.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value", "slope"])?;
        let slopes: Vec<f64> = match self.orientation {
            Orientation::Forward => self.slopes.clone(),
            Orientation::Inverse => self.slopes.iter().map(|m| 1.0 / m).collect(),
        };
        for ((x, v), m) in self.nodes().iter().zip(self.values()).zip(&slopes) {
            w.write_record([format!("{x:e}"), format!("{v:e}"), format!("{m:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Self::write_csv`]; the upper tail is refitted with `rule`.
    pub fn read_csv<R: Read>(input: R, rule: TailRule) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let (mut xs, mut vs, mut ms) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("bad grid CSV row: {rec:?}")))
            };
            xs.push(num(0)?);
            vs.push(num(1)?);
            ms.push(num(2)?);
        }
        Self::with_rule(xs, vs, ms, rule)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[inline]
fn hermite(t: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64) -> f64 {
    let s = 1.0 - t;
    let h00 = (1.0 + 2.0 * t) * s * s;
    let h10 = t * s * s;
    let h01 = t * t * (3.0 - 2.0 * t);
    let h11 = -t * t * s;
    h00 * y0 + h01 * y1 + h * (h10 * m0 + h11 * m1)
}

/// Fritsch–Carlson limiter: shrinks slopes only where monotonicity of the
/// interpolant would otherwise fail.
fn limit_slopes(x: &[f64], y: &[f64], m: &mut [f64]) {
    for k in 0..x.len() - 1 {
        let d = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
        let (a, b) = (m[k] / d, m[k + 1] / d);
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m[k] = tau * a * d;
            m[k + 1] = tau * b * d;
        }
    }
}

/// `0` followed by a geometric sequence from `first` to `top` with
/// `per_decade` points per decade; `top` is always the last node.
pub fn geometric_nodes(first: f64, top: f64, per_decade: usize) -> Vec<f64> {
    let decades = (top / first).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    let ratio = (top / first).ln() / n as f64;
    let mut v = Vec::with_capacity(n + 2);
    v.push(0.0);
    for k in 0..n {
        v.push(first * (ratio * k as f64).exp());
    }
    v.push(top);
    v
}

/// Merges extra break points in `(0, top)` into a sorted node set.
pub fn with_breaks(mut nodes: Vec<f64>, breaks: &[f64]) -> Vec<f64> {
    let top = *nodes.last().unwrap();
    nodes.extend(
        breaks
            .iter()
            .copied()
            .filter(|&b| b > 0.0 && b < top && b.is_finite()),
    );
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    nodes
}
