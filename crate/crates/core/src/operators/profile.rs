use serde::{Deserialize, Serialize};

use super::{index_limits, IndexValue, Operand, Operators, Verdict};
use crate::calculus::{compute_w, compute_w_psi};
use crate::error::{Error, Result};
use crate::grid::{geometric_nodes, with_breaks, GridFn, TailRule};
use crate::quad::linear_fit;
use crate::weights::Family;

/// Fitted against predicted growth exponent of `ln x - ln g_{η,k}(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub alpha: f64,
    pub eta: f64,
    pub k: u32,
    /// `(k - 1)(1/α - 1)`.
    pub predicted: f64,
    pub fitted: Option<f64>,
    /// Relative error, or absolute error when the prediction is 0.
    pub error: Option<f64>,
    /// The two-sided estimate only applies when the predicted exponent is below 1.
    pub precondition_holds: bool,
    pub verdict: Verdict,
}

impl SandwichReport {
    pub fn within(&self, tol: f64) -> bool {
        self.error.is_some_and(|e| e <= tol)
    }
}

/// Checks on `f_η` at the hull top `X`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FCheck {
    pub a_dominates: bool,
    /// `f(X) / X`, must be at most 0.05.
    pub b_ratio: f64,
    /// `(W - W_f)(X) / ℓ(X)`, must be at most 0.1.
    pub c_ratio: f64,
    pub d_increasing: bool,
    pub d_top: f64,
    pub d_mid: f64,
}

impl FCheck {
    pub fn b(&self) -> bool {
        self.b_ratio <= 0.05
    }

    pub fn c(&self) -> bool {
        self.c_ratio <= 0.1
    }

    pub fn d(&self) -> bool {
        self.d_increasing && self.d_top > self.d_mid
    }

    pub fn all(&self) -> bool {
        self.a_dominates && self.b() && self.c() && self.d()
    }
}

/// The comparison function `f_η` of the walk `X̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FEta {
    pub eta: f64,
    pub hull: f64,
    pub f: GridFn,
    /// False when the correction term was dropped and `f = Φ_{η,2}`.
    pub corrected: bool,
    pub check: FCheck,
}

fn correction(x: f64) -> f64 {
    let l = 1.0 + x.ln_1p();
    x / (l * l)
}

fn correction_slope(x: f64) -> f64 {
    let l = 1.0 + x.ln_1p();
    1.0 / (l * l) - 2.0 * x / (l * l * l * (1.0 + x))
}

impl Operators {
    /// Fits the exponent `e` in `ln x - ln g_{η,k}(x) ≈ c (ln x)^e` over the top two
    /// decades of the W-grid and compares with `(k - 1)(1/α - 1)`.
    pub fn growth_sandwich_check(&self, eta: f64, k: u32) -> Result<SandwichReport> {
        let alpha = match self.spec().family {
            Family::PolyLog { alpha } => alpha,
            _ => {
                return Err(Error::InvalidArgument(
                    "growth sandwich applies to polylog weights".into(),
                ))
            }
        };
        if k == 0 {
            return Err(Error::InvalidArgument("k starts at 1".into()));
        }
        let mut g = self.scaled_identity(eta);
        for _ in 1..k {
            g = self.apply_g(Operand::Grid(&g))?;
        }
        let verdict = super::classify_tail(&g, &self.config().thresholds).verdict;
        let top = g.last_node();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (&x, &v) in g.nodes().iter().zip(g.values()) {
            if x >= top / 100.0 {
                let gap = x.ln() - v.ln();
                if gap > 0.0 {
                    xs.push(x.ln().ln());
                    ys.push(gap.ln());
                }
            }
        }
        let predicted = (k - 1) as f64 * (1.0 / alpha - 1.0);
        let fitted = linear_fit(&xs, &ys).map(|(s, _)| s);
        let error = fitted.map(|f| {
            if predicted == 0.0 {
                f.abs()
            } else {
                ((f - predicted) / predicted).abs()
            }
        });
        Ok(SandwichReport {
            alpha,
            eta,
            k,
            predicted,
            fitted,
            error,
            precondition_holds: predicted < 1.0,
            verdict,
        })
    }

    /// `Ψ_{½,1}, …, Ψ_{½,i_max}` on the x grid, where `Ψ_{½,1}(x) = x/4` and
    /// `Ψ_{½,i} = Φ_{½,i} ∘ Ψ_{½,i-1}`.
    pub fn psi_profile(&self, i_max: u32) -> Result<Vec<GridFn>> {
        if i_max == 0 {
            return Err(Error::InvalidArgument("i_max starts at 1".into()));
        }
        let fam = self.phi_family(0.5)?;
        for i in 1..=i_max {
            match fam.get(i as usize - 1) {
                Some(l) if l.tail.verdict == Verdict::Unbounded => {}
                _ => {
                    return Err(Error::Precondition(format!(
                        "Φ_{{1/2,{i}}} is not unbounded; i_max exceeds the index of {}",
                        self.spec()
                    )))
                }
            }
        }
        let x = self.x_nodes().to_vec();
        let first = GridFn::with_rule(
            x.clone(),
            x.iter().map(|v| v / 4.0).collect(),
            vec![0.25; x.len()],
            TailRule::Linear,
        )?;
        let mut out = vec![first];
        for level in fam.iter().take(i_max as usize).skip(1) {
            let prev = out.last().unwrap();
            let (mut values, mut slopes) =
                (Vec::with_capacity(x.len()), Vec::with_capacity(x.len()));
            for (&xi, &p) in x.iter().zip(prev.values()) {
                values.push(level.view.eval(p));
                slopes.push(level.view.derivative(p) * prev.derivative(xi));
            }
            out.push(GridFn::with_rule(
                x.clone(),
                values,
                slopes,
                TailRule::Power,
            )?);
        }
        Ok(out)
    }

    /// Builds `f_η = Φ_{η,2} + x/(1+ln(1+x))²` on `[0, hull]` and verifies the
    /// finite-hull versions of its four required properties. Falls back to
    /// `f_η = Φ_{η,2}` when the corrected candidate fails and the plain one
    /// passes (c) and (d); a corrected candidate failing only (b) is kept last.
    pub fn build_f_eta(&self, eta: f64, hull: f64) -> Result<FEta> {
        if !(eta > 0.5 && eta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "f_eta needs eta in (1/2, 1), got {eta}"
            )));
        }
        let spec = self.spec();
        let mut breaks = spec.kinks();
        breaks.extend(spec.kinks().iter().map(|k| eta * k));
        let nodes = with_breaks(
            geometric_nodes(
                1e-3f64.min(hull / 10.0),
                hull,
                self.config().x_nodes_per_decade,
            ),
            &breaks,
        );
        let w = compute_w(spec, hull, self.config().x_nodes_per_decade)?;
        let phi2 = |x: f64| self.phi_two_closed(eta, x);
        let phi2_slope = |x: f64| {
            if x == 0.0 {
                1.0
            } else {
                spec.w(phi2(x)) / spec.w(x / eta)
            }
        };
        let candidate = |with_h: bool| -> Result<(GridFn, FCheck)> {
            let h = |x: f64| if with_h { correction(x) } else { 0.0 };
            let dh = |x: f64| if with_h { correction_slope(x) } else { 0.0 };
            let f = GridFn::from_fn(
                nodes.clone(),
                |x| phi2(x) + h(x),
                |x| phi2_slope(x) + dh(x),
                TailRule::Power,
            )?;
            let wf = compute_w_psi(spec, &|u| f.eval(u), hull, self.config().x_nodes_per_decade)?;
            let d: Vec<f64> = w
                .values()
                .iter()
                .zip(wf.values())
                .map(|(a, b)| a - b)
                .collect();
            let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let d_increasing = d.windows(2).all(|p| p[1] >= p[0] - 1e-12 * scale);
            let dfun = GridFn::with_rule(
                w.nodes().to_vec(),
                d.clone(),
                vec![0.0; d.len()],
                TailRule::Constant,
            );
            let d_mid = match dfun {
                Ok(g) => g.eval(hull.sqrt()),
                Err(_) => f64::NAN,
            };
            let check = FCheck {
                a_dominates: nodes.iter().all(|&x| f.eval(x) >= phi2(x)),
                b_ratio: f.eval(hull) / hull,
                c_ratio: d.last().unwrap() / spec.eval_ell(hull)?,
                d_increasing,
                d_top: *d.last().unwrap(),
                d_mid,
            };
            Ok((f, check))
        };
        let (f, check) = candidate(true)?;
        if check.all() {
            return Ok(FEta {
                eta,
                hull,
                f,
                corrected: true,
                check,
            });
        }
        let (f0, check0) = candidate(false)?;
        if check0.c() && check0.d() {
            log::warn!("f_eta for {spec} at eta = {eta}: correction term rejected ({check:?}); using Φ_(eta,2) alone");
            return Ok(FEta {
                eta,
                hull,
                f: f0,
                corrected: false,
                check: check0,
            });
        }
        if check.c() && check.d() {
            log::warn!("f_eta for {spec} at eta = {eta}: growth check (b) fails ({check:?}); keeping the correction term");
            return Ok(FEta {
                eta,
                hull,
                f,
                corrected: true,
                check,
            });
        }
        Err(Error::CheckFailed(format!(
            "no f_eta candidate for {spec} at eta = {eta}, hull {hull:e}: corrected {check:?}; plain {check0:?}"
        )))
    }

    /// Largest `ε = 2⁻ᵏ`, `k ≥ 3`, with `i_{½+3ε} = i₊`.
    pub fn choose_epsilon(&self) -> Result<f64> {
        let report = index_limits(self, 0.05, 5)?;
        let target = match report.i_plus {
            IndexValue::Finite(n) => n,
            other => {
                return Err(Error::Precondition(format!(
                    "i+ of {} is {other}; no epsilon exists",
                    self.spec()
                )))
            }
        };
        for k in 3..=20 {
            let eps = 0.5f64.powi(k);
            if self.g_iteration(0.5 + 3.0 * eps)?.index == IndexValue::Finite(target) {
                return Ok(eps);
            }
        }
        Err(Error::CheckFailed(format!(
            "no epsilon down to 2^-20 reproduces i+ = {target}"
        )))
    }
}
