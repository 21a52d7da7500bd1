//! The primitive `W(x) = ∫₀ˣ du / w(u)`, its perturbations and inverse.
//!
//! Two representations are kept. [`compute_w`] tabulates `W` on an x-space
//! grid for moderate hulls. [`WCoords`] tabulates `ln W` against `ln x`, which
//! reaches primitive values near the top of the f64 range and is what the
//! operator iterations run on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{geometric_nodes, with_breaks, GridFn, Tail, TailRule};
use crate::quad::simpson;
use crate::weights::WeightSpec;

/// Relative tolerance of each cell quadrature.
const CELL_TOL: f64 = 1e-13;

fn first_positive_node(x_max: f64) -> f64 {
    (1e-3f64).min(x_max / 10.0)
}

fn check_hull(spec: &WeightSpec, x_max: f64, per_decade: usize) -> Result<()> {
    if !(x_max.is_finite() && x_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hull must be finite and positive, got {x_max}"
        )));
    }
    if per_decade == 0 {
        return Err(Error::InvalidArgument(
            "nodes per decade must be positive".into(),
        ));
    }
    if x_max > spec.domain_top() {
        return Err(Error::OutsideTable {
            x: x_max,
            lo: spec.domain_floor,
            hi: spec.domain_top(),
        });
    }
    Ok(())
}

/// `W` on `[0, x_max]` with `per_decade` geometric nodes per decade above `1e-3`.
pub fn compute_w(spec: &WeightSpec, x_max: f64, per_decade: usize) -> Result<GridFn> {
    compute_w_psi(spec, &|_| 0.0, x_max, per_decade)
}

/// `W_ψ(x) = ∫₀ˣ du / w(u + ψ(u))` for a non-negative perturbation `ψ`.
/// With `ψ ≡ 0` this runs the same quadrature as [`compute_w`].
pub fn compute_w_psi(
    spec: &WeightSpec,
    psi: &dyn Fn(f64) -> f64,
    x_max: f64,
    per_decade: usize,
) -> Result<GridFn> {
    check_hull(spec, x_max, per_decade)?;
    let nodes = with_breaks(
        geometric_nodes(first_positive_node(x_max), x_max, per_decade),
        &spec.kinks(),
    );
    for &x in &nodes {
        let p = psi(x);
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "perturbation psi({x}) = {p} must be finite and >= 0"
            )));
        }
        if x + p > spec.domain_top() {
            return Err(Error::OutsideTable {
                x: x + p,
                lo: spec.domain_floor,
                hi: spec.domain_top(),
            });
        }
    }
    let integrand = |u: f64| 1.0 / spec.w(u + psi(u));
    let mut values = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    values.push(0.0);
    for c in nodes.windows(2) {
        let v = simpson(&integrand, c[0], c[1], CELL_TOL)
            .ok_or(Error::Quadrature { lo: c[0], hi: c[1] })?;
        if v.is_sign_negative() {
            return Err(Error::InvalidArgument(format!(
                "perturbation went negative on [{}, {}]",
                c[0], c[1]
            )));
        }
        acc += v;
        values.push(acc);
    }
    let slopes = nodes.iter().map(|&u| integrand(u)).collect();
    GridFn::with_rule(nodes, values, slopes, TailRule::LinearInLog)
}

/// `W⁻¹` as an inverse view of a tabulated `W`.
pub fn invert_w(w: &GridFn) -> Result<GridFn> {
    if !w.is_monotone() {
        return Err(Error::NotMonotone(
            "W is not strictly increasing on its grid".into(),
        ));
    }
    w.inverse()
}

/// Build parameters of [`WCoords`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WCoordsConfig {
    /// Largest primitive value that must be representable.
    pub w_hull: f64,
    /// Smallest `x` of the table; below it `W(x) ≈ x / w(0)` is used.
    pub x_min: f64,
    /// Log-spacing parameter: each cell changes `ln W` or `ln x` by at most `step`.
    pub step: f64,
}

impl Default for WCoordsConfig {
    fn default() -> Self {
        Self {
            w_hull: 1e300,
            x_min: 1e-12,
            step: std::f64::consts::LN_10 / 256.0,
        }
    }
}

/// `ln W` tabulated against `s = ln x`.
#[derive(Clone, Debug)]
pub struct WCoords {
    spec: WeightSpec,
    cfg: WCoordsConfig,
    table: GridFn,
    ln_w0: f64,
}

impl WCoords {
    pub fn new(spec: &WeightSpec, cfg: WCoordsConfig) -> Result<Self> {
        if !(cfg.w_hull > 1.0 && cfg.w_hull.is_finite() && cfg.w_hull < 1e305) {
            return Err(Error::InvalidArgument(format!(
                "w_hull must lie in (1, 1e305), got {}",
                cfg.w_hull
            )));
        }
        if !(cfg.step > 0.0 && cfg.x_min > 0.0) {
            return Err(Error::InvalidArgument(
                "step and x_min must be positive".into(),
            ));
        }
        let target = cfg.w_hull.ln() + 0.5;
        let mut s = cfg.x_min.ln();
        let x0 = cfg.x_min;
        let w0 = simpson(&|u: f64| 1.0 / spec.w(u), 0.0, x0, CELL_TOL)
            .ok_or(Error::Quadrature { lo: 0.0, hi: x0 })?;
        let mut ln_w = w0.ln();
        let dlog = |s: f64, ln_w: f64| (s - spec.log_w_at_log(s) - ln_w).exp();
        let kinks: Vec<f64> = spec.kinks().iter().map(|k| k.ln()).collect();
        let (mut ss, mut ls, mut ds) = (vec![s], vec![ln_w], vec![dlog(s, ln_w)]);
        while ln_w < target {
            if s.exp() > spec.domain_top() {
                return Err(Error::OutsideTable {
                    x: s.exp(),
                    lo: spec.domain_floor,
                    hi: spec.domain_top(),
                });
            }
            if s > 1e307 || ss.len() > 5_000_000 {
                return Err(Error::BoundedPrimitive {
                    weight: spec.to_string(),
                    x: s.exp(),
                    value: ln_w.exp(),
                });
            }
            let d = *ds.last().unwrap();
            let mut h = (cfg.step * s.abs().max(1.0)).min(cfg.step / d.max(1e-300));
            if let Some(&k) = kinks.iter().find(|&&k| k > s + 1e-9 && k < s + h) {
                h = k - s;
            }
            let base = ln_w;
            let f = |t: f64| (t - spec.log_w_at_log(t) - base).exp();
            let inc = loop {
                match simpson(&f, s, s + h, CELL_TOL) {
                    Some(v) if v.ln_1p() <= 4.0 * cfg.step || h <= 1e-9 => break v,
                    Some(_) => h *= 0.5,
                    None => return Err(Error::Quadrature { lo: s, hi: s + h }),
                }
            };
            s += h;
            ln_w = base + inc.ln_1p();
            ss.push(s);
            ls.push(ln_w);
            ds.push(dlog(s, ln_w));
        }
        let n = ss.len() - 1;
        let lo = Tail::Linear {
            a: ls[0] - ds[0] * ss[0],
            b: ds[0],
        };
        let hi = Tail::fit(TailRule::Linear, ss[n], ls[n], ds[n]);
        let table = GridFn::new(ss, ls, ds, lo, hi)?;
        if !table.is_monotone() {
            return Err(Error::NotMonotone("ln W table".into()));
        }
        Ok(Self {
            spec: spec.clone(),
            cfg,
            table,
            ln_w0: spec.w(0.0).ln(),
        })
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn config(&self) -> WCoordsConfig {
        self.cfg
    }

    pub fn w_hull(&self) -> f64 {
        self.cfg.w_hull
    }

    /// Number of table cells.
    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    /// `ln W(e^s)`.
    pub fn ln_big_w_at_log(&self, s: f64) -> f64 {
        self.table.eval(s)
    }

    /// `W(x)`.
    pub fn big_w(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.table.eval(x.ln()).exp()
    }

    /// `ln W⁻¹(u)`; `-∞` at `u = 0`.
    pub fn log_inv(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.table
            .inverse_eval(u.ln())
            .expect("ln W table is monotone")
    }

    /// `W⁻¹(u)`, possibly `+∞` when it exceeds the f64 range.
    pub fn inv(&self, u: f64) -> f64 {
        self.log_inv(u).exp()
    }

    /// `ω(s) = ln w(e^s)`, with `ω(-∞) = ln w(0)`.
    #[inline]
    pub fn omega(&self, s: f64) -> f64 {
        if s == f64::NEG_INFINITY {
            self.ln_w0
        } else {
            self.spec.log_w_at_log(s)
        }
    }

    /// `λ(u) = ln w(W⁻¹(u))`.
    pub fn lambda(&self, u: f64) -> f64 {
        self.omega(self.log_inv(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn linear_closed_forms() {
        let spec = WeightSpec::linear(1.0).unwrap();
        // between nodes the Hermite error scales like (nodes per decade)^-4
        let w = compute_w(&spec, 1e12, 256).unwrap();
        let e = std::f64::consts::E;
        assert!((w.eval(1.0) - std::f64::consts::LN_2).abs() < 1e-10);
        assert!((w.eval(e - 1.0) - 1.0).abs() < 1e-10);
        let inv = invert_w(&w).unwrap();
        assert!((inv.eval(1.0) - (e - 1.0)).abs() < 1e-10);
        for &x in w.nodes() {
            assert!(
                (w.eval(x) - x.ln_1p()).abs() <= 1e-11 * x.ln_1p().max(1.0),
                "x={x}"
            );
        }
    }

    #[test]
    fn polylog_flat_region() {
        let spec = WeightSpec::polylog(0.6).unwrap();
        let w = compute_w(&spec, 1e9, 32).unwrap();
        assert!((w.eval(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_on_hull() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for spec in [
            WeightSpec::linear(1.0).unwrap(),
            WeightSpec::polylog(0.6).unwrap(),
            WeightSpec::critical(),
        ] {
            let w = compute_w(&spec, 1e12, 32).unwrap();
            let inv = invert_w(&w).unwrap();
            for _ in 0..100 {
                let x = 10f64.powf(rng.random_range(-3.0..12.0));
                assert!(
                    (inv.eval(w.eval(x)) / x - 1.0).abs() <= 1e-9,
                    "{spec} x={x}"
                );
            }
        }
    }

    #[test]
    fn refinement_is_stable() {
        for spec in [
            WeightSpec::linear(1.0).unwrap(),
            WeightSpec::polylog(0.6).unwrap(),
            WeightSpec::critical(),
        ] {
            let a = compute_w(&spec, 1e12, 16).unwrap().last_value();
            let b = compute_w(&spec, 1e12, 32).unwrap().last_value();
            assert!((a / b - 1.0).abs() <= 1e-8, "{spec}: {a} vs {b}");
        }
    }

    #[test]
    fn perturbed_primitive() {
        let spec = WeightSpec::linear(1.0).unwrap();
        let w1 = compute_w_psi(&spec, &|u| u, 1e12, 256).unwrap();
        for &x in &[0.5, 3.0, 1e4, 1e11] {
            assert!((w1.eval(x) - 0.5 * (2.0 * x).ln_1p()).abs() < 1e-10);
        }
        let w = compute_w(&spec, 1e12, 32).unwrap();
        let w0 = compute_w_psi(&spec, &|_| 0.0, 1e12, 32).unwrap();
        assert_eq!(w, w0);
        let eps = 0.1;
        for spec in [
            WeightSpec::linear(1.0).unwrap(),
            WeightSpec::polylog(0.6).unwrap(),
        ] {
            let w = compute_w(&spec, 1e12, 32).unwrap();
            let we = compute_w_psi(&spec, &|u| eps * u, 1e12, 32).unwrap();
            let r = (1.0 + eps) * we.last_value() / w.last_value();
            assert!((r - 1.0).abs() < 0.02, "{spec}: {r}");
        }
        assert!(compute_w_psi(&spec, &|u| -u, 10.0, 8).is_err());
    }

    #[test]
    fn table_weight_outside_hull() {
        let t = WeightSpec::tabulated("t", vec![0.0, 100.0], vec![1.0, 101.0]).unwrap();
        assert!(matches!(
            compute_w(&t, 1e3, 8),
            Err(Error::OutsideTable { .. })
        ));
        let w = compute_w(&t, 100.0, 32).unwrap();
        assert!((w.eval(100.0) - 101f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn coordinates_agree_with_direct_grid() {
        for spec in [
            WeightSpec::linear(1.0).unwrap(),
            WeightSpec::polylog(0.4).unwrap(),
            WeightSpec::critical(),
        ] {
            let c = WCoords::new(&spec, WCoordsConfig::default()).unwrap();
            let w = compute_w(&spec, 1e12, 32).unwrap();
            for &x in w.nodes().iter().skip(1).step_by(7) {
                let (a, b) = (c.big_w(x), w.eval(x));
                assert!((a / b - 1.0).abs() < 1e-9, "{spec} x={x}: {a} vs {b}");
                // inversion is ill-conditioned in x, so compare back in W
                assert!(
                    (c.big_w(c.inv(b)) / b - 1.0).abs() < 1e-9,
                    "{spec} inverse at x={x}"
                );
            }
        }
    }

    #[test]
    fn coordinates_reach_the_hull() {
        let spec = WeightSpec::linear(1.0).unwrap();
        let c = WCoords::new(&spec, WCoordsConfig::default()).unwrap();
        // W⁻¹(u) = e^u - 1, so ln W⁻¹(u) ≈ u for large u
        assert!((c.log_inv(1e300) / 1e300 - 1.0).abs() < 1e-9);
        assert!((c.lambda(500.0) - 500.0).abs() < 1e-7);
        assert_eq!(c.lambda(0.0), 0.0);
    }

    #[test]
    fn bounded_primitive_rejected() {
        let spec = WeightSpec::power(2.0).unwrap();
        assert!(matches!(
            WCoords::new(&spec, WCoordsConfig::default()),
            Err(Error::BoundedPrimitive { .. })
        ));
    }
}
