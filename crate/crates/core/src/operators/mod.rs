//! The operators `G` and `H`, their iterates, and the localization indexes.
//!
//! Iterations run in W-coordinates: with `λ(u) = ln w(W⁻¹(u))` the operator
//! `G` becomes `G(f)(u) = ∫₀ᵘ exp(λ(f(v)) - λ(v)) dv`, which stays finite
//! where `W⁻¹` itself would overflow.

mod index;
mod profile;
mod tail;

pub use index::{
    index_limits, index_sweep, EtaEvidence, IndexReport, IndexValue, Iteration, PhiLevel,
};
pub use profile::{FCheck, FEta, SandwichReport};
pub use tail::{classify_tail, TailClass, TailThresholds, Verdict};

use serde::{Deserialize, Serialize};

use crate::calculus::{WCoords, WCoordsConfig};
use crate::error::{Error, Result};
use crate::grid::{geometric_nodes, with_breaks, GridFn, TailRule};
use crate::quad::{GL8_T, GL8_W};
use crate::weights::WeightSpec;

const LAMBDA_RESOLVED: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    /// Top of the W-coordinate grid.
    pub w_hull: f64,
    /// First positive W-coordinate node.
    pub u_min: f64,
    pub nodes_per_decade: usize,
    /// Top of x-space grids (Φ views, Ψ, H).
    pub x_hull: f64,
    pub x_nodes_per_decade: usize,
    /// Hull on which the hat walk's `f_η` is verified.
    pub f_hull: f64,
    /// Largest iterate index examined before reporting an infinite index.
    pub max_level: u32,
    pub thresholds: TailThresholds,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            w_hull: 1e300,
            u_min: 1e-6,
            nodes_per_decade: 32,
            x_hull: 1e12,
            x_nodes_per_decade: 32,
            f_hull: 1e50,
            max_level: 8,
            thresholds: TailThresholds::default(),
        }
    }
}

/// Argument of an operator: either `c·Id` in closed form or a tabulated function.
#[derive(Clone, Copy, Debug)]
pub enum Operand<'a> {
    Scaled(f64),
    Grid(&'a GridFn),
}

impl Operand<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Operand::Scaled(c) => c * x,
            Operand::Grid(g) => g.eval(x),
        }
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        match self {
            Operand::Scaled(c) => Ok(y / c),
            Operand::Grid(g) => g.inverse_eval(y),
        }
    }
}

/// Precomputed W-coordinate grid for one weight.
#[derive(Clone, Debug)]
pub struct Operators {
    spec: WeightSpec,
    cfg: OperatorConfig,
    coords: WCoords,
    u: Vec<f64>,
    lam_nodes: Vec<f64>,
    s_nodes: Vec<f64>,
    gl_u: Vec<f64>,
    lam_gl: Vec<f64>,
    s_gl: Vec<f64>,
    x: Vec<f64>,
}

impl Operators {
    pub fn new(spec: &WeightSpec, cfg: OperatorConfig) -> Result<Self> {
        if !(cfg.u_min > 0.0 && cfg.u_min < cfg.w_hull) || cfg.nodes_per_decade == 0 {
            return Err(Error::InvalidArgument(
                "need 0 < u_min < w_hull and nodes_per_decade > 0".into(),
            ));
        }
        if cfg.max_level < 3 {
            return Err(Error::InvalidArgument(
                "max_level must be at least 3".into(),
            ));
        }
        let coords = WCoords::new(
            spec,
            WCoordsConfig {
                w_hull: cfg.w_hull,
                ..WCoordsConfig::default()
            },
        )?;
        let kinks: Vec<f64> = spec.kinks().iter().map(|&k| coords.big_w(k)).collect();
        let u = with_breaks(
            geometric_nodes(cfg.u_min, cfg.w_hull, cfg.nodes_per_decade),
            &kinks,
        );
        let s_nodes: Vec<f64> = u.iter().map(|&v| coords.log_inv(v)).collect();
        let lam_nodes = s_nodes.iter().map(|&s| coords.omega(s)).collect();
        let mut gl_u = Vec::with_capacity(8 * u.len());
        for c in u.windows(2) {
            for t in GL8_T {
                gl_u.push(c[0] + t * (c[1] - c[0]));
            }
        }
        let s_gl: Vec<f64> = gl_u.iter().map(|&v| coords.log_inv(v)).collect();
        let lam_gl = s_gl.iter().map(|&s| coords.omega(s)).collect();
        let x_top = cfg.x_hull.min(spec.domain_top());
        let x = with_breaks(
            geometric_nodes(1e-3f64.min(x_top / 10.0), x_top, cfg.x_nodes_per_decade),
            &spec.kinks(),
        );
        Ok(Self {
            spec: spec.clone(),
            cfg,
            coords,
            u,
            lam_nodes,
            s_nodes,
            gl_u,
            lam_gl,
            s_gl,
            x,
        })
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.cfg
    }

    pub fn coords(&self) -> &WCoords {
        &self.coords
    }

    /// W-coordinate nodes.
    pub fn u_nodes(&self) -> &[f64] {
        &self.u
    }

    /// x-space nodes used by views and profiles.
    pub fn x_nodes(&self) -> &[f64] {
        &self.x
    }

    /// `c·Id` on the W-coordinate grid.
    pub fn scaled_identity(&self, c: f64) -> GridFn {
        let vals = self.u.iter().map(|&v| c * v).collect();
        GridFn::with_rule(
            self.u.clone(),
            vals,
            vec![c; self.u.len()],
            TailRule::Linear,
        )
        .expect("valid grid")
    }

    /// Cumulative integral over the W-grid of `scale · exp(a(v) - b(v))`, where
    /// `a` is evaluated at each point and `b` is read from precomputed arrays.
    /// Node values stay exactly equal to the nodes while every sample is 1.
    fn cumulative(
        &self,
        scale: f64,
        a: impl Fn(f64) -> f64,
        b_gl: &[f64],
        b_nodes: &[f64],
        rule: TailRule,
    ) -> Result<GridFn> {
        let mut values = Vec::with_capacity(self.u.len());
        values.push(0.0);
        let (mut acc, mut unit) = (0.0, scale == 1.0);
        for (c, cell) in self.u.windows(2).enumerate() {
            let mut sum = 0.0;
            for (i, wt) in GL8_W.iter().enumerate() {
                let k = 8 * c + i;
                let v = (a(self.gl_u[k]) - b_gl[k]).exp();
                unit &= v == 1.0;
                sum += wt * v;
            }
            acc += scale * sum * (cell[1] - cell[0]);
            values.push(if unit { cell[1] } else { acc });
        }
        let slopes = self
            .u
            .iter()
            .zip(b_nodes)
            .map(|(&v, &b)| scale * (a(v) - b).exp())
            .collect();
        GridFn::with_rule(self.u.clone(), values, slopes, rule)
    }

    /// `G(f)(x) = ∫₀ˣ w(W⁻¹(f(u))) / w(W⁻¹(u)) du` on the W-coordinate grid.
    pub fn apply_g(&self, f: Operand) -> Result<GridFn> {
        let coords = &self.coords;
        self.cumulative(
            1.0,
            |v| coords.lambda(f.eval(v)),
            &self.lam_gl,
            &self.lam_nodes,
            TailRule::Power,
        )
    }

    /// `h ↦ η ∫₀ˣ w(W⁻¹(h(u))) / w(η W⁻¹(u)) du`, the conjugate form of `H`.
    pub fn apply_hbar(&self, eta: f64, h: &GridFn) -> Result<GridFn> {
        let (mu_gl, mu_nodes) = self.mu(eta);
        let coords = &self.coords;
        self.cumulative(
            eta,
            |v| coords.lambda(h.eval(v)),
            &mu_gl,
            &mu_nodes,
            TailRule::Power,
        )
    }

    /// `μ(u) = ln w(η W⁻¹(u))` at the quadrature points and nodes.
    fn mu(&self, eta: f64) -> (Vec<f64>, Vec<f64>) {
        let le = eta.ln();
        let c = &self.coords;
        (
            self.s_gl.iter().map(|&s| c.omega(s + le)).collect(),
            self.s_nodes.iter().map(|&s| c.omega(s + le)).collect(),
        )
    }

    /// `φ_{η,1}(u) = W(η W⁻¹(u))`.
    pub fn phi_one(&self, eta: f64) -> Result<GridFn> {
        let le = eta.ln();
        let c = &self.coords;
        let breaks: Vec<f64> = self
            .spec
            .kinks()
            .iter()
            .map(|&k| c.big_w(k / eta))
            .filter(|&v| v < *self.u.last().unwrap())
            .collect();
        let nodes = with_breaks(self.u.clone(), &breaks);
        let (mut values, mut slopes) = (
            Vec::with_capacity(nodes.len()),
            Vec::with_capacity(nodes.len()),
        );
        for &v in &nodes {
            let s = c.log_inv(v);
            values.push(if v == 0.0 {
                0.0
            } else {
                c.ln_big_w_at_log(s + le).exp()
            });
            slopes.push(eta * (c.omega(s) - c.omega(s + le)).exp());
        }
        GridFn::with_rule(nodes, values, slopes, TailRule::Power)
    }

    /// `φ_{j+1}(z) = ∫₀ᶻ w(W⁻¹(z')) / w(W⁻¹(φ_j⁻¹(z'))) dz'` on the range of `φ_j`.
    pub fn phi_next(&self, phi: &GridFn) -> Result<GridFn> {
        let c = &self.coords;
        let top = phi.last_value();
        // past λ = 1e8 the shift between z and φ⁻¹(z) is below the float resolution
        let ok = |v: f64| c.lambda(v) <= LAMBDA_RESOLVED;
        let mut nodes: Vec<f64> = self
            .u
            .iter()
            .copied()
            .take_while(|&v| v < top && ok(v))
            .collect();
        if ok(top) {
            nodes.push(top);
        }
        let breaks: Vec<f64> = self
            .spec
            .kinks()
            .iter()
            .map(|&k| phi.eval(c.big_w(k)))
            .collect();
        let nodes = with_breaks(nodes, &breaks);
        if nodes.len() < 2 {
            return Err(Error::InvalidArgument("range of φ is degenerate".into()));
        }
        let integrand =
            |z: f64| -> Result<f64> { Ok((c.lambda(z) - c.lambda(phi.inverse_eval(z)?)).exp()) };
        let mut values = vec![0.0];
        let mut acc = 0.0;
        for cell in nodes.windows(2) {
            let mut sum = 0.0;
            for i in 0..8 {
                sum += GL8_W[i] * integrand(cell[0] + GL8_T[i] * (cell[1] - cell[0]))?;
            }
            acc += sum * (cell[1] - cell[0]);
            values.push(acc);
        }
        let slopes = nodes
            .iter()
            .map(|&z| integrand(z))
            .collect::<Result<Vec<_>>>()?;
        GridFn::with_rule(nodes, values, slopes, TailRule::Power)
    }

    /// The x-space function `W⁻¹ ∘ φ ∘ W` on the x grid.
    pub fn x_view(&self, phi: &GridFn, rule: TailRule) -> Result<GridFn> {
        let c = &self.coords;
        let mut values = Vec::with_capacity(self.x.len());
        let mut slopes = Vec::with_capacity(self.x.len());
        for &x in &self.x {
            let wx = c.big_w(x);
            let y = if x == 0.0 { 0.0 } else { c.inv(phi.eval(wx)) };
            values.push(y);
            slopes.push(self.spec.w(y) * phi.derivative(wx) / self.spec.w(x));
        }
        GridFn::with_rule(self.x.clone(), values, slopes, rule)
    }

    /// `H(f)(x) = W⁻¹(∫₀ˣ du / w(f⁻¹(u)))` in x-space. `f` must be unbounded
    /// and increasing.
    pub fn apply_h(&self, f: Operand) -> Result<GridFn> {
        let mut breaks = self.spec.kinks();
        match f {
            Operand::Scaled(c) if c > 0.0 && c.is_finite() => {}
            Operand::Scaled(c) => {
                return Err(Error::InvalidArgument(format!(
                    "H needs an unbounded increasing f, got {c}·Id"
                )))
            }
            Operand::Grid(g) => {
                if !g.is_monotone() || matches!(g.hi_tail(), crate::grid::Tail::Constant { .. }) {
                    return Err(Error::InvalidArgument(
                        "H needs an unbounded increasing f".into(),
                    ));
                }
            }
        }
        breaks.extend(self.spec.kinks().iter().map(|&k| f.eval(k)));
        let nodes = with_breaks(self.x.clone(), &breaks);
        let spec = &self.spec;
        let mut ints = vec![0.0];
        let mut acc = 0.0;
        for cell in nodes.windows(2) {
            let mut sum = 0.0;
            for i in 0..8 {
                let u = cell[0] + GL8_T[i] * (cell[1] - cell[0]);
                sum += GL8_W[i] / spec.w(f.inverse(u)?);
            }
            acc += sum * (cell[1] - cell[0]);
            ints.push(acc);
        }
        let c = &self.coords;
        let mut values = Vec::with_capacity(nodes.len());
        let mut slopes = Vec::with_capacity(nodes.len());
        for (&x, &i) in nodes.iter().zip(&ints) {
            let y = if i == 0.0 { 0.0 } else { c.inv(i) };
            values.push(y);
            slopes.push(spec.w(y) / spec.w(f.inverse(x)?));
        }
        GridFn::with_rule(nodes, values, slopes, TailRule::Power)
    }

    /// Closed form `Φ_{η,2}(x) = W⁻¹(η W(x/η))`.
    pub fn phi_two_closed(&self, eta: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let c = &self.coords;
        c.inv(eta * c.big_w(x / eta))
    }
}

/// Residuals of the exact operator identities at the grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub weight: String,
    /// Nodes where `G(Id)` differs from the node in any bit.
    pub g_mismatches: usize,
    /// Largest `|H(Id)(x)/x - 1|` over positive nodes.
    pub h_max_rel: f64,
    /// `(η, max |H(η·Id)(x) / W⁻¹(ηW(x/η)) - 1|)`.
    pub phi_two: Vec<(f64, f64)>,
}

impl IdentityCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.g_mismatches == 0
            && self.h_max_rel <= rel_tol
            && self.phi_two.iter().all(|p| p.1 <= rel_tol)
    }
}

impl Operators {
    pub fn identity_check(&self, etas: &[f64]) -> Result<IdentityCheck> {
        let g = self.apply_g(Operand::Scaled(1.0))?;
        let g_mismatches = g
            .nodes()
            .iter()
            .zip(g.values())
            .filter(|(x, v)| x.to_bits() != v.to_bits())
            .count();
        let max_rel = |f: &GridFn, truth: &dyn Fn(f64) -> f64| {
            f.nodes()
                .iter()
                .zip(f.values())
                .filter(|(x, _)| **x > 0.0)
                .fold(0.0f64, |m, (&x, &v)| m.max((v / truth(x) - 1.0).abs()))
        };
        let h_max_rel = max_rel(&self.apply_h(Operand::Scaled(1.0))?, &|x| x);
        let mut phi_two = Vec::with_capacity(etas.len());
        for &eta in etas {
            let p2 = self.apply_h(Operand::Scaled(eta))?;
            phi_two.push((eta, max_rel(&p2, &|x| self.phi_two_closed(eta, x))));
        }
        Ok(IdentityCheck {
            weight: self.spec.to_string(),
            g_mismatches,
            h_max_rel,
            phi_two,
        })
    }
}
