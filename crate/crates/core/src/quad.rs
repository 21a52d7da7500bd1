//! Small quadrature kit shared by the calculus and operator modules.

/// Eight-point Gauss–Legendre abscissae on `[0, 1]` with matching weights summing to 1.
pub(crate) const GL8_T: [f64; 8] = [
    0.019855071751231856,
    0.10166676129318664,
    0.2372337950418355,
    0.4082826787521751,
    0.591_717_321_247_825,
    0.7627662049581645,
    0.8983332387068134,
    0.9801449282487681,
];

pub(crate) const GL8_W: [f64; 8] = [
    0.05061426814518813,
    0.11119051722668724,
    0.15685332293894363,
    0.181_341_891_689_181,
    0.181_341_891_689_181,
    0.15685332293894363,
    0.11119051722668724,
    0.05061426814518813,
];

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson on `[a, b]` to relative tolerance `rel`. `None` if the
/// recursion depth is exhausted or the integrand is not finite.
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel: f64) -> Option<f64> {
    if a == b {
        return Some(0.0);
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let floor = whole.abs() * rel;
    let v = step(f, a, b, fa, fm, fb, whole, rel, floor * 1e-3, MAX_DEPTH)?;
    v.is_finite().then_some(v)
}

#[allow(clippy::too_many_arguments)]
fn step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    rel: f64,
    abs_floor: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    if !(flm.is_finite() && frm.is_finite()) {
        return None;
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let both = left + right;
    let err = both - whole;
    if err.abs() <= 15.0 * (rel * both.abs()).max(abs_floor) || (m - a) <= f64::EPSILON * m.abs() {
        return Some(both + err / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        step(f, a, m, fa, flm, fm, left, rel, abs_floor, depth - 1)?
            + step(f, m, b, fm, frm, fb, right, rel, abs_floor, depth - 1)?,
    )
}

#[cfg(test)]
/// Gauss–Legendre rule on `[a, b]`.
pub(crate) fn gl8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let h = b - a;
    let mut acc = 0.0;
    for (t, w) in GL8_T.iter().zip(GL8_W.iter()) {
        acc += w * f(a + t * h);
    }
    acc * h
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
