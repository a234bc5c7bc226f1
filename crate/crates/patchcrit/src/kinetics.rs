//! Between-season growth maps and within-season reaction kinetics.
//!
//! A season couples a discrete recruitment map `g` applied at the season
//! start with continuous kinetics `u' = f(u)` integrated over the unit
//! season. Both pieces fix the origin (`g(0) = 0`, `f(0) = 0`): an empty
//! habitat stays empty. Near zero each family is controlled by a quadratic
//! envelope
//!
//! ```text
//! g'(0) N - h_g(N) <= g(N) <= g'(0) N,      h_g(N) = c_g N^2,
//! f'(0) u - h_f(u) <= f(u) <= f'(0) u,      h_f(u) = c_f u^2,
//! ```
//!
//! which is what makes the linearisation at zero decisive for persistence.
//! The envelope coefficients `c_g`, `c_f` are exposed so callers can check
//! the sandwich themselves.
//!
//! In a nonspatial habitat the season map reduces to `N_{m+1} = u(1)` with
//! `u(0) = g(N_m)`; a positive fixed point `N*` solves
//!
//! ```text
//! integral from g(N*) to N* of  d(omega) / f(omega)  =  1,
//! ```
//!
//! which [`solve_equilibrium`] solves by adaptive quadrature inside a
//! bracketing root search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recruitment applied between seasons. All maps send 0 to 0 and are
/// parametrised so that the slope at the origin is the low-density
/// per-generation multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GrowthMap {
    /// `g(N) = b N`, `b > 0`.
    Linear { b: f64 },
    /// Ricker: `g(N) = N exp(r (1 - N))`, `r > 0`. Increasing only up to
    /// `N = 1/r`; overcompensatory beyond.
    Ricker { r: f64 },
    /// Beverton-Holt: `g(N) = (1 + lambda) N / (1 + lambda N)`, `lambda > 0`.
    BevertonHolt { lambda: f64 },
    /// Skellam: `g(N) = r (1 - exp(-b N))`, `r > 0`, `b > 0`; saturates at
    /// the ceiling `r`.
    Skellam { r: f64, b: f64 },
}

impl GrowthMap {
    pub fn linear(b: f64) -> Result<Self> {
        let g = GrowthMap::Linear { b };
        g.validate()?;
        Ok(g)
    }

    pub fn ricker(r: f64) -> Result<Self> {
        let g = GrowthMap::Ricker { r };
        g.validate()?;
        Ok(g)
    }

    pub fn beverton_holt(lambda: f64) -> Result<Self> {
        let g = GrowthMap::BevertonHolt { lambda };
        g.validate()?;
        Ok(g)
    }

    pub fn skellam(r: f64, b: f64) -> Result<Self> {
        let g = GrowthMap::Skellam { r, b };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            GrowthMap::Linear { b } => b > 0.0 && b.is_finite(),
            GrowthMap::Ricker { r } => r > 0.0 && r.is_finite(),
            GrowthMap::BevertonHolt { lambda } => lambda > 0.0 && lambda.is_finite(),
            GrowthMap::Skellam { r, b } => r > 0.0 && b > 0.0 && r.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "growth map parameters out of range: {self:?}"
            )))
        }
    }

    /// Recruitment from a parent density `n >= 0`.
    pub fn eval(&self, n: f64) -> Result<f64> {
        if !(n >= 0.0) {
            return Err(Error::NegativeDensity(n));
        }
        Ok(self.eval_raw(n))
    }

    /// The bare formula, no domain check. Used internally where `n >= 0` is
    /// already guaranteed, and by tests probing the analytic extension.
    #[inline]
    pub(crate) fn eval_raw(&self, n: f64) -> f64 {
        match *self {
            GrowthMap::Linear { b } => b * n,
            GrowthMap::Ricker { r } => n * (r * (1.0 - n)).exp(),
            GrowthMap::BevertonHolt { lambda } => (1.0 + lambda) * n / (1.0 + lambda * n),
            GrowthMap::Skellam { r, b } => r * (1.0 - (-b * n).exp()),
        }
    }

    /// `g'(0)`, the low-density per-generation multiplier.
    pub fn slope_at_zero(&self) -> f64 {
        match *self {
            GrowthMap::Linear { b } => b,
            GrowthMap::Ricker { r } => r.exp(),
            GrowthMap::BevertonHolt { lambda } => 1.0 + lambda,
            GrowthMap::Skellam { r, b } => r * b,
        }
    }

    /// Upper end of the interval on which the map is nondecreasing
    /// (`+inf` for the globally monotone families, `1/r` for Ricker).
    pub fn monotone_limit(&self) -> f64 {
        match *self {
            GrowthMap::Ricker { r } => 1.0 / r,
            _ => f64::INFINITY,
        }
    }

    /// Coefficient `c` of the quadratic envelope witness `h(N) = c N^2` with
    /// `g'(0) N - h(N) <= g(N) <= g'(0) N` for all `N >= 0`.
    pub fn envelope_coefficient(&self) -> f64 {
        match *self {
            GrowthMap::Linear { .. } => 0.0,
            GrowthMap::Ricker { r } => r * r.exp(),
            GrowthMap::BevertonHolt { lambda } => lambda * (1.0 + lambda),
            GrowthMap::Skellam { r, b } => 0.5 * r * b * b,
        }
    }
}

/// Within-season kinetics `u' = f(u)` with `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReactionTerm {
    /// `f(u) = r u (1 - u)`, `r > 0`.
    Logistic { r: f64 },
    /// `f(u) = b u` with `b != 0`; `b < 0` models within-season mortality.
    Linear { b: f64 },
    /// `f(u) = alpha u - beta u^2`, `alpha != 0`, `beta > 0`.
    Quadratic { alpha: f64, beta: f64 },
}

impl ReactionTerm {
    pub fn logistic(r: f64) -> Result<Self> {
        let f = ReactionTerm::Logistic { r };
        f.validate()?;
        Ok(f)
    }

    pub fn linear(b: f64) -> Result<Self> {
        let f = ReactionTerm::Linear { b };
        f.validate()?;
        Ok(f)
    }

    pub fn quadratic(alpha: f64, beta: f64) -> Result<Self> {
        let f = ReactionTerm::Quadratic { alpha, beta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ReactionTerm::Logistic { r } => r > 0.0 && r.is_finite(),
            ReactionTerm::Linear { b } => b != 0.0 && b.is_finite(),
            ReactionTerm::Quadratic { alpha, beta } => {
                alpha != 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "reaction parameters out of range: {self:?}"
            )))
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            ReactionTerm::Logistic { r } => r * u * (1.0 - u),
            ReactionTerm::Linear { b } => b * u,
            ReactionTerm::Quadratic { alpha, beta } => alpha * u - beta * u * u,
        }
    }

    /// `f'(0)`, the low-density growth rate.
    pub fn slope_at_zero(&self) -> f64 {
        match *self {
            ReactionTerm::Logistic { r } => r,
            ReactionTerm::Linear { b } => b,
            ReactionTerm::Quadratic { alpha, .. } => alpha,
        }
    }

    /// Coefficient `c` of the envelope witness `h(u) = c u^2` with
    /// `f'(0) u - h(u) <= f(u) <= f'(0) u` for all `u >= 0`.
    pub fn envelope_coefficient(&self) -> f64 {
        match *self {
            ReactionTerm::Logistic { r } => r,
            ReactionTerm::Linear { .. } => 0.0,
            ReactionTerm::Quadratic { beta, .. } => beta,
        }
    }
}

/// Outcome of the low-density viability test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viability {
    /// `exp(f'(0)) g'(0) > 1`, i.e. a nonspatial population grows at low
    /// density.
    pub viable: bool,
    /// `f'(0) + ln g'(0)`; spatial persistence compares this margin against
    /// the principal eigenvalue of the dispersal operator.
    pub margin: f64,
}

/// Low-density viability of the composed season map, ignoring space.
pub fn check_viability(f: &ReactionTerm, g: &GrowthMap) -> Viability {
    let margin = f.slope_at_zero() + g.slope_at_zero().ln();
    Viability {
        viable: margin > 0.0,
        margin,
    }
}

/// Controls for [`solve_equilibrium_with`].
#[derive(Debug, Clone, Copy)]
pub struct EquilibriumOptions {
    /// Upper end of the bracket search; default `10 max(1, 1/g'(0))`.
    pub n_max: Option<f64>,
    /// Absolute tolerance of the adaptive season-time quadrature.
    pub quad_tol: f64,
    /// Sample count of the linear scan that brackets the root.
    pub scan_points: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            n_max: None,
            quad_tol: 1e-12,
            scan_points: 256,
        }
    }
}

/// Positive fixed point `N*` of the nonspatial season map, if one exists in
/// the search window: the root of
/// `F(N) = integral_{g(N)}^{N} d(omega)/f(omega) - 1`.
///
/// Returns `Ok(None)` when `F` never changes sign (no positive equilibrium
/// below the window's end or the first singular point). Fails with
/// [`Error::SingularIntegrand`] only when `f` vanishes inside the very first
/// integration interval, i.e. no equilibrium question can even be posed.
pub fn solve_equilibrium(f: &ReactionTerm, g: &GrowthMap) -> Result<Option<f64>> {
    solve_equilibrium_with(f, g, &EquilibriumOptions::default())
}

pub fn solve_equilibrium_with(
    f: &ReactionTerm,
    g: &GrowthMap,
    opts: &EquilibriumOptions,
) -> Result<Option<f64>> {
    f.validate()?;
    g.validate()?;
    let n_max = opts
        .n_max
        .unwrap_or_else(|| 10.0 * f64::max(1.0, 1.0 / g.slope_at_zero()));
    if !(n_max > 0.0) || opts.scan_points < 2 {
        return Err(Error::InvalidParameter(
            "equilibrium search window must be positive with at least 2 scan points".into(),
        ));
    }

    let eval_f = |n: f64| -> Result<f64> {
        let lo = g.eval(n)?;
        Ok(season_transit(f, lo, n, opts.quad_tol)? - 1.0)
    };
    // The transit integral is undefined wherever f vanishes between g(n)
    // and n, which carves singular bands out of the scan axis. A root can
    // hug a band from either side (the transit time diverges approaching
    // one), so the scan must refine at band edges and then resume beyond
    // the band instead of giving up at the first undefined sample.
    enum Sample {
        Defined(f64),
        Singular,
    }
    let probe = |n: f64| -> Result<Sample> {
        match eval_f(n) {
            Ok(v) => Ok(Sample::Defined(v)),
            Err(Error::SingularIntegrand(_)) => Ok(Sample::Singular),
            Err(e) => Err(e),
        }
    };
    // Hunt inside (defined end, singular end) for a defined point whose
    // sign differs from `sign`; singular midpoints always step toward the
    // defined end. Returns a clean bracket (defined interior, opposite
    // signs) when the sign change exists on this side of the band.
    let refine_edge = |defined_n: f64,
                       sign: f64,
                       singular_n: f64|
     -> Result<Option<(f64, f64)>> {
        let mut def = defined_n;
        let mut sing = singular_n;
        for _ in 0..200 {
            if (sing - def).abs() <= 1e-13 * def.abs().max(1.0) {
                return Ok(None);
            }
            let mid = 0.5 * (def + sing);
            match probe(mid)? {
                Sample::Defined(v) if v == 0.0 => return Ok(Some((mid, mid))),
                Sample::Defined(v) if v.signum() != sign => {
                    return Ok(Some(if def < mid { (def, mid) } else { (mid, def) }));
                }
                Sample::Defined(_) => def = mid,
                Sample::Singular => sing = mid,
            }
        }
        Ok(None)
    };

    let step = n_max / opts.scan_points as f64;
    // Last defined sample, and the most recent singular sample since it.
    let mut last: Option<(f64, f64)> = None;
    let mut band: Option<f64> = None;
    let mut bracket = None;
    'scan: for k in 1..=opts.scan_points {
        let n = step * k as f64;
        match probe(n) {
            Err(e) => return Err(e),
            Ok(Sample::Singular) if k == 1 => {
                // The question cannot even be posed: f vanishes inside the
                // very first integration interval.
                let _ = eval_f(n)?;
                unreachable!("probe classified this sample as singular");
            }
            Ok(Sample::Singular) => {
                if let (Some((pn, pv)), None) = (last, band) {
                    // Entering a band: a root may be squeezed against its
                    // lower edge, where the transit time diverges.
                    if let Some(b) = refine_edge(pn, pv.signum(), n)? {
                        bracket = Some(b);
                        break 'scan;
                    }
                }
                band = Some(n);
            }
            Ok(Sample::Defined(v)) => {
                if v == 0.0 {
                    return Ok(Some(n));
                }
                match (last, band) {
                    (_, Some(bn)) => {
                        // Leaving a band: a root may likewise hug its
                        // upper edge.
                        if let Some(b) = refine_edge(n, v.signum(), bn)? {
                            bracket = Some(b);
                            break 'scan;
                        }
                    }
                    (Some((pn, pv)), None) => {
                        if pv.signum() != v.signum() {
                            bracket = Some((pn, n));
                            break 'scan;
                        }
                    }
                    (None, None) => {}
                }
                band = None;
                last = Some((n, v));
            }
        }
    }
    let (mut lo, mut hi) = match bracket {
        Some((a, b)) if a == b => return Ok(Some(a)),
        Some(b) => b,
        None => return Ok(None),
    };

    // Bisection on a band-free bracket; each midpoint evaluation is itself
    // a quadrature, so ~90 halvings dominate the cost but stay well under
    // a millisecond.
    let mut f_lo = eval_f(lo)?;
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-14 * mid.max(1.0) {
            break;
        }
        let f_mid = eval_f(mid)?;
        if f_mid == 0.0 {
            return Ok(Some(mid));
        }
        if f_lo.signum() == f_mid.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// `integral_a^b d(omega) / f(omega)`: the season time needed for the
/// kinetics to carry the density from `a` to `b`. Fails when `f` vanishes on
/// the way (the flow never gets there).
pub fn season_transit(f: &ReactionTerm, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut total = 0.0;
    // Manual work stack instead of recursion; depth 60 halvings is far below
    // any realistic need for these smooth integrands.
    let mut stack = vec![(lo, hi, 0u32)];
    while let Some((x0, x1, depth)) = stack.pop() {
        let (coarse, fine) = gauss_kronrod(f, x0, x1)?;
        if (fine - coarse).abs() <= tol.max(1e-16 * fine.abs()) || depth >= 60 {
            if depth >= 60 && (fine - coarse).abs() > 1e3 * tol {
                return Err(Error::Numeric(format!(
                    "season-time quadrature stalled on [{x0}, {x1}]"
                )));
            }
            total += fine;
        } else {
            let mid = 0.5 * (x0 + x1);
            stack.push((x0, mid, depth + 1));
            stack.push((mid, x1, depth + 1));
        }
    }
    Ok(sign * total)
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1] (positive abscissae; the
// rule is symmetric). Standard published values.
const KRONROD_X: [f64; 8] = [
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_5,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];
const KRONROD_W: [f64; 8] = [
    0.209_482_141_084_727_8,
    0.204_432_940_075_298_9,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_9,
    0.104_790_010_322_250_2,
    0.063_092_092_629_978_55,
    0.022_935_322_010_529_22,
];
const GAUSS_W: [f64; 4] = [
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_7,
];

/// One Gauss-Kronrod panel of `1/f` over `[x0, x1]`; returns (G7, K15).
fn gauss_kronrod(f: &ReactionTerm, x0: f64, x1: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (x0 + x1);
    let half = 0.5 * (x1 - x0);
    let inv = |x: f64| -> Result<f64> {
        let v = f.eval(x);
        if v.abs() < 1e-14 {
            return Err(Error::SingularIntegrand(x));
        }
        Ok(1.0 / v)
    };
    let f0 = inv(c)?;
    let mut kron = KRONROD_W[0] * f0;
    let mut gauss = GAUSS_W[0] * f0;
    for i in 1..8 {
        let dx = half * KRONROD_X[i];
        let pair = inv(c - dx)? + inv(c + dx)?;
        kron += KRONROD_W[i] * pair;
        // Odd Kronrod indices are the embedded Gauss nodes.
        if i % 2 == 0 {
            gauss += GAUSS_W[i / 2] * pair;
        }
    }
    Ok((gauss * half, kron * half))
}

/// Iterate the nonspatial season map for `cycles` seasons from `n0`,
/// integrating `u' = f(u)` with classic fourth-order Runge-Kutta at fixed
/// step `1e-3`. Returns the full trajectory `[N_0, N_1, ..., N_cycles]`.
pub fn iterate_nonspatial(
    f: &ReactionTerm,
    g: &GrowthMap,
    n0: f64,
    cycles: usize,
) -> Result<Vec<f64>> {
    f.validate()?;
    g.validate()?;
    if !(n0 >= 0.0) {
        return Err(Error::NegativeDensity(n0));
    }
    const DT: f64 = 1e-3;
    const STEPS: usize = 1000;
    const BLOW_UP: f64 = 1e12;
    let mut out = Vec::with_capacity(cycles + 1);
    out.push(n0);
    let mut n = n0;
    for cycle in 0..cycles {
        let mut u = g.eval(n)?;
        for _ in 0..STEPS {
            let k1 = f.eval(u);
            let k2 = f.eval(u + 0.5 * DT * k1);
            let k3 = f.eval(u + 0.5 * DT * k2);
            let k4 = f.eval(u + DT * k3);
            u += DT / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !u.is_finite() || u.abs() > BLOW_UP {
                return Err(Error::Divergence {
                    cycle,
                    limit: BLOW_UP,
                });
            }
        }
        n = u;
        out.push(n);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn growth_eval_matches_formulas() {
        // Ricker fixes N = 1 for every r.
        let g = GrowthMap::ricker(1.7).unwrap();
        assert_relative_eq!(g.eval(1.0).unwrap(), 1.0, max_relative = 1e-15);
        // Beverton-Holt at N = 1 is also 1: (1 + l) / (1 + l).
        let g = GrowthMap::beverton_holt(0.9).unwrap();
        assert_relative_eq!(g.eval(1.0).unwrap(), 1.0, max_relative = 1e-15);
        // Everyone maps 0 to 0 exactly.
        for g in [
            GrowthMap::linear(2.0).unwrap(),
            GrowthMap::ricker(1.0).unwrap(),
            GrowthMap::beverton_holt(1.0).unwrap(),
            GrowthMap::skellam(2.0, 1.0).unwrap(),
        ] {
            assert_eq!(g.eval(0.0).unwrap(), 0.0);
        }
        assert!(matches!(
            GrowthMap::linear(2.0).unwrap().eval(-0.1),
            Err(Error::NegativeDensity(_))
        ));
    }

    #[test]
    fn reaction_eval_matches_formulas() {
        let f = ReactionTerm::logistic(2.0).unwrap();
        assert_relative_eq!(f.eval(0.5), 0.5, max_relative = 1e-15);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(1.0), 0.0);
        let f = ReactionTerm::linear(-0.5).unwrap();
        assert_relative_eq!(f.eval(2.0), -1.0, max_relative = 1e-15);
        let f = ReactionTerm::quadratic(1.0, 0.5).unwrap();
        assert_relative_eq!(f.eval(2.0), 0.0, max_relative = 1e-15);
    }

    #[test]
    fn parameter_validation_rejects_out_of_range() {
        assert!(GrowthMap::linear(0.0).is_err());
        assert!(GrowthMap::ricker(-1.0).is_err());
        assert!(GrowthMap::beverton_holt(f64::NAN).is_err());
        assert!(GrowthMap::skellam(1.0, 0.0).is_err());
        assert!(ReactionTerm::logistic(0.0).is_err());
        assert!(ReactionTerm::linear(0.0).is_err());
        assert!(ReactionTerm::quadratic(1.0, -0.5).is_err());
        assert!(ReactionTerm::quadratic(0.0, 0.5).is_err());
    }

    #[test]
    fn slopes_at_zero() {
        assert_eq!(GrowthMap::linear(2.0).unwrap().slope_at_zero(), 2.0);
        assert_relative_eq!(
            GrowthMap::ricker(1.0).unwrap().slope_at_zero(),
            std::f64::consts::E,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            GrowthMap::beverton_holt(std::f64::consts::E - 1.0)
                .unwrap()
                .slope_at_zero(),
            std::f64::consts::E,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            GrowthMap::skellam(3.0, 0.5).unwrap().slope_at_zero(),
            1.5,
            max_relative = 1e-15
        );
    }

    /// Slopes against a centred finite difference on the analytic extension
    /// of each formula (step 1e-6). Independent of the hand-derived values.
    #[test]
    fn slopes_match_finite_differences() {
        let maps = [
            GrowthMap::Linear { b: 2.0 },
            GrowthMap::Ricker { r: 1.0 },
            GrowthMap::Ricker { r: 0.3 },
            GrowthMap::BevertonHolt { lambda: 1.7 },
            GrowthMap::Skellam { r: 2.0, b: 1.3 },
        ];
        let h = 1e-6;
        for g in maps {
            let fd = (g.eval_raw(h) - g.eval_raw(-h)) / (2.0 * h);
            assert_relative_eq!(g.slope_at_zero(), fd, max_relative = 1e-6);
        }
        let reactions = [
            ReactionTerm::Logistic { r: 1.0 },
            ReactionTerm::Linear { b: -0.5 },
            ReactionTerm::Quadratic {
                alpha: 0.7,
                beta: 0.2,
            },
        ];
        for f in reactions {
            let fd = (f.eval(h) - f.eval(-h)) / (2.0 * h);
            assert_relative_eq!(f.slope_at_zero(), fd, max_relative = 1e-6);
        }
    }

    /// The quadratic envelope `g'(0) N - c N^2 <= g(N) <= g'(0) N` sampled
    /// densely; the coefficients are chosen to hold for all `N >= 0`, not
    /// just near the origin.
    #[test]
    fn growth_envelopes_hold_on_dense_samples() {
        let maps = [
            GrowthMap::Linear { b: 2.0 },
            GrowthMap::Ricker { r: 0.5 },
            GrowthMap::Ricker { r: 2.0 },
            GrowthMap::BevertonHolt { lambda: 0.3 },
            GrowthMap::BevertonHolt { lambda: 3.0 },
            GrowthMap::Skellam { r: 2.0, b: 1.0 },
            GrowthMap::Skellam { r: 0.5, b: 4.0 },
        ];
        for g in maps {
            let s = g.slope_at_zero();
            let c = g.envelope_coefficient();
            for k in 0..=1000 {
                let n = 10.0 * k as f64 / 1000.0;
                let v = g.eval(n).unwrap();
                assert!(
                    v <= s * n + 1e-12 * s * n.max(1.0),
                    "{g:?}: upper envelope fails at N={n}: {v} > {}",
                    s * n
                );
                assert!(
                    v >= s * n - c * n * n - 1e-12 * (s * n).max(1.0),
                    "{g:?}: lower envelope fails at N={n}"
                );
            }
        }
    }

    #[test]
    fn reaction_envelopes_hold_on_dense_samples() {
        let reactions = [
            ReactionTerm::Logistic { r: 1.5 },
            ReactionTerm::Linear { b: -0.7 },
            ReactionTerm::Quadratic {
                alpha: 1.0,
                beta: 0.5,
            },
        ];
        for f in reactions {
            let s = f.slope_at_zero();
            let c = f.envelope_coefficient();
            for k in 0..=1000 {
                let u = 10.0 * k as f64 / 1000.0;
                let v = f.eval(u);
                assert!(v <= s * u + 1e-12 * (s * u).abs().max(1.0));
                assert!(v >= s * u - c * u * u - 1e-12 * (s * u).abs().max(1.0));
            }
        }
    }

    #[test]
    fn monotone_limits() {
        assert_eq!(
            GrowthMap::ricker(2.0).unwrap().monotone_limit(),
            0.5
        );
        assert_eq!(
            GrowthMap::beverton_holt(1.0).unwrap().monotone_limit(),
            f64::INFINITY
        );
        // Monotone on [0, limit]: sampled.
        let g = GrowthMap::ricker(2.0).unwrap();
        let lim = g.monotone_limit();
        let mut prev = 0.0;
        for k in 1..=200 {
            let n = lim * k as f64 / 200.0;
            let v = g.eval(n).unwrap();
            assert!(v >= prev - 1e-12, "Ricker not monotone at N={n}");
            prev = v;
        }
    }

    #[test]
    fn viability_examples() {
        // Beverton-Holt against mortality gamma = 0.5: margin ln(1+l) - 0.5.
        let f = ReactionTerm::linear(-0.5).unwrap();
        let g = GrowthMap::beverton_holt(std::f64::consts::E - 1.0).unwrap();
        let v = check_viability(&f, &g);
        assert!(v.viable);
        assert_relative_eq!(v.margin, 0.5, max_relative = 1e-12);

        // Not viable: heavy mortality, weak recruitment.
        let f = ReactionTerm::linear(-1.0).unwrap();
        let g = GrowthMap::beverton_holt(0.5).unwrap();
        let v = check_viability(&f, &g);
        assert!(!v.viable);
        assert!(v.margin < 0.0);

        // Logistic with the identity map: margin = r.
        let f = ReactionTerm::logistic(1.0).unwrap();
        let g = GrowthMap::linear(1.0).unwrap();
        let v = check_viability(&f, &g);
        assert!(v.viable);
        assert_relative_eq!(v.margin, 1.0, max_relative = 1e-15);
    }

    /// Closed forms for the three solvable configurations, derived by
    /// integrating `1/f` in closed form and inverting. These freeze the
    /// expected values the quadrature solver must reproduce.
    fn bh_mortality_nstar(lambda: f64, gamma: f64) -> f64 {
        ((-gamma).exp() * (1.0 + lambda) - 1.0) / lambda
    }
    fn ricker_mortality_nstar(r: f64, gamma: f64) -> f64 {
        (r - gamma) / r
    }
    fn logistic_harvest_nstar(r: f64, s: f64) -> f64 {
        ((1.0 - s) * r.exp() - 1.0) / ((1.0 - s) * (r.exp() - 1.0))
    }

    #[test]
    fn equilibrium_beverton_holt_with_mortality() {
        let f = ReactionTerm::linear(-0.5).unwrap();
        let g = GrowthMap::beverton_holt(std::f64::consts::E - 1.0).unwrap();
        let n = solve_equilibrium(&f, &g).unwrap().unwrap();
        assert_relative_eq!(
            n,
            bh_mortality_nstar(std::f64::consts::E - 1.0, 0.5),
            max_relative = 1e-9
        );
        // Specific numeric anchor for this configuration.
        assert_abs_diff_eq!(n, 0.377_540_668_798_145_5, epsilon = 1e-8);
        // The defining integral must be satisfied to 1e-10.
        let resid = season_transit(&f, g.eval(n).unwrap(), n, 1e-12).unwrap() - 1.0;
        assert!(resid.abs() <= 1e-10, "residual {resid}");
    }

    #[test]
    fn equilibrium_ricker_with_mortality() {
        let f = ReactionTerm::linear(-0.5).unwrap();
        let g = GrowthMap::ricker(1.0).unwrap();
        let n = solve_equilibrium(&f, &g).unwrap().unwrap();
        assert_relative_eq!(n, ricker_mortality_nstar(1.0, 0.5), max_relative = 1e-9);
        assert_abs_diff_eq!(n, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn equilibrium_logistic_with_harvest() {
        // Proportional harvest s: g(N) = (1 - s) N under logistic kinetics.
        let f = ReactionTerm::logistic(1.0).unwrap();
        let g = GrowthMap::linear(0.5).unwrap();
        let n = solve_equilibrium(&f, &g).unwrap().unwrap();
        assert_relative_eq!(n, logistic_harvest_nstar(1.0, 0.5), max_relative = 1e-9);
        assert_abs_diff_eq!(n, 0.418_023_293_217_5, epsilon = 1e-8);
    }

    #[test]
    fn equilibrium_closed_forms_on_parameter_grids() {
        // 5x5 grids per family, all viable; quadrature vs closed form.
        for (i, gamma) in [0.05, 0.1, 0.2, 0.3, 0.4].iter().enumerate() {
            for (j, lambda) in [0.6, 1.0, 1.5, 2.0, 3.0].iter().enumerate() {
                let f = ReactionTerm::linear(-gamma).unwrap();
                let g = GrowthMap::beverton_holt(*lambda).unwrap();
                let n = solve_equilibrium(&f, &g)
                    .unwrap()
                    .unwrap_or_else(|| panic!("no root at grid ({i},{j})"));
                assert_abs_diff_eq!(n, bh_mortality_nstar(*lambda, *gamma), epsilon = 1e-8);
            }
        }
        for gamma in [0.05, 0.1, 0.2, 0.3, 0.4] {
            for r in [0.5, 0.8, 1.0, 1.5, 2.0] {
                let f = ReactionTerm::linear(-gamma).unwrap();
                let g = GrowthMap::ricker(r).unwrap();
                let n = solve_equilibrium(&f, &g).unwrap().unwrap();
                assert_abs_diff_eq!(n, ricker_mortality_nstar(r, gamma), epsilon = 1e-8);
            }
        }
        for s in [0.1, 0.2, 0.3, 0.4, 0.5] {
            for r in [1.0, 1.5, 2.0, 2.5, 3.0] {
                let f = ReactionTerm::logistic(r).unwrap();
                let g = GrowthMap::linear(1.0 - s).unwrap();
                let n = solve_equilibrium(&f, &g).unwrap().unwrap();
                assert_abs_diff_eq!(n, logistic_harvest_nstar(r, s), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn equilibrium_none_when_not_viable() {
        // g(N) = N makes the transit integral 0 for every N: no root.
        let f = ReactionTerm::linear(-1.0).unwrap();
        let g = GrowthMap::linear(1.0).unwrap();
        assert_eq!(solve_equilibrium(&f, &g).unwrap(), None);
        // Below replacement under logistic growth.
        let f = ReactionTerm::logistic(0.2).unwrap();
        let g = GrowthMap::linear(0.5).unwrap();
        assert_eq!(solve_equilibrium(&f, &g).unwrap(), None);
    }

    #[test]
    fn transit_is_singular_through_a_zero_of_f() {
        // Logistic f vanishes at u = 1; integrating across it must fail.
        let f = ReactionTerm::logistic(1.0).unwrap();
        assert!(matches!(
            season_transit(&f, 0.5, 1.5, 1e-12),
            Err(Error::SingularIntegrand(_))
        ));
    }

    #[test]
    fn equilibrium_survives_singularity_beyond_the_root() {
        // Expansive map pushes the scan past u = 1 where logistic f vanishes,
        // but the root sits below the singular cap and must still be found.
        let f = ReactionTerm::logistic(1.0).unwrap();
        let g = GrowthMap::linear(1.2).unwrap();
        let n = solve_equilibrium(&f, &g).unwrap().unwrap();
        // Closed form with b > 1: N* = (b e^r - 1) / (b (e^r - 1)).
        let b: f64 = 1.2;
        let expect = (b * 1f64.exp() - 1.0) / (b * (1f64.exp() - 1.0));
        assert_abs_diff_eq!(n, expect, epsilon = 1e-8);
    }

    #[test]
    fn transit_closed_form_check() {
        // For f = -gamma u the transit time is ln(a/b) / gamma.
        let f = ReactionTerm::linear(-0.5).unwrap();
        let t = season_transit(&f, 0.8, 0.4, 1e-12).unwrap();
        assert_relative_eq!(t, (0.8f64 / 0.4).ln() / 0.5, max_relative = 1e-11);
    }

    #[test]
    fn nonspatial_linear_recursion_is_exact() {
        // g = identity, f = -u: N_m = N_0 e^{-m} exactly.
        let f = ReactionTerm::linear(-1.0).unwrap();
        let g = GrowthMap::linear(1.0).unwrap();
        let traj = iterate_nonspatial(&f, &g, 1.0, 10).unwrap();
        for (m, v) in traj.iter().enumerate() {
            assert_relative_eq!(*v, (-(m as f64)).exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn nonspatial_converges_to_equilibrium() {
        let f = ReactionTerm::linear(-0.5).unwrap();
        let g = GrowthMap::ricker(1.0).unwrap();
        let traj = iterate_nonspatial(&f, &g, 0.1, 200).unwrap();
        assert_abs_diff_eq!(*traj.last().unwrap(), 0.5, epsilon = 1e-6);
        // Same limit from above.
        let traj = iterate_nonspatial(&f, &g, 0.9, 200).unwrap();
        assert_abs_diff_eq!(*traj.last().unwrap(), 0.5, epsilon = 1e-6);
    }

    #[test]
    fn nonspatial_divergence_detected() {
        let f = ReactionTerm::linear(40.0).unwrap();
        let g = GrowthMap::linear(2.0).unwrap();
        assert!(matches!(
            iterate_nonspatial(&f, &g, 1.0, 3),
            Err(Error::Divergence { .. })
        ));
    }
}
