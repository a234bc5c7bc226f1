//! The hybrid season dynamics: continuous within-season transport and
//! reaction, impulsive between-season recruitment, and the operational
//! persistence/extinction classifier.
//!
//! One cycle maps a pre-season density `N_m` to `N_{m+1}`: first the
//! recruitment map `g` acts node-wise, then the density evolves for one
//! season under `u_t = d Δu − a·∇u + f(u)` with hostile (zero) boundary.
//! The season propagator treats transport implicitly (Crank–Nicolson, so
//! stiffness from fine grids costs nothing) and the reaction explicitly,
//! which is harmless at the reaction scales of interest and keeps the
//! solve linear with a constant matrix.
//!
//! Classification is deliberately operational. The theory speaks of limits
//! as the season count goes to infinity; the classifier reports
//! `Extinction` when the density has collapsed below `eps_extinct`,
//! `Persistence` when a central probe region stays populated and the
//! sup-norm has been stationary for a full window of cycles, and
//! `Inconclusive` otherwise. Every tolerance is overridable and echoed in
//! the result.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Grid};
use crate::kinetics::{GrowthMap, ReactionTerm};
use crate::linalg::{bicgstab, cg, Csr};
use crate::spectral::{
    assemble_operator, lambda1_closed, lambda1_numeric, EigenOptions, OperatorInfo,
    SpectralResult,
};

/// A population density on a grid at the start of season `season`.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: Arc<Grid>,
    /// Node values on the full lattice; zero on every non-interior node.
    pub values: Vec<f64>,
    pub season: usize,
}

impl FieldState {
    /// Wrap a full-lattice vector, enforcing the state invariants:
    /// matching length, finite nonnegative values, zero outside the
    /// interior.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, season: usize) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidParameter(format!(
                "state has {} values for a lattice of {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        for (flat, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("non-finite density at node {flat}")));
            }
            if *v < 0.0 {
                return Err(Error::NegativeDensity(*v));
            }
            if !grid.interior[flat] && *v != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "nonzero density {v} on hostile node {flat}"
                )));
            }
        }
        Ok(FieldState {
            grid,
            values,
            season,
        })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.node_count()];
        FieldState {
            grid,
            values,
            season: 0,
        }
    }

    /// Sample a function of position on the interior nodes.
    pub fn from_fn(grid: Arc<Grid>, density: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut values = vec![0.0; grid.node_count()];
        for &flat in &grid.interior_nodes {
            values[flat] = density(&grid.coords(flat));
        }
        FieldState::new(grid, values, 0)
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// Values at the interior nodes, in unknown order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.grid
            .interior_nodes
            .iter()
            .map(|&flat| self.values[flat])
            .collect()
    }

    fn replace_interior(&mut self, interior: &[f64]) {
        for (ord, &flat) in self.grid.interior_nodes.iter().enumerate() {
            self.values[flat] = interior[ord];
        }
    }
}

/// Undershoot within this of zero is dispersal noise and is clamped away.
const CLAMP_TOL: f64 = 1e-8;
/// Densities above this mean the run has left the model's regime.
const BLOW_UP: f64 = 1e12;

/// Clamp tiny negative undershoots to zero; report anything worse.
fn clamp_nonnegative(values: &mut [f64], cycle: usize) -> Result<()> {
    for v in values.iter_mut() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite density during season {cycle}"
            )));
        }
        if *v < 0.0 {
            if *v < -CLAMP_TOL {
                return Err(Error::Numeric(format!(
                    "density undershot to {v} during season {cycle}; the step is unstable"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// Season propagator: precomputes the pair of Crank–Nicolson matrices for
/// a fixed grid, transport, and step, then advances interior vectors
/// through whole seasons. Reuse one instance across cycles — assembly is
/// the expensive part.
pub struct Simulator {
    grid: Arc<Grid>,
    f: ReactionTerm,
    /// `I + (dt/2) A`: the implicit side.
    lhs: Csr,
    /// `I − (dt/2) A`: the explicit side.
    rhs_mat: Csr,
    steps: usize,
    dt: f64,
    symmetric: bool,
    pub info: OperatorInfo,
    rhs: Vec<f64>,
    reaction: Vec<f64>,
}

impl Simulator {
    pub fn new(
        grid: Arc<Grid>,
        d: f64,
        advection: &[f64],
        f: ReactionTerm,
        dt: f64,
    ) -> Result<Self> {
        f.validate()?;
        if !(dt > 0.0) || !(dt <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "season step must lie in (0, 1], got {dt}"
            )));
        }
        let slope = f.slope_at_zero().abs();
        if slope > 0.0 && dt > 0.1 / slope {
            return Err(Error::InvalidParameter(format!(
                "step {dt} too large for reaction slope {slope}; need dt <= {}",
                0.1 / slope
            )));
        }
        let steps = (1.0 / dt).round().max(1.0) as usize;
        let dt = 1.0 / steps as f64;
        let (a, info) = assemble_operator(&grid, d, advection)?;
        let lhs = a.identity_plus_scaled(dt / 2.0);
        let rhs_mat = a.identity_plus_scaled(-dt / 2.0);
        let n = a.n;
        let symmetric = !info.upwind && advection.iter().all(|v| *v == 0.0);
        Ok(Simulator {
            grid,
            f,
            lhs,
            rhs_mat,
            steps,
            dt,
            symmetric,
            info,
            rhs: vec![0.0; n],
            reaction: vec![0.0; n],
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn steps_per_season(&self) -> usize {
        self.steps
    }

    /// Advance an interior vector through one season (unit time) in place.
    /// `cycle` only labels error messages.
    pub fn propagate(&mut self, u: &mut Vec<f64>, cycle: usize) -> Result<()> {
        for _ in 0..self.steps {
            for (r, v) in self.reaction.iter_mut().zip(u.iter()) {
                *r = self.f.eval(*v);
            }
            self.rhs_mat.mul_vec(u, &mut self.rhs);
            for (r, fv) in self.rhs.iter_mut().zip(&self.reaction) {
                *r += self.dt * fv;
            }
            // The previous step's values are the warm start.
            let solve = if self.symmetric {
                cg(&self.lhs, &self.rhs, u, 1e-10, 10_000)
            } else {
                bicgstab(&self.lhs, &self.rhs, u, 1e-10, 10_000)
            };
            solve.map_err(|e| {
                Error::Numeric(format!("season solve failed during cycle {cycle}: {e}"))
            })?;
            clamp_nonnegative(u, cycle)?;
        }
        Ok(())
    }
}

/// One season of the PDE alone (no recruitment): `u(·,0) -> u(·,1)`.
pub fn propagate_season(
    state: &FieldState,
    d: f64,
    advection: &[f64],
    f: &ReactionTerm,
    dt: f64,
) -> Result<FieldState> {
    let mut sim = Simulator::new(state.grid.clone(), d, advection, f.clone(), dt)?;
    let mut u = state.interior_values();
    sim.propagate(&mut u, state.season)?;
    let mut next = state.clone();
    next.replace_interior(&u);
    Ok(next)
}

/// One full cycle: recruitment `g` node-wise, then one season of the PDE.
/// Advances the season index.
pub fn impulse_cycle(
    state: &FieldState,
    g: &GrowthMap,
    d: f64,
    advection: &[f64],
    f: &ReactionTerm,
    dt: f64,
) -> Result<FieldState> {
    g.validate()?;
    let mut sim = Simulator::new(state.grid.clone(), d, advection, f.clone(), dt)?;
    let mut u = state.interior_values();
    for v in u.iter_mut() {
        *v = g.eval(*v)?;
    }
    sim.propagate(&mut u, state.season)?;
    let mut next = state.clone();
    next.replace_interior(&u);
    next.season += 1;
    Ok(next)
}

/// Tolerances and horizons for [`iterate_and_classify`]. The defaults are
/// the reporting contract: every classification echoes the values used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub max_cycles: usize,
    /// Sup-norm below this is extinction.
    pub eps_extinct: f64,
    /// The probe region must stay above this for a persistence verdict.
    pub delta_persist: f64,
    /// Relative sup-norm change below this counts as stationary.
    pub tol_stationary: f64,
    /// Consecutive stationary cycles required for persistence.
    pub window: usize,
    /// Within-season time step.
    pub dt: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            max_cycles: 200,
            eps_extinct: 1e-8,
            delta_persist: 1e-4,
            tol_stationary: 1e-5,
            window: 10,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Extinction,
    Persistence,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        out.write_str(match self {
            Verdict::Extinction => "extinction",
            Verdict::Persistence => "persistence",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Per-cycle trajectory summary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub sup: f64,
    /// Minimum over the central probe region.
    pub probe_min: f64,
    /// Sup-norm ratio against the previous cycle.
    pub ratio: f64,
}

/// Outcome of a classification run.
#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Geometric mean of the sup-norm ratio over the trailing window.
    pub growth_factor_estimate: f64,
    /// λ1 attached to the run (closed form when available, else numeric).
    pub lambda1_used: Option<f64>,
    /// `f'(0) + ln g'(0) − λ1`; positive predicts persistence.
    pub threshold_margin: Option<f64>,
    pub cycles_run: usize,
    pub final_sup: f64,
    pub final_probe_min: f64,
    /// The tolerances the verdict was reached under.
    pub options: ClassifyOptions,
    #[serde(skip)]
    pub trajectory: Vec<CycleRecord>,
    /// Density at the end of the run (full lattice).
    #[serde(skip)]
    pub final_state: FieldState,
}

/// Interior ordinals of the probe region: the central box of half the
/// domain extent, intersected with the interior. Falls back to the maximum
/// of the initial condition when that intersection is empty (thin masks).
fn probe_ordinals(grid: &Grid, initial: &FieldState) -> Vec<usize> {
    let extent = grid.extent();
    let mut probe = Vec::new();
    for (ord, &flat) in grid.interior_nodes.iter().enumerate() {
        let x = grid.coords(flat);
        let central = x.iter().enumerate().all(|(k, xi)| {
            let c = grid.origin[k] + extent[k] / 2.0;
            (xi - c).abs() <= extent[k] / 4.0
        });
        if central {
            probe.push(ord);
        }
    }
    if probe.is_empty() {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (ord, &flat) in grid.interior_nodes.iter().enumerate() {
            if initial.values[flat] > best_v {
                best_v = initial.values[flat];
                best = ord;
            }
        }
        probe.push(best);
    }
    probe
}

/// Run the impulsive dynamics from `initial` and classify the outcome.
/// `lambda1_used` is attached to the report (and drives the margin) but
/// does not influence the verdict — the verdict is purely trajectory-based
/// so it can cross-check the spectral prediction.
pub fn iterate_and_classify(
    initial: &FieldState,
    g: &GrowthMap,
    d: f64,
    advection: &[f64],
    f: &ReactionTerm,
    opts: &ClassifyOptions,
    lambda1_used: Option<f64>,
) -> Result<Classification> {
    g.validate()?;
    if opts.max_cycles == 0 || opts.window == 0 {
        return Err(Error::InvalidParameter(
            "classification needs at least one cycle and a nonzero window".into(),
        ));
    }
    let mut sim = Simulator::new(initial.grid.clone(), d, advection, f.clone(), opts.dt)?;
    let probe = probe_ordinals(&initial.grid, initial);
    let mut u = initial.interior_values();
    let mut prev_sup = u.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut trajectory = Vec::new();
    let mut stationary_run = 0usize;
    let mut verdict = Verdict::Inconclusive;

    for cycle in 1..=opts.max_cycles {
        for v in u.iter_mut() {
            *v = g.eval(*v)?;
        }
        sim.propagate(&mut u, cycle)?;
        let sup = u.iter().fold(0.0f64, |m, v| m.max(*v));
        if sup > BLOW_UP {
            return Err(Error::Divergence {
                cycle,
                limit: BLOW_UP,
            });
        }
        let probe_min = probe
            .iter()
            .map(|&ord| u[ord])
            .fold(f64::INFINITY, f64::min);
        let ratio = if prev_sup > 0.0 { sup / prev_sup } else { 0.0 };
        trajectory.push(CycleRecord {
            cycle,
            sup,
            probe_min,
            ratio,
        });
        if sup < opts.eps_extinct {
            verdict = Verdict::Extinction;
            break;
        }
        let stationary = (sup - prev_sup).abs() <= opts.tol_stationary * sup;
        if stationary && probe_min >= opts.delta_persist {
            stationary_run += 1;
            if stationary_run >= opts.window {
                verdict = Verdict::Persistence;
                break;
            }
        } else {
            stationary_run = 0;
        }
        prev_sup = sup;
    }

    let window = opts.window.min(trajectory.len());
    let growth_factor_estimate = if window == 0 {
        f64::MIN_POSITIVE
    } else {
        let tail = &trajectory[trajectory.len() - window..];
        let log_sum: f64 = tail
            .iter()
            .map(|r| r.ratio.max(f64::MIN_POSITIVE).ln())
            .sum();
        (log_sum / window as f64).exp().max(f64::MIN_POSITIVE)
    };
    let last = trajectory.last();
    let margin = f.slope_at_zero() + g.slope_at_zero().ln();
    let mut final_state = FieldState::zeros(initial.grid.clone());
    final_state.replace_interior(&u);
    final_state.season = initial.season + trajectory.len();
    Ok(Classification {
        verdict,
        growth_factor_estimate,
        lambda1_used,
        threshold_margin: lambda1_used.map(|l| margin - l),
        cycles_run: trajectory.len(),
        final_sup: last.map_or(0.0, |r| r.sup),
        final_probe_min: last.map_or(0.0, |r| r.probe_min),
        options: opts.clone(),
        trajectory,
        final_state,
    })
}

/// Linearized per-cycle growth factor `ρ = g'(0) e^{f'(0) − λ1}`: the
/// seasonal multiplier of a vanishingly small population. `ρ < 1` predicts
/// extinction, `ρ > 1` persistence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMethod {
    ClosedForm,
    Numeric { h: f64 },
}

pub fn linearized_growth_factor(
    d: f64,
    advection: &[f64],
    domain: &Domain,
    f: &ReactionTerm,
    g: &GrowthMap,
    method: RhoMethod,
) -> Result<f64> {
    f.validate()?;
    g.validate()?;
    let lambda1 = match method {
        RhoMethod::ClosedForm => lambda1_closed(d, advection, domain)?.lambda1,
        RhoMethod::Numeric { h } => {
            let grid = domain.rasterize(h)?;
            lambda1_numeric(&grid, d, advection, &EigenOptions::default())?.lambda1
        }
    };
    Ok(g.slope_at_zero() * (f.slope_at_zero() - lambda1).exp())
}

/// Default classification seed: the numeric principal eigenfunction scaled
/// to a maximum of 0.1 — the shape the linearized dynamics selects — with
/// a centered Gaussian bump as fallback when the eigensolve is skipped
/// (`eigen: None`) or fails.
pub fn default_initial_condition(
    grid: &Arc<Grid>,
    d: f64,
    advection: &[f64],
    eigen: Option<&EigenOptions>,
) -> Result<(FieldState, Option<SpectralResult>)> {
    if let Some(opts) = eigen {
        if let Ok(result) = lambda1_numeric(grid, d, advection, opts) {
            let phi = result
                .eigenfunction
                .as_ref()
                .expect("numeric result carries an eigenfunction");
            let values: Vec<f64> = phi.iter().map(|v| 0.1 * v.max(0.0)).collect();
            let state = FieldState::new(grid.clone(), values, 0)?;
            return Ok((state, Some(result)));
        }
    }
    let extent = grid.extent();
    let center: Vec<f64> = grid
        .origin
        .iter()
        .zip(&extent)
        .map(|(o, e)| o + e / 2.0)
        .collect();
    let sigma_sq: f64 = extent
        .iter()
        .map(|e| (e / 6.0) * (e / 6.0))
        .fold(f64::INFINITY, f64::min)
        .max(f64::MIN_POSITIVE);
    let mut state = FieldState::from_fn(grid.clone(), |x| {
        let r2: f64 = x
            .iter()
            .zip(&center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum();
        (-r2 / (2.0 * sigma_sq)).exp()
    })?;
    let sup = state.sup();
    for v in state.values.iter_mut() {
        *v *= 0.1 / sup;
    }
    Ok((state, None))
}

/// Everything in one call: rasterise the domain, pick the seed and λ1,
/// run the classifier. The second element is the spectral result the
/// verdict was compared against (closed form when available, else the
/// numeric eigenvalue behind the default seed).
pub fn classify_domain(
    domain: &Domain,
    h: f64,
    d: f64,
    advection: &[f64],
    f: &ReactionTerm,
    g: &GrowthMap,
    opts: &ClassifyOptions,
) -> Result<(Classification, Option<SpectralResult>)> {
    let grid = domain.rasterize(h)?.into_shared();
    let closed = lambda1_closed(d, advection, domain).ok();
    let (initial, numeric) =
        default_initial_condition(&grid, d, advection, Some(&EigenOptions::default()))?;
    let spectral = closed.or(numeric);
    let lambda1_used = spectral.as_ref().map(|r| r.lambda1);
    let classification =
        iterate_and_classify(&initial, g, d, advection, f, opts, lambda1_used)?;
    Ok((classification, spectral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn interval_grid(length: f64, cells: usize) -> Arc<Grid> {
        Domain::rect(&[length])
            .unwrap()
            .rasterize(length / cells as f64)
            .unwrap()
            .into_shared()
    }

    #[test]
    fn sine_mode_decays_at_the_separable_rate() {
        // u0 = sin(πx/L), f = bu: u(x,1) = e^{b − dπ²/L²} u0(x).
        let (l, d, b) = (1.0, 0.1, 0.2);
        let grid = interval_grid(l, 256);
        let u0 = FieldState::from_fn(grid.clone(), |x| (PI * x[0] / l).sin()).unwrap();
        let u1 = propagate_season(&u0, d, &[], &ReactionTerm::Linear { b }, 1e-3).unwrap();
        let factor = (b - d * PI * PI / (l * l)).exp();
        for &flat in &grid.interior_nodes {
            let expect = factor * u0.values[flat];
            assert_relative_eq!(u1.values[flat], expect, max_relative = 5e-3);
        }
        assert_eq!(u1.season, u0.season);
    }

    #[test]
    fn mortality_contracts_the_sup_norm() {
        let grid = interval_grid(2.0, 64);
        let u0 = FieldState::from_fn(grid, |x| (PI * x[0] / 2.0).sin()).unwrap();
        let gamma = 0.7;
        let u1 =
            propagate_season(&u0, 0.05, &[], &ReactionTerm::Linear { b: -gamma }, 1e-3).unwrap();
        // Maximum principle: decay at least as fast as the reaction alone.
        assert!(u1.sup() <= (-gamma as f64).exp() * u0.sup() * (1.0 + 1e-9));
        assert!(u1.sup() > 0.0);
    }

    #[test]
    fn zero_state_is_invariant() {
        let grid = interval_grid(1.0, 32);
        let zero = FieldState::zeros(grid);
        let after = impulse_cycle(
            &zero,
            &GrowthMap::ricker(1.0).unwrap(),
            0.1,
            &[],
            &ReactionTerm::Logistic { r: 1.0 },
            1e-3,
        )
        .unwrap();
        assert_eq!(after.sup(), 0.0);
        assert_eq!(after.season, 1);
    }

    #[test]
    fn linear_cycle_is_homogeneous() {
        let grid = interval_grid(1.0, 48);
        let u = FieldState::from_fn(grid.clone(), |x| x[0] * (1.0 - x[0])).unwrap();
        let mut doubled = u.clone();
        for v in doubled.values.iter_mut() {
            *v *= 2.0;
        }
        let g = GrowthMap::linear(1.5).unwrap();
        let f = ReactionTerm::Linear { b: 0.3 };
        let one = impulse_cycle(&u, &g, 0.1, &[], &f, 2e-3).unwrap();
        let two = impulse_cycle(&doubled, &g, 0.1, &[], &f, 2e-3).unwrap();
        for &flat in &grid.interior_nodes {
            assert_relative_eq!(two.values[flat], 2.0 * one.values[flat], max_relative = 1e-8);
        }
    }

    #[test]
    fn eigenmode_cycle_ratio_matches_linearization() {
        // On the eigenmode with linear kinetics the per-cycle sup ratio is
        // g'(0) e^{f'(0) − λ1}.
        let (l, d, b, r) = (1.0, 0.1, 2.0, 0.2);
        let domain = Domain::rect(&[l]).unwrap();
        let grid = interval_grid(l, 64);
        let g = GrowthMap::linear(b).unwrap();
        let f = ReactionTerm::Linear { b: r };
        let mut state = FieldState::from_fn(grid, |x| 0.01 * (PI * x[0] / l).sin()).unwrap();
        let rho =
            linearized_growth_factor(d, &[], &domain, &f, &g, RhoMethod::ClosedForm).unwrap();
        for _ in 0..3 {
            let before = state.sup();
            state = impulse_cycle(&state, &g, d, &[], &f, 1e-3).unwrap();
            assert_relative_eq!(state.sup() / before, rho, max_relative = 1e-2);
        }
    }

    #[test]
    fn growth_factor_examples() {
        let square = Domain::rect(&[1.0, 1.0]).unwrap();
        let rho = linearized_growth_factor(
            1.0,
            &[],
            &square,
            &ReactionTerm::Linear { b: 1.0 },
            &GrowthMap::linear(1.0).unwrap(),
            RhoMethod::ClosedForm,
        )
        .unwrap();
        assert_relative_eq!(rho, (1.0 - 2.0 * PI * PI).exp(), max_relative = 1e-12);
        // ρ = 1 exactly on the algebraic boundary margin = λ1.
        let rho_boundary = linearized_growth_factor(
            1.0,
            &[],
            &square,
            &ReactionTerm::Linear {
                b: 2.0 * PI * PI,
            },
            &GrowthMap::linear(1.0).unwrap(),
            RhoMethod::ClosedForm,
        )
        .unwrap();
        assert_eq!(rho_boundary, 1.0);
    }

    #[test]
    fn fisher_interval_brackets_the_critical_length() {
        // d = 0.01, logistic r = 1, identity recruitment: L* = 0.1π.
        let d = 0.01;
        let l_star = 0.1 * PI;
        let f = ReactionTerm::Logistic { r: 1.0 };
        let g = GrowthMap::linear(1.0).unwrap();
        let opts = ClassifyOptions {
            dt: 2e-3,
            ..Default::default()
        };
        let shrunk = Domain::rect(&[0.9 * l_star]).unwrap();
        let (out, spectral) =
            classify_domain(&shrunk, 0.9 * l_star / 64.0, d, &[], &f, &g, &opts).unwrap();
        assert_eq!(out.verdict, Verdict::Extinction);
        assert!(out.final_sup < opts.eps_extinct);
        assert!(out.growth_factor_estimate < 1.0);
        assert!(out.threshold_margin.unwrap() < 0.0);
        // On an interval the closed form is available and wins.
        assert_relative_eq!(
            spectral.unwrap().lambda1,
            d * PI * PI / (0.9 * l_star).powi(2),
            max_relative = 1e-12
        );

        let grown = Domain::rect(&[1.1 * l_star]).unwrap();
        let (out, _) =
            classify_domain(&grown, 1.1 * l_star / 64.0, d, &[], &f, &g, &opts).unwrap();
        assert_eq!(out.verdict, Verdict::Persistence);
        assert!(out.final_probe_min >= opts.delta_persist);
        assert!(out.threshold_margin.unwrap() > 0.0);
    }

    #[test]
    fn overcompensation_stays_nonnegative() {
        // Strong Ricker overshoot must never push densities negative.
        let grid = interval_grid(3.0, 48);
        let mut state = FieldState::from_fn(grid, |x| (PI * x[0] / 3.0).sin()).unwrap();
        let g = GrowthMap::ricker(2.5).unwrap();
        let f = ReactionTerm::Logistic { r: 0.4 };
        for _ in 0..10 {
            state = impulse_cycle(&state, &g, 0.2, &[], &f, 2e-3).unwrap();
            assert!(state.values.iter().all(|v| *v >= 0.0));
        }
        assert!(state.sup() > 0.0);
    }

    #[test]
    fn clamp_tolerances() {
        let mut fine = vec![0.5, -0.5e-8, 0.0];
        clamp_nonnegative(&mut fine, 3).unwrap();
        assert_eq!(fine, vec![0.5, 0.0, 0.0]);
        let mut bad = vec![0.5, -1e-7];
        assert!(clamp_nonnegative(&mut bad, 3).is_err());
        let mut nan = vec![f64::NAN];
        assert!(clamp_nonnegative(&mut nan, 1).is_err());
    }

    #[test]
    fn state_validation() {
        let grid = interval_grid(1.0, 16);
        let n = grid.node_count();
        assert!(FieldState::new(grid.clone(), vec![0.0; n - 1], 0).is_err());
        let mut vals = vec![0.0; n];
        vals[0] = 0.2; // boundary node
        assert!(FieldState::new(grid.clone(), vals, 0).is_err());
        let mut vals = vec![0.0; n];
        vals[grid.interior_nodes[0]] = -0.3;
        assert!(matches!(
            FieldState::new(grid.clone(), vals, 0),
            Err(Error::NegativeDensity(_))
        ));
        // Too-large dt against the reaction slope.
        assert!(Simulator::new(
            grid,
            0.1,
            &[],
            ReactionTerm::Linear { b: 40.0 },
            0.01
        )
        .is_err());
    }

    #[test]
    fn default_seed_eigenfunction_and_fallback() {
        let grid = Domain::ball(1.0, 2)
            .unwrap()
            .rasterize(1.0 / 16.0)
            .unwrap()
            .into_shared();
        let (seed, eigen) =
            default_initial_condition(&grid, 1.0, &[], Some(&EigenOptions::default())).unwrap();
        assert!(eigen.is_some());
        assert_relative_eq!(seed.sup(), 0.1, max_relative = 1e-9);
        // Skipped eigensolve: centered bump, still peaking at 0.1.
        let (bump, none) = default_initial_condition(&grid, 1.0, &[], None).unwrap();
        assert!(none.is_none());
        assert_relative_eq!(bump.sup(), 0.1, max_relative = 1e-12);
        assert!(bump.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn divergent_linear_growth_is_an_error() {
        let grid = interval_grid(4.0, 32);
        let initial = FieldState::from_fn(grid, |x| (PI * x[0] / 4.0).sin()).unwrap();
        // Strongly supercritical pure-linear model: unbounded growth.
        let result = iterate_and_classify(
            &initial,
            &GrowthMap::linear(50.0).unwrap(),
            0.01,
            &[],
            &ReactionTerm::Linear { b: 2.0 },
            &ClassifyOptions {
                max_cycles: 40,
                dt: 5e-3,
                ..Default::default()
            },
            None,
        );
        assert!(matches!(result, Err(Error::Divergence { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(3))]
        #[test]
        fn ordered_seeds_stay_ordered(seed in 0u64..1000) {
            // Comparison principle: pointwise-ordered initial data stays
            // ordered through 20 cycles (2-D, monotone recruitment).
            let grid = Domain::rect(&[1.0, 1.0]).unwrap()
                .rasterize(0.1).unwrap().into_shared();
            let mix = |flat: usize, salt: u64| {
                // Cheap deterministic hash to [0,1).
                let mut z = flat as u64 ^ (salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
                z ^= z >> 33;
                z = z.wrapping_mul(0xff51_afd7_ed55_8ccd);
                z ^= z >> 33;
                (z >> 11) as f64 / (1u64 << 53) as f64
            };
            let lower = FieldState::from_fn(grid.clone(),
                |_| 0.0).unwrap();
            let mut lower = lower;
            let mut upper = lower.clone();
            for &flat in &grid.interior_nodes {
                let a = 0.2 * mix(flat, seed);
                let b = a + 0.3 * mix(flat, seed ^ 0xabcd);
                lower.values[flat] = a;
                upper.values[flat] = b;
            }
            let g = GrowthMap::beverton_holt(1.5).unwrap();
            let f = ReactionTerm::Logistic { r: 0.8 };
            for _ in 0..20 {
                lower = impulse_cycle(&lower, &g, 0.05, &[], &f, 5e-3).unwrap();
                upper = impulse_cycle(&upper, &g, 0.05, &[], &f, 5e-3).unwrap();
                for flat in 0..lower.values.len() {
                    prop_assert!(
                        upper.values[flat] - lower.values[flat] >= -1e-9,
                        "order violated at node {flat}"
                    );
                }
            }
        }
    }
}
