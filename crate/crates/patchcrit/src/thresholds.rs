//! Critical habitat sizes, extreme volumes, and the application presets.
//!
//! Every quantity here answers the same question from a different angle:
//! how large (or how gentle) must the world be for the seasonal growth to
//! beat the seasonal loss? Persistence of the linearized dynamics needs
//! `λ1 < f'(0) + ln g'(0)`; solving that inequality for a box side, a ball
//! radius, a volume, a diffusivity, a removal fraction, or a habitat-shift
//! speed produces each threshold below.
//!
//! Size thresholds obey a trichotomy. With a positive effective margin the
//! critical size is finite. On the sign boundary and beyond it no finite
//! size works and the report says so (`ArbitrarilyLarge`, value absent)
//! rather than inventing a sentinel number. Preset parameters use
//! `NoPersistence` when no admissible parameter value can rescue the
//! population.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::unit_ball_volume;
use crate::kinetics::{GrowthMap, ReactionTerm};
use crate::spectral::bessel_first_zero;

/// What kind of quantity a [`ThresholdReport`] carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    CriticalLength,
    CriticalRadius,
    LengthConstraint,
    ExtremeVolume,
    Speed,
    PresetParameter,
}

/// Whether a threshold is attained at a finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// The threshold value is reported.
    Finite,
    /// No finite size satisfies the persistence condition — the critical
    /// size grows without bound (value absent).
    ArbitrarilyLarge,
    /// No admissible value of the swept parameter allows persistence
    /// (value absent).
    NoPersistence,
}

/// Which lower-bound machinery an extreme volume uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    /// Box domains, exact (and exactly the critical hypercube volume).
    Rect,
    /// Symmetrization (Rayleigh–Faber–Krahn): valid for every shape.
    Rfk,
    /// Berezin–Li–Yau: weaker but spectrum-wide.
    LiYau,
}

/// Echo of the inputs a threshold was computed from. Fields that play no
/// role for a particular quantity stay unset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub advection: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<VolumeMethod>,
}

/// One computed threshold: what it is, whether it is finite, and the
/// inputs it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Stable identifier, e.g. `"hypercube_side"` or `"extreme_mortality"`.
    pub name: String,
    pub kind: QuantityKind,
    pub regime: Regime,
    /// Present exactly when `regime` is `Finite`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub inputs: ThresholdInputs,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ThresholdReport {
    fn finite(name: &str, kind: QuantityKind, value: f64, inputs: ThresholdInputs) -> Self {
        ThresholdReport {
            name: name.into(),
            kind,
            regime: Regime::Finite,
            value: Some(value),
            inputs,
            note: None,
        }
    }

    fn unbounded(name: &str, kind: QuantityKind, inputs: ThresholdInputs, note: &str) -> Self {
        ThresholdReport {
            name: name.into(),
            kind,
            regime: Regime::ArbitrarilyLarge,
            value: None,
            inputs,
            note: Some(note.into()),
        }
    }

    fn hopeless(name: &str, kind: QuantityKind, inputs: ThresholdInputs, note: &str) -> Self {
        ThresholdReport {
            name: name.into(),
            kind,
            regime: Regime::NoPersistence,
            value: None,
            inputs,
            note: Some(note.into()),
        }
    }

    fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.into());
        self
    }
}

fn validate_d(d: f64) -> Result<()> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "diffusivity must be positive and finite, got {d}"
        )));
    }
    Ok(())
}

fn speed_squared(advection: &[f64]) -> Result<f64> {
    if advection.len() > 3 {
        return Err(Error::InvalidParameter(format!(
            "drift vectors have at most 3 components, got {}",
            advection.len()
        )));
    }
    if advection.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "drift vector must be finite: {advection:?}"
        )));
    }
    Ok(advection.iter().map(|v| v * v).sum())
}

fn validate_dim(dim: usize) -> Result<()> {
    if dim < 1 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    Ok(())
}

fn margin_of(f: &ReactionTerm, g: &GrowthMap) -> Result<(f64, f64, f64)> {
    f.validate()?;
    g.validate()?;
    let fs = f.slope_at_zero();
    let gs = g.slope_at_zero();
    Ok((fs, gs, fs + gs.ln()))
}

const UNBOUNDED_NOTE: &str = "the drift loss exceeds the growth margin; \
     no finite habitat of this kind sustains the population";

/// Target value `S*` for the box-dimension constraint: a box
/// `(0,L_1)×…×(0,L_n)` sustains the population exactly when
/// `Σ 1/L_i² < S*`, with `S* = [f'(0) + ln g'(0) − |a|²/(4d)]/(dπ²)`.
/// When the bracket is not positive no box of any size works.
pub fn critical_rect_constraint(
    d: f64,
    advection: &[f64],
    f: &ReactionTerm,
    g: &GrowthMap,
) -> Result<ThresholdReport> {
    validate_d(d)?;
    let a2 = speed_squared(advection)?;
    let (fs, gs, margin) = margin_of(f, g)?;
    let inputs = ThresholdInputs {
        d: Some(d),
        advection: advection.to_vec(),
        f_slope: Some(fs),
        g_slope: Some(gs),
        ..Default::default()
    };
    let eff = margin - a2 / (4.0 * d);
    if eff > 0.0 {
        Ok(ThresholdReport::finite(
            "rect_constraint",
            QuantityKind::LengthConstraint,
            eff / (d * PI * PI),
            inputs,
        )
        .with_note("persistence iff the sum of inverse squared side lengths stays below this"))
    } else {
        Ok(ThresholdReport::unbounded(
            "rect_constraint",
            QuantityKind::LengthConstraint,
            inputs,
            UNBOUNDED_NOTE,
        ))
    }
}

/// Critical side `L*` of the hypercube `(0,L)^n`:
/// `L* = 2πd √(n/(4d[f'(0)+ln g'(0)] − |a|²))`. Cubes longer than `L*` on
/// each side sustain the population; the report flags the regime where no
/// finite cube does.
pub fn critical_hypercube_side(
    d: f64,
    advection: &[f64],
    f: &ReactionTerm,
    g: &GrowthMap,
    dim: usize,
) -> Result<ThresholdReport> {
    validate_d(d)?;
    validate_dim(dim)?;
    let a2 = speed_squared(advection)?;
    let (fs, gs, margin) = margin_of(f, g)?;
    let inputs = ThresholdInputs {
        d: Some(d),
        advection: advection.to_vec(),
        f_slope: Some(fs),
        g_slope: Some(gs),
        dim: Some(dim),
        ..Default::default()
    };
    let disc = 4.0 * d * margin - a2;
    if disc > 0.0 {
        Ok(ThresholdReport::finite(
            "hypercube_side",
            QuantityKind::CriticalLength,
            2.0 * PI * d * (dim as f64 / disc).sqrt(),
            inputs,
        ))
    } else {
        Ok(ThresholdReport::unbounded(
            "hypercube_side",
            QuantityKind::CriticalLength,
            inputs,
            UNBOUNDED_NOTE,
        ))
    }
}

/// Critical radius `R*` of the ball in `n` dimensions (no drift):
/// `R* = j_{n/2−1,1} √(d/[f'(0)+ln g'(0)])`. Balls larger than `R*`
/// sustain the population; nonpositive margin means none do.
pub fn critical_ball_radius(
    d: f64,
    f: &ReactionTerm,
    g: &GrowthMap,
    dim: usize,
) -> Result<ThresholdReport> {
    validate_d(d)?;
    validate_dim(dim)?;
    let (fs, gs, margin) = margin_of(f, g)?;
    let inputs = ThresholdInputs {
        d: Some(d),
        f_slope: Some(fs),
        g_slope: Some(gs),
        dim: Some(dim),
        ..Default::default()
    };
    if margin > 0.0 {
        let j = bessel_first_zero(dim as f64 / 2.0 - 1.0)?;
        Ok(ThresholdReport::finite(
            "ball_radius",
            QuantityKind::CriticalRadius,
            j * (d / margin).sqrt(),
            inputs,
        ))
    } else {
        Ok(ThresholdReport::unbounded(
            "ball_radius",
            QuantityKind::CriticalRadius,
            inputs,
            "nonpositive growth margin; no ball of any radius sustains the population",
        ))
    }
}

/// Extreme volume `V_ex`: domains with `|Ω| < V_ex` go extinct.
///
/// `Rect` is exact for boxes (and equals the critical hypercube volume
/// `(L*)^n`); `Rfk` covers *every* shape via symmetrization; `LiYau` is the
/// Berezin–Li–Yau variant, smaller but derived from a spectrum-wide bound.
/// The shape-free methods remain valid with divergence-free drift, which
/// only raises λ1, so they take no drift term; `Rect` accounts for a
/// constant drift exactly.
pub fn extreme_volume(
    method: VolumeMethod,
    d: f64,
    advection: &[f64],
    f: &ReactionTerm,
    g: &GrowthMap,
    dim: usize,
) -> Result<ThresholdReport> {
    validate_d(d)?;
    validate_dim(dim)?;
    let a2 = speed_squared(advection)?;
    let (fs, gs, margin) = margin_of(f, g)?;
    let n = dim as f64;
    let inputs = ThresholdInputs {
        d: Some(d),
        advection: advection.to_vec(),
        f_slope: Some(fs),
        g_slope: Some(gs),
        dim: Some(dim),
        method: Some(method),
    };
    match method {
        VolumeMethod::Rect => {
            let disc = 4.0 * d * margin - a2;
            if disc > 0.0 {
                Ok(ThresholdReport::finite(
                    "extreme_volume",
                    QuantityKind::ExtremeVolume,
                    (4.0 * d * d * PI * PI * n / disc).powf(n / 2.0),
                    inputs,
                )
                .with_note("boxes with volume at or below this go extinct"))
            } else {
                Ok(ThresholdReport::unbounded(
                    "extreme_volume",
                    QuantityKind::ExtremeVolume,
                    inputs,
                    UNBOUNDED_NOTE,
                ))
            }
        }
        VolumeMethod::Rfk => {
            if margin <= 0.0 {
                return Err(Error::InvalidParameter(
                    "the symmetrization extreme volume needs a positive growth margin".into(),
                ));
            }
            let j = bessel_first_zero(n / 2.0 - 1.0)?;
            Ok(ThresholdReport::finite(
                "extreme_volume",
                QuantityKind::ExtremeVolume,
                unit_ball_volume(dim)? * (d * j * j / margin).powf(n / 2.0),
                inputs,
            )
            .with_note("every shape with volume below this goes extinct"))
        }
        VolumeMethod::LiYau => {
            if margin <= 0.0 {
                return Err(Error::InvalidParameter(
                    "the Li-Yau extreme volume needs a positive growth margin".into(),
                ));
            }
            Ok(ThresholdReport::finite(
                "extreme_volume",
                QuantityKind::ExtremeVolume,
                (4.0 * d * n * PI * PI / ((n + 2.0) * margin)).powf(n / 2.0)
                    / unit_ball_volume(dim)?,
                inputs,
            )
            .with_note("every shape with volume below this goes extinct"))
        }
    }
}

/// Invasion speeds of the 1-D Fisher background with constant drift `a`:
/// `c± = 2√(d f'(0)) ± a` (downstream, upstream). The critical interval
/// length diverges exactly when the slower speed hits zero.
pub fn fisher_speeds(d: f64, f: &ReactionTerm, drift: f64) -> Result<(f64, f64)> {
    validate_d(d)?;
    f.validate()?;
    if !drift.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "drift must be finite, got {drift}"
        )));
    }
    let fs = f.slope_at_zero();
    if fs <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "invasion speeds need a positive reaction slope at zero, got {fs}"
        )));
    }
    let c = 2.0 * (d * fs).sqrt();
    Ok((c + drift, c - drift))
}

/// The four worked applications. Each evaluates to a set of
/// [`ThresholdReport`]s via [`application_preset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum Preset {
    /// Protected patch in a hostile ocean: within-season mortality `γ`
    /// (reaction `−γu`), between-season recruitment by `growth`. Reports
    /// the critical square side, critical disk/ball radius, the shape-free
    /// extreme volume, and — when `volume` is given — the mortality level
    /// `γ_ex` beyond which a reserve of that volume fails regardless of
    /// shape.
    MarineReserve {
        d: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        advection: Vec<f64>,
        gamma: f64,
        growth: GrowthMap,
        dim: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        volume: Option<f64>,
    },
    /// Rectangular park `L1 × L2` with mortality `γ` and Beverton–Holt
    /// recruitment of strength `lambda`: critical diffusivity `d*` (the
    /// park holds species that move less than this) and the shape-free
    /// extreme diffusivity `d_ex`.
    TerrestrialReserve { gamma: f64, lambda: f64, l1: f64, l2: f64 },
    /// Crop field `L1 × L2` with in-season logistic growth `r` and a
    /// between-season removal fraction `s` (survival `1 − s`): the removal
    /// needed on this field, and the removal that works on every field of
    /// the same area.
    InsectPest { d: f64, r: f64, l1: f64, l2: f64 },
    /// Habitat `L1 × L2` shifting at speed `c` (modelled in the co-moving
    /// frame as constant drift): the largest shift speed the population
    /// can track.
    ClimateChange { d: f64, lambda: f64, gamma: f64, l1: f64, l2: f64 },
}

fn validate_sides(l1: f64, l2: f64) -> Result<()> {
    if !(l1 > 0.0) || !(l2 > 0.0) || !l1.is_finite() || !l2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "side lengths must be positive and finite, got {l1} x {l2}"
        )));
    }
    Ok(())
}

fn validate_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mortality must be nonnegative and finite, got {gamma}"
        )));
    }
    Ok(())
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "recruitment strength must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Evaluate a preset to its threshold set.
pub fn application_preset(preset: &Preset) -> Result<Vec<ThresholdReport>> {
    match preset {
        Preset::MarineReserve {
            d,
            advection,
            gamma,
            growth,
            dim,
            volume,
        } => marine_reserve(*d, advection, *gamma, growth, *dim, *volume),
        Preset::TerrestrialReserve { gamma, lambda, l1, l2 } => {
            terrestrial_reserve(*gamma, *lambda, *l1, *l2)
        }
        Preset::InsectPest { d, r, l1, l2 } => insect_pest(*d, *r, *l1, *l2),
        Preset::ClimateChange { d, lambda, gamma, l1, l2 } => {
            climate_change(*d, *lambda, *gamma, *l1, *l2)
        }
    }
}

fn marine_reserve(
    d: f64,
    advection: &[f64],
    gamma: f64,
    growth: &GrowthMap,
    dim: usize,
    volume: Option<f64>,
) -> Result<Vec<ThresholdReport>> {
    validate_d(d)?;
    validate_gamma(gamma)?;
    validate_dim(dim)?;
    growth.validate()?;
    let a2 = speed_squared(advection)?;
    let gs = growth.slope_at_zero();
    let margin = gs.ln() - gamma;
    let n = dim as f64;
    let base = ThresholdInputs {
        d: Some(d),
        advection: advection.to_vec(),
        f_slope: Some(-gamma),
        g_slope: Some(gs),
        dim: Some(dim),
        ..Default::default()
    };
    let mut out = Vec::new();

    // Critical square (hypercube) side, drift included.
    let disc = 4.0 * d * margin - a2;
    out.push(if disc > 0.0 {
        ThresholdReport::finite(
            "critical_length",
            QuantityKind::CriticalLength,
            2.0 * PI * d * (n / disc).sqrt(),
            base.clone(),
        )
    } else {
        ThresholdReport::unbounded(
            "critical_length",
            QuantityKind::CriticalLength,
            base.clone(),
            UNBOUNDED_NOTE,
        )
    });

    // Critical ball radius; with nonzero divergence-free drift the
    // drift-free radius is only a lower bound on the true critical radius.
    let j = bessel_first_zero(n / 2.0 - 1.0)?;
    let mut radius = if margin > 0.0 {
        ThresholdReport::finite(
            "critical_radius",
            QuantityKind::CriticalRadius,
            j * (d / margin).sqrt(),
            base.clone(),
        )
    } else {
        ThresholdReport::unbounded(
            "critical_radius",
            QuantityKind::CriticalRadius,
            base.clone(),
            "nonpositive growth margin; no ball of any radius sustains the population",
        )
    };
    if a2 > 0.0 && margin > 0.0 {
        radius = radius
            .with_note("drift-free value; with divergence-free drift the true critical radius is at least this");
    }
    out.push(radius);

    // Shape-free extinction volume.
    if margin > 0.0 {
        out.push(
            ThresholdReport::finite(
                "extreme_volume",
                QuantityKind::ExtremeVolume,
                unit_ball_volume(dim)? * (d * j * j / margin).powf(n / 2.0),
                ThresholdInputs {
                    method: Some(VolumeMethod::Rfk),
                    ..base.clone()
                },
            )
            .with_note("every reserve shape with volume below this fails"),
        );
    }

    // Mortality ceiling for a reserve of the given volume.
    if let Some(vol) = volume {
        if !(vol > 0.0) || !vol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "reserve volume must be positive and finite, got {vol}"
            )));
        }
        let floor = d * j * j * (unit_ball_volume(dim)? / vol).powf(2.0 / n);
        let gamma_ex = gs.ln() - floor;
        let inputs = ThresholdInputs {
            method: Some(VolumeMethod::Rfk),
            ..base.clone()
        };
        out.push(if gamma_ex > 0.0 {
            ThresholdReport::finite(
                "extreme_mortality",
                QuantityKind::PresetParameter,
                gamma_ex,
                inputs,
            )
            .with_note("mortality at or above this defeats every reserve shape of this volume")
        } else {
            ThresholdReport::hopeless(
                "extreme_mortality",
                QuantityKind::PresetParameter,
                inputs,
                "this volume fails at every mortality level, even zero",
            )
        });
    }
    Ok(out)
}

fn terrestrial_reserve(gamma: f64, lambda: f64, l1: f64, l2: f64) -> Result<Vec<ThresholdReport>> {
    validate_gamma(gamma)?;
    validate_lambda(lambda)?;
    validate_sides(l1, l2)?;
    let margin = (1.0 + lambda).ln() - gamma;
    let base = ThresholdInputs {
        f_slope: Some(-gamma),
        g_slope: Some(1.0 + lambda),
        dim: Some(2),
        ..Default::default()
    };
    if margin <= 0.0 {
        let note = "mortality cancels the recruitment gain; no diffusivity sustains the park";
        return Ok(vec![
            ThresholdReport::hopeless(
                "critical_diffusion",
                QuantityKind::PresetParameter,
                base.clone(),
                note,
            ),
            ThresholdReport::hopeless(
                "extreme_diffusion",
                QuantityKind::PresetParameter,
                base,
                note,
            ),
        ]);
    }
    let j = bessel_first_zero(0.0)?;
    let d_star = margin * (l1 * l1 * l2 * l2) / (PI * PI * (l1 * l1 + l2 * l2));
    let d_ex = l1 * l2 * margin / (PI * j * j);
    Ok(vec![
        ThresholdReport::finite(
            "critical_diffusion",
            QuantityKind::PresetParameter,
            d_star,
            base.clone(),
        )
        .with_note("species diffusing slower than this persist in the rectangular park"),
        ThresholdReport::finite(
            "extreme_diffusion",
            QuantityKind::PresetParameter,
            d_ex,
            ThresholdInputs {
                method: Some(VolumeMethod::Rfk),
                ..base
            },
        )
        .with_note("species diffusing at or above this fail in every park of the same area"),
    ])
}

fn insect_pest(d: f64, r: f64, l1: f64, l2: f64) -> Result<Vec<ThresholdReport>> {
    validate_d(d)?;
    validate_sides(l1, l2)?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "logistic growth rate must be positive and finite, got {r}"
        )));
    }
    let base = ThresholdInputs {
        d: Some(d),
        f_slope: Some(r),
        dim: Some(2),
        ..Default::default()
    };
    let mut out = Vec::new();
    // Removal fraction s enters through ln(1−s): persistence on the field
    // iff s < s* = 1 − e^{λ1 − r}.
    let lam_rect = d * PI * PI * (1.0 / (l1 * l1) + 1.0 / (l2 * l2));
    out.push(if lam_rect < r {
        ThresholdReport::finite(
            "critical_removal",
            QuantityKind::PresetParameter,
            1.0 - (lam_rect - r).exp(),
            base.clone(),
        )
        .with_note("removing at least this fraction each season clears the pest from this field")
    } else {
        ThresholdReport::hopeless(
            "critical_removal",
            QuantityKind::PresetParameter,
            base.clone(),
            "the field is already below critical size; the pest dies out without removal",
        )
    });
    let j = bessel_first_zero(0.0)?;
    let lam_rfk = d * PI * j * j / (l1 * l2);
    out.push(if lam_rfk < r {
        ThresholdReport::finite(
            "extreme_removal",
            QuantityKind::PresetParameter,
            1.0 - (lam_rfk - r).exp(),
            ThresholdInputs {
                method: Some(VolumeMethod::Rfk),
                ..base
            },
        )
        .with_note("this removal fraction clears every field of the same area")
    } else {
        ThresholdReport::hopeless(
            "extreme_removal",
            QuantityKind::PresetParameter,
            ThresholdInputs {
                method: Some(VolumeMethod::Rfk),
                ..base
            },
            "every field of this area is below critical size without removal",
        )
    });
    Ok(out)
}

fn climate_change(d: f64, lambda: f64, gamma: f64, l1: f64, l2: f64) -> Result<Vec<ThresholdReport>> {
    validate_d(d)?;
    validate_lambda(lambda)?;
    validate_gamma(gamma)?;
    validate_sides(l1, l2)?;
    let margin = (1.0 + lambda).ln() - gamma;
    let inputs = ThresholdInputs {
        d: Some(d),
        f_slope: Some(-gamma),
        g_slope: Some(1.0 + lambda),
        dim: Some(2),
        ..Default::default()
    };
    let c_sq =
        4.0 * d * margin - 4.0 * d * d * PI * PI * (1.0 / (l1 * l1) + 1.0 / (l2 * l2));
    Ok(vec![if c_sq > 0.0 {
        ThresholdReport::finite(
            "critical_speed",
            QuantityKind::Speed,
            c_sq.sqrt(),
            inputs,
        )
        .with_note("the population tracks habitat shifts slower than this")
    } else if c_sq == 0.0 {
        ThresholdReport::finite("critical_speed", QuantityKind::Speed, 0.0, inputs)
            .with_note("only a stationary habitat of this size persists")
    } else {
        ThresholdReport::hopeless(
            "critical_speed",
            QuantityKind::Speed,
            inputs,
            "no persistence possible: the habitat fails even without shifting",
        )
    }])
}
