//! Conjugacy coefficient rules and their clipping modes.
//!
//! Each player's search direction is `d_n = -g_n + beta_n * d_{n-1}`. This
//! module computes `beta_n` from the current gradient, the previous gradient
//! and the previous direction. Seven classical nonlinear-CG formulas are
//! provided, plus the degenerate `Zero` (plain SGD) and `Constant` (heavy-ball
//! momentum) rules.
//!
//! Clipping: the convergence theory wants nonnegative, bounded weights, so the
//! default mode clamps the raw formula into `[0, 1/2]`. `ClampHalfPowerDecay`
//! additionally multiplies by `n^(-eta)`, which drives the weights to zero and
//! is the mode the decaying-rate experiments use. `Raw` preserves the
//! textbook value (sign included) for research use.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vector::ParameterVector;

/// Default threshold below which a rule's denominator counts as zero.
pub const EPS_DENOM: f64 = 1e-30;

/// Which formula produces the raw conjugacy coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaKind {
    /// `beta = 0`: plain SGD.
    Zero,
    /// `beta = c`: heavy-ball momentum with coefficient `c` in `[0, 1]`.
    Constant(f64),
    /// Fletcher-Reeves: `||g_n||^2 / ||g_{n-1}||^2`.
    FletcherReeves,
    /// Polak-Ribiere-Polyak: `<g_n, g_n - g_{n-1}> / ||g_{n-1}||^2`.
    PolakRibiere,
    /// Hestenes-Stiefel: `<g_n, y> / <d_{n-1}, y>` with `y = g_n - g_{n-1}`.
    HestenesStiefel,
    /// Dai-Yuan: `||g_n||^2 / <d_{n-1}, y>`.
    DaiYuan,
    /// Hager-Zhang: `HS - mu * ||y||^2 <g_n, d_{n-1}> / <d_{n-1}, y>^2`,
    /// requires `mu > 1/4`.
    HagerZhang { mu: f64 },
    /// `max(0, min(HS, DY))`.
    HybridHsDy,
    /// `max(0, min(FR, PRP))`.
    HybridFrPrp,
}

/// Default Hager-Zhang curvature weight.
pub const DEFAULT_HAGER_ZHANG_MU: f64 = 0.5;

/// How the raw formula value is post-processed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClipMode {
    /// Clamp into `[0, 1/2]` (the bounded-weight condition of the theory).
    ClampHalf,
    /// Clamp into `[0, 1/2]`, then multiply by `n^(-eta)`, `eta` in (0, 1).
    /// Yields weights whose running average vanishes.
    ClampHalfPowerDecay { eta: f64 },
    /// No post-processing; negative and large values pass through.
    Raw,
}

/// A fully specified conjugacy rule: formula plus clipping mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaRule {
    kind: BetaKind,
    clip: ClipMode,
}

impl BetaRule {
    pub fn new(kind: BetaKind, clip: ClipMode) -> Result<Self> {
        if let BetaKind::Constant(c) = kind {
            if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
                return Err(Error::InvalidArgument(format!(
                    "constant conjugacy coefficient must lie in [0, 1], got {c}"
                )));
            }
        }
        if let BetaKind::HagerZhang { mu } = kind {
            if !(mu.is_finite() && mu > 0.25) {
                return Err(Error::InvalidArgument(format!(
                    "Hager-Zhang weight must be > 1/4, got {mu}"
                )));
            }
        }
        if let ClipMode::ClampHalfPowerDecay { eta } = clip {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "clip decay exponent must lie in (0, 1), got {eta}"
                )));
            }
        }
        Ok(Self { kind, clip })
    }

    /// `Zero` ignores the clip mode; this is the canonical SGD rule.
    pub fn zero() -> Self {
        Self {
            kind: BetaKind::Zero,
            clip: ClipMode::Raw,
        }
    }

    /// Momentum with coefficient `c`, unclipped.
    pub fn constant(c: f64) -> Result<Self> {
        Self::new(BetaKind::Constant(c), ClipMode::Raw)
    }

    pub fn kind(&self) -> BetaKind {
        self.kind
    }

    pub fn clip(&self) -> ClipMode {
        self.clip
    }

    pub fn with_clip(&self, clip: ClipMode) -> Result<Self> {
        Self::new(self.kind, clip)
    }
}

/// The state a conjugacy rule reads at step `n`.
///
/// `step` is 1-based like the schedules; on the very first step pass the
/// zero vector as `g_prev` (and usually as `d_prev`), which makes every
/// gradient-history rule return 0 through its denominator guard.
#[derive(Clone, Debug)]
pub struct BetaInputs<'a> {
    pub g_curr: &'a ParameterVector,
    pub g_prev: &'a ParameterVector,
    pub d_prev: &'a ParameterVector,
    pub step: u64,
    pub eps_denom: f64,
}

impl<'a> BetaInputs<'a> {
    pub fn new(
        g_curr: &'a ParameterVector,
        g_prev: &'a ParameterVector,
        d_prev: &'a ParameterVector,
        step: u64,
    ) -> Result<Self> {
        let dim = g_curr.dim();
        for v in [g_prev, d_prev] {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
        }
        if step == 0 {
            return Err(Error::InvalidArgument(
                "conjugacy steps are 1-based; got step 0".into(),
            ));
        }
        Ok(Self {
            g_curr,
            g_prev,
            d_prev,
            step,
            eps_denom: EPS_DENOM,
        })
    }

    pub fn with_eps_denom(mut self, eps: f64) -> Self {
        self.eps_denom = eps;
        self
    }
}

/// Evaluates a conjugacy rule. A denominator with absolute value at most
/// `eps_denom` makes the affected formula return exactly 0.0 (never NaN).
pub fn compute_beta(rule: &BetaRule, inputs: &BetaInputs) -> Result<f64> {
    let raw = match rule.kind {
        BetaKind::Zero => return Ok(0.0),
        BetaKind::Constant(c) => c,
        BetaKind::FletcherReeves => raw_fr(inputs)?,
        BetaKind::PolakRibiere => raw_prp(inputs)?,
        BetaKind::HestenesStiefel => raw_hs(inputs)?,
        BetaKind::DaiYuan => raw_dy(inputs)?,
        BetaKind::HagerZhang { mu } => raw_hz(inputs, mu)?,
        BetaKind::HybridHsDy => {
            let a = apply_clip(raw_hs(inputs)?, rule.clip, inputs.step)?;
            let b = apply_clip(raw_dy(inputs)?, rule.clip, inputs.step)?;
            return Ok(a.min(b).max(0.0));
        }
        BetaKind::HybridFrPrp => {
            let a = apply_clip(raw_fr(inputs)?, rule.clip, inputs.step)?;
            let b = apply_clip(raw_prp(inputs)?, rule.clip, inputs.step)?;
            return Ok(a.min(b).max(0.0));
        }
    };
    apply_clip(raw, rule.clip, inputs.step)
}

fn apply_clip(raw: f64, clip: ClipMode, step: u64) -> Result<f64> {
    if raw.is_nan() {
        return Err(Error::NonFinite {
            context: "conjugacy coefficient".into(),
        });
    }
    match clip {
        ClipMode::Raw => {
            if !raw.is_finite() {
                return Err(Error::NonFinite {
                    context: "raw conjugacy coefficient".into(),
                });
            }
            Ok(raw)
        }
        // clamp maps +inf to 1/2 and -inf to 0, which is the right limit.
        ClipMode::ClampHalf => Ok(raw.clamp(0.0, 0.5)),
        ClipMode::ClampHalfPowerDecay { eta } => {
            Ok(raw.clamp(0.0, 0.5) * (step as f64).powf(-eta))
        }
    }
}

fn raw_fr(i: &BetaInputs) -> Result<f64> {
    let denom = i.g_prev.dot(i.g_prev)?;
    if denom.abs() <= i.eps_denom {
        return Ok(0.0);
    }
    Ok(i.g_curr.dot(i.g_curr)? / denom)
}

fn raw_prp(i: &BetaInputs) -> Result<f64> {
    let denom = i.g_prev.dot(i.g_prev)?;
    if denom.abs() <= i.eps_denom {
        return Ok(0.0);
    }
    let y = i.g_curr.sub(i.g_prev)?;
    Ok(i.g_curr.dot(&y)? / denom)
}

fn raw_hs(i: &BetaInputs) -> Result<f64> {
    let y = i.g_curr.sub(i.g_prev)?;
    let denom = i.d_prev.dot(&y)?;
    if denom.abs() <= i.eps_denom {
        return Ok(0.0);
    }
    Ok(i.g_curr.dot(&y)? / denom)
}

fn raw_dy(i: &BetaInputs) -> Result<f64> {
    let y = i.g_curr.sub(i.g_prev)?;
    let denom = i.d_prev.dot(&y)?;
    if denom.abs() <= i.eps_denom {
        return Ok(0.0);
    }
    Ok(i.g_curr.dot(i.g_curr)? / denom)
}

fn raw_hz(i: &BetaInputs, mu: f64) -> Result<f64> {
    let y = i.g_curr.sub(i.g_prev)?;
    let denom = i.d_prev.dot(&y)?;
    if denom.abs() <= i.eps_denom {
        return Ok(0.0);
    }
    let hs = i.g_curr.dot(&y)? / denom;
    let correction = mu * y.dot(&y)? * i.g_curr.dot(i.d_prev)? / (denom * denom);
    Ok(hs - correction)
}

impl fmt::Display for BetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaKind::Zero => write!(f, "zero"),
            BetaKind::Constant(c) => write!(f, "const:{c}"),
            BetaKind::FletcherReeves => write!(f, "fr"),
            BetaKind::PolakRibiere => write!(f, "prp"),
            BetaKind::HestenesStiefel => write!(f, "hs"),
            BetaKind::DaiYuan => write!(f, "dy"),
            BetaKind::HagerZhang { mu } => write!(f, "hz:{mu}"),
            BetaKind::HybridHsDy => write!(f, "hyb1"),
            BetaKind::HybridFrPrp => write!(f, "hyb2"),
        }
    }
}

impl FromStr for BetaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad conjugacy rule `{s}`"));
        if let Some(rest) = s.strip_prefix("const:") {
            let c: f64 = rest.parse().map_err(|_| bad())?;
            // range-check via the rule constructor
            BetaRule::constant(c)?;
            return Ok(BetaKind::Constant(c));
        }
        if let Some(rest) = s.strip_prefix("hz:") {
            let mu: f64 = rest.parse().map_err(|_| bad())?;
            BetaRule::new(BetaKind::HagerZhang { mu }, ClipMode::Raw)?;
            return Ok(BetaKind::HagerZhang { mu });
        }
        match s {
            "zero" => Ok(BetaKind::Zero),
            "fr" => Ok(BetaKind::FletcherReeves),
            "prp" => Ok(BetaKind::PolakRibiere),
            "hs" => Ok(BetaKind::HestenesStiefel),
            "dy" => Ok(BetaKind::DaiYuan),
            "hz" => Ok(BetaKind::HagerZhang {
                mu: DEFAULT_HAGER_ZHANG_MU,
            }),
            "hyb1" => Ok(BetaKind::HybridHsDy),
            "hyb2" => Ok(BetaKind::HybridFrPrp),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ClipMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClipMode::ClampHalf => write!(f, "clip"),
            ClipMode::ClampHalfPowerDecay { eta } => write!(f, "clip-decay:{eta}"),
            ClipMode::Raw => write!(f, "raw"),
        }
    }
}

impl FromStr for ClipMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("clip-decay:") {
            let eta: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("bad clip mode `{s}`")))?;
            // range-check via the rule constructor
            BetaRule::new(BetaKind::Zero, ClipMode::ClampHalfPowerDecay { eta })?;
            return Ok(ClipMode::ClampHalfPowerDecay { eta });
        }
        match s {
            "clip" => Ok(ClipMode::ClampHalf),
            "raw" => Ok(ClipMode::Raw),
            _ => Err(Error::Config(format!("bad clip mode `{s}`"))),
        }
    }
}
