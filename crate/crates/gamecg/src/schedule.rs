//! Learning-rate schedules and the two-timescale regime diagnostic.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A deterministic learning-rate schedule, evaluated at 1-based step `n`.
///
/// The solver iterates from step 0 and passes `n + 1` here, so the first
/// applied rate is `rate_at(1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// `a_n = a` for all n.
    Constant { rate: f64 },
    /// `a_n = a * n^(-eta)` with `eta` in (0, 1).
    PowerDecay { rate: f64, eta: f64 },
    /// `a_n = a * gamma^floor((n - 1) / period)` with `gamma` in (0, 1).
    StepDecay { rate: f64, gamma: f64, period: u64 },
}

impl Schedule {
    pub fn constant(rate: f64) -> Result<Self> {
        validate_rate(rate)?;
        Ok(Self::Constant { rate })
    }

    pub fn power_decay(rate: f64, eta: f64) -> Result<Self> {
        validate_rate(rate)?;
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "power-decay exponent must lie in (0, 1), got {eta}"
            )));
        }
        Ok(Self::PowerDecay { rate, eta })
    }

    pub fn step_decay(rate: f64, gamma: f64, period: u64) -> Result<Self> {
        validate_rate(rate)?;
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step-decay factor must lie in (0, 1), got {gamma}"
            )));
        }
        if period == 0 {
            return Err(Error::InvalidArgument(
                "step-decay period must be >= 1".into(),
            ));
        }
        Ok(Self::StepDecay {
            rate,
            gamma,
            period,
        })
    }

    /// The rate at 1-based step `n`. Panics on `n = 0`: that is a caller bug,
    /// not a runtime condition.
    ///
    /// Always strictly positive: step decay at extreme `n` can underflow
    /// `gamma^k` to zero, so the result is floored at the smallest positive
    /// subnormal (below every other positive float, keeping the sequence
    /// non-increasing) rather than breaking the positivity contract.
    pub fn rate_at(&self, n: u64) -> f64 {
        assert!(n >= 1, "schedules are 1-based; step 0 has no rate");
        let r = match *self {
            Self::Constant { rate } => rate,
            Self::PowerDecay { rate, eta } => rate * (n as f64).powf(-eta),
            Self::StepDecay {
                rate,
                gamma,
                period,
            } => {
                let k = (n - 1) / period;
                rate * gamma.powi(k.min(i32::MAX as u64) as i32)
            }
        };
        if r > 0.0 {
            r
        } else {
            f64::from_bits(1)
        }
    }

    /// The base rate `a`, i.e. `rate_at(1)`.
    pub fn base_rate(&self) -> f64 {
        match *self {
            Self::Constant { rate }
            | Self::PowerDecay { rate, .. }
            | Self::StepDecay { rate, .. } => rate,
        }
    }

    /// Same shape, different base rate. Grid sweeps use this to vary `a`
    /// while keeping the decay structure of the template schedule.
    pub fn with_base_rate(&self, rate: f64) -> Result<Self> {
        validate_rate(rate)?;
        Ok(match *self {
            Self::Constant { .. } => Self::Constant { rate },
            Self::PowerDecay { eta, .. } => Self::PowerDecay { rate, eta },
            Self::StepDecay { gamma, period, .. } => Self::StepDecay {
                rate,
                gamma,
                period,
            },
        })
    }
}

fn validate_rate(rate: f64) -> Result<()> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be finite and > 0, got {rate}"
        )));
    }
    Ok(())
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Constant { rate } => write!(f, "const:{rate:e}"),
            Self::PowerDecay { rate, eta } => write!(f, "power:{rate:e}:{eta}"),
            Self::StepDecay {
                rate,
                gamma,
                period,
            } => write!(f, "step:{rate:e}:{gamma}:{period}"),
        }
    }
}

/// Parses `const:<a>`, `power:<a>:<eta>` or `step:<a>:<gamma>:<T>`.
impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |what: &str| Error::Config(format!("bad schedule `{s}`: {what}"));
        let num = |p: &str, what: &str| -> Result<f64> {
            p.parse::<f64>().map_err(|_| bad(what))
        };
        match parts.as_slice() {
            ["const", a] => Schedule::constant(num(a, "rate")?),
            ["power", a, eta] => Schedule::power_decay(num(a, "rate")?, num(eta, "eta")?),
            ["step", a, gamma, t] => {
                let period = t.parse::<u64>().map_err(|_| bad("period"))?;
                Schedule::step_decay(num(a, "rate")?, num(gamma, "gamma")?, period)
            }
            _ => Err(bad("expected const:<a>, power:<a>:<eta> or step:<a>:<gamma>:<T>")),
        }
    }
}

/// Which convergence regime a (generator, discriminator) schedule pair falls
/// into. Advisory only: the solver never refuses a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimescaleRegime {
    /// Both constant: converges to a neighborhood whose radius scales with
    /// the rates, not to the equilibrium itself.
    ConstantNeighborhood,
    /// Both `n^(-1/2)`: the expected-gap rate `O(N^(-1/2))` setting.
    RateOptimal,
    /// `1/2 < eta_b < eta_a < 1`: the almost-sure convergence setting with
    /// gap rate `O(N^(-min(eta, 1 - eta)))` per player.
    AlmostSure,
    /// Both step decay: `O(1/N)` gap when the conjugacy weights are summable.
    StepDecay,
    /// Anything else: no supported guarantee applies.
    Unclassified,
}

impl TimescaleRegime {
    pub fn describe(&self) -> &'static str {
        match self {
            Self::ConstantNeighborhood => {
                "constant rates: expected gap O(1/N) plus a floor proportional to the rates"
            }
            Self::RateOptimal => "matched n^(-1/2) decay: expected gap O(N^(-1/2))",
            Self::AlmostSure => {
                "1/2 < eta_b < eta_a < 1: almost-sure convergence, gap O(N^(-min(eta,1-eta)))"
            }
            Self::StepDecay => "step decay: expected gap O(1/N) under summable conjugacy weights",
            Self::Unclassified => "no supported guarantee matches this schedule pair",
        }
    }
}

impl fmt::Display for TimescaleRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

/// Classifies a two-timescale pair against the supported regimes.
pub fn validate_timescales(generator: &Schedule, discriminator: &Schedule) -> TimescaleRegime {
    use Schedule::*;
    match (generator, discriminator) {
        (Constant { .. }, Constant { .. }) => TimescaleRegime::ConstantNeighborhood,
        (PowerDecay { eta: ea, .. }, PowerDecay { eta: eb, .. }) => {
            if *ea == 0.5 && *eb == 0.5 {
                TimescaleRegime::RateOptimal
            } else if 0.5 < *eb && eb < ea && *ea < 1.0 {
                TimescaleRegime::AlmostSure
            } else {
                TimescaleRegime::Unclassified
            }
        }
        (StepDecay { .. }, StepDecay { .. }) => TimescaleRegime::StepDecay,
        _ => TimescaleRegime::Unclassified,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn power_decay_values() {
        let s = Schedule::power_decay(0.1, 0.5).unwrap();
        assert_eq!(s.rate_at(1), 0.1);
        assert!((s.rate_at(4) - 0.05).abs() < 1e-15);
        assert!((s.rate_at(100) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn step_decay_boundary_is_one_based() {
        // period 10_000: steps 1..=10_000 at the base rate, 10_001 decayed.
        let s = Schedule::step_decay(1.0, 0.9, 10_000).unwrap();
        assert_eq!(s.rate_at(1), 1.0);
        assert_eq!(s.rate_at(10_000), 1.0);
        assert_eq!(s.rate_at(10_001), 0.9);
        assert_eq!(s.rate_at(20_001), 0.9 * 0.9);
    }

    #[test]
    #[should_panic(expected = "1-based")]
    fn rate_at_zero_panics() {
        let _ = Schedule::constant(1.0).unwrap().rate_at(0);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(Schedule::constant(0.0).is_err());
        assert!(Schedule::constant(-1.0).is_err());
        assert!(Schedule::constant(f64::NAN).is_err());
        assert!(Schedule::power_decay(0.1, 0.0).is_err());
        assert!(Schedule::power_decay(0.1, 1.0).is_err());
        assert!(Schedule::step_decay(0.1, 1.0, 10).is_err());
        assert!(Schedule::step_decay(0.1, 0.5, 0).is_err());
    }

    #[test]
    fn step_decay_partial_sums_match_closed_form() {
        // sum over P full periods of length T: a * T * (1 - gamma^P) / (1 - gamma)
        let (a, gamma, t) = (0.3, 0.7, 13u64);
        let s = Schedule::step_decay(a, gamma, t).unwrap();
        for periods in [1u64, 2, 5, 11] {
            let direct: f64 = (1..=periods * t).map(|n| s.rate_at(n)).sum();
            let closed = a * t as f64 * (1.0 - gamma.powi(periods as i32)) / (1.0 - gamma);
            assert!(
                (direct - closed).abs() <= 1e-12 * closed,
                "P={periods}: direct {direct} vs closed form {closed}"
            );
        }
    }

    #[test]
    fn parse_round_trip() {
        for text in ["const:0.001", "power:0.5:0.5", "step:0.01:0.9:500"] {
            let s: Schedule = text.parse().unwrap();
            let again: Schedule = s.to_string().parse().unwrap();
            assert_eq!(s, again);
        }
        assert!("const".parse::<Schedule>().is_err());
        assert!("power:0.1:1.5".parse::<Schedule>().is_err());
        assert!("linear:0.1".parse::<Schedule>().is_err());
        assert!("step:0.1:0.9".parse::<Schedule>().is_err());
    }

    #[test]
    fn regime_classification() {
        let c = Schedule::constant(1e-2).unwrap();
        let p_half = Schedule::power_decay(0.5, 0.5).unwrap();
        let p_a = Schedule::power_decay(0.02, 0.8).unwrap();
        let p_b = Schedule::power_decay(0.01, 0.6).unwrap();
        let sd = Schedule::step_decay(1e-2, 0.9, 500).unwrap();
        assert_eq!(
            validate_timescales(&c, &c),
            TimescaleRegime::ConstantNeighborhood
        );
        assert_eq!(
            validate_timescales(&p_half, &p_half),
            TimescaleRegime::RateOptimal
        );
        assert_eq!(validate_timescales(&p_a, &p_b), TimescaleRegime::AlmostSure);
        // reversed exponents violate eta_b < eta_a
        assert_eq!(
            validate_timescales(&p_b, &p_a),
            TimescaleRegime::Unclassified
        );
        assert_eq!(validate_timescales(&sd, &sd), TimescaleRegime::StepDecay);
        assert_eq!(validate_timescales(&c, &sd), TimescaleRegime::Unclassified);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn rates_are_positive_and_non_increasing(
            kind in 0..3usize,
            rate in 1e-8f64..10.0,
            eta in 0.05f64..0.95,
            gamma in 0.05f64..0.95,
            period in 1u64..1000,
        ) {
            let s = match kind {
                0 => Schedule::constant(rate).unwrap(),
                1 => Schedule::power_decay(rate, eta).unwrap(),
                _ => Schedule::step_decay(rate, gamma, period).unwrap(),
            };
            let mut prev = f64::INFINITY;
            for k in 0..60u32 {
                // log-spaced probe points up to ~1e6
                let n = 1 + (1.26f64.powi(k as i32) as u64);
                let r = s.rate_at(n);
                prop_assert!(r > 0.0 && r.is_finite());
                prop_assert!(r <= prev * (1.0 + 1e-12));
                prev = r;
            }
        }
    }
}
