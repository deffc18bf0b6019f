//! Feedback-gain schedules: constant, time-base-generator (TBG) and
//! rho-scaling, with closed forms of the scalar comparison systems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DELTA: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum GainError {
    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("t = {t} is outside [0, {horizon})")]
    OutsideHorizon { t: f64, horizon: f64 },
    #[error("invalid gain parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TbgParams {
    /// Window length `T_s` in seconds.
    pub period: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl TbgParams {
    pub fn new(period: f64, delta: f64) -> Result<Self, GainError> {
        let p = TbgParams { period, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GainError> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(GainError::InvalidParameter(format!("T_s = {}", self.period)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(GainError::InvalidParameter(format!("delta = {} not in (0, 1)", self.delta)));
        }
        Ok(())
    }

    /// Contraction factor `delta / (1 + delta)` achieved over one window.
    pub fn window_factor(&self) -> f64 {
        self.delta / (1.0 + self.delta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoParams {
    /// Prescribed convergence time.
    pub horizon: f64,
    pub h: u32,
    pub gamma: f64,
}

impl RhoParams {
    pub fn new(horizon: f64, h: u32, gamma: f64) -> Result<Self, GainError> {
        let p = RhoParams { horizon, h, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GainError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(GainError::InvalidParameter(format!("horizon = {}", self.horizon)));
        }
        if self.h < 2 {
            return Err(GainError::InvalidParameter(format!("h = {} < 2", self.h)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(GainError::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        Ok(())
    }

    fn exponent(&self) -> f64 {
        1.0 + f64::from(self.h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum GainSchedule {
    Constant { eta: f64 },
    Tbg(TbgParams),
    Rho(RhoParams),
}

impl GainSchedule {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            GainSchedule::Constant { eta } => *eta,
            GainSchedule::Tbg(p) => tbg_gain(t, p),
            GainSchedule::Rho(p) => pt_gain(t, p),
        }
    }

    pub fn validate(&self) -> Result<(), GainError> {
        match self {
            GainSchedule::Constant { eta } if !(eta.is_finite() && *eta > 0.0) => {
                Err(GainError::InvalidParameter(format!("eta = {eta}")))
            }
            GainSchedule::Constant { .. } => Ok(()),
            GainSchedule::Tbg(p) => p.validate(),
            GainSchedule::Rho(p) => p.validate(),
        }
    }
}

/// `10 tau^6 - 24 tau^5 + 15 tau^4` with `tau = t / T_s`, saturating at 1.
pub fn tbg_epsilon(t: f64, period: f64) -> Result<f64, GainError> {
    if t < 0.0 {
        return Err(GainError::NegativeTime(t));
    }
    if t >= period {
        return Ok(1.0);
    }
    let tau = t / period;
    let t4 = tau * tau * tau * tau;
    Ok(t4 * (15.0 + tau * (-24.0 + 10.0 * tau)))
}

/// Time derivative of [`tbg_epsilon`]: `60 tau^3 (1 - tau)^2 / T_s`.
pub fn tbg_epsilon_rate(t: f64, period: f64) -> f64 {
    if !(0.0..period).contains(&t) {
        return 0.0;
    }
    let tau = t / period;
    let s = 1.0 - tau;
    60.0 * tau * tau * tau * s * s / period
}

/// Truncated TBG gain, restarted every `T_s` seconds.
pub fn tbg_gain(t: f64, p: &TbgParams) -> f64 {
    let local = t.rem_euclid(p.period);
    let eps = tbg_epsilon(local, p.period).unwrap_or(0.0);
    tbg_epsilon_rate(local, p.period) / (1.0 - eps + p.delta)
}

/// Largest gain seen on a uniform grid of `samples` points over one window.
pub fn tbg_gain_supremum(p: &TbgParams, samples: usize) -> f64 {
    let samples = samples.max(2);
    (0..=samples)
        .map(|k| tbg_gain(p.period * k as f64 / samples as f64, p))
        .fold(0.0, f64::max)
}

/// `rho(t) = (T / (T - t))^(1 + h)` on `[0, T)`.
pub fn rho(t: f64, p: &RhoParams) -> Result<f64, GainError> {
    if !(0.0..p.horizon).contains(&t) {
        return Err(GainError::OutsideHorizon { t, horizon: p.horizon });
    }
    Ok((p.horizon / (p.horizon - t)).powf(p.exponent()))
}

/// `gamma + 2 (1 + h) / (T - t)` before the horizon, exactly 0 from it on.
pub fn pt_gain(t: f64, p: &RhoParams) -> f64 {
    if t >= p.horizon {
        return 0.0;
    }
    p.gamma + 2.0 * p.exponent() / (p.horizon - t)
}

/// Value at `T_s` of `y' = -eta(t) y` under the TBG gain.
pub fn lemma1_solution(y0: f64, p: &TbgParams) -> f64 {
    p.window_factor() * y0
}

/// Same system at `t` within the first window: `y0 (1 - eps(t) / (1 + delta))`.
pub fn lemma1_profile(y0: f64, t: f64, p: &TbgParams) -> Result<f64, GainError> {
    let eps = tbg_epsilon(t.min(p.period), p.period)?;
    Ok(y0 * (1.0 - eps / (1.0 + p.delta)))
}

/// Solution `rho(t)^(-alpha) e^(-gamma t) y0` of `y' = -(alpha rho'/rho + gamma) y`.
pub fn lemma6_solution(y0: f64, t: f64, p: &RhoParams, alpha: f64) -> Result<f64, GainError> {
    if !(0.0..p.horizon).contains(&t) {
        return Err(GainError::OutsideHorizon { t, horizon: p.horizon });
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(GainError::InvalidParameter(format!("alpha = {alpha}")));
    }
    let shrink = ((p.horizon - t) / p.horizon).powf(alpha * p.exponent());
    Ok(y0 * shrink * (-p.gamma * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tbg4() -> TbgParams {
        TbgParams::new(4.0, 1e-4).unwrap()
    }

    fn rho4() -> RhoParams {
        RhoParams::new(4.0, 2, 1.0).unwrap()
    }

    #[test]
    fn epsilon_values() {
        assert_eq!(tbg_epsilon(4.0, 4.0).unwrap(), 1.0);
        assert_eq!(tbg_epsilon(0.0, 4.0).unwrap(), 0.0);
        assert_eq!(tbg_epsilon(2.0, 4.0).unwrap(), 0.34375);
        assert_eq!(tbg_epsilon(9.0, 4.0).unwrap(), 1.0);
        assert_eq!(tbg_epsilon(-1.0, 4.0), Err(GainError::NegativeTime(-1.0)));
        assert_eq!(tbg_epsilon_rate(0.0, 4.0), 0.0);
        assert_eq!(tbg_epsilon_rate(4.0, 4.0), 0.0);
    }

    #[test]
    fn gain_at_window_edges_and_middle() {
        let p = tbg4();
        assert_eq!(tbg_gain(0.0, &p), 0.0);
        assert_eq!(tbg_gain(4.0, &p), 0.0);
        let h = 1e-6;
        let fd = (tbg_epsilon(2.0 + h, 4.0).unwrap() - tbg_epsilon(2.0 - h, 4.0).unwrap()) / (2.0 * h);
        let expect = fd / (1.0 - 0.34375 + 1e-4);
        assert!((tbg_gain(2.0, &p) - expect).abs() <= 1e-6 * expect);
        assert!((tbg_gain(6.0, &p) - tbg_gain(2.0, &p)).abs() < 1e-12);
    }

    #[test]
    fn supremum_is_finite() {
        let l = tbg_gain_supremum(&tbg4(), 10_000);
        assert!(l.is_finite() && l > 1.0);
        for k in 0..=1000 {
            assert!(tbg_gain(k as f64 * 0.008, &tbg4()) <= l * (1.0 + 1e-3));
        }
    }

    #[test]
    fn rho_values() {
        let p = rho4();
        assert_eq!(rho(0.0, &p).unwrap(), 1.0);
        assert_eq!(rho(2.0, &p).unwrap(), 8.0);
        assert!((rho(3.9, &p).unwrap() - 64000.0).abs() < 1e-6);
        assert!(rho(4.0, &p).is_err());
    }

    #[test]
    fn pt_gain_values() {
        let p = rho4();
        assert_eq!(pt_gain(0.0, &p), 2.5);
        assert_eq!(pt_gain(2.0, &p), 4.0);
        assert_eq!(pt_gain(4.0, &p), 0.0);
        assert_eq!(pt_gain(100.0, &RhoParams::new(4.0, 20, 10.0).unwrap()), 0.0);
        let h = 1e-6;
        let dlog = (rho(2.0 + h, &p).unwrap().ln() - rho(2.0 - h, &p).unwrap().ln()) / (2.0 * h);
        assert!((1.0 + 2.0 * dlog - 4.0).abs() < 1e-6);
    }

    #[test]
    fn closed_forms() {
        let p = tbg4();
        assert!((lemma1_solution(1.0, &p) - 1e-4 / 1.0001).abs() < 1e-18);
        assert_eq!(lemma1_solution(0.0, &p), 0.0);
        assert!((lemma1_profile(3.0, 4.0, &p).unwrap() - lemma1_solution(3.0, &p)).abs() < 1e-15);
        let r = rho4();
        assert_eq!(lemma6_solution(7.5, 0.0, &r, 2.0).unwrap(), 7.5);
        let v = lemma6_solution(1.0, 2.0, &r, 2.0).unwrap();
        assert!((v - (-2.0f64).exp() / 64.0).abs() < 1e-15);
        assert!((v - 0.0021146).abs() < 1e-7);
        assert!(lemma6_solution(5.0, 3.99, &r, 2.0).unwrap() < 1e-9);
        assert!(lemma6_solution(1.0, 4.0, &r, 2.0).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(TbgParams::new(0.0, 1e-4).is_err());
        assert!(TbgParams::new(4.0, 1.0).is_err());
        assert!(RhoParams::new(4.0, 1, 1.0).is_err());
        assert!(RhoParams::new(4.0, 2, 0.0).is_err());
        assert!(GainSchedule::Constant { eta: 0.0 }.validate().is_err());
    }

    #[test]
    fn schedule_serializes_as_kind_and_params() {
        let s = GainSchedule::Tbg(tbg4());
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"kind\":\"tbg\""));
        assert_eq!(serde_json::from_str::<GainSchedule>(&json).unwrap(), s);
        let c: GainSchedule = serde_json::from_str(r#"{"kind":"constant","params":{"eta":1.2}}"#).unwrap();
        assert_eq!(c.value_at(99.0), 1.2);
    }
}
