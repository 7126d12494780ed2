//! Time-varying weights for the two regularizers and the joint objective.
//!
//! The ordering weight `λ_svo` holds a plateau through a warmup window and
//! then anneals linearly down to a final value; the geometry weight `λ_spd`
//! holds a base value and ramps linearly up to a peak over the tail of the
//! run. Both are evaluated at integer steps `0..=total_steps`.
//!
//! Interpolation is written as `far_end + span·(1 − s)` with a clamp into
//! the configured interval, which keeps the sampled sequence monotone in
//! floating point and pins both endpoints to the configured constants
//! exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schedule parameters. Invariants are enforced at construction (and on
/// deserialization): `warmup_steps ≤ total_steps`, `spd_ramp_start ≤
/// total_steps`, `svo_initial ≥ svo_final ≥ 0`, `spd_peak ≥ spd_base ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheduleConfig", into = "RawScheduleConfig")]
pub struct ScheduleConfig {
    total_steps: usize,
    warmup_steps: usize,
    svo_initial: f64,
    svo_final: f64,
    spd_base: f64,
    spd_peak: f64,
    spd_ramp_start: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheduleConfig {
    total_steps: usize,
    warmup_steps: usize,
    svo_initial: f64,
    svo_final: f64,
    spd_base: f64,
    spd_peak: f64,
    spd_ramp_start: usize,
}

impl TryFrom<RawScheduleConfig> for ScheduleConfig {
    type Error = Error;

    fn try_from(r: RawScheduleConfig) -> Result<Self> {
        ScheduleConfig::new(
            r.total_steps,
            r.warmup_steps,
            r.svo_initial,
            r.svo_final,
            r.spd_base,
            r.spd_peak,
            r.spd_ramp_start,
        )
    }
}

impl From<ScheduleConfig> for RawScheduleConfig {
    fn from(c: ScheduleConfig) -> Self {
        RawScheduleConfig {
            total_steps: c.total_steps,
            warmup_steps: c.warmup_steps,
            svo_initial: c.svo_initial,
            svo_final: c.svo_final,
            spd_base: c.spd_base,
            spd_peak: c.spd_peak,
            spd_ramp_start: c.spd_ramp_start,
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_steps: 2000,
            warmup_steps: 200,
            svo_initial: 1.0,
            svo_final: 0.1,
            spd_base: 1.0,
            spd_peak: 2.0,
            spd_ramp_start: 1000,
        }
    }
}

impl ScheduleConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        total_steps: usize,
        warmup_steps: usize,
        svo_initial: f64,
        svo_final: f64,
        spd_base: f64,
        spd_peak: f64,
        spd_ramp_start: usize,
    ) -> Result<Self> {
        let mut keys: Vec<String> = Vec::new();
        let mut notes: Vec<String> = Vec::new();
        if total_steps == 0 {
            keys.push("total_steps".into());
            notes.push("total_steps must be at least 1".into());
        }
        if warmup_steps > total_steps {
            keys.push("warmup_steps".into());
            notes.push(format!("warmup_steps {warmup_steps} exceeds total_steps {total_steps}"));
        }
        if spd_ramp_start > total_steps {
            keys.push("spd_ramp_start".into());
            notes.push(format!("spd_ramp_start {spd_ramp_start} exceeds total_steps {total_steps}"));
        }
        for (key, v) in [
            ("svo_initial", svo_initial),
            ("svo_final", svo_final),
            ("spd_base", spd_base),
            ("spd_peak", spd_peak),
        ] {
            if !v.is_finite() || v < 0.0 {
                keys.push(key.into());
                notes.push(format!("{key} must be finite and non-negative, got {v}"));
            }
        }
        if svo_final > svo_initial {
            keys.push("svo_initial".into());
            keys.push("svo_final".into());
            notes.push(format!(
                "svo schedule must anneal downward: svo_final {svo_final} > svo_initial {svo_initial}"
            ));
        }
        if spd_peak < spd_base {
            keys.push("spd_base".into());
            keys.push("spd_peak".into());
            notes.push(format!(
                "spd schedule must ramp upward: spd_peak {spd_peak} < spd_base {spd_base}"
            ));
        }
        if !keys.is_empty() {
            keys.dedup();
            return Err(Error::Config { keys, message: notes.join("; ") });
        }
        Ok(Self {
            total_steps,
            warmup_steps,
            svo_initial,
            svo_final,
            spd_base,
            spd_peak,
            spd_ramp_start,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn warmup_steps(&self) -> usize {
        self.warmup_steps
    }

    pub fn svo_initial(&self) -> f64 {
        self.svo_initial
    }

    pub fn svo_final(&self) -> f64 {
        self.svo_final
    }

    pub fn spd_base(&self) -> f64 {
        self.spd_base
    }

    pub fn spd_peak(&self) -> f64 {
        self.spd_peak
    }

    pub fn spd_ramp_start(&self) -> usize {
        self.spd_ramp_start
    }

    fn check_step(&self, step: usize) -> Result<()> {
        if step > self.total_steps {
            return Err(Error::InvalidStep { step, total_steps: self.total_steps });
        }
        Ok(())
    }

    /// Ordering weight: `svo_initial` until `warmup_steps`, then linear down
    /// to `svo_final` at `total_steps`.
    pub fn lambda_svo(&self, step: usize) -> Result<f64> {
        self.check_step(step)?;
        if step <= self.warmup_steps {
            return Ok(self.svo_initial);
        }
        if step == self.total_steps {
            return Ok(self.svo_final);
        }
        let s = (step - self.warmup_steps) as f64 / (self.total_steps - self.warmup_steps) as f64;
        let v = self.svo_final + (self.svo_initial - self.svo_final) * (1.0 - s);
        Ok(v.min(self.svo_initial).max(self.svo_final))
    }

    /// Geometry weight: `spd_base` until `spd_ramp_start`, then linear up to
    /// `spd_peak` at `total_steps`.
    pub fn lambda_spd(&self, step: usize) -> Result<f64> {
        self.check_step(step)?;
        if step <= self.spd_ramp_start {
            return Ok(self.spd_base);
        }
        if step == self.total_steps {
            return Ok(self.spd_peak);
        }
        let s = (step - self.spd_ramp_start) as f64 / (self.total_steps - self.spd_ramp_start) as f64;
        let v = self.spd_base + (self.spd_peak - self.spd_base) * s;
        Ok(v.min(self.spd_peak).max(self.spd_base))
    }

    /// `total = base + λ_svo·r_svo + λ_spd·r_spd` at the given step.
    pub fn total_loss(&self, step: usize, base: f64, r_svo: f64, r_spd: f64) -> Result<LossBreakdown> {
        if !base.is_finite() {
            return Err(Error::InvalidInput(format!("base loss must be finite, got {base}")));
        }
        for (name, v) in [("ordering", r_svo), ("geometry", r_spd)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} regularizer must be finite and non-negative, got {v}"
                )));
            }
        }
        let lambda_svo = self.lambda_svo(step)?;
        let lambda_spd = self.lambda_spd(step)?;
        Ok(LossBreakdown {
            base,
            r_svo,
            r_spd,
            lambda_svo,
            lambda_spd,
            total: base + lambda_svo * r_svo + lambda_spd * r_spd,
        })
    }
}

/// One evaluation of the joint objective with its weighted parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub base: f64,
    pub r_svo: f64,
    pub r_spd: f64,
    pub lambda_svo: f64,
    pub lambda_spd: f64,
    pub total: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_schedule_landmarks() {
        let c = ScheduleConfig::default();
        assert_eq!(c.lambda_svo(0).unwrap(), 1.0);
        assert_eq!(c.lambda_svo(200).unwrap(), 1.0);
        assert_relative_eq!(c.lambda_svo(1100).unwrap(), 0.55, epsilon = 1e-12);
        assert_eq!(c.lambda_svo(2000).unwrap(), 0.1);

        assert_eq!(c.lambda_spd(0).unwrap(), 1.0);
        assert_eq!(c.lambda_spd(1000).unwrap(), 1.0);
        assert_relative_eq!(c.lambda_spd(1500).unwrap(), 1.5, epsilon = 1e-12);
        assert_eq!(c.lambda_spd(2000).unwrap(), 2.0);
    }

    #[test]
    fn monotone_over_full_range() {
        let c = ScheduleConfig::new(777, 123, 0.9, 0.05, 0.3, 1.7, 400).unwrap();
        let mut prev_svo = f64::INFINITY;
        let mut prev_spd = f64::NEG_INFINITY;
        for t in 0..=777 {
            let svo = c.lambda_svo(t).unwrap();
            let spd = c.lambda_spd(t).unwrap();
            assert!(svo <= prev_svo, "svo rose at step {t}");
            assert!(spd >= prev_spd, "spd fell at step {t}");
            prev_svo = svo;
            prev_spd = spd;
        }
        assert_eq!(c.lambda_svo(0).unwrap(), 0.9);
        assert_eq!(c.lambda_svo(777).unwrap(), 0.05);
        assert_eq!(c.lambda_spd(0).unwrap(), 0.3);
        assert_eq!(c.lambda_spd(777).unwrap(), 1.7);
    }

    #[test]
    fn degenerate_windows() {
        // warmup == total: plateau everywhere except the final step
        let c = ScheduleConfig::new(10, 10, 1.0, 0.2, 0.5, 0.5, 10).unwrap();
        assert_eq!(c.lambda_svo(9).unwrap(), 1.0);
        assert_eq!(c.lambda_svo(10).unwrap(), 1.0); // step ≤ warmup wins
        assert_eq!(c.lambda_spd(10).unwrap(), 0.5);

        // flat schedules are allowed
        let c = ScheduleConfig::new(5, 0, 0.7, 0.7, 0.7, 0.7, 0).unwrap();
        for t in 0..=5 {
            assert_eq!(c.lambda_svo(t).unwrap(), 0.7);
            assert_eq!(c.lambda_spd(t).unwrap(), 0.7);
        }
    }

    #[test]
    fn step_out_of_range() {
        let c = ScheduleConfig::default();
        assert!(matches!(
            c.lambda_svo(2001),
            Err(Error::InvalidStep { step: 2001, total_steps: 2000 })
        ));
        assert!(matches!(c.total_loss(9999, 0.0, 0.0, 0.0), Err(Error::InvalidStep { .. })));
    }

    #[test]
    fn config_errors_list_offending_keys() {
        let err = ScheduleConfig::new(100, 200, 0.1, 0.5, 2.0, 1.0, 300).unwrap_err();
        match err {
            Error::Config { keys, .. } => {
                for expect in ["warmup_steps", "spd_ramp_start", "svo_final", "spd_peak"] {
                    assert!(keys.iter().any(|k| k == expect), "missing key {expect}: {keys:?}");
                }
            }
            other => panic!("expected Config error, got {other:?}"),
        }

        let err = ScheduleConfig::new(0, 0, f64::NAN, 0.0, 0.0, 0.0, 0).unwrap_err();
        match err {
            Error::Config { keys, .. } => {
                assert!(keys.contains(&"total_steps".to_string()));
                assert!(keys.contains(&"svo_initial".to_string()));
            }
            other => panic!("expected Config error, got {other:?}"),
        }
    }

    #[test]
    fn weighted_sum_identity() {
        let c = ScheduleConfig::default();
        let cases = [
            (0usize, 0.25, 0.4, 1.9),
            (314, 1.5e-3, 0.0, 7.2),
            (1100, -0.75, 2.0, 0.0),
            (2000, 10.0, 0.123, 4.56),
        ];
        for (t, base, rs, rp) in cases {
            let b = c.total_loss(t, base, rs, rp).unwrap();
            let expected = base + b.lambda_svo * rs + b.lambda_spd * rp;
            assert_relative_eq!(b.total, expected, epsilon = 1e-12);
            assert_eq!(b.lambda_svo, c.lambda_svo(t).unwrap());
            assert_eq!(b.lambda_spd, c.lambda_spd(t).unwrap());
        }
    }

    #[test]
    fn regularizers_must_be_non_negative() {
        let c = ScheduleConfig::default();
        assert!(matches!(c.total_loss(0, 0.0, -1.0, 0.0), Err(Error::InvalidInput(_))));
        assert!(matches!(c.total_loss(0, f64::INFINITY, 0.0, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let c = ScheduleConfig::default();
        let json = serde_json::to_string(&c).unwrap();
        let back: ScheduleConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);

        let bad = r#"{"total_steps":100,"warmup_steps":500,"svo_initial":1.0,
            "svo_final":0.1,"spd_base":1.0,"spd_peak":2.0,"spd_ramp_start":50}"#;
        assert!(serde_json::from_str::<ScheduleConfig>(bad).is_err());

        let unknown = r#"{"total_steps":100,"warmup_steps":10,"svo_initial":1.0,
            "svo_final":0.1,"spd_base":1.0,"spd_peak":2.0,"spd_ramp_start":50,"extra":1}"#;
        assert!(serde_json::from_str::<ScheduleConfig>(unknown).is_err());
    }
}
