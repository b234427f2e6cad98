//! Step-size schedules and the digamma function.

use crate::error::{Error, Result};

/// Parameters of a decaying step-size sequence `rho_t = scale / (offset + t)^kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub scale: f64,
    pub offset: f64,
    pub kappa: f64,
}

impl ScheduleParams {
    pub const fn new(scale: f64, offset: f64, kappa: f64) -> Self {
        Self { scale, offset, kappa }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(format!(
                "schedule scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.offset.is_finite() && self.offset >= 0.0) {
            return Err(Error::invalid(format!(
                "schedule offset must be non-negative, got {}",
                self.offset
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid(format!(
                "schedule exponent must be positive, got {}",
                self.kappa
            )));
        }
        let rho0 = self.scale / self.offset.powf(self.kappa);
        if !(rho0 <= 1.0) {
            return Err(Error::invalid(format!(
                "initial step size {rho0} exceeds 1 (scale={}, offset={}, kappa={})",
                self.scale, self.offset, self.kappa
            )));
        }
        Ok(())
    }
}

/// A step-size schedule with its own clock.
///
/// Construction rejects parameters whose first step exceeds one, so every
/// value returned by [`StepSchedule::rho`] lies in `(0, 1]` and the
/// convex-combination updates that consume it stay feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    params: ScheduleParams,
    t: u64,
}

impl StepSchedule {
    pub fn new(params: ScheduleParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, t: 0 })
    }

    pub fn params(&self) -> ScheduleParams {
        self.params
    }

    pub fn clock(&self) -> u64 {
        self.t
    }

    #[inline]
    pub fn rho(&self) -> f64 {
        let p = &self.params;
        p.scale / (p.offset + self.t as f64).powf(p.kappa)
    }

    #[inline]
    pub fn advance(&mut self) {
        self.t += 1;
    }

    pub fn reset(&mut self) {
        self.t = 0;
    }
}

/// Digamma function for positive arguments.
///
/// Shifts the argument upward with `psi(x) = psi(x + 1) - 1/x` until it is
/// at least 10, then sums the asymptotic expansion.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma requires x > 0, got {x}")));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_2n / (2n) for n = 1..7.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    Ok(shift + x.ln() - 0.5 * inv - series)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_matches_direct_evaluation() {
        let corpus = StepSchedule::new(ScheduleParams::new(10.0, 1000.0, 0.9)).unwrap();
        assert!((corpus.rho() - 0.019_952_623_149_688_796).abs() < 1e-15);
        let doc = StepSchedule::new(ScheduleParams::new(1.0, 10.0, 0.9)).unwrap();
        assert!((doc.rho() - 0.125_892_541_179_416_72).abs() < 1e-15);
    }

    #[test]
    fn advance_moves_clock() {
        let mut s = StepSchedule::new(ScheduleParams::new(1.0, 10.0, 0.9)).unwrap();
        assert_eq!(s.clock(), 0);
        s.advance();
        assert_eq!(s.clock(), 1);
        for _ in 0..4 {
            s.advance();
        }
        assert_eq!(s.clock(), 5);
        s.advance();
        s.advance();
        assert_eq!(s.clock(), 7);
        assert_eq!(s.rho(), 1.0 / (10.0f64 + 7.0).powf(0.9));
        s.reset();
        assert_eq!(s.clock(), 0);
    }

    #[test]
    fn rejects_first_step_above_one() {
        assert!(StepSchedule::new(ScheduleParams::new(10.0, 1.0, 0.9)).is_err());
        assert!(StepSchedule::new(ScheduleParams::new(1.0, 0.0, 0.9)).is_err());
        assert!(StepSchedule::new(ScheduleParams::new(0.0, 10.0, 0.9)).is_err());
        assert!(StepSchedule::new(ScheduleParams::new(1.0, 10.0, -0.5)).is_err());
        assert!(StepSchedule::new(ScheduleParams::new(1.0, 1.0, 0.9)).is_ok());
    }

    #[test]
    fn schedule_positive_and_decreasing() {
        for params in [
            ScheduleParams::new(10.0, 1000.0, 0.9),
            ScheduleParams::new(1.0, 10.0, 0.9),
            ScheduleParams::new(5.0, 100.0, 0.9),
        ] {
            let mut s = StepSchedule::new(params).unwrap();
            let mut prev = s.rho();
            assert!(prev > 0.0 && prev <= 1.0);
            for _ in 0..1_000_000 {
                s.advance();
                let r = s.rho();
                assert!(r > 0.0 && r < prev, "not decreasing at t={}", s.clock());
                prev = r;
            }
        }
    }

    // Reference values from a 30-digit evaluation.
    const REFERENCE: [(f64, f64); 8] = [
        (1e-3, -1_000.575_571_931_810_3),
        (0.1, -10.423_754_940_411_078),
        (0.5, -1.963_510_026_021_423_5),
        (1.0, -0.577_215_664_901_532_9),
        (3.7, 1.167_153_539_361_511_4),
        (10.0, 2.251_752_589_066_721),
        (100.0, 4.600_161_852_738_087),
        (12345.6, 9.421_014_502_465_397),
    ];

    #[test]
    fn digamma_reference_values() {
        for (x, want) in REFERENCE {
            let got = digamma(x).unwrap();
            assert!((got - want).abs() < 1e-10, "psi({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn digamma_recurrence() {
        for x in [0.1, 0.5, 1.0, 3.0, 10.0, 100.0] {
            let r = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
            assert!(r.abs() < 1e-10, "x={x}: {r}");
        }
        assert!((digamma(2.0).unwrap() - digamma(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((digamma(10.5).unwrap() - digamma(9.5).unwrap() - 1.0 / 9.5).abs() < 1e-12);
    }

    #[test]
    fn digamma_domain() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(digamma(f64::NAN).is_err());
    }

    #[test]
    fn digamma_agrees_with_statrs() {
        let mut x = 1e-3;
        while x < 1e4 {
            let ours = digamma(x).unwrap();
            let theirs = statrs::function::gamma::digamma(x);
            assert!((ours - theirs).abs() < 1e-9 * (1.0 + theirs.abs()), "x={x}");
            x *= 1.37;
        }
    }
}
