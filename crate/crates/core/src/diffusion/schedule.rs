use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_SIGMA_MIN: f64 = 0.002;
pub const DEFAULT_SIGMA_MAX: f64 = 80.0;
pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_RHO: f64 = 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub steps: usize,
    pub rho: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: DEFAULT_SIGMA_MAX,
            steps: DEFAULT_STEPS,
            rho: DEFAULT_RHO,
        }
    }
}

/// Descending noise ladder `sigmas[0] = sigma_max, ..., sigmas[T] = sigma_min`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule<T> {
    config: ScheduleConfig,
    sigmas: Vec<T>,
}

impl<T: Real> NoiseSchedule<T> {
    /// Karras et al. spacing:
    /// `sigma_i = (max^(1/rho) + i/T (min^(1/rho) - max^(1/rho)))^rho`.
    pub fn karras(config: ScheduleConfig) -> Result<Self> {
        let ScheduleConfig {
            sigma_min,
            sigma_max,
            steps,
            rho,
        } = config;
        if steps == 0 {
            return Err(Error::InvalidArgument(
                "schedule needs at least one step".into(),
            ));
        }
        if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < sigma_min < sigma_max, got {sigma_min} and {sigma_max}"
            )));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be positive, got {rho}"
            )));
        }
        let (lo, hi) = (sigma_min.powf(1.0 / rho), sigma_max.powf(1.0 / rho));
        let mut sigmas: Vec<T> = (0..=steps)
            .map(|i| T::lit((hi + i as f64 / steps as f64 * (lo - hi)).powf(rho)))
            .collect();
        sigmas[0] = T::lit(sigma_max);
        sigmas[steps] = T::lit(sigma_min);
        if sigmas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument(format!(
                "schedule is not strictly decreasing at this precision ({steps} steps)"
            )));
        }
        Ok(NoiseSchedule { config, sigmas })
    }

    pub fn default_karras() -> Self {
        Self::karras(ScheduleConfig::default()).expect("default schedule is valid")
    }

    pub fn config(&self) -> ScheduleConfig {
        self.config
    }

    /// Number of Euler steps `T`.
    pub fn steps(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigmas(&self) -> &[T] {
        &self.sigmas
    }

    pub fn sigma(&self, step: usize) -> T {
        self.sigmas[step]
    }

    pub fn sigma_max(&self) -> T {
        self.sigmas[0]
    }

    pub fn sigma_min(&self) -> T {
        self.sigmas[self.steps()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_exact_and_strictly_decreasing() {
        for steps in [1, 2, 50, 200] {
            let s = NoiseSchedule::<f64>::karras(ScheduleConfig {
                steps,
                ..ScheduleConfig::default()
            })
            .unwrap();
            assert_eq!(s.sigma_max(), 80.0);
            assert_eq!(s.sigma_min(), 0.002);
            assert_eq!(s.sigmas().len(), steps + 1);
            assert!(s.sigmas().windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn matches_closed_form_midpoint() {
        let s = NoiseSchedule::<f64>::karras(ScheduleConfig {
            steps: 2,
            ..ScheduleConfig::default()
        })
        .unwrap();
        let mid = ((80f64.powf(1.0 / 7.0) + 0.002f64.powf(1.0 / 7.0)) / 2.0).powi(7);
        assert!((s.sigma(1) - mid).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let bad = |c: ScheduleConfig| NoiseSchedule::<f64>::karras(c).is_err();
        let d = ScheduleConfig::default();
        assert!(bad(ScheduleConfig { steps: 0, ..d }));
        assert!(bad(ScheduleConfig {
            sigma_min: 0.0,
            ..d
        }));
        assert!(bad(ScheduleConfig {
            sigma_min: 90.0,
            ..d
        }));
        assert!(bad(ScheduleConfig { rho: -1.0, ..d }));
    }
}
