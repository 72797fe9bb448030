//! Discrete-time leaky integrate-and-fire neurons.
//!
//! One step integrates as `u[t] = beta * (u[t-1] + (u_reset - u[t-1]) * o[t-1]) + I[t]`
//! and fires `o[t] = 1` when `u[t] >= u_threshold`. The reset is applied through the
//! previous output, so a neuron that fired starts its next decay from `u_reset`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifConfig {
    /// Membrane decay factor, `1 - dt / tau`.
    pub beta: f64,
    pub u_threshold: f64,
    pub u_reset: f64,
    /// Width of the rectangular surrogate derivative.
    pub surrogate_width: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        Self { beta: 0.2, u_threshold: 0.5, u_reset: 0.0, surrogate_width: 0.5 }
    }
}

/// Spike nonlinearity used in a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SpikeMode {
    /// Heaviside step at threshold; outputs are exactly 0 or 1.
    #[default]
    Hard,
    /// Piecewise-linear ramp whose exact derivative is the surrogate gradient.
    Relaxed,
}

impl LifConfig {
    pub fn validate(&self) -> Result<()> {
        let finite =
            [self.beta, self.u_threshold, self.u_reset, self.surrogate_width].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("LIF parameters must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if self.u_reset >= self.u_threshold {
            return Err(Error::InvalidParameter("u_reset must be below u_threshold".into()));
        }
        if self.surrogate_width <= 0.0 {
            return Err(Error::InvalidParameter("surrogate width must be positive".into()));
        }
        Ok(())
    }

    /// Potential the decay starts from: `u_prev`, or `u_reset` after a spike.
    #[inline]
    pub fn reset_base(&self, u_prev: f64, o_prev: f64) -> f64 {
        if o_prev == 0.0 {
            u_prev
        } else if o_prev == 1.0 {
            self.u_reset
        } else {
            u_prev + (self.u_reset - u_prev) * o_prev
        }
    }

    #[inline]
    pub fn integrate(&self, u_prev: f64, o_prev: f64, input: f64) -> f64 {
        self.beta * self.reset_base(u_prev, o_prev) + input
    }

    #[inline]
    pub fn fire(&self, u: f64, mode: SpikeMode) -> f64 {
        match mode {
            SpikeMode::Hard => self.spike(u),
            SpikeMode::Relaxed => self.relaxed(u),
        }
    }

    #[inline]
    pub fn spike(&self, u: f64) -> f64 {
        if u >= self.u_threshold {
            1.0
        } else {
            0.0
        }
    }

    /// Rectangular surrogate for `d spike / d u`: `1/a` inside the open window of width `a`.
    #[inline]
    pub fn surrogate(&self, u: f64) -> f64 {
        let a = self.surrogate_width;
        if (u - self.u_threshold).abs() < a / 2.0 {
            1.0 / a
        } else {
            0.0
        }
    }

    #[inline]
    pub fn relaxed(&self, u: f64) -> f64 {
        let a = self.surrogate_width;
        let x = u - self.u_threshold;
        if x <= -a / 2.0 {
            0.0
        } else if x >= a / 2.0 {
            1.0
        } else {
            x / a + 0.5
        }
    }
}

/// Membrane potentials and last outputs for a population of neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub membrane: Array1<f64>,
    pub spikes: Array1<f64>,
}

impl LifState {
    pub fn zeros(n: usize) -> Self {
        Self { membrane: Array1::zeros(n), spikes: Array1::zeros(n) }
    }

    pub fn len(&self) -> usize {
        self.membrane.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membrane.is_empty()
    }
}

/// One hard-spiking LIF update of the whole population.
pub fn lif_step(state: &LifState, input: &Array1<f64>, cfg: &LifConfig) -> Result<LifState> {
    lif_step_mode(state, input, cfg, SpikeMode::Hard)
}

pub fn lif_step_mode(
    state: &LifState,
    input: &Array1<f64>,
    cfg: &LifConfig,
    mode: SpikeMode,
) -> Result<LifState> {
    if input.len() != state.len() {
        return Err(Error::ShapeMismatch(format!(
            "input current has {} entries for {} neurons",
            input.len(),
            state.len()
        )));
    }
    if let Some(i) = input.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("input current [{i}]")));
    }
    let mut next = LifState::zeros(state.len());
    for i in 0..state.len() {
        let u = cfg.integrate(state.membrane[i], state.spikes[i], input[i]);
        next.membrane[i] = u;
        next.spikes[i] = cfg.fire(u, mode);
    }
    Ok(next)
}

pub fn surrogate_grad(u: &Array1<f64>, cfg: &LifConfig) -> Array1<f64> {
    u.mapv(|v| cfg.surrogate(v))
}

pub fn relaxed_spike(u: &Array1<f64>, cfg: &LifConfig) -> Array1<f64> {
    u.mapv(|v| cfg.relaxed(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn subthreshold_step() {
        let cfg = LifConfig::default();
        let s = LifState { membrane: array![0.4], spikes: array![0.0] };
        let next = lif_step(&s, &array![0.2], &cfg).unwrap();
        // 0.2 * 0.4 + 0.2
        assert!(close(next.membrane[0], 0.28, 1e-15));
        assert_eq!(next.spikes[0], 0.0);
    }

    #[test]
    fn spike_then_reset() {
        let cfg = LifConfig::default();
        let s = LifState { membrane: array![0.3], spikes: array![0.0] };
        let fired = lif_step(&s, &array![0.5], &cfg).unwrap();
        assert!(close(fired.membrane[0], 0.56, 1e-15));
        assert_eq!(fired.spikes[0], 1.0);
        // the next decay starts from u_reset = 0, so only the new input remains
        let after = lif_step(&fired, &array![0.1], &cfg).unwrap();
        assert_eq!(after.membrane[0], 0.1);
        assert_eq!(after.spikes[0], 0.0);
    }

    #[test]
    fn silent_without_input() {
        let cfg = LifConfig::default();
        let mut s = LifState::zeros(3);
        for _ in 0..20 {
            s = lif_step(&s, &Array1::zeros(3), &cfg).unwrap();
        }
        assert_eq!(s, LifState::zeros(3));
    }

    #[test]
    fn step_errors() {
        let cfg = LifConfig::default();
        let s = LifState::zeros(2);
        assert!(matches!(lif_step(&s, &array![1.0], &cfg), Err(Error::ShapeMismatch(_))));
        assert!(matches!(lif_step(&s, &array![1.0, f64::NAN], &cfg), Err(Error::NonFinite(_))));
    }

    #[test]
    fn config_validation() {
        assert!(LifConfig::default().validate().is_ok());
        let bad = [
            LifConfig { beta: 1.0, ..Default::default() },
            LifConfig { u_reset: 0.5, ..Default::default() },
            LifConfig { surrogate_width: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn surrogate_values() {
        let cfg = LifConfig::default();
        let g = surrogate_grad(&array![0.5, 0.8, 0.25, 0.75, 0.26], &cfg);
        assert_eq!(g, array![2.0, 0.0, 0.0, 0.0, 2.0]);
    }

    #[test]
    fn relaxed_values() {
        let cfg = LifConfig::default();
        assert_eq!(cfg.relaxed(0.5), 0.5);
        assert_eq!(cfg.relaxed(1.0), 1.0);
        assert_eq!(cfg.relaxed(0.0), 0.0);
        let h = 1e-6;
        let slope = (cfg.relaxed(0.5 + h) - cfg.relaxed(0.5 - h)) / (2.0 * h);
        assert!(close(slope, 2.0, 1e-4), "{slope}");
        assert_eq!(relaxed_spike(&array![0.5, 2.0], &cfg), array![0.5, 1.0]);
    }

    proptest! {
        #[test]
        fn outputs_are_binary_and_bounded(
            inputs in proptest::collection::vec(-1.0f64..1.0, 1..200),
            beta in 0.0f64..0.99,
        ) {
            let cfg = LifConfig { beta, ..Default::default() };
            let m = inputs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut s = LifState::zeros(1);
            for &x in &inputs {
                s = lif_step(&s, &array![x], &cfg).unwrap();
                prop_assert!(s.spikes[0] == 0.0 || s.spikes[0] == 1.0);
                prop_assert!(s.membrane[0] <= beta * cfg.u_threshold + m + 1e-12);
            }
        }

        #[test]
        fn reset_ignores_previous_potential(u_prev in -5.0f64..5.0, input in -1.0f64..1.0) {
            let cfg = LifConfig { u_reset: -0.3, ..Default::default() };
            let s = LifState { membrane: array![u_prev], spikes: array![1.0] };
            let next = lif_step(&s, &array![input], &cfg).unwrap();
            prop_assert_eq!(next.membrane[0], cfg.beta * cfg.u_reset + input);
        }

        #[test]
        fn relaxed_is_monotone_and_matches_surrogate(u in -2.0f64..3.0, du in 0.0f64..1.0) {
            let cfg = LifConfig::default();
            prop_assert!(cfg.relaxed(u) <= cfg.relaxed(u + du));
            let a = cfg.surrogate_width;
            let lo = cfg.u_threshold - a / 2.0;
            let hi = cfg.u_threshold + a / 2.0;
            let h = 1e-6;
            if (u - lo).abs() > 1e-3 && (u - hi).abs() > 1e-3 {
                let fd = (cfg.relaxed(u + h) - cfg.relaxed(u - h)) / (2.0 * h);
                prop_assert!((fd - cfg.surrogate(u)).abs() < 1e-4);
            }
            if u < lo || u > hi {
                prop_assert_eq!(cfg.relaxed(u), cfg.spike(u));
            }
        }
    }
}
