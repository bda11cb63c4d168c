//! Gaussian target noise and the Q-dependent scale applied to it.
//!
//! Each update perturbs every head's bootstrap target by
//! `scale · n` with `n ~ N(mu, sigma)` and
//! `scale = 1 + beta · max_a Q^A(s, a)`, so the noise grows with the
//! magnitude of the value estimates while never dropping below unit scale
//! when Q is non-negative.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            sigma: 0.02,
            beta: 0.05,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::Validation(format!("noise.mu = {}", self.mu)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Validation(format!("noise.sigma = {} must be >= 0", self.sigma)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Validation(format!("noise.beta = {} must be >= 0", self.beta)));
        }
        Ok(())
    }
}

/// How many independent draws one update uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NoiseGranularity {
    /// One draw per (head, batch sample).
    #[default]
    PerSample,
    /// One draw per head, shared by the whole batch.
    PerHead,
}

/// Which Q maximum feeds the scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QmaxSource {
    /// Maximum over the current minibatch.
    #[default]
    Batch,
    /// Largest batch maximum seen so far in the run.
    Running,
}

/// Tracked maximal Q-value that feeds [`compute_scale`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleState {
    pub source: QmaxSource,
    pub last_batch_qmax: f64,
    pub running_qmax: f64,
}

impl ScaleState {
    pub fn new(source: QmaxSource) -> Self {
        Self {
            source,
            last_batch_qmax: 0.0,
            running_qmax: f64::NEG_INFINITY,
        }
    }

    /// Records a batch maximum and returns the value the scale should use.
    pub fn observe(&mut self, batch_qmax: f64) -> f64 {
        self.last_batch_qmax = batch_qmax;
        self.running_qmax = self.running_qmax.max(batch_qmax);
        match self.source {
            QmaxSource::Batch => batch_qmax,
            QmaxSource::Running => self.running_qmax,
        }
    }
}

/// `1 + beta · qmax`.
pub fn compute_scale(qmax: f64, beta: f64) -> Result<f64> {
    if !qmax.is_finite() || !beta.is_finite() {
        return Err(Error::Numeric(format!(
            "scale from non-finite input (qmax {qmax}, beta {beta})"
        )));
    }
    Ok(1.0 + beta * qmax)
}

/// `heads × batch` matrix of draws from `N(mu, sigma)`.
///
/// The standard-normal variate is drawn before `sigma` is applied, so a
/// `sigma = 0` call consumes exactly the same random words as any other.
pub fn sample_noise<R: Rng + ?Sized>(
    heads: usize,
    batch: usize,
    cfg: &NoiseConfig,
    granularity: NoiseGranularity,
    rng: &mut R,
) -> Array2<f64> {
    let mut draw = || {
        let z: f64 = StandardNormal.sample(rng);
        cfg.mu + cfg.sigma * z
    };
    match granularity {
        NoiseGranularity::PerSample => Array2::from_shape_fn((heads, batch), |_| draw()),
        NoiseGranularity::PerHead => {
            let per_head: Vec<f64> = (0..heads).map(|_| draw()).collect();
            Array2::from_shape_fn((heads, batch), |(k, _)| per_head[k])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;

    #[test]
    fn scale_anchors() {
        assert_eq!(compute_scale(0.0, 0.05).unwrap(), 1.0);
        assert_eq!(compute_scale(20.0, 0.05).unwrap(), 2.0);
        assert_eq!(compute_scale(-10.0, 0.05).unwrap(), 0.5);
        assert!(matches!(compute_scale(f64::NAN, 0.05), Err(Error::Numeric(_))));
        assert!(compute_scale(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn zero_sigma_gives_mu_and_keeps_draw_count() {
        let cfg0 = NoiseConfig { mu: 0.0, sigma: 0.0, beta: 0.05 };
        let mut a = StreamRng::from_seed(5);
        let m = sample_noise(3, 4, &cfg0, NoiseGranularity::PerSample, &mut a);
        assert!(m.iter().all(|v| *v == 0.0));

        let mut b = StreamRng::from_seed(5);
        let _ = sample_noise(3, 4, &NoiseConfig::default(), NoiseGranularity::PerSample, &mut b);
        assert_eq!(a.words_drawn(), b.words_drawn());
    }

    #[test]
    fn fixed_seed_fixed_noise() {
        let cfg = NoiseConfig::default();
        let a = sample_noise(9, 32, &cfg, NoiseGranularity::PerSample, &mut StreamRng::from_seed(1));
        let b = sample_noise(9, 32, &cfg, NoiseGranularity::PerSample, &mut StreamRng::from_seed(1));
        assert_eq!(a, b);
    }

    #[test]
    fn per_head_noise_is_constant_along_the_batch() {
        let cfg = NoiseConfig::default();
        let m = sample_noise(4, 6, &cfg, NoiseGranularity::PerHead, &mut StreamRng::from_seed(2));
        for k in 0..4 {
            assert!(m.row(k).iter().all(|v| *v == m[[k, 0]]));
        }
        assert_ne!(m[[0, 0]], m[[1, 0]]);
    }

    #[test]
    fn running_source_keeps_the_largest_batch_max() {
        let mut st = ScaleState::new(QmaxSource::Running);
        assert_eq!(st.observe(2.0), 2.0);
        assert_eq!(st.observe(1.0), 2.0);
        assert_eq!(st.last_batch_qmax, 1.0);
        let mut st = ScaleState::new(QmaxSource::Batch);
        st.observe(2.0);
        assert_eq!(st.observe(1.0), 1.0);
    }

    #[test]
    fn validation() {
        assert!(NoiseConfig::default().validate().is_ok());
        assert!(NoiseConfig { sigma: -0.1, ..Default::default() }.validate().is_err());
        assert!(NoiseConfig { beta: -1.0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn zero_beta_disables_growth(q in -1e6f64..1e6) {
            prop_assert_eq!(compute_scale(q, 0.0).unwrap(), 1.0);
        }

        #[test]
        fn scale_is_linear_in_qmax(q1 in -1e3f64..1e3, q2 in -1e3f64..1e3, beta in 0.0f64..1.0) {
            let d = compute_scale(q1 + q2, beta).unwrap() - compute_scale(q1, beta).unwrap();
            prop_assert!((d - beta * q2).abs() <= 1e-12 * (1.0 + beta * (q1.abs() + q2.abs())));
        }

        #[test]
        fn scale_is_monotone_for_positive_beta(q in -1e3f64..1e3, dq in 1e-6f64..1e3, beta in 1e-6f64..1.0) {
            prop_assert!(compute_scale(q + dq, beta).unwrap() > compute_scale(q, beta).unwrap());
        }
    }
}
