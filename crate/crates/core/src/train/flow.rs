//! Particle gradient flow: move K particles directly along the negative
//! gradient of their latent distance to N(0, I).

use crate::cloud::PointCloud;
use crate::energy::{latent_loss, latent_loss_gradient, XiEvaluator};
use crate::error::{Error, Result};
use crate::sampling::{sample_normal_cloud, Seed};

/// Where the particles start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowInit {
    /// i.i.d. N(0, I) draws.
    Normal,
    /// A tight cluster: `center` e₁ plus N(0, spread² I) noise.
    Cluster { center: f64, spread: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub n_particles: usize,
    pub n_dim: usize,
    /// Each particle moves by `step_size · K · ∇_k L`, i.e. the gradient of L
    /// with respect to the particle's own mass 1/K.
    pub step_size: f64,
    pub n_steps: usize,
    pub evaluator: XiEvaluator,
    pub seed: Seed,
    pub init: FlowInit,
    /// Halve the step whenever a step would increase the loss.
    pub backtracking: bool,
}

/// Consecutive loss increases tolerated before the flow is declared divergent.
pub const DIVERGENCE_STREAK: usize = 10;

/// step_size · K above this usually oscillates.
const STABILITY_WARNING: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub cloud: PointCloud,
    /// Latent loss before the first step and after every step.
    pub losses: Vec<f64>,
    /// Step size in force at the end (smaller than configured after backtracking).
    pub final_step: f64,
}

pub fn initial_particles(cfg: &FlowConfig) -> PointCloud {
    let noise = sample_normal_cloud(cfg.n_dim, cfg.n_particles, cfg.seed);
    match cfg.init {
        FlowInit::Normal => noise,
        FlowInit::Cluster { center, spread } => {
            let mut data = noise.into_vec();
            for (i, v) in data.iter_mut().enumerate() {
                *v *= spread;
                if i % cfg.n_dim == 0 {
                    *v += center;
                }
            }
            PointCloud::new(data, cfg.n_dim).expect("finite")
        }
    }
}

pub fn particle_flow(cfg: &FlowConfig) -> Result<FlowResult> {
    if cfg.n_particles < 1 || cfg.n_dim != cfg.evaluator.n_dim {
        return Err(Error::Shape(format!(
            "flow needs ≥ 1 particle and dimension {} matching the evaluator ({})",
            cfg.n_dim, cfg.evaluator.n_dim
        )));
    }
    if !(cfg.step_size > 0.0 && cfg.step_size.is_finite()) {
        return Err(Error::domain("step size must be positive"));
    }
    if cfg.step_size * cfg.n_particles as f64 > STABILITY_WARNING {
        log::warn!(
            "step_size · K = {} may be unstable",
            cfg.step_size * cfg.n_particles as f64
        );
    }
    let k = cfg.n_particles as f64;
    let mut cloud = initial_particles(cfg);
    let mut loss = latent_loss(&cloud, &cfg.evaluator)?.total;
    let mut losses = vec![loss];
    let mut step = cfg.step_size;
    let mut streak = 0;
    for it in 0..cfg.n_steps {
        let diverged = |_| Error::Divergence { steps: it, loss };
        let grad = latent_loss_gradient(&cloud, &cfg.evaluator).map_err(diverged)?;
        let (next, next_loss) = loop {
            let moved: Vec<f64> = cloud
                .as_slice()
                .iter()
                .zip(&grad)
                .map(|(x, g)| x - step * k * g)
                .collect();
            let next = PointCloud::new(moved, cfg.n_dim).map_err(diverged)?;
            let l = latent_loss(&next, &cfg.evaluator).map_err(diverged)?.total;
            if !cfg.backtracking || l <= loss || step < 1e-12 * cfg.step_size {
                break (next, l);
            }
            step *= 0.5;
        };
        streak = if next_loss > loss { streak + 1 } else { 0 };
        cloud = next;
        loss = next_loss;
        losses.push(loss);
        if !loss.is_finite() || streak >= DIVERGENCE_STREAK {
            return Err(Error::Divergence {
                steps: it + 1,
                loss,
            });
        }
    }
    Ok(FlowResult {
        cloud,
        losses,
        final_step: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::XiMethod;

    fn cfg(k: usize, n: usize, method: XiMethod) -> FlowConfig {
        FlowConfig {
            n_particles: k,
            n_dim: n,
            step_size: 0.1,
            n_steps: 200,
            evaluator: XiEvaluator::new(n, method).unwrap(),
            seed: Seed::new(1),
            init: FlowInit::Normal,
            backtracking: false,
        }
    }

    #[test]
    fn single_particle_goes_to_origin() {
        let mut c = cfg(1, 3, XiMethod::QuadraticSurrogate);
        c.init = FlowInit::Cluster {
            center: 2.0,
            spread: 0.0,
        };
        c.n_steps = 500;
        let r = particle_flow(&c).unwrap();
        assert!(r.cloud.mean_radius() < 1e-3);
    }

    #[test]
    fn normal_start_does_not_blow_up() {
        let c = cfg(64, 8, XiMethod::PoissonExact);
        let r = particle_flow(&c).unwrap();
        assert!(r.losses.last().unwrap() <= &r.losses[0]);
    }

    #[test]
    fn backtracking_gives_monotone_losses() {
        let mut c = cfg(32, 2, XiMethod::QuadraticSurrogate);
        c.step_size = 20.0;
        c.init = FlowInit::Cluster {
            center: 3.0,
            spread: 0.1,
        };
        c.backtracking = true;
        let r = particle_flow(&c).unwrap();
        assert!(r.losses.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.final_step < 20.0);
    }

    #[test]
    fn huge_steps_are_reported_as_divergence() {
        let mut c = cfg(16, 2, XiMethod::QuadraticSurrogate);
        c.step_size = 1e300;
        c.init = FlowInit::Cluster {
            center: 3.0,
            spread: 0.1,
        };
        assert!(matches!(particle_flow(&c), Err(Error::Divergence { .. })));
    }

    #[test]
    fn rejects_mismatched_dimension() {
        let mut c = cfg(4, 2, XiMethod::QuadraticSurrogate);
        c.n_dim = 3;
        assert!(particle_flow(&c).is_err());
    }
}
