use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::replay::Batch;
use crate::neural::{adam_step, AdamHyper, AdamState, Mlp, MlpSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Td3Hyper {
    pub gamma: f64,
    /// Polyak coefficient: `target <- rho * target + (1 - rho) * live`.
    pub rho: f64,
    pub exploration_noise_std: f64,
    pub target_noise_std: f64,
    pub noise_clip: f64,
    pub policy_delay: u64,
    pub batch_size: usize,
    pub warmup_steps: u64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub replay_capacity: usize,
}

impl Default for Td3Hyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            rho: 0.995,
            exploration_noise_std: 0.1,
            target_noise_std: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            batch_size: 256,
            warmup_steps: 5_000,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            replay_capacity: 500_000,
        }
    }
}

impl Td3Hyper {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.rho) {
            return Err(Error::config("td3: gamma and rho must lie in [0, 1]"));
        }
        if self.exploration_noise_std < 0.0 || self.target_noise_std < 0.0 || self.noise_clip < 0.0 {
            return Err(Error::config("td3: noise parameters must be non-negative"));
        }
        if self.policy_delay == 0 || self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::config(
                "td3: policy_delay, batch_size and replay_capacity must be positive",
            ));
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return Err(Error::config("td3: learning rates must be positive"));
        }
        Ok(())
    }
}

/// Widths shared by the actor and both critics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkShape {
    pub extractor: usize,
    pub hidden: Vec<usize>,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self {
            extractor: 1024,
            hidden: vec![500, 300, 100],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Present on delayed actor steps.
    pub actor_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Td3Agent {
    pub hyper: Td3Hyper,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub actor_target: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: AdamState,
    critic1_opt: AdamState,
    critic2_opt: AdamState,
    updates: u64,
}

fn concat_rows(a: &[f64], a_dim: usize, b: &[f64], b_dim: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (a_dim + b_dim));
    for i in 0..n {
        out.extend_from_slice(&a[i * a_dim..(i + 1) * a_dim]);
        out.extend_from_slice(&b[i * b_dim..(i + 1) * b_dim]);
    }
    out
}

fn gaussian(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::config(format!("noise std {std}: {e}")))
}

impl Td3Agent {
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        act_dim: usize,
        shape: &NetworkShape,
        hyper: Td3Hyper,
        rng: &mut R,
    ) -> Result<Self> {
        let actor = Mlp::init(&MlpSpec::actor(obs_dim, act_dim, shape.extractor, &shape.hidden), rng)?;
        let cspec = MlpSpec::critic(obs_dim, act_dim, shape.extractor, &shape.hidden);
        let critic1 = Mlp::init(&cspec, rng)?;
        let critic2 = Mlp::init(&cspec, rng)?;
        Self::from_networks(actor, critic1, critic2, hyper)
    }

    /// Targets start as exact copies of the live networks.
    pub fn from_networks(actor: Mlp, critic1: Mlp, critic2: Mlp, hyper: Td3Hyper) -> Result<Self> {
        hyper.validate()?;
        let (obs, act) = (actor.spec().input_dim(), actor.spec().output_dim());
        for c in [&critic1, &critic2] {
            if c.spec().input_dim() != obs + act || c.spec().output_dim() != 1 {
                return Err(Error::contract(format!(
                    "td3: critic {:?} does not match actor {obs} -> {act}",
                    c.spec().layer_sizes
                )));
            }
        }
        let adam = |n: usize, lr: f64| {
            AdamState::new(
                n,
                AdamHyper {
                    lr,
                    ..AdamHyper::default()
                },
            )
        };
        Ok(Self {
            actor_opt: adam(actor.params().len(), hyper.lr_actor),
            critic1_opt: adam(critic1.params().len(), hyper.lr_critic),
            critic2_opt: adam(critic2.params().len(), hyper.lr_critic),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            hyper,
            updates: 0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.spec().input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.spec().output_dim()
    }

    /// Completed calls to [`Td3Agent::update`].
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub(crate) fn set_updates(&mut self, n: u64) {
        self.updates = n;
    }

    /// Deterministic policy output.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(obs, 1)
    }

    /// Policy output plus Gaussian exploration noise, clipped to [-1, 1].
    pub fn select_action<R: Rng + ?Sized>(&self, obs: &[f64], noise_std: f64, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.act(obs)?;
        if noise_std > 0.0 {
            let n = gaussian(noise_std)?;
            for x in &mut a {
                *x += n.sample(rng);
            }
        }
        for x in &mut a {
            *x = x.clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Uniform action in [-1, 1] for the warm-up phase.
    pub fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.act_dim()).map(|_| rng.random_range(-1.0..=1.0)).collect()
    }

    /// Smoothed target actions `clip(mu_t(s') + clip(eps, -c, c), -1, 1)`.
    pub fn target_actions<R: Rng + ?Sized>(&self, next_obs: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut a = self.actor_target.predict(next_obs, n)?;
        let c = self.hyper.noise_clip;
        let std = self.hyper.target_noise_std;
        let noise = if std > 0.0 { Some(gaussian(std)?) } else { None };
        for x in &mut a {
            let eps = noise.map_or(0.0, |d| d.sample(rng)).clamp(-c, c);
            *x = (*x + eps).clamp(-1.0, 1.0);
        }
        Ok(a)
    }

    /// Clipped double-Q targets `r + gamma * (1 - d) * min(Q1', Q2')`.
    pub fn compute_target<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Result<Vec<f64>> {
        let n = batch.len;
        let (od, ad) = (self.obs_dim(), self.act_dim());
        let a_next = self.target_actions(&batch.next_obs, n, rng)?;
        let input = concat_rows(&batch.next_obs, od, &a_next, ad, n);
        let q1 = self.critic1_target.predict(&input, n)?;
        let q2 = self.critic2_target.predict(&input, n)?;
        Ok((0..n)
            .map(|i| {
                let cont = 1.0 - batch.dones[i];
                if cont == 0.0 {
                    batch.rewards[i]
                } else {
                    batch.rewards[i] + self.hyper.gamma * cont * q1[i].min(q2[i])
                }
            })
            .collect())
    }

    fn check_batch(&self, b: &Batch) -> Result<()> {
        let n = b.len;
        if n == 0
            || b.obs.len() != n * self.obs_dim()
            || b.next_obs.len() != n * self.obs_dim()
            || b.actions.len() != n * self.act_dim()
            || b.rewards.len() != n
            || b.dones.len() != n
        {
            return Err(Error::contract("td3: malformed minibatch"));
        }
        Ok(())
    }

    /// One TD3 iteration: both critics regress onto the shared target; every
    /// `policy_delay`-th call also steps the actor and soft-updates all targets.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats> {
        self.check_batch(batch)?;
        let n = batch.len;
        let (od, ad) = (self.obs_dim(), self.act_dim());
        let y = self.compute_target(batch, rng)?;
        let sa = concat_rows(&batch.obs, od, &batch.actions, ad, n);

        let mut critic_loss = 0.0;
        for (net, opt) in [
            (&mut self.critic1, &mut self.critic1_opt),
            (&mut self.critic2, &mut self.critic2_opt),
        ] {
            let (q, cache) = net.forward(&sa, n)?;
            let mut grad = Vec::with_capacity(n);
            let mut loss = 0.0;
            for (qi, yi) in q.iter().zip(&y) {
                let e = qi - yi;
                loss += e * e;
                grad.push(2.0 * e / n as f64);
            }
            critic_loss += loss / n as f64;
            let g = net.backward(&cache, &grad)?;
            adam_step(net.params_mut(), &g.params, opt)?;
        }
        self.updates += 1;

        let mut actor_loss = None;
        if self.updates % self.hyper.policy_delay == 0 {
            let (a_pi, actor_cache) = self.actor.forward(&batch.obs, n)?;
            let input = concat_rows(&batch.obs, od, &a_pi, ad, n);
            let (q, critic_cache) = self.critic1.forward(&input, n)?;
            actor_loss = Some(-q.iter().sum::<f64>() / n as f64);
            let dq = self
                .critic1
                .input_gradient(&critic_cache, &vec![-1.0 / n as f64; n])?;
            let mut da = Vec::with_capacity(n * ad);
            for i in 0..n {
                let row = &dq[i * (od + ad)..(i + 1) * (od + ad)];
                da.extend_from_slice(&row[od..]);
            }
            let g = self.actor.backward(&actor_cache, &da)?;
            adam_step(self.actor.params_mut(), &g.params, &mut self.actor_opt)?;

            let rho = self.hyper.rho;
            self.actor_target.blend_from(&self.actor, rho)?;
            self.critic1_target.blend_from(&self.critic1, rho)?;
            self.critic2_target.blend_from(&self.critic2, rho)?;
        }
        Ok(UpdateStats {
            critic_loss: critic_loss / 2.0,
            actor_loss,
        })
    }
}
