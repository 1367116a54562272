//! Small-MLP deep Q-learning: value network, replay, ε-greedy policy and
//! the training step shared by every agent in the crate.

pub mod network;
pub mod optim;
pub mod replay;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RlConfig;
use crate::error::{Error, Result};

pub use network::{Gradients, Layer, QNetwork};
pub use optim::{Optimizer, OptimizerKind};
pub use replay::{Experience, ReplayBuffer};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    /// Episodes between decays.
    pub decay_period: usize,
    pub epsilon_min: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Training steps between target-network copies.
    pub target_sync: usize,
}

impl TrainSchedule {
    pub fn from_config(cfg: &RlConfig) -> Self {
        Self {
            epsilon_start: cfg.epsilon_start,
            epsilon_decay: cfg.epsilon_decay,
            decay_period: cfg.epsilon_decay_period.max(1),
            epsilon_min: cfg.epsilon_min,
            gamma: cfg.gamma,
            learning_rate: cfg.learning_rate,
            optimizer: cfg.optimizer,
            replay_capacity: cfg.replay_capacity,
            batch_size: cfg.batch_size,
            target_sync: cfg.target_sync.max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.gamma)
            && self.epsilon_start > 0.0
            && self.epsilon_start <= 1.0
            && self.epsilon_decay > 0.0
            && self.epsilon_decay <= 1.0
            && (0.0..=self.epsilon_start).contains(&self.epsilon_min)
            && self.learning_rate > 0.0
            && self.batch_size > 0
            && self.replay_capacity >= self.batch_size;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid train schedule {self:?}")))
        }
    }

    /// Exploration rate after `episode` completed episodes.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let decays = (episode / self.decay_period.max(1)) as i32;
        (self.epsilon_start * self.epsilon_decay.powi(decays)).max(self.epsilon_min)
    }
}

/// Index of the largest value among allowed entries; ties go to the lowest index.
pub fn masked_argmax(q: &[f64], mask: Option<&[bool]>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in q.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        match best {
            Some((_, b)) if *v <= b => {}
            _ => best = Some((i, *v)),
        }
    }
    best.map(|(i, _)| i)
}

/// ε-greedy choice. Masked-out actions are never returned.
pub fn select_action<R: Rng>(
    net: &QNetwork,
    state: &[f64],
    epsilon: f64,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<usize> {
    let n = net.output_dim();
    if mask.is_some_and(|m| m.len() != n) {
        return Err(Error::domain("action mask length differs from action count"));
    }
    let q = net.forward(state)?;
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        let valid: Vec<usize> = (0..n).filter(|i| mask.is_none_or(|m| m[*i])).collect();
        if valid.is_empty() {
            return Err(Error::domain("every action is masked"));
        }
        return Ok(valid[rng.random_range(0..valid.len())]);
    }
    masked_argmax(&q, mask).ok_or_else(|| Error::domain("every action is masked"))
}

/// One DQN update on `batch`: targets `y = r + gamma * max_a' Q_target(s', a')`
/// (`y = r` on terminal transitions). Returns the loss before the update.
pub fn train_step(
    net: &mut QNetwork,
    target: &QNetwork,
    batch: &[&Experience],
    gamma: f64,
    opt: &mut Optimizer,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut targets = Vec::with_capacity(batch.len());
    for e in batch {
        let y = if e.terminal || gamma == 0.0 {
            e.reward
        } else {
            let q = target.forward(&e.next_state)?;
            let a = masked_argmax(&q, e.next_mask.as_deref()).unwrap_or(0);
            e.reward + gamma * q[a]
        };
        targets.push(y);
    }
    let states: Vec<&[f64]> = batch.iter().map(|e| e.state.as_slice()).collect();
    let actions: Vec<usize> = batch.iter().map(|e| e.action).collect();
    let (loss, grads) = net.loss_and_gradients(&states, &actions, &targets)?;
    if !loss.is_finite() || !grads.all_finite() {
        return Err(Error::NonFinite(format!("loss {loss}, gradient finite: {}", grads.all_finite())));
    }
    opt.apply(net, &grads);
    Ok(loss)
}

/// Online and target networks, replay memory and exploration state of one agent.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: QNetwork,
    pub target: QNetwork,
    pub replay: ReplayBuffer,
    pub schedule: TrainSchedule,
    opt: Optimizer,
    rng: ChaCha8Rng,
    episode: usize,
    train_steps: u64,
    pub last_loss: Option<f64>,
}

impl DqnAgent {
    pub fn new(sizes: &[usize], schedule: TrainSchedule, seed: u64) -> Result<Self> {
        schedule.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = QNetwork::new(sizes, &mut rng)?;
        Ok(Self::with_network(online, schedule, rng))
    }

    fn with_network(online: QNetwork, schedule: TrainSchedule, rng: ChaCha8Rng) -> Self {
        let opt = Optimizer::new(schedule.optimizer, schedule.learning_rate, &online);
        Self {
            target: online.clone(),
            replay: ReplayBuffer::new(schedule.replay_capacity),
            opt,
            online,
            schedule,
            rng,
            episode: 0,
            train_steps: 0,
            last_loss: None,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.schedule.epsilon(self.episode)
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn end_episode(&mut self) {
        self.episode += 1;
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.online.forward(state)
    }

    pub fn act(&mut self, state: &[f64], epsilon: f64, mask: Option<&[bool]>) -> Result<usize> {
        select_action(&self.online, state, epsilon, mask, &mut self.rng)
    }

    pub fn greedy(&self, state: &[f64], mask: Option<&[bool]>) -> Result<usize> {
        let q = self.online.forward(state)?;
        masked_argmax(&q, mask).ok_or_else(|| Error::domain("every action is masked"))
    }

    pub fn remember(&mut self, e: Experience) {
        self.replay.push(e);
    }

    /// One minibatch update once the buffer holds a full batch.
    pub fn learn(&mut self) -> Result<Option<f64>> {
        if self.replay.len() < self.schedule.batch_size {
            return Ok(None);
        }
        let batch = self.replay.sample(self.schedule.batch_size, &mut self.rng)?;
        let loss = train_step(&mut self.online, &self.target, &batch, self.schedule.gamma, &mut self.opt)?;
        self.train_steps += 1;
        if self.train_steps % self.schedule.target_sync as u64 == 0 {
            self.target = self.online.clone();
        }
        self.last_loss = Some(loss);
        Ok(Some(loss))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.online.to_text())?;
        Ok(())
    }

    /// Agent whose networks come from a checkpoint; replay starts empty and
    /// exploration restarts at the schedule's final value.
    pub fn load(path: impl AsRef<Path>, schedule: TrainSchedule, seed: u64) -> Result<Self> {
        schedule.validate()?;
        let net = QNetwork::from_text(&std::fs::read_to_string(path)?)?;
        Ok(Self::with_network(net, schedule, ChaCha8Rng::seed_from_u64(seed)))
    }

    /// Replaces the networks, keeping the schedule and RNG.
    pub fn set_network(&mut self, net: QNetwork) -> Result<()> {
        if net.sizes() != self.online.sizes() {
            return Err(Error::Checkpoint(format!(
                "checkpoint sizes {:?} differ from agent {:?}",
                net.sizes(),
                self.online.sizes()
            )));
        }
        self.opt = Optimizer::new(self.schedule.optimizer, self.schedule.learning_rate, &net);
        self.target = net.clone();
        self.online = net;
        Ok(())
    }
}
