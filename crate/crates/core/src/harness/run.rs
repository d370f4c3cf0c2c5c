use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Budget, EnvConfig, ExperimentConfig};
use super::eval::{evaluate, make_env, PolicySnapshot};
use crate::agents::{Agent, AgentVariant, QAgent, SacAgent};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::intrinsic::{IntrinsicKind, IntrinsicModel, RndModel};
use crate::kea::{KeaState, StepOutcome, TickLosses};
use crate::replay::ReplayBuffer;

pub const METRICS_HEADER: &str =
    "step,episode,return_mean,return_std,intrinsic_mean,usage_s,entropy_mean,loss_critic,loss_actor";

/// One evaluation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub episode: u64,
    pub return_mean: f64,
    pub return_std: f64,
    /// Mean scaled intrinsic reward collected since the previous row.
    pub intrinsic_mean: f64,
    /// Fraction of steps since the previous row taken by `S`.
    pub usage_s: f64,
    pub entropy_mean: f64,
    pub loss_critic: f64,
    pub loss_actor: f64,
}

/// Work counters of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub steps: u64,
    pub episodes: u64,
    /// Steps taken after the warmup threshold was reached.
    pub post_warmup_steps: u64,
    /// Training ticks; each tick is one update per agent.
    pub ticks: u64,
    pub updates_n: u64,
    pub updates_s: u64,
    pub usage_s: u64,
}

#[derive(Debug, Default)]
struct Window {
    steps: u64,
    s_steps: u64,
    intrinsic: f64,
    critic: f64,
    actor: f64,
    losses: u64,
}

/// Stream ids carved out of a run seed.
mod stream {
    pub const COLLECT: u64 = 1;
    pub const AGENT_N: u64 = 2;
    pub const AGENT_S: u64 = 3;
    pub const RND_TARGET: u64 = 4;
    pub const RND_PREDICTOR: u64 = 5;
    pub const REPLAY: u64 = 6;
    pub const EVAL: u64 = 7;
    pub const MAP: u64 = 8;
}

fn rng_for(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn build_agent(cfg: &ExperimentConfig, obs_dim: usize, actions: usize, rng: &mut ChaCha8Rng) -> Result<Agent> {
    Ok(match cfg.agent.variant {
        AgentVariant::Sac => Agent::Sac(SacAgent::new(obs_dim, actions, cfg.agent.sac.clone(), rng)?),
        _ => Agent::Q(QAgent::new(obs_dim, actions, cfg.agent.q.clone(), rng)?),
    })
}

/// Everything one seed of an experiment owns.
pub struct SeedRun {
    cfg: ExperimentConfig,
    seed: u64,
    env_cfg: EnvConfig,
    env: Box<dyn Environment>,
    kea: KeaState,
    intrinsic: IntrinsicModel,
    buffer: ReplayBuffer,
    collect_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    utd_credit: u64,
    counters: Counters,
    window: Window,
    next_eval: u64,
}

/// Result of one [`SeedRun::step`].
#[derive(Clone, Debug)]
pub struct StepReport {
    pub outcome: StepOutcome,
    pub ticks: Vec<TickLosses>,
}

impl SeedRun {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut env_cfg = cfg.env.clone();
        if let EnvConfig::Deepsea(d) = &mut env_cfg {
            if cfg.map_from_run_seed {
                d.action_map_seed = Some(rng_for(seed, stream::MAP).next_u64());
            }
        }
        let env = make_env(&env_cfg)?;
        let (obs_dim, actions) = (env.obs_dim(), env.num_actions());

        let agent_n = build_agent(cfg, obs_dim, actions, &mut rng_for(seed, stream::AGENT_N))?;
        let kea = if cfg.kea.enabled {
            let agent_s = build_agent(cfg, obs_dim, actions, &mut rng_for(seed, stream::AGENT_S))?;
            KeaState::new(agent_n, agent_s, cfg.kea.switch)?
        } else {
            KeaState::baseline(agent_n)
        }
        .with_intrinsic_schedule(cfg.intrinsic.schedule)?;

        let intrinsic = IntrinsicModel::build(
            cfg.intrinsic.kind,
            obs_dim,
            cfg.intrinsic.rnd.clone(),
            cfg.intrinsic.noveld_c,
            &mut rng_for(seed, stream::RND_TARGET),
            &mut rng_for(seed, stream::RND_PREDICTOR),
        )?;

        Ok(Self {
            cfg: cfg.clone(),
            seed,
            env_cfg,
            env,
            kea,
            intrinsic,
            buffer: ReplayBuffer::new(cfg.replay_capacity)?,
            collect_rng: rng_for(seed, stream::COLLECT),
            replay_rng: rng_for(seed, stream::REPLAY),
            eval_rng: rng_for(seed, stream::EVAL),
            utd_credit: 0,
            counters: Counters::default(),
            window: Window::default(),
            next_eval: cfg.schedule.eval_every,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    /// Environment settings after the per-run map draw.
    pub fn env_config(&self) -> &EnvConfig {
        &self.env_cfg
    }

    pub fn kea(&self) -> &KeaState {
        &self.kea
    }

    pub fn kea_mut(&mut self) -> &mut KeaState {
        &mut self.kea
    }

    pub fn intrinsic(&self) -> &IntrinsicModel {
        &self.intrinsic
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Progress in the unit of the budget.
    pub fn progress(&self) -> u64 {
        match self.cfg.schedule.budget {
            Budget::Steps(_) => self.counters.steps,
            Budget::Episodes(_) => self.counters.episodes,
        }
    }

    pub fn finished(&self) -> bool {
        self.progress() >= self.cfg.schedule.budget.total()
    }

    fn warm(&self) -> bool {
        let s = &self.cfg.schedule;
        self.buffer.insert_count() >= s.warmup_samples.max(s.batch_size as u64)
    }

    /// Collects one transition, then runs however many training ticks the
    /// update-to-data ratio owes.
    pub fn step(&mut self) -> Result<StepReport> {
        let outcome = self
            .kea
            .collect_step(self.env.as_mut(), &mut self.intrinsic, &mut self.buffer, &mut self.collect_rng)?;
        self.counters.steps += 1;
        self.window.steps += 1;
        self.window.intrinsic += outcome.reward_int;
        if outcome.policy == crate::kea::PolicyId::S {
            self.counters.usage_s += 1;
            self.window.s_steps += 1;
        }
        if outcome.episode_return.is_some() {
            self.counters.episodes += 1;
        }

        let mut ticks = Vec::new();
        if self.warm() {
            self.counters.post_warmup_steps += 1;
            self.utd_credit += u64::from(self.cfg.schedule.utd_agent);
            while self.utd_credit >= 32 {
                self.utd_credit -= 32;
                let t = self.kea.train_tick(
                    &self.buffer,
                    &self.intrinsic,
                    self.cfg.agent.scaling,
                    self.cfg.schedule.batch_size,
                    &mut self.replay_rng,
                )?;
                self.counters.ticks += 1;
                if t.n.applied {
                    self.counters.updates_n += 1;
                    self.window.critic += t.n.critic;
                    self.window.actor += t.n.actor;
                    self.window.losses += 1;
                }
                if t.s.is_some_and(|s| s.applied) {
                    self.counters.updates_s += 1;
                }
                ticks.push(t);
            }
        }
        Ok(StepReport { outcome, ticks })
    }

    /// Evaluates `N` now and closes the current metrics window.
    pub fn metrics_row(&mut self) -> Result<MetricsRow> {
        let s = &self.cfg.schedule;
        let eval = evaluate(
            self.kea.agent_n(),
            &self.env_cfg,
            s.eval_episodes,
            s.eval_mode,
            &mut self.eval_rng,
        )?;
        let w = std::mem::take(&mut self.window);
        let per = |sum: f64, n: u64| if n == 0 { 0.0 } else { sum / n as f64 };
        Ok(MetricsRow {
            step: self.counters.steps,
            episode: self.counters.episodes,
            return_mean: eval.return_mean,
            return_std: eval.return_std,
            intrinsic_mean: per(w.intrinsic, w.steps),
            usage_s: per(w.s_steps as f64, w.steps),
            entropy_mean: eval.entropy_mean,
            loss_critic: per(w.critic, w.losses),
            loss_actor: per(w.actor, w.losses),
        })
    }

    /// Steps until the budget is spent, emitting a row at every evaluation
    /// point and a last one at the end of the budget.
    pub fn run(&mut self, mut on_row: impl FnMut(&MetricsRow) -> Result<()>) -> Result<Vec<MetricsRow>> {
        let mut rows = Vec::new();
        while !self.finished() {
            self.step()?;
            if self.progress() >= self.next_eval || self.finished() {
                while self.next_eval <= self.progress() {
                    self.next_eval += self.cfg.schedule.eval_every;
                }
                let row = self.metrics_row()?;
                on_row(&row)?;
                rows.push(row);
            }
        }
        Ok(rows)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            seed: self.seed,
            env: self.env_cfg.clone(),
            policy_n: PolicySnapshot::of(self.kea.agent_n()),
            policy_s: self.kea.agent_s().map(PolicySnapshot::of),
            rnd: self.intrinsic.rnd().cloned(),
            counters: self.counters,
        }
    }
}

/// Final state of a run needed to draw its maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub env: EnvConfig,
    pub policy_n: PolicySnapshot,
    pub policy_s: Option<PolicySnapshot>,
    pub rnd: Option<RndModel>,
    pub counters: Counters,
}

impl Checkpoint {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &serde_json::to_vec(self)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub counters: Counters,
    pub final_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub env: String,
    pub variant: AgentVariant,
    pub intrinsic: IntrinsicKind,
    pub kea: bool,
    pub runs: Vec<SeedSummary>,
    pub config: ExperimentConfig,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Output root: explicit path, else the config's `out_dir`, else
/// `$KEA_OUT_DIR/<label>`, else `runs/<label>`.
pub fn resolve_out_dir(explicit: Option<&Path>, cfg: &ExperimentConfig, label: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.out_dir {
        return p.clone();
    }
    let root = std::env::var_os("KEA_OUT_DIR").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(label)
}

/// Runs every seed of `cfg` and writes `seed_<s>/metrics.csv`,
/// `seed_<s>/checkpoint.json` and `manifest.json` under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let dir = out_dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let metrics = dir.join("metrics.csv");
        let file = fs::File::create(&metrics).map_err(|e| Error::io(&metrics, e))?;
        let mut writer = csv::Writer::from_writer(file);

        let mut run = SeedRun::new(cfg, seed)?;
        let rows = run.run(|row| {
            writer.serialize(row)?;
            writer.flush().map_err(|e| Error::io(&metrics, e))?;
            log::info!(
                "seed {seed} step {} episode {} return {:.4} usage_s {:.3}",
                row.step,
                row.episode,
                row.return_mean,
                row.usage_s
            );
            Ok(())
        })?;
        writer.flush().map_err(|e| Error::io(&metrics, e))?;

        let checkpoint = dir.join("checkpoint.json");
        run.checkpoint().save(&checkpoint)?;
        runs.push(SeedSummary {
            seed,
            metrics,
            checkpoint,
            counters: run.counters(),
            final_return: rows.last().map_or(f64::NAN, |r| r.return_mean),
        });
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        seeds: cfg.seeds.clone(),
        env: cfg.env.name().into(),
        variant: cfg.agent.variant,
        intrinsic: cfg.intrinsic.kind,
        kea: cfg.kea.enabled,
        runs,
        config: cfg.clone(),
    };
    let path = out_dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.write_all(b"\n").expect("writing to a vec");
    write_file(&path, &bytes)?;
    Ok(manifest)
}

/// Reads a metrics file written by [`run_experiment`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != METRICS_HEADER {
        return Err(Error::Invalid(format!("{}: unexpected header `{header}`", path.display())));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
