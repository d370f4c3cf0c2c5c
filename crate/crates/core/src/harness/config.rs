//! Experiment configuration.
//!
//! Files are TOML with dotted keys (`env.name = "deepsea"`). Every key is
//! optional except `env.name`; missing keys take the defaults of the chosen
//! environment.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::agents::{ActMode, AgentVariant, Exploration, QConfig, QTarget, RewardScaling, SacConfig};
use crate::env::{DeepSeaConfig, GridNavConfig, Rect};
use crate::error::{Error, Result};
use crate::intrinsic::{IntrinsicKind, RndConfig};
use crate::kea::{IntrinsicSchedule, SwitchConfig};
use crate::tensor::Activation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvConfig {
    Gridnav(GridNavConfig),
    Deepsea(DeepSeaConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Gridnav(_) => "gridnav",
            EnvConfig::Deepsea(_) => "deepsea",
        }
    }
}

/// Training length, counted in environment steps or in episodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Steps(u64),
    Episodes(u64),
}

impl Budget {
    pub fn total(&self) -> u64 {
        match self {
            Budget::Steps(n) | Budget::Episodes(n) => *n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub variant: AgentVariant,
    pub sac: SacConfig,
    pub q: QConfig,
    pub scaling: RewardScaling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicConfig {
    pub kind: IntrinsicKind,
    pub rnd: RndConfig,
    pub noveld_c: f64,
    pub schedule: IntrinsicSchedule,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeaConfig {
    pub enabled: bool,
    pub switch: SwitchConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub budget: Budget,
    /// Transitions collected before the first agent update.
    pub warmup_samples: u64,
    pub batch_size: usize,
    /// Agent updates per 32 collected transitions.
    pub utd_agent: u32,
    /// Evaluation period, in the unit of the budget.
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eval_mode: ActMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub intrinsic: IntrinsicConfig,
    pub kea: KeaConfig,
    pub replay_capacity: usize,
    pub schedule: Schedule,
    pub seeds: Vec<u64>,
    /// When the env section has no explicit map seed, each run draws its
    /// DeepSea map from its own seed.
    pub map_from_run_seed: bool,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for the 41×41 navigation task.
    pub fn gridnav() -> Self {
        Self {
            env: EnvConfig::Gridnav(GridNavConfig::default()),
            agent: AgentConfig {
                variant: AgentVariant::Sac,
                sac: SacConfig::default(),
                q: QConfig::default(),
                scaling: RewardScaling::new(100.0, 1.0),
            },
            intrinsic: IntrinsicConfig {
                kind: IntrinsicKind::Rnd,
                rnd: RndConfig::default(),
                noveld_c: 0.5,
                schedule: IntrinsicSchedule::default(),
            },
            kea: KeaConfig {
                enabled: true,
                switch: SwitchConfig { sigma: 1.0 },
            },
            replay_capacity: 300_000,
            schedule: Schedule {
                budget: Budget::Steps(300_000),
                warmup_samples: 1024,
                batch_size: 64,
                utd_agent: 32,
                eval_every: 5_000,
                eval_episodes: 20,
                eval_mode: ActMode::Greedy,
            },
            seeds: vec![0],
            map_from_run_seed: false,
            out_dir: None,
        }
    }

    /// Defaults for DeepSea of side `size`.
    pub fn deepsea(size: usize) -> Self {
        let base = Self::gridnav();
        let q = QConfig {
            hidden: vec![64, 64],
            lr: 3e-4,
            ..QConfig::default()
        };
        Self {
            env: EnvConfig::Deepsea(DeepSeaConfig::new(size, None)),
            agent: AgentConfig {
                variant: AgentVariant::Sac,
                sac: SacConfig::deepsea(),
                q,
                scaling: RewardScaling::new(size as f64, 1.0),
            },
            intrinsic: IntrinsicConfig {
                rnd: RndConfig {
                    scale: 0.3,
                    ..RndConfig::default()
                },
                ..base.intrinsic
            },
            replay_capacity: 100_000,
            schedule: Schedule {
                budget: Budget::Episodes(100_000),
                warmup_samples: 200 * size as u64,
                batch_size: 64,
                utd_agent: 16,
                eval_every: 1_000,
                eval_episodes: 10,
                eval_mode: ActMode::Greedy,
            },
            map_from_run_seed: true,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| {
            Err(Error::Config {
                key: key.into(),
                reason: reason.into(),
            })
        };
        match &self.env {
            EnvConfig::Gridnav(g) => g.validate()?,
            EnvConfig::Deepsea(d) if d.size < 2 => return bad("env.size", "must be at least 2"),
            EnvConfig::Deepsea(_) => {}
        }
        self.agent.sac.validate()?;
        self.agent.q.validate()?;
        self.agent.scaling.validate()?;
        self.kea.switch.validate()?;
        let s = &self.schedule;
        if s.budget.total() == 0 {
            return bad("total_steps", "budget must be positive");
        }
        if s.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if s.eval_every == 0 {
            return bad("eval_every", "must be positive");
        }
        if s.eval_episodes == 0 {
            return bad("eval_episodes", "must be positive");
        }
        if s.utd_agent == 0 {
            return bad("utd_agent", "must be positive");
        }
        if self.intrinsic.schedule.batch == 0 {
            return bad("intrinsic.train_batch", "must be positive");
        }
        if self.replay_capacity == 0 {
            return bad("replay.capacity", "must be positive");
        }
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            key: "<file>".into(),
            reason: e.message().to_string(),
        })?;
        let raw = RawConfig::from_table(table)?;
        let cfg = raw.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// sha-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTop {
    total_steps: Option<u64>,
    total_episodes: Option<u64>,
    warmup_samples: Option<u64>,
    batch_size: Option<usize>,
    utd_agent: Option<u32>,
    utd_intrinsic: Option<u32>,
    eval_every: Option<u64>,
    eval_episodes: Option<usize>,
    eval_mode: Option<ActMode>,
    seeds: Option<Vec<u64>>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    name: Option<String>,
    size: Option<usize>,
    seed: Option<u64>,
    /// DeepSea only: false selects the identity action map.
    randomize: Option<bool>,
    max_steps: Option<usize>,
    /// Gridnav only: `[x, y, width, height]`.
    obstacle: Option<[usize; 4]>,
    /// Gridnav only: `[x, y]`.
    goal: Option<[usize; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    variant: Option<AgentVariant>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    tau: Option<f64>,
    lr_actor: Option<f64>,
    lr_critic: Option<f64>,
    beta_ext: Option<f64>,
    epsilon: Option<f64>,
    temperature: Option<f64>,
    hidden: Option<Vec<usize>>,
    activation: Option<Activation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntrinsic {
    kind: Option<IntrinsicKind>,
    scale: Option<f64>,
    clip: Option<f64>,
    embed_dim: Option<usize>,
    hidden: Option<Vec<usize>>,
    lr: Option<f64>,
    grad_clip: Option<f64>,
    noveld_c: Option<f64>,
    train_batch: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKea {
    enabled: Option<bool>,
    sigma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReplay {
    capacity: Option<usize>,
}

#[derive(Debug, Default)]
struct RawConfig {
    top: RawTop,
    env: RawEnv,
    agent: RawAgent,
    intrinsic: RawIntrinsic,
    kea: RawKea,
    replay: RawReplay,
}

/// Deserializes one section, turning serde's complaint into an error that
/// names the offending key.
fn section<T: DeserializeOwned + Default>(prefix: &str, value: Option<toml::Value>) -> Result<T> {
    let Some(value) = value else {
        return Ok(T::default());
    };
    if prefix.is_empty() {
        // top level: scalars only, sections were removed by the caller
    } else if !value.is_table() {
        return Err(Error::Config {
            key: prefix.into(),
            reason: "expected a table of keys".into(),
        });
    }
    let probe = value.clone();
    value.try_into().map_err(|e: toml::de::Error| {
        let msg = e.message().to_string();
        let field = unknown_field(&msg).or_else(|| first_bad_key::<T>(&probe));
        let key = match (prefix, field) {
            ("", Some(f)) => f,
            ("", None) => "<top level>".into(),
            (p, Some(f)) => format!("{p}.{f}"),
            (p, None) => p.to_string(),
        };
        Error::Config { key, reason: msg }
    })
}

fn unknown_field(msg: &str) -> Option<String> {
    let rest = msg.strip_prefix("unknown field `")?;
    Some(rest[..rest.find('`')?].to_string())
}

/// Finds the first key whose value alone fails to deserialize.
fn first_bad_key<T: DeserializeOwned + Default>(value: &toml::Value) -> Option<String> {
    let table = value.as_table()?;
    table.iter().find_map(|(k, v)| {
        let mut single = toml::Table::new();
        single.insert(k.clone(), v.clone());
        toml::Value::Table(single).try_into::<T>().err().map(|_| k.clone())
    })
}

impl RawConfig {
    fn from_table(mut table: toml::Table) -> Result<Self> {
        let env = section("env", table.remove("env"))?;
        let agent = section("agent", table.remove("agent"))?;
        let intrinsic = section("intrinsic", table.remove("intrinsic"))?;
        let kea = section("kea", table.remove("kea"))?;
        let replay = section("replay", table.remove("replay"))?;
        let top = section("", Some(toml::Value::Table(table)))?;
        Ok(Self {
            top,
            env,
            agent,
            intrinsic,
            kea,
            replay,
        })
    }

    fn resolve(self) -> Result<ExperimentConfig> {
        let RawConfig {
            top,
            env,
            agent,
            intrinsic,
            kea,
            replay,
        } = self;
        let name = env.name.ok_or_else(|| Error::Config {
            key: "env.name".into(),
            reason: "required (gridnav or deepsea)".into(),
        })?;
        let mut cfg = match name.as_str() {
            "gridnav" => {
                if env.size.is_some() || env.seed.is_some() || env.randomize.is_some() {
                    return Err(Error::Config {
                        key: "env.size".into(),
                        reason: "size, seed and randomize apply to deepsea only".into(),
                    });
                }
                let mut cfg = ExperimentConfig::gridnav();
                if let EnvConfig::Gridnav(g) = &mut cfg.env {
                    if let Some(m) = env.max_steps {
                        g.max_steps = m;
                    }
                    if let Some([x, y, width, height]) = env.obstacle {
                        g.obstacle = Rect { x, y, width, height };
                    }
                    if let Some([x, y]) = env.goal {
                        g.goal = (x, y);
                    }
                }
                cfg
            }
            "deepsea" => {
                if env.max_steps.is_some() || env.obstacle.is_some() || env.goal.is_some() {
                    return Err(Error::Config {
                        key: "env.max_steps".into(),
                        reason: "max_steps, obstacle and goal apply to gridnav only".into(),
                    });
                }
                let mut cfg = ExperimentConfig::deepsea(env.size.unwrap_or(10));
                let randomize = env.randomize.unwrap_or(true);
                cfg.map_from_run_seed = randomize && env.seed.is_none();
                if let EnvConfig::Deepsea(d) = &mut cfg.env {
                    d.action_map_seed = if randomize { env.seed } else { None };
                }
                cfg
            }
            other => {
                return Err(Error::Config {
                    key: "env.name".into(),
                    reason: format!("unknown environment `{other}`"),
                })
            }
        };

        let a = &mut cfg.agent;
        if let Some(v) = agent.variant {
            a.variant = v;
        }
        match a.variant {
            AgentVariant::Sac => {}
            AgentVariant::Dqn => {
                a.q.explore = Exploration::EpsilonGreedy;
                a.q.target = QTarget::Dqn;
            }
            AgentVariant::DqnP => {
                a.q.explore = Exploration::EpsilonProportional;
                a.q.target = QTarget::Dqn;
            }
            AgentVariant::Sql => {
                a.q.explore = Exploration::Boltzmann;
                a.q.target = QTarget::Sql;
            }
        }
        set(&mut a.sac.alpha, agent.alpha);
        set(&mut a.sac.gamma, agent.gamma);
        set(&mut a.q.gamma, agent.gamma);
        set(&mut a.sac.tau, agent.tau);
        set(&mut a.q.tau, agent.tau);
        set(&mut a.sac.lr_actor, agent.lr_actor);
        set(&mut a.sac.lr_critic, agent.lr_critic);
        set(&mut a.q.lr, agent.lr_critic);
        set(&mut a.scaling.beta_ext, agent.beta_ext);
        set(&mut a.q.epsilon, agent.epsilon);
        set(&mut a.q.temperature, agent.temperature);
        set(&mut a.sac.hidden, agent.hidden.clone());
        set(&mut a.q.hidden, agent.hidden);
        set(&mut a.sac.activation, agent.activation);
        set(&mut a.q.activation, agent.activation);

        let i = &mut cfg.intrinsic;
        set(&mut i.kind, intrinsic.kind);
        set(&mut i.rnd.scale, intrinsic.scale);
        set(&mut i.rnd.clip, intrinsic.clip);
        set(&mut i.rnd.embed_dim, intrinsic.embed_dim);
        set(&mut i.rnd.hidden, intrinsic.hidden);
        set(&mut i.rnd.lr, intrinsic.lr);
        set(&mut i.rnd.grad_clip, intrinsic.grad_clip);
        set(&mut i.noveld_c, intrinsic.noveld_c);
        set(&mut i.schedule.batch, intrinsic.train_batch);
        set(&mut i.schedule.updates_per_32, top.utd_intrinsic);

        set(&mut cfg.kea.enabled, kea.enabled);
        set(&mut cfg.kea.switch.sigma, kea.sigma);
        set(&mut cfg.replay_capacity, replay.capacity);

        let s = &mut cfg.schedule;
        match (top.total_steps, top.total_episodes) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    key: "total_episodes".into(),
                    reason: "give either total_steps or total_episodes".into(),
                })
            }
            (Some(n), None) => s.budget = Budget::Steps(n),
            (None, Some(n)) => s.budget = Budget::Episodes(n),
            (None, None) => {}
        }
        set(&mut s.warmup_samples, top.warmup_samples);
        set(&mut s.batch_size, top.batch_size);
        set(&mut s.utd_agent, top.utd_agent);
        set(&mut s.eval_every, top.eval_every);
        set(&mut s.eval_episodes, top.eval_episodes);
        set(&mut s.eval_mode, top.eval_mode);
        set(&mut cfg.seeds, top.seeds);
        cfg.out_dir = top.out_dir;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
