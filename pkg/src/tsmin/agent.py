"""Maskable actor-critic trained with PPO-clip.

The actor maps the k-dimensional observation to one logit per test; masked
tests get probability exactly zero. The critic maps the same observation to a
scalar value. Every feasible trajectory finished during training is logged and
the one with the smallest objective is returned.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .embed import EmbeddingSet, SimilarityMatrix
from .env import Normalizer, VecEnv
from .graph import build_graph
from .instance import TsmInstance
from .model import Solution, _key_better, _make_solution, solve_greedy, trip_objective
from .nn import MLP, Adam, clip_grad_norm, masked_entropy, masked_log_softmax, sample_masked

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    total_timesteps: int = 10_000
    n_envs: int = 5
    n_steps: int = 500
    learning_rate: float = 3e-4
    minibatch_size: int = 32
    clip_range: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    n_epochs: int = 10
    ent_coef: float = 0.0
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    seed: int = 0
    early_stop_patience: int = 20
    actor_hidden: tuple = (64, 64)
    critic_hidden: tuple = (128, 128)
    normalize: bool = True
    bonus: str = "intent"

    @property
    def iterations(self) -> int:
        return max(1, self.total_timesteps // (self.n_envs * self.n_steps))


class PolicyParameters:
    def __init__(self, k, n_actions, actor_hidden=(64, 64), critic_hidden=(128, 128), rng=None):
        rng = np.random.default_rng(rng)
        self.actor = MLP((k, *actor_hidden, n_actions), rng, out_gain=0.01)
        self.critic = MLP((k, *critic_hidden, 1), rng, out_gain=1.0)
        # every weight array becomes a view into one flat vector
        arrays = self.actor.params + self.critic.params
        self.flat = np.concatenate([a.ravel() for a in arrays])
        views, pos = [], 0
        for a in arrays:
            views.append(self.flat[pos : pos + a.size].reshape(a.shape))
            pos += a.size
        n_actor = len(self.actor.params)
        self.actor.params[:] = views[:n_actor]
        self.critic.params[:] = views[n_actor:]

    @property
    def params(self):
        return self.actor.params + self.critic.params

    @staticmethod
    def flatten(grads):
        return np.concatenate([g.ravel() for g in grads])

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params)


def policy_forward(params: PolicyParameters, obs, mask):
    """Action probabilities (zero where masked) and value estimates for a batch."""
    obs = np.atleast_2d(obs)
    mask = np.atleast_2d(np.asarray(mask, dtype=bool))
    if not mask.any(axis=1).all():
        from .errors import ContractViolation

        raise ContractViolation("policy called with an all-zero action mask")
    logits = params.actor(obs)
    logp = masked_log_softmax(logits, mask)
    values = params.critic(obs)[:, 0]
    return np.exp(logp), values


def ppo_loss_and_grads(params: PolicyParameters, obs, actions, old_logp, advantages, returns, masks, cfg: TrainConfig):
    """PPO-clip loss plus value and entropy terms, with analytic gradients."""
    b = len(actions)
    rows = np.arange(b)
    logits, a_cache = params.actor.forward(obs)
    logp_all = masked_log_softmax(logits, masks)
    logp = logp_all[rows, actions]
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range)
    surr1 = ratio * advantages
    surr2 = clipped * advantages
    policy_loss = -np.mean(np.minimum(surr1, surr2))

    probs = np.exp(logp_all)
    entropy = masked_entropy(logp_all, masks)
    values, c_cache = params.critic.forward(obs)
    values = values[:, 0]
    value_loss = np.mean((returns - values) ** 2)
    loss = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy.mean()

    # d loss / d logp(a): only the unclipped branch carries gradient
    d_logp = np.where(surr1 <= surr2, -advantages * ratio, 0.0) / b
    d_logits = -probs * d_logp[:, None]
    d_logits[rows, actions] += d_logp
    if cfg.ent_coef:
        safe_logp = np.where(masks, logp_all, 0.0)
        d_ent = -probs * (safe_logp + entropy[:, None])
        d_logits -= cfg.ent_coef * d_ent / b
    d_logits = np.where(masks, d_logits, 0.0)
    d_values = cfg.vf_coef * -2.0 * (returns - values) / b

    a_grads = params.actor.backward(a_cache, d_logits)
    c_grads = params.critic.backward(c_cache, d_values[:, None])
    stats = {
        "loss": float(loss),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": float(entropy.mean()),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_range)),
        "approx_kl": float(np.mean((ratio - 1.0) - np.log(ratio))),
    }
    return stats, a_grads, c_grads


@dataclass
class RolloutBuffer:
    n_steps: int
    n_envs: int
    k: int
    n_actions: int
    obs: np.ndarray = None
    actions: np.ndarray = None
    log_probs: np.ndarray = None
    rewards: np.ndarray = None
    episode_starts: np.ndarray = None
    values: np.ndarray = None
    masks: np.ndarray = None
    advantages: np.ndarray = None
    returns: np.ndarray = None
    pos: int = 0

    def __post_init__(self):
        t, n = self.n_steps, self.n_envs
        self.obs = np.zeros((t, n, self.k))
        self.actions = np.zeros((t, n), dtype=np.int64)
        self.log_probs = np.zeros((t, n))
        self.rewards = np.zeros((t, n))
        self.episode_starts = np.zeros((t, n))
        self.values = np.zeros((t, n))
        self.masks = np.zeros((t, n, self.n_actions), dtype=bool)

    @property
    def full(self) -> bool:
        return self.pos == self.n_steps

    def __len__(self):
        return self.pos * self.n_envs

    def add(self, obs, actions, rewards, episode_starts, masks, log_probs, values):
        p = self.pos
        self.obs[p], self.actions[p], self.rewards[p] = obs, actions, rewards
        self.episode_starts[p], self.masks[p] = episode_starts, masks
        self.log_probs[p], self.values[p] = log_probs, values
        self.pos += 1

    def compute_returns_and_advantage(self, last_values, dones, gamma, lam):
        adv = np.zeros_like(self.rewards)
        last_gae = np.zeros(self.n_envs)
        for t in reversed(range(self.n_steps)):
            if t == self.n_steps - 1:
                non_terminal = 1.0 - np.asarray(dones, dtype=float)
                next_values = last_values
            else:
                non_terminal = 1.0 - self.episode_starts[t + 1]
                next_values = self.values[t + 1]
            delta = self.rewards[t] + gamma * next_values * non_terminal - self.values[t]
            last_gae = delta + gamma * lam * non_terminal * last_gae
            adv[t] = last_gae
        self.advantages = adv
        self.returns = adv + self.values

    def flat(self):
        def f(a):
            return a.reshape(self.n_steps * self.n_envs, *a.shape[2:])

        return (f(self.obs), f(self.actions), f(self.log_probs), f(self.advantages),
                f(self.returns), f(self.masks))


@dataclass
class SolutionLog:
    """Every distinct feasible selection seen in training, with its objective."""

    objectives: dict = field(default_factory=dict)
    feasible_trajectories: int = 0
    best: tuple | None = None
    best_objective: float = np.inf

    def record(self, selection: tuple, objective: float):
        self.feasible_trajectories += 1
        self.objectives.setdefault(selection, objective)
        if _key_better(objective, selection, self.best_objective, self.best):
            self.best, self.best_objective = selection, objective


class PPOAgent:
    def __init__(self, k, n_actions, cfg: TrainConfig):
        self.cfg = cfg
        init_ss, act_ss, shuffle_ss = np.random.SeedSequence(cfg.seed).spawn(3)
        self.policy = PolicyParameters(k, n_actions, cfg.actor_hidden, cfg.critic_hidden, np.random.default_rng(init_ss))
        self.optimizer = Adam(self.policy.flat, lr=cfg.learning_rate)
        self.action_rng = np.random.default_rng(act_ss)
        self.shuffle_rng = np.random.default_rng(shuffle_ss)
        self.normalizer = Normalizer(k, gamma=cfg.gamma) if cfg.normalize else None
        self.episode_returns = []
        self.solutions = SolutionLog()
        self._last = None

    def _norm_obs(self, obs):
        return self.normalizer.obs(obs) if self.normalizer else np.atleast_2d(obs)

    def start(self, venv: VecEnv):
        obs, masks = venv.reset()
        self._last = (self._norm_obs(obs), masks, np.ones(venv.num_envs))

    def act(self, obs, masks):
        probs, values = policy_forward(self.policy, obs, masks)
        actions = sample_masked(self.action_rng, probs)
        with np.errstate(divide="ignore"):
            logp = np.log(probs[np.arange(len(actions)), actions])
        return actions, logp, values

    def collect_rollouts(self, venv: VecEnv, n_steps: int | None = None) -> RolloutBuffer:
        n_steps = n_steps or self.cfg.n_steps
        if self._last is None:
            self.start(venv)
        obs, masks, starts = self._last
        buf = RolloutBuffer(n_steps, venv.num_envs, obs.shape[1], masks.shape[1])
        for _ in range(n_steps):
            actions, logp, values = self.act(obs, masks)
            raw_next, rewards, dones, next_masks, infos = venv.step(actions)
            for info in infos:
                if "episode" in info:
                    self.episode_returns.append(info["episode"]["return"])
                if info.get("feasible") and "objective" in info:
                    self.solutions.record(info["selection"], info["objective"])
            norm_r = self.normalizer.reward(rewards, dones) if self.normalizer else rewards
            buf.add(obs, actions, norm_r, starts, masks, logp, values)
            obs, masks, starts = self._norm_obs(raw_next), next_masks, dones.astype(float)
        _, last_values = policy_forward(self.policy, obs, masks)
        buf.compute_returns_and_advantage(last_values, starts, self.cfg.gamma, self.cfg.gae_lambda)
        self._last = (obs, masks, starts)
        return buf

    def ppo_update(self, buf: RolloutBuffer) -> dict:
        """Shuffled minibatch epochs; the trailing short minibatch of each epoch is kept."""
        cfg = self.cfg
        obs, actions, old_logp, adv, returns, masks = buf.flat()
        n = len(actions)
        history = []
        for _ in range(cfg.n_epochs):
            order = self.shuffle_rng.permutation(n)
            for start in range(0, n, cfg.minibatch_size):
                idx = order[start : start + cfg.minibatch_size]
                a = adv[idx]
                if len(idx) > 1:
                    a = (a - a.mean()) / (a.std() + 1e-8)
                stats, ag, cg = ppo_loss_and_grads(
                    self.policy, obs[idx], actions[idx], old_logp[idx], a, returns[idx], masks[idx], cfg
                )
                if not np.isfinite(stats["loss"]):
                    raise FloatingPointError(f"non-finite PPO loss: {stats}")
                grads, norm = clip_grad_norm(PolicyParameters.flatten(ag + cg), cfg.max_grad_norm)
                self.optimizer.step(grads)
                stats["grad_norm"] = norm
                history.append(stats)
        if not self.policy.all_finite():
            raise FloatingPointError("policy parameters became non-finite")
        return {key: float(np.mean([h[key] for h in history])) for key in history[0]}


@dataclass
class TrainResult:
    solution: Solution
    log: list
    episode_returns: list
    solutions: SolutionLog
    agent: PPOAgent
    failed: bool = False


def train(inst: TsmInstance, emb: EmbeddingSet, sim: SimilarityMatrix, cfg: TrainConfig | None = None,
          log_stream=None, trace_stream=None) -> TrainResult:
    """Run ``cfg.iterations`` rollout/update rounds and return the best feasible selection."""
    cfg = cfg or TrainConfig()
    graph = build_graph(inst)
    objective = trip_objective(sim)
    greedy = solve_greedy(inst, objective)
    venv = VecEnv.make(graph, emb, sim, n_envs=cfg.n_envs, best_init=greedy.objective, bonus=cfg.bonus)
    venv.trace = trace_stream
    agent = PPOAgent(emb.k, graph.u_size, cfg)
    log = []
    t0 = time.perf_counter()
    best_seen, stale = np.inf, 0
    for it in range(cfg.iterations):
        n_before = len(agent.episode_returns)
        buf = agent.collect_rollouts(venv)
        stats = agent.ppo_update(buf)
        new_returns = agent.episode_returns[n_before:]
        rec = {
            "iteration": it + 1,
            "timesteps": (it + 1) * cfg.n_envs * cfg.n_steps,
            "mean_return": float(np.mean(new_returns)) if new_returns else None,
            "episodes": len(new_returns),
            "best_objective": agent.solutions.best_objective if agent.solutions.best else None,
            **stats,
            "wall_time": time.perf_counter() - t0,
        }
        log.append(rec)
        if log_stream is not None:
            log_stream.write(json.dumps(rec) + "\n")
        # one evaluation per iteration: the best objective found so far
        if agent.solutions.best_objective < best_seen:
            best_seen, stale = agent.solutions.best_objective, 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                logger.info("early stop after %d iterations without improvement", stale)
                break

    meta = {"seed": cfg.seed, "iterations": len(log), "feasible_trajectories": agent.solutions.feasible_trajectories}
    if agent.solutions.best is None:
        sol = replace(greedy, fallback=True, metadata={**meta, "reason": "no feasible trajectory"})
        return TrainResult(sol, log, agent.episode_returns, agent.solutions, agent, failed=True)
    sol = _make_solution(inst, objective, agent.solutions.best, "rl-ppo", False, **meta)
    return TrainResult(sol, log, agent.episode_returns, agent.solutions, agent)


def save_checkpoint(agent: PPOAgent, path) -> None:
    header = {"version": CHECKPOINT_VERSION, "config": asdict(agent.cfg),
              "actor_sizes": agent.policy.actor.sizes, "critic_sizes": agent.policy.critic.sizes}
    arrays = {f"actor_{i}": p for i, p in enumerate(agent.policy.actor.params)}
    arrays.update({f"critic_{i}": p for i, p in enumerate(agent.policy.critic.params)})
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), **arrays)


def load_checkpoint(path):
    """Returns (PolicyParameters, TrainConfig)."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        conf = header["config"]
        conf["actor_hidden"] = tuple(conf["actor_hidden"])
        conf["critic_hidden"] = tuple(conf["critic_hidden"])
        cfg = TrainConfig(**conf)
        a_sizes, c_sizes = header["actor_sizes"], header["critic_sizes"]
        pol = PolicyParameters(a_sizes[0], a_sizes[-1], tuple(a_sizes[1:-1]), tuple(c_sizes[1:-1]))
        for i, p in enumerate(pol.actor.params):
            p[...] = data[f"actor_{i}"]
        for i, p in enumerate(pol.critic.params):
            p[...] = data[f"critic_{i}"]
    return pol, cfg
