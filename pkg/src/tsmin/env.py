"""Episodic test-selection environment over the bipartite graph.

Each step selects one test. The observation is the sum of the embedding
vectors of every still-unselected test and every still-uncovered
statement/fault; selecting a test zeroes the vectors of the test and of the
nodes it newly covers. Actions that are already selected or would cover
nothing new are masked out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embed import EmbeddingSet, SimilarityMatrix
from .errors import ContractViolation
from .graph import BipartiteGraph
from .model import Selection, evaluate_objective, trip_objective

BONUS_VARIANTS = ("intent", "literal", "off")


class BestObjective:
    """Best feasible objective seen so far, shared by every env of a vector."""

    def __init__(self, value: float = np.inf):
        self.value = float(value)

    def update(self, objective: float) -> None:
        if objective < self.value:
            self.value = float(objective)


@dataclass
class EnvState:
    selected: np.ndarray  # bool over U
    covered: np.ndarray  # bool over V
    residual: np.ndarray  # per U-node count of uncovered neighbours
    live_u_embed_sum: np.ndarray
    live_v_embed_sum: np.ndarray
    step_count: int = 0
    episode_return: float = 0.0

    @property
    def observation(self) -> np.ndarray:
        return self.live_u_embed_sum + self.live_v_embed_sum


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    done: bool
    mask: np.ndarray
    info: dict = field(default_factory=dict)


def valid_mask(state: EnvState) -> np.ndarray:
    return ~state.selected & (state.residual > 0)


def observation_from_scratch(state: EnvState, emb: EmbeddingSet) -> np.ndarray:
    return emb.u_vectors[~state.selected].sum(axis=0) + emb.v_vectors[~state.covered].sum(axis=0)


class TsmEnv:
    def __init__(self, graph: BipartiteGraph, emb: EmbeddingSet, sim: SimilarityMatrix,
                 best: BestObjective | None = None, bonus: str = "intent", max_steps: int | None = None):
        if emb.u_vectors.shape[0] != graph.u_size or emb.v_vectors.shape[0] != graph.v_size:
            raise ValueError(
                f"embeddings ({emb.u_vectors.shape[0]}, {emb.v_vectors.shape[0]}) do not match "
                f"graph ({graph.u_size}, {graph.v_size})"
            )
        if sim.size != graph.u_size:
            raise ValueError("similarity matrix size does not match the graph")
        if bonus not in BONUS_VARIANTS:
            raise ValueError(f"bonus variant must be one of {BONUS_VARIANTS}")
        self.graph = graph
        self.emb = emb
        self.objective = trip_objective(sim)
        self.best = best if best is not None else BestObjective()
        self.bonus = bonus
        self.max_steps = graph.u_size if max_steps is None else int(max_steps)
        self.state: EnvState | None = None

    @property
    def k(self) -> int:
        return self.emb.k

    def reset(self):
        g = self.graph
        self.state = EnvState(
            selected=np.zeros(g.u_size, dtype=bool),
            covered=np.zeros(g.v_size, dtype=bool),
            residual=g.u_degrees().copy(),
            live_u_embed_sum=self.emb.u_vectors.sum(axis=0),
            live_v_embed_sum=self.emb.v_vectors.sum(axis=0),
        )
        return self.state.observation, valid_mask(self.state)

    def step(self, action: int) -> StepOutcome:
        st = self.state
        if st is None:
            raise ContractViolation("step() called before reset()")
        g = self.graph
        action = int(action)
        if not 0 <= action < g.u_size or not valid_mask(st)[action]:
            raise ContractViolation(f"action {action} is masked out")

        st.selected[action] = True
        st.live_u_embed_sum = st.live_u_embed_sum - self.emb.u_vectors[action]
        nbrs = g.u_adj[action]
        new = nbrs[~st.covered[nbrs]]
        st.covered[new] = True
        if len(new):
            st.live_v_embed_sum = st.live_v_embed_sum - self.emb.v_vectors[new].sum(axis=0)
        for v in new:
            st.residual[g.v_adj[v]] -= 1
        st.step_count += 1

        step_reward = -st.step_count / g.u_size + len(new) / g.v_size
        info = {
            "selected_count": st.step_count,
            "newly_covered": int(len(new)),
            "covered_count": int(st.covered.sum()),
            "step_reward": step_reward,
            "bonus": 0.0,
            "penalty": 0.0,
            "truncated": False,
        }
        reward = step_reward
        done = bool(st.covered.all())
        if done:
            sel = Selection.from_mask(st.selected)
            obj = evaluate_objective(sel, self.objective)
            prev = self.best.value
            if self.bonus == "intent" and np.isfinite(prev):
                info["bonus"] = max(prev - obj, 0.0)
            elif self.bonus == "literal" and np.isfinite(prev):
                info["bonus"] = max(obj - prev, 0.0)
            self.best.update(obj)
            reward += info["bonus"]
            info.update(selection=sel.indices, objective=obj, feasible=True)
        elif st.step_count >= self.max_steps:
            done = True
            info.update(truncated=True, penalty=-1.0, feasible=False,
                        selection=Selection.from_mask(st.selected).indices)
            reward -= 1.0
        st.episode_return += reward
        if done:
            info["episode"] = {"return": st.episode_return, "length": st.step_count}
        return StepOutcome(st.observation, reward, done, valid_mask(st), info)


class VecEnv:
    """N independent environments stepped in lockstep with auto-reset.

    When a sub-environment finishes, the returned observation and mask for that
    slot already belong to the fresh episode; the final ones are kept under
    ``info["terminal_observation"]`` and ``info["terminal_mask"]``.
    """

    def __init__(self, envs):
        self.envs = list(envs)
        if not self.envs:
            raise ValueError("need at least one environment")
        self.best = self.envs[0].best
        self.trace = None

    @classmethod
    def make(cls, graph, emb, sim, n_envs=5, best_init=np.inf, bonus="intent", max_steps=None):
        best = BestObjective(best_init)
        return cls(TsmEnv(graph, emb, sim, best=best, bonus=bonus, max_steps=max_steps) for _ in range(n_envs))

    @property
    def num_envs(self) -> int:
        return len(self.envs)

    def reset(self):
        out = [e.reset() for e in self.envs]
        return np.stack([o for o, _ in out]), np.stack([m for _, m in out])

    def step(self, actions):
        obs, rewards, dones, masks, infos = [], [], [], [], []
        for i, (env, a) in enumerate(zip(self.envs, actions)):
            try:
                out = env.step(a)
            except ContractViolation as exc:
                raise ContractViolation(f"env {i}: {exc}") from exc
            info = dict(out.info)
            o, m = out.observation, out.mask
            if out.done:
                info["terminal_observation"], info["terminal_mask"] = o, m
                o, m = env.reset()
            if self.trace is not None:
                self.trace.write(json.dumps({"env": i, "action": int(a), "reward": out.reward, "done": out.done}) + "\n")
            obs.append(o)
            rewards.append(out.reward)
            dones.append(out.done)
            masks.append(m)
            infos.append(info)
        return np.stack(obs), np.array(rewards), np.array(dones), np.stack(masks), infos


def vec_reset(venv: VecEnv):
    return venv.reset()


def vec_step(venv: VecEnv, actions):
    return venv.step(actions)


class RunningMeanStd:
    def __init__(self, shape=()):
        self.mean = np.zeros(shape)
        self.var = np.ones(shape)
        self.count = 1e-4

    def update(self, x):
        x = np.asarray(x, dtype=float)
        b_mean, b_var, b_count = x.mean(axis=0), x.var(axis=0), x.shape[0]
        delta = b_mean - self.mean
        tot = self.count + b_count
        self.mean = self.mean + delta * b_count / tot
        m2 = self.var * self.count + b_var * b_count + delta**2 * self.count * b_count / tot
        self.var = m2 / tot
        self.count = tot


class Normalizer:
    """Running observation standardization and return-based reward scaling.

    Statistics update only while ``training`` is true; both outputs are clipped to ``+-clip``.
    """

    def __init__(self, k, gamma=0.99, clip=10.0, eps=1e-8):
        self.obs_rms = RunningMeanStd((k,))
        self.ret_rms = RunningMeanStd(())
        self.gamma, self.clip, self.eps = gamma, clip, eps
        self.returns = None
        self.training = True

    def obs(self, obs):
        obs = np.atleast_2d(obs)
        if self.training:
            self.obs_rms.update(obs)
        return np.clip((obs - self.obs_rms.mean) / np.sqrt(self.obs_rms.var + self.eps), -self.clip, self.clip)

    def reward(self, rewards, dones):
        rewards = np.asarray(rewards, dtype=float)
        if self.returns is None:
            self.returns = np.zeros_like(rewards)
        self.returns = self.returns * self.gamma + rewards
        if self.training:
            self.ret_rms.update(self.returns)
        out = np.clip(rewards / np.sqrt(self.ret_rms.var + self.eps), -self.clip, self.clip)
        self.returns[np.asarray(dones, dtype=bool)] = 0.0
        return out
