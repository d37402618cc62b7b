"""The spiking tabular agent: state decoder, episodic trajectory store,
value store, and action readout compiled into one network.

Per-epoch protocol (one environment interaction):

* ``observe(state)`` pulses a broadcast clear line, then the state's set
  line, leaving exactly one decoder latch firing.
* ``choose_action()`` runs one rate-coding window; per-pair AND gates pass
  value-circuit output spikes only for the decoded state, and the
  resulting per-action spike counts feed a host-side argmax (epsilon-greedy
  on top when configured).
* ``record(state, action)`` pulses the action line; the outer-product
  pair gate of (decoded state, action) sets that trajectory latch.
* ``finish_episode(outcome)`` reads the set trajectory latches out of the
  network and, for reward/punish outcomes, delivers exactly one matching
  reinforcement pulse per visited pair - serialized pair by pair, each at
  an independent uniform phase of its value circuit - then pulses the
  trajectory clear line. Pairs visited twice in an episode still hold one
  latch, so updates follow first-visit semantics by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import envs
from .circuits import ValueCircuitConfig, add_value_circuits
from .graph import CircuitGraph, Netlist, compile_graph
from .kernel import Network


class AgentError(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    n_states: int
    n_actions: int
    vc: ValueCircuitConfig = ValueCircuitConfig()
    window: int = 64  # rate-coding readout length T
    epsilon: float = 0.0  # 0 = greedy
    seed: int = 0

    def __post_init__(self):
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("need at least one state and one action")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")


def build_agent_graph(n_states: int, n_actions: int, vc: ValueCircuitConfig) -> CircuitGraph:
    """Circuit graph of the full agent; scales with the state-action count."""
    g = CircuitGraph()
    g.add_node("port", 1, id="obs.clear")
    g.add_node("port", n_states, id="obs.set")
    g.add_node("port", n_actions, id="act")
    g.add_node("port", 1, id="stm.clear")
    g.add_node("latch-bank", n_states, id="decoder")
    g.add_node("latch-bank", (n_states, n_actions), id="stm")
    add_value_circuits(g, (n_states, n_actions), vc, prefix="ltm")
    g.add_node("gate-bank", (n_states, n_actions), id="encoder")

    g.connect("obs.clear", "decoder", "all-to-all", -1)
    g.connect("obs.set", "decoder", "one-to-one", 1)
    g.connect(("decoder", "act"), "stm", "outer-product", 1)
    g.connect("stm.clear", "stm", "all-to-all", -1)
    g.connect("ltm.srif", "encoder", "gate", 1, enable="decoder")
    return g


class Agent:
    """Compiled network plus index maps and the host-side policy."""

    def __init__(self, config: AgentConfig, rng: np.random.Generator | None = None,
                 use_numba: bool | None = None):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.graph = build_agent_graph(config.n_states, config.n_actions, config.vc)
        self.netlist: Netlist = compile_graph(self.graph)
        self.net: Network = self.netlist.build(use_numba=use_numba)

        S, A = config.n_states, config.n_actions
        ix = self.netlist.index
        self._decoder = ix.array("decoder", S)
        self._stm = ix.array("stm", (S, A))
        self._vc_mem = ix.array("ltm.srif", (S, A), role="mem")
        self._vc_out = ix.array("ltm.srif", (S, A), role="out")
        self._vc_inv = ix.array("ltm.inv", (S, A))
        self._vc_rgate = ix.array("ltm.rgate", (S, A))
        self._vc_pgate = ix.array("ltm.pgate", (S, A))
        self._encoder = ix.array("encoder", (S, A))
        self._line_clear = ix.input_line("obs.clear", (0,))
        self._line_set = ix.input_array("obs.set", S)
        self._line_act = ix.input_array("act", A)
        self._line_stm_clear = ix.input_line("stm.clear", (0,))
        self._line_reward = ix.input_array("ltm.reward", (S, A))
        self._line_punish = ix.input_array("ltm.punish", (S, A))
        # every compartment belonging to a value circuit, grouped per pair
        self._vc_all = np.stack(
            [self._vc_mem, self._vc_out, self._vc_inv, self._vc_rgate, self._vc_pgate],
            axis=-1,
        )  # (S, A, 5)

        self._state: int | None = None
        self._episode_open = False

    # -- epoch sub-steps ---------------------------------------------------

    def observe(self, state: int) -> None:
        """Clear the decoder, then latch the given state."""
        if not 0 <= state < self.config.n_states:
            raise AgentError(f"state {state} out of range")
        self.net.step(input_spikes=[self._line_clear])
        self.net.step(input_spikes=[self._line_set[state]])
        self.net.run(1)
        self._state = state

    def decoded_state(self) -> int | None:
        return self._state

    def action_counts(self) -> np.ndarray:
        """Run one readout window; spike counts per action for the
        decoded state (all other states' gates stay silent)."""
        if self._state is None:
            raise AgentError("no state observed")
        flat = self._encoder.ravel()
        before = self.net._counts[flat].copy()
        self.net.run(self.config.window)
        delta = self.net._counts[flat] - before
        return delta.reshape(self.config.n_states, self.config.n_actions).sum(axis=0)

    def choose_action(self) -> int:
        counts = self.action_counts()
        if self.config.epsilon > 0 and self.rng.random() < self.config.epsilon:
            return int(self.rng.integers(self.config.n_actions))
        best = np.flatnonzero(counts == counts.max())
        if len(best) == 1:
            return int(best[0])
        return int(best[self.rng.integers(len(best))])

    def record(self, state: int, action: int) -> None:
        """Mark (state, action) as visited in the trajectory store."""
        if not 0 <= action < self.config.n_actions:
            raise AgentError(f"action {action} out of range")
        if state != self._state:
            self.observe(state)
        self.net.step(input_spikes=[self._line_act[action]])
        self.net.run(2)
        self._episode_open = True

    def visited_pairs(self) -> list[tuple[int, int]]:
        """Pairs whose trajectory latches are currently set."""
        on = self.net.latch_states(self._stm.ravel())
        S, A = self._stm.shape
        return [(int(i) // A, int(i) % A) for i in np.flatnonzero(on)]

    def finish_episode(self, outcome: str) -> None:
        """Deliver reinforcement through the stored trajectory, then clear it.

        Each visited pair receives exactly one pulse of the matching kind,
        serialized in shuffled order at independent random phases; a
        ``none`` outcome skips delivery entirely.
        """
        if not self._episode_open:
            raise AgentError("no episode in progress")
        if outcome not in (envs.REWARD, envs.PUNISH, envs.NONE):
            raise AgentError(f"unknown outcome {outcome!r}")
        if outcome != envs.NONE:
            lines = self._line_reward if outcome == envs.REWARD else self._line_punish
            pairs = self.visited_pairs()
            order = self.rng.permutation(len(pairs))
            theta = self.config.vc.theta
            for k in order:
                s, a = pairs[k]
                phase = int(self.rng.integers(theta))
                self.net.run(phase)
                self.net.step(input_spikes=[lines[s, a]])
                self.net.run(2)
        self.net.step(input_spikes=[self._line_stm_clear])
        self.net.run(1)
        self._episode_open = False

    # -- diagnostics ---------------------------------------------------------

    def snapshot_values(self) -> np.ndarray:
        """Exact value table q/theta, read without running the network."""
        q = self.net.memory_charges(self._vc_mem.ravel())
        return (q / self.config.vc.theta).reshape(self._vc_mem.shape)

    def greedy_policy(self) -> np.ndarray:
        """Lowest-index argmax per state over the exact value table."""
        return np.argmax(self.snapshot_values(), axis=1)

    def total_spike_count(self) -> int:
        return int(self.net._counts.sum())

    def ltm_vc_counts(self) -> np.ndarray:
        """Lifetime spike counts summed over each value circuit's
        compartments, shaped (n_states, n_actions)."""
        return self.net._counts[self._vc_all].sum(axis=-1)

    def set_value(self, state: int, action: int, value: float) -> None:
        """Force a value estimate (testing hook; quantized to 1/theta)."""
        theta = self.config.vc.theta
        self.net.set_memory_charge(self._vc_mem[state, action], round(value * theta))


def agent_for_env(env, vc: ValueCircuitConfig | None = None, window: int = 64,
                  epsilon: float = 0.0, seed: int = 0,
                  rng: np.random.Generator | None = None) -> Agent:
    cfg = AgentConfig(
        n_states=env.n_states,
        n_actions=env.n_actions,
        vc=vc or ValueCircuitConfig(),
        window=window,
        epsilon=epsilon,
        seed=seed,
    )
    return Agent(cfg, rng=rng)
