"""Reusable spiking subcircuits: AND gates, inverters, and value circuits.

A value circuit stores one probability estimate as the persistent charge q
of a memory compartment with threshold theta; its paired integrator emits
spikes at rate q/theta. Reinforcement pulses are gated by feedback:

* a punish pulse coincident with an integrator spike removes dq charge,
* a reward pulse coincident with the inverted output adds dq charge,

so per delivered signal P(+dq) = (1 - q/theta) * P(reward) and
P(-dq) = (q/theta) * P(punish). The estimate therefore drifts toward the
proportion of rewards among reinforcement signals and is stationary
exactly where the output rate equals that proportion.

The integrator output is periodic, so a pulse delivered at a fixed phase
would sample a biased output state. Callers must deliver each pulse at a
phase drawn uniformly from [0, theta); theta is a multiple of the output
period, which makes the sampled spike probability exactly q/theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import CircuitGraph, Netlist, compile_graph
from .kernel import Network

REWARD = "reward"
PUNISH = "punish"


@dataclass(frozen=True)
class ValueCircuitConfig:
    """Threshold, reinforcement increment, and initial charge of one VC."""

    theta: int = 64
    dq: int = 1
    q_init: int | None = None  # defaults to theta // 2 (estimate 0.5)

    def __post_init__(self):
        if self.theta < 1:
            raise ValueError("theta must be >= 1")
        if not 1 <= self.dq <= self.theta:
            raise ValueError("dq must lie in [1, theta]")
        q0 = self.initial_charge
        if not 0 <= q0 <= self.theta:
            raise ValueError("q_init must lie in [0, theta]")

    @property
    def initial_charge(self) -> int:
        return self.theta // 2 if self.q_init is None else int(self.q_init)


@dataclass(frozen=True)
class VcNodes:
    """Node ids of a value-circuit bank within a graph."""

    srif: str
    inverter: str
    reward_gate: str
    punish_gate: str
    reward_port: str
    punish_port: str
    dims: tuple[int, ...]
    theta: int


@dataclass(frozen=True)
class ValueCircuitHandle:
    """Compartment and input-line indices of one compiled value circuit."""

    mem: int
    out: int
    inverter: int
    reward_gate: int
    punish_gate: int
    reward_input: int
    punish_input: int
    theta: int


def and_gate(n_inputs: int) -> CircuitGraph:
    """Gate firing at t+1 iff all ``n_inputs`` input lines pulsed at t."""
    if n_inputs < 2:
        raise ValueError("an AND gate needs at least 2 inputs")
    g = CircuitGraph()
    g.add_node("port", n_inputs, id="in")
    g.add_node("gate-bank", 1, id="out")
    g.connect("in", "out", "all-to-all", 1)
    return g


def inverter() -> CircuitGraph:
    """Tonic unit firing at t+1 iff its input line did not pulse at t."""
    g = CircuitGraph()
    g.add_node("port", 1, id="in")
    g.add_node("tonic-bank", 1, id="out")
    g.connect("in", "out", "one-to-one", -1)
    return g


def add_value_circuits(
    g: CircuitGraph, dims, cfg: ValueCircuitConfig, prefix: str = "vc"
) -> VcNodes:
    """Add a bank of value circuits (one per element) to a graph."""
    srif = g.add_node(
        "srif-bank", dims, id=f"{prefix}.srif",
        theta=cfg.theta, q_init=cfg.initial_charge,
    )
    inv = g.add_node("tonic-bank", dims, id=f"{prefix}.inv")
    gr = g.add_node("gate-bank", dims, id=f"{prefix}.rgate")
    gp = g.add_node("gate-bank", dims, id=f"{prefix}.pgate")
    pr = g.add_node("port", dims, id=f"{prefix}.reward")
    pp = g.add_node("port", dims, id=f"{prefix}.punish")
    g.connect(srif, inv, "one-to-one", -1)
    g.connect(inv, gr, "one-to-one", 1)
    g.connect(pr, gr, "one-to-one", 1)
    g.connect(srif, gp, "one-to-one", 1)
    g.connect(pp, gp, "one-to-one", 1)
    g.connect(gr, srif, "one-to-one", cfg.dq)
    g.connect(gp, srif, "one-to-one", -cfg.dq)
    return VcNodes(srif, inv, gr, gp, pr, pp, g.node(srif).dims, cfg.theta)


def value_circuit(cfg: ValueCircuitConfig) -> tuple[CircuitGraph, VcNodes]:
    """Standalone single value circuit as a compilable graph fragment."""
    g = CircuitGraph()
    nodes = add_value_circuits(g, 1, cfg)
    return g, nodes


def resolve_vc(netlist: Netlist, nodes: VcNodes, coord=(0,)) -> ValueCircuitHandle:
    """Look up the compiled indices of one element of a VC bank."""
    ix = netlist.index
    return ValueCircuitHandle(
        mem=ix.get(nodes.srif, coord, "mem"),
        out=ix.get(nodes.srif, coord, "out"),
        inverter=ix.get(nodes.inverter, coord),
        reward_gate=ix.get(nodes.reward_gate, coord),
        punish_gate=ix.get(nodes.punish_gate, coord),
        reward_input=ix.input_line(nodes.reward_port, coord),
        punish_input=ix.input_line(nodes.punish_port, coord),
        theta=nodes.theta,
    )


def build_value_circuit(cfg: ValueCircuitConfig, use_numba=None):
    """Compile and instantiate a single VC; returns (network, handle)."""
    g, nodes = value_circuit(cfg)
    nl = compile_graph(g)
    return nl.build(use_numba=use_numba), resolve_vc(nl, nodes)


def draw_phase(rng: np.random.Generator, theta: int) -> int:
    """Uniform pulse phase; uniform over [0, theta) covers every output
    phase evenly because theta is a multiple of the output period."""
    return int(rng.integers(theta))


def vc_reinforce(net: Network, handle: ValueCircuitHandle, signal: str, phase: int) -> None:
    """Deliver one reinforcement pulse at the given phase.

    Runs ``phase`` quiescent steps, pulses the matching input line, then
    runs the two steps needed for the pulse to traverse gate and memory.
    At most one +-dq change results.
    """
    if signal == REWARD:
        line = handle.reward_input
    elif signal == PUNISH:
        line = handle.punish_input
    else:
        raise ValueError(f"unknown reinforcement signal {signal!r}")
    if phase < 0:
        raise ValueError("phase must be >= 0")
    net.run(phase)
    net.step(input_spikes=[line])
    net.run(2)


def vc_value(net: Network, handle: ValueCircuitHandle) -> float:
    """Exact current estimate q/theta (diagnostic read, no simulation)."""
    return net.memory_charge(handle.mem) / handle.theta


def vc_read_rate(net: Network, handle: ValueCircuitHandle, window: int) -> float:
    """Estimate the value by counting output spikes over ``window`` steps."""
    if window < 1:
        raise ValueError("window must be >= 1")
    before = net.spike_counts()[handle.out]
    net.run(window)
    return (net.spike_counts()[handle.out] - before) / window


def expected_drift(q: int, theta: int, r: float, dq: int = 1) -> float:
    """Mean charge change per reinforcement signal at estimate q/theta.

    Zero exactly when q/theta equals the reward proportion r.
    """
    v = q / theta
    return dq * ((1 - v) * r - v * (1 - r))
