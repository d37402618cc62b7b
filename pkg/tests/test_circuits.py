from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dml.circuits import (
    PUNISH,
    REWARD,
    ValueCircuitConfig,
    and_gate,
    build_value_circuit,
    draw_phase,
    expected_drift,
    inverter,
    vc_read_rate,
    vc_reinforce,
    vc_value,
)
from dml.graph import compile_graph

from _oracles import stationary_distribution


def _set_value(net, handle, q):
    net.set_memory_charge(handle.mem, q)


@pytest.mark.parametrize("n", [2, 3])
def test_and_gate_truth_table(n):
    nl = compile_graph(and_gate(n))
    for bits in product((0, 1), repeat=n):
        net = nl.build()
        lines = [i for i, b in enumerate(bits) if b]
        net.step(input_spikes=lines)
        fired = net.step()
        gate = nl.index.get("out", (0,))
        assert (gate in fired) == all(bits), bits


def test_and_gate_needs_two_inputs():
    with pytest.raises(ValueError):
        and_gate(1)


def test_inverter_tonic_default():
    nl = compile_graph(inverter())
    net = nl.build()
    raster = net.run_window(10)
    assert raster[:, nl.index.get("out", (0,))].sum() == 10


def test_inverter_full_inhibition():
    nl = compile_graph(inverter())
    net = nl.build()
    out = nl.index.get("out", (0,))
    net.step(input_spikes=[0])
    for _ in range(10):
        fired = net.step(input_spikes=[0])
        assert out not in fired


def test_inverter_alternating():
    nl = compile_graph(inverter())
    net = nl.build()
    out = nl.index.get("out", (0,))
    pulses = [1, 0, 1, 0, 1, 0, 1, 0]
    got = []
    net.step(input_spikes=[0] if pulses[0] else [])
    for k in range(1, len(pulses)):
        fired = net.step(input_spikes=[0] if pulses[k] else [])
        got.append(1 if out in fired else 0)
    assert got == [1 - p for p in pulses[:-1]]


def test_vc_config_validation():
    with pytest.raises(ValueError):
        ValueCircuitConfig(theta=0)
    with pytest.raises(ValueError):
        ValueCircuitConfig(theta=8, dq=9)
    with pytest.raises(ValueError):
        ValueCircuitConfig(theta=8, q_init=9)
    assert ValueCircuitConfig(theta=64).initial_charge == 32


def test_vc_pure_reward_saturates():
    net, h = build_value_circuit(ValueCircuitConfig(theta=64, dq=1))
    rng = np.random.default_rng(3)
    for _ in range(1200):
        vc_reinforce(net, h, REWARD, draw_phase(rng, h.theta))
    assert vc_value(net, h) == 1.0


def test_vc_pure_punish_empties():
    net, h = build_value_circuit(ValueCircuitConfig(theta=64, dq=1))
    rng = np.random.default_rng(4)
    for _ in range(1200):
        vc_reinforce(net, h, PUNISH, draw_phase(rng, h.theta))
    assert vc_value(net, h) == 0.0


def test_vc_reward_blocked_at_full_charge():
    net, h = build_value_circuit(ValueCircuitConfig(theta=64))
    _set_value(net, h, 64)
    for phase in range(0, 64, 5):
        vc_reinforce(net, h, REWARD, phase)
        assert net.memory_charge(h.mem) == 64


def test_vc_punish_blocked_at_zero_charge():
    net, h = build_value_circuit(ValueCircuitConfig(theta=64))
    _set_value(net, h, 0)
    for phase in range(0, 64, 5):
        vc_reinforce(net, h, PUNISH, phase)
        assert net.memory_charge(h.mem) == 0


def test_vc_unknown_signal():
    net, h = build_value_circuit(ValueCircuitConfig())
    with pytest.raises(ValueError):
        vc_reinforce(net, h, "draw", 0)


def test_vc_reward_gate_probability():
    # At estimate 0.25, a reward pulse at a uniform phase passes the
    # inverter gate with probability 0.75.
    net, h = build_value_circuit(ValueCircuitConfig(theta=64))
    rng = np.random.default_rng(11)
    hits = 0
    trials = 10_000
    for _ in range(trials):
        _set_value(net, h, 16)
        vc_reinforce(net, h, REWARD, draw_phase(rng, h.theta))
        if net.memory_charge(h.mem) == 17:
            hits += 1
    assert abs(hits / trials - 0.75) <= 0.03


def test_vc_drift_sign_and_fixed_point():
    # algebraic fixed point of the drift expression
    for theta, r in [(64, 0.25), (64, 0.5), (80, 0.4)]:
        assert expected_drift(int(theta * r), theta, r) == pytest.approx(0.0)
        assert expected_drift(int(theta * r) - 8, theta, r) > 0
        assert expected_drift(int(theta * r) + 8, theta, r) < 0
    # empirical drift sign on the circuit at r = 0.6
    net, h = build_value_circuit(ValueCircuitConfig(theta=64))
    rng = np.random.default_rng(12)
    for q, want_sign in [(20, 1), (56, -1)]:
        delta = 0
        for _ in range(3000):
            _set_value(net, h, q)
            sig = REWARD if rng.random() < 0.6 else PUNISH
            vc_reinforce(net, h, sig, draw_phase(rng, h.theta))
            delta += net.memory_charge(h.mem) - q
        assert np.sign(delta) == want_sign
        expect = 3000 * expected_drift(q, 64, 0.6)
        assert abs(delta - expect) < 6 * np.sqrt(3000)


def test_vc_tracks_bernoulli_reward_rate():
    net, h = build_value_circuit(ValueCircuitConfig(theta=64, dq=1))
    rng = np.random.default_rng(5)
    values = []
    for k in range(2000):
        sig = REWARD if rng.random() < 0.7 else PUNISH
        vc_reinforce(net, h, sig, draw_phase(rng, h.theta))
        if k >= 1500:
            values.append(vc_value(net, h))
    assert abs(np.mean(values) - 0.7) <= 0.05


def test_memory_window_grows_with_theta():
    # After r switches 0.2 -> 0.8, signals-to-recover grows with theta/dq.
    def signals_to_adapt(theta, seed):
        net, h = build_value_circuit(ValueCircuitConfig(theta=theta, dq=1))
        rng = np.random.default_rng(seed)
        for _ in range(3 * theta):
            sig = REWARD if rng.random() < 0.2 else PUNISH
            vc_reinforce(net, h, sig, draw_phase(rng, theta))
        for k in range(40 * theta):
            sig = REWARD if rng.random() < 0.8 else PUNISH
            vc_reinforce(net, h, sig, draw_phase(rng, theta))
            if abs(vc_value(net, h) - 0.8) < 0.1:
                return k + 1
        return 40 * theta

    means = []
    for theta in (16, 64, 256):
        means.append(np.mean([signals_to_adapt(theta, s) for s in range(20)]))
    assert means[0] < means[1] < means[2]


def test_vc_read_rate_exact_and_quantized():
    net, h = build_value_circuit(ValueCircuitConfig(theta=64))
    _set_value(net, h, 0)
    assert vc_read_rate(net, h, 64) == 0.0
    _set_value(net, h, 48)
    assert vc_read_rate(net, h, 64) == 0.75
    est = vc_read_rate(net, h, 8)
    assert abs(est - 0.75) <= 1 / 8
    with pytest.raises(ValueError):
        vc_read_rate(net, h, 0)


def test_vc_stationary_matches_chain_oracle_quick():
    # Coarse single-r check; the acceptance suite runs the full grid.
    theta, r = 32, 0.4
    net, h = build_value_circuit(ValueCircuitConfig(theta=theta))
    rng = np.random.default_rng(21)
    samples = []
    for k in range(30_000):
        sig = REWARD if rng.random() < r else PUNISH
        vc_reinforce(net, h, sig, draw_phase(rng, theta))
        if k >= 500:
            samples.append(net.memory_charge(h.mem))
    emp = np.bincount(samples, minlength=theta + 1) / len(samples)
    pi = stationary_distribution(theta, r)
    assert 0.5 * np.abs(emp - pi).sum() <= 0.06


@settings(max_examples=20, deadline=None)
@given(st.lists(st.sampled_from([REWARD, PUNISH]), min_size=1, max_size=80),
       st.integers(0, 2**31 - 1))
def test_vc_charge_never_leaves_bounds(signals, seed):
    net, h = build_value_circuit(ValueCircuitConfig(theta=16, dq=3))
    rng = np.random.default_rng(seed)
    for sig in signals:
        vc_reinforce(net, h, sig, draw_phase(rng, 16))
        assert 0 <= net.memory_charge(h.mem) <= 16


def test_vc_read_rate_exact_at_period_multiple():
    # q=48, theta=64: output period is 4; any multiple of it reads exactly
    net, h = build_value_circuit(ValueCircuitConfig(theta=64))
    _set_value(net, h, 48)
    assert vc_read_rate(net, h, 4) == 0.75
    assert vc_read_rate(net, h, 12) == 0.75
