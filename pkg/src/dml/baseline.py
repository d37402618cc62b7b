"""Non-spiking reference learners and exact solvers.

``mc_control`` is classic first-visit Monte Carlo control with
running-average updates over 64-bit floats, usable as an epoch-for-epoch
comparison baseline and as a long-run oracle. Terminal outcomes map to
{reward: 1, punish: 0}; draws update nothing, mirroring the value-circuit
semantics so both learners estimate the same quantity.

``maze_value_iteration`` solves the deterministic maze exactly
(breadth-first distances from the goal) and certifies which cells can
reach the goal within the step budget.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .envs import DIRECTIONS, PUNISH, REWARD, MazeSpec

OUTCOME_VALUE = {REWARD: 1.0, PUNISH: 0.0}
_MOVES = {"N": (0, 1), "E": (1, 0), "S": (0, -1), "W": (-1, 0)}


@dataclass
class ValueTable:
    values: np.ndarray  # (n_states, n_actions) running means
    visits: np.ndarray  # (n_states, n_actions) update counts

    def greedy(self) -> np.ndarray:
        return np.argmax(self.values, axis=1)


@dataclass
class EpochRecord:
    epoch: int
    state: int
    action: int
    outcome: str  # none while the episode continues


def _choose(values, state, epsilon, rng, n_actions):
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(n_actions))
    row = values[state]
    best = np.flatnonzero(row == row.max())
    if len(best) == 1:
        return int(best[0])
    return int(best[rng.integers(len(best))])


def mc_control(
    env,
    episodes: int,
    epsilon: float,
    rng: np.random.Generator,
    exploring_start_actions: bool = False,
    explore_rng: np.random.Generator | None = None,
    initial_value: float = 0.5,
    log: list[EpochRecord] | None = None,
    max_epochs: int | None = None,
    table: ValueTable | None = None,
) -> ValueTable:
    """First-visit Monte Carlo control over the env's episodic interface.

    ``exploring_start_actions`` forces a uniform first action per episode
    (drawn from ``explore_rng``), the standard exploring-starts scheme for
    greedy control. ``max_epochs`` optionally bounds total environment
    steps instead of episodes (checked between episodes, so the last
    episode always completes); the epoch ``log`` collects every transition
    when provided. Passing ``table`` continues learning from an earlier
    call instead of starting fresh.
    """
    S, A = env.n_states, env.n_actions
    if table is None:
        table = ValueTable(
            np.full((S, A), initial_value), np.zeros((S, A), dtype=np.int64)
        )
    values, visits = table.values, table.visits
    epoch = 0
    ep = 0
    while ep < episodes:
        if max_epochs is not None and epoch >= max_epochs:
            break
        ep += 1
        state = env.reset()
        visited: set[tuple[int, int]] = set()
        first = True
        while True:
            if first and exploring_start_actions:
                action = int((explore_rng or rng).integers(A))
            else:
                action = _choose(values, state, epsilon, rng, A)
            first = False
            res = env.step(action)
            visited.add((state, action))
            if log is not None:
                log.append(EpochRecord(epoch, state, action, res.outcome))
            epoch += 1
            if res.terminal:
                g = OUTCOME_VALUE.get(res.outcome)
                if g is not None:  # draws update nothing
                    for (s, a) in visited:
                        visits[s, a] += 1
                        values[s, a] += (g - values[s, a]) / visits[s, a]
                break
            state = res.next_state
    return table


@dataclass
class MazeCertificate:
    distance: np.ndarray  # (n_states,) steps to goal; -1 if unreachable
    optimal_actions: list[set[int]]  # per state, all distance-reducing moves
    step_limit: int

    @property
    def failing_cells(self) -> list[int]:
        return [
            s
            for s, d in enumerate(self.distance)
            if d < 0 or d > self.step_limit
        ]

    @property
    def solvable(self) -> bool:
        return not self.failing_cells


def maze_value_iteration(spec: MazeSpec) -> MazeCertificate:
    """Exact shortest distances and optimal action sets for a maze."""
    n = spec.width * spec.height
    dist = np.full(n, -1, dtype=np.int64)
    goal = spec.encode(*spec.goal)
    dist[goal] = 0
    queue = deque([goal])
    while queue:
        s = queue.popleft()
        x, y = spec.decode(s)
        for d in DIRECTIONS:
            if spec.blocked(x, y, d):  # walls are symmetric
                continue
            dx, dy = _MOVES[d]
            ns = spec.encode(x + dx, y + dy)
            if dist[ns] < 0:
                dist[ns] = dist[s] + 1
                queue.append(ns)
    optimal: list[set[int]] = []
    for s in range(n):
        acts: set[int] = set()
        if dist[s] > 0:
            x, y = spec.decode(s)
            for a, d in enumerate(DIRECTIONS):
                if spec.blocked(x, y, d):
                    continue
                dx, dy = _MOVES[d]
                ns = spec.encode(x + dx, y + dy)
                if dist[ns] >= 0 and dist[ns] == dist[s] - 1:
                    acts.add(a)
        optimal.append(acts)
    return MazeCertificate(dist, optimal, spec.step_limit)


def rollout_policy(spec: MazeSpec, policy: np.ndarray, start_state: int) -> int:
    """Closed-loop steps to goal under a fixed policy; -1 if the step
    budget runs out first."""
    x, y = spec.decode(start_state)
    for k in range(spec.step_limit):
        if (x, y) == spec.goal:
            return k
        d = DIRECTIONS[int(policy[spec.encode(x, y)])]
        if not spec.blocked(x, y, d):
            dx, dy = _MOVES[d]
            x, y = x + dx, y + dy
        if (x, y) == spec.goal:
            return k + 1
    return -1
