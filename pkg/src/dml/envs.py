"""Episodic task environments: multi-arm bandit, dynamic maze, blackjack.

All three share one interface: ``reset()`` returns a state index,
``step(action)`` returns a :class:`StepResult`. Reinforcement arrives only
at episode end (``outcome`` is ``none`` on non-terminal transitions);
bandit episodes have length one. Each environment owns its random
generator so agent and environment randomness stay independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

REWARD = "reward"
PUNISH = "punish"
NONE = "none"

DIRECTIONS = ("N", "E", "S", "W")
_MOVES = {"N": (0, 1), "E": (1, 0), "S": (0, -1), "W": (-1, 0)}


class EnvError(ValueError):
    pass


@dataclass(frozen=True)
class StepResult:
    next_state: int
    terminal: bool
    outcome: str  # meaningful only when terminal; none otherwise

    def __post_init__(self):
        if self.outcome not in (REWARD, PUNISH, NONE):
            raise EnvError(f"bad outcome {self.outcome!r}")
        if not self.terminal and self.outcome != NONE:
            raise EnvError("non-terminal steps carry no reinforcement")


# ---------------------------------------------------------------------------
# multi-arm bandit


@dataclass(frozen=True)
class BanditSpec:
    arm_probs: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)

    def __post_init__(self):
        if not self.arm_probs:
            raise EnvError("bandit needs at least one arm")
        if any(not 0 <= p <= 1 for p in self.arm_probs):
            raise EnvError("arm probabilities must lie in [0, 1]")

    @property
    def optimal_action(self) -> int:
        return int(np.argmax(self.arm_probs))


class Bandit:
    """Stateless one-step task: pulling arm a rewards with its probability."""

    def __init__(self, spec: BanditSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self._terminal = True

    @property
    def n_states(self) -> int:
        return 1

    @property
    def n_actions(self) -> int:
        return len(self.spec.arm_probs)

    def reset(self) -> int:
        self._terminal = False
        return 0

    def step(self, action: int) -> StepResult:
        if self._terminal:
            raise EnvError("episode already finished")
        if not 0 <= action < self.n_actions:
            raise EnvError(f"arm {action} out of range")
        self._terminal = True
        win = self.rng.random() < self.spec.arm_probs[action]
        return StepResult(0, True, REWARD if win else PUNISH)


# ---------------------------------------------------------------------------
# dynamic maze


def _wall_key(x: int, y: int, d: str) -> tuple[int, int, str]:
    return (x, y, d)


def _symmetric_walls(walls) -> frozenset:
    """Closure of blocked (cell, direction) pairs: A->B blocked iff B->A."""
    out = set()
    for x, y, d in walls:
        if d not in DIRECTIONS:
            raise EnvError(f"bad direction {d!r}")
        dx, dy = _MOVES[d]
        out.add(_wall_key(x, y, d))
        out.add(_wall_key(x + dx, y + dy, DIRECTIONS[(DIRECTIONS.index(d) + 2) % 4]))
    return frozenset(out)


@dataclass(frozen=True)
class MazeSpec:
    width: int = 5
    height: int = 5
    goal: tuple[int, int] = (2, 2)
    walls: frozenset = frozenset()
    step_limit: int = 8
    exploring_starts: bool = True
    start: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise EnvError("maze must have positive size")
        if not self.inside(*self.goal):
            raise EnvError(f"goal {self.goal} outside the arena")
        object.__setattr__(self, "walls", _symmetric_walls(self.walls))

    def inside(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def blocked(self, x: int, y: int, d: str) -> bool:
        dx, dy = _MOVES[d]
        nx, ny = x + dx, y + dy
        return not self.inside(nx, ny) or _wall_key(x, y, d) in self.walls

    def encode(self, x: int, y: int) -> int:
        return y * self.width + x

    def decode(self, state: int) -> tuple[int, int]:
        return state % self.width, state // self.width

    @staticmethod
    def from_json(text: str) -> "MazeSpec":
        doc = json.loads(text)
        return MazeSpec(
            width=doc["width"],
            height=doc["height"],
            goal=tuple(doc["goal"]),
            walls=frozenset((x, y, d) for x, y, d in doc.get("walls", [])),
            step_limit=doc.get("step_limit", 8),
            exploring_starts=doc.get("exploring_starts", True),
            start=tuple(doc.get("start", (0, 0))),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "width": self.width,
                "height": self.height,
                "goal": list(self.goal),
                "walls": sorted([x, y, d] for x, y, d in self.walls),
                "step_limit": self.step_limit,
                "exploring_starts": self.exploring_starts,
                "start": list(self.start),
            },
            indent=1,
        ) + "\n"


class Maze:
    """Grid navigation with hidden walls and a hard step budget.

    A move into a wall keeps the position and still consumes a step (the
    agent senses walls only through its unchanged location). Reaching the
    goal rewards; exhausting the budget punishes. ``reconfigure`` swaps
    walls and goal mid-experiment without touching episode-external state.
    """

    def __init__(self, spec: MazeSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self._pos: tuple[int, int] | None = None
        self._steps = 0

    @property
    def n_states(self) -> int:
        return self.spec.width * self.spec.height

    @property
    def n_actions(self) -> int:
        return 4

    def reset(self) -> int:
        s = self.spec
        if s.exploring_starts:
            while True:
                x = int(self.rng.integers(s.width))
                y = int(self.rng.integers(s.height))
                if (x, y) != s.goal:
                    break
        else:
            x, y = s.start
        self._pos = (x, y)
        self._steps = 0
        return s.encode(x, y)

    def step(self, action: int) -> StepResult:
        if self._pos is None:
            raise EnvError("episode already finished")
        if not 0 <= action < 4:
            raise EnvError(f"action {action} out of range")
        s = self.spec
        x, y = self._pos
        d = DIRECTIONS[action]
        if not s.blocked(x, y, d):
            dx, dy = _MOVES[d]
            x, y = x + dx, y + dy
        self._steps += 1
        state = s.encode(x, y)
        if (x, y) == s.goal:
            self._pos = None
            return StepResult(state, True, REWARD)
        if self._steps >= s.step_limit:
            self._pos = None
            return StepResult(state, True, PUNISH)
        self._pos = (x, y)
        return StepResult(state, False, NONE)

    def reconfigure(self, walls, goal: tuple[int, int]) -> None:
        self.spec = replace(
            self.spec, walls=frozenset(walls), goal=tuple(goal)
        )
        self._pos = None  # current episode, if any, is abandoned


def center_goal_walls(goal: tuple[int, int]):
    """Walls on the south, east, and west sides of a goal cell, leaving
    only the northern approach open."""
    x, y = goal
    return frozenset({(x, y, "S"), (x, y, "E"), (x, y, "W")})


# ---------------------------------------------------------------------------
# blackjack


def _card(rng: np.random.Generator) -> int:
    """Infinite-deck draw: ranks 1..9 uniform, 10/J/Q/K all worth ten."""
    return min(int(rng.integers(1, 14)), 10)


def _hand_total(total_low: int, any_ace: bool) -> tuple[int, bool]:
    """Best total and whether an ace is currently counted as eleven."""
    if any_ace and total_low + 10 <= 21:
        return total_low + 10, True
    return total_low, False


N_PLAYER = 10  # sums 12..21
N_DEALER = 10  # showing 1..10
N_BLACKJACK_STATES = N_PLAYER * N_DEALER * 2

HIT = 0
STICK = 1


def encode_blackjack(player_sum: int, dealer_showing: int, usable: bool) -> int:
    if not (12 <= player_sum <= 21 and 1 <= dealer_showing <= 10):
        raise EnvError(f"bad blackjack state ({player_sum}, {dealer_showing})")
    return ((player_sum - 12) * N_DEALER + (dealer_showing - 1)) * 2 + int(usable)


def decode_blackjack(state: int) -> tuple[int, int, bool]:
    if not 0 <= state < N_BLACKJACK_STATES:
        raise EnvError(f"state {state} out of range")
    usable = state % 2
    rest = state // 2
    return rest // N_DEALER + 12, rest % N_DEALER + 1, bool(usable)


def dealer_total(showing: int, draws) -> int:
    """Play out the fixed dealer policy: draw until the total reaches 17.

    ``draws`` yields card values; an ace counts eleven when that does not
    bust. Returns the final total (17..26).
    """
    total_low = showing
    any_ace = showing == 1
    while True:
        total, _ = _hand_total(total_low, any_ace)
        if total >= 17:
            return total
        c = next(draws)
        total_low += c
        any_ace = any_ace or c == 1


def settle(player_total: int, dealer: int) -> str:
    if dealer > 21 or player_total > dealer:
        return REWARD
    if player_total == dealer:
        return NONE
    return PUNISH


class Blackjack:
    """Hit/stick against a stand-on-17 dealer, infinite deck.

    States encode (player sum 12..21, dealer showing 1..10, usable ace);
    totals below 12 are dealt through automatically since hitting them
    cannot bust. A draw terminates the episode with no reinforcement.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._low = 0
        self._ace = False
        self._showing = 0
        self._live = False

    @property
    def n_states(self) -> int:
        return N_BLACKJACK_STATES

    @property
    def n_actions(self) -> int:
        return 2

    def _state(self) -> int:
        total, usable = _hand_total(self._low, self._ace)
        return encode_blackjack(total, self._showing, usable)

    def reset(self) -> int:
        c1, c2 = _card(self.rng), _card(self.rng)
        self._low = c1 + c2
        self._ace = c1 == 1 or c2 == 1
        self._showing = _card(self.rng)
        while _hand_total(self._low, self._ace)[0] < 12:
            c = _card(self.rng)
            self._low += c
            self._ace = self._ace or c == 1
        self._live = True
        return self._state()

    def step(self, action: int) -> StepResult:
        if not self._live:
            raise EnvError("episode already finished")
        if action not in (HIT, STICK):
            raise EnvError(f"action {action} out of range")
        if action == HIT:
            c = _card(self.rng)
            self._low += c
            self._ace = self._ace or c == 1
            if self._low > 21:
                self._live = False
                return StepResult(self._state_after_bust(), True, PUNISH)
            return StepResult(self._state(), False, NONE)
        self._live = False
        player, _ = _hand_total(self._low, self._ace)
        dealer = dealer_total(self._showing, iter(lambda: _card(self.rng), None))
        return StepResult(self._state_terminal(player), True, settle(player, dealer))

    def _state_after_bust(self) -> int:
        # busts leave the state space; report the last in-range state
        return encode_blackjack(21, self._showing, False)

    def _state_terminal(self, player: int) -> int:
        return encode_blackjack(player, self._showing, _hand_total(self._low, self._ace)[1])


def make_env(task: str, rng: np.random.Generator, bandit: BanditSpec | None = None,
             maze: MazeSpec | None = None):
    if task == "bandit":
        return Bandit(bandit or BanditSpec(), rng)
    if task == "maze":
        return Maze(maze or MazeSpec(), rng)
    if task == "blackjack":
        return Blackjack(rng)
    raise EnvError(f"unknown task {task!r}")
