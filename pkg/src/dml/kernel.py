"""Discrete-time simulation of compartment/synapse netlists.

Semantics, applied in order at every timestep:

1. Charge from spikes at t-1 (compartment spikes and input-line pulses
   alike) is delivered; synaptic delay is globally one step.
2. Kind update:
   * ``hard`` integrator: spikes iff delivered charge >= threshold, and
     its charge fully decays every step, so it only detects same-step
     coincidences (this is what makes it an AND gate).
   * ``soft`` integrator: adds the persistent charge of its driving
     ``memory`` compartment to an accumulator, spikes iff the accumulator
     reaches threshold, and subtracts threshold on spiking. Its firing
     rate is therefore exactly q/threshold for constant memory charge q.
   * ``tonic``: spikes iff it received no inhibitory charge this step.
   * ``latch``: net positive charge switches it on, net negative charge
     switches it off, zero holds; it spikes every step while on.
   * ``memory``: accumulates delivered charge into a persistent store
     clamped to [0, threshold]; never spikes.
3. Externally forced spikes are OR-ed into the step's output (they do not
   touch internal state other than being emitted, counted, and delivered
   next step).

A synapse whose presynaptic compartment is a ``memory`` compartment is the
drive coupling of a soft integrator: it does not transmit spikes (memory
compartments never fire); it designates which persistent store feeds the
integrator's accumulator each step. Each soft integrator accepts at most
one such coupling.

All arithmetic is integer-only, so identical (netlist, schedule) inputs
produce bit-identical spike rasters on any platform. The inner loop is
compiled with numba when available; ``use_numba=False`` (or the
DML_PURE_NUMPY environment variable) selects the plain numpy path, which
implements the same integer update rules and is kept as a cross-check.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep in practice
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


HARD = "hard-reset-integrator"
SOFT = "soft-reset-integrator"
TONIC = "tonic"
LATCH = "latch"
MEMORY = "memory"

KINDS = (HARD, SOFT, TONIC, LATCH, MEMORY)
_THRESHOLDED = (HARD, SOFT, MEMORY)


class NetlistError(ValueError):
    """Raised for invalid compartment/synapse declarations."""


@dataclass(frozen=True)
class Compartment:
    """One compartment: a kind, a firing threshold, and a debug label."""

    kind: str
    threshold: int = 1
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NetlistError(f"unknown compartment kind {self.kind!r}")
        if self.kind in _THRESHOLDED and self.threshold < 1:
            raise NetlistError(
                f"{self.kind} requires threshold >= 1, got {self.threshold}"
            )


@dataclass(frozen=True)
class Synapse:
    """Directed connection pre -> post with a signed integer weight.

    Delay is globally fixed at one timestep and not configurable.
    """

    pre: int
    post: int
    weight: int

    def __post_init__(self):
        if self.weight == 0:
            raise NetlistError("synapse weight must be nonzero")


@dataclass(frozen=True)
class InputTap:
    """Fan-out of one external input line: pulse -> charge next step."""

    posts: tuple[int, ...]
    weights: tuple[int, ...]


@njit(cache=True)
def _run_steps(
    n_steps,
    w_indptr,
    w_indices,
    w_data,
    spikes,
    pending,
    delivered,
    idx_hard,
    th_hard,
    idx_soft,
    th_soft,
    acc,
    drive_src,
    idx_tonic,
    idx_latch,
    latch_on,
    idx_memory,
    th_memory,
    qmem,
    counts,
):  # pragma: no cover - exercised via Network, equivalence-tested
    n = delivered.shape[0]
    for _ in range(n_steps):
        for i in range(n):
            delivered[i] = pending[i]
            pending[i] = 0
        for i in range(n):
            if spikes[i] != 0:
                for k in range(w_indptr[i], w_indptr[i + 1]):
                    delivered[w_indices[k]] += w_data[k]
        for i in range(n):
            spikes[i] = 0
        for j in range(idx_hard.shape[0]):
            if delivered[idx_hard[j]] >= th_hard[j]:
                spikes[idx_hard[j]] = 1
        for j in range(idx_memory.shape[0]):
            q = qmem[j] + delivered[idx_memory[j]]
            if q < 0:
                q = 0
            elif q > th_memory[j]:
                q = th_memory[j]
            qmem[j] = q
        for j in range(idx_soft.shape[0]):
            a = acc[j] + delivered[idx_soft[j]]
            if drive_src[j] >= 0:
                a += qmem[drive_src[j]]
            if a < 0:
                a = 0
            if a >= th_soft[j]:
                a -= th_soft[j]
                spikes[idx_soft[j]] = 1
            acc[j] = a
        for j in range(idx_tonic.shape[0]):
            if delivered[idx_tonic[j]] >= 0:
                spikes[idx_tonic[j]] = 1
        for j in range(idx_latch.shape[0]):
            d = delivered[idx_latch[j]]
            if d > 0:
                latch_on[j] = 1
            elif d < 0:
                latch_on[j] = 0
            if latch_on[j] != 0:
                spikes[idx_latch[j]] = 1
        for i in range(n):
            counts[i] += spikes[i]


class Network:
    """Mutable simulation state for a fixed netlist.

    One instance is single-threaded; independent instances share nothing
    and may run in parallel.
    """

    def __init__(
        self,
        compartments: Sequence[Compartment],
        synapses: Sequence[Synapse] = (),
        inputs: Sequence[InputTap] = (),
        unique_labels: bool = False,
        use_numba: bool | None = None,
    ):
        self.compartments = tuple(compartments)
        self.synapses = tuple(synapses)
        self.inputs = tuple(inputs)
        n = len(self.compartments)
        if use_numba is None:
            use_numba = _HAVE_NUMBA and not os.environ.get("DML_PURE_NUMPY")
        self._use_numba = bool(use_numba and _HAVE_NUMBA)

        if unique_labels:
            labels = [c.label for c in self.compartments if c.label]
            if len(labels) != len(set(labels)):
                raise NetlistError("duplicate compartment labels")

        kinds = np.array(
            [KINDS.index(c.kind) for c in self.compartments], dtype=np.int8
        )
        self._thresholds = np.array(
            [c.threshold for c in self.compartments], dtype=np.int64
        )
        self._idx_hard = np.flatnonzero(kinds == KINDS.index(HARD))
        self._idx_soft = np.flatnonzero(kinds == KINDS.index(SOFT))
        self._idx_tonic = np.flatnonzero(kinds == KINDS.index(TONIC))
        self._idx_latch = np.flatnonzero(kinds == KINDS.index(LATCH))
        self._idx_memory = np.flatnonzero(kinds == KINDS.index(MEMORY))
        self._th_hard = self._thresholds[self._idx_hard]
        self._th_soft = self._thresholds[self._idx_soft]
        self._th_memory = self._thresholds[self._idx_memory]

        mem_rank = np.full(n, -1, dtype=np.int64)
        mem_rank[self._idx_memory] = np.arange(len(self._idx_memory))
        soft_rank = np.full(n, -1, dtype=np.int64)
        soft_rank[self._idx_soft] = np.arange(len(self._idx_soft))

        # Drive coupling: memory -> soft synapses select each integrator's
        # persistent store; -1 marks an undriven integrator (rate 0).
        self._soft_drive = np.full(len(self._idx_soft), -1, dtype=np.int64)
        pre_l, post_l, w_l = [], [], []
        is_tonic = kinds == KINDS.index(TONIC)
        for s in self.synapses:
            if not (0 <= s.pre < n and 0 <= s.post < n):
                raise NetlistError(f"synapse index out of range: {s}")
            if is_tonic[s.post] and s.weight > 0:
                raise NetlistError(
                    f"tonic compartment {s.post} accepts only inhibition"
                )
            if mem_rank[s.pre] >= 0:
                if soft_rank[s.post] < 0:
                    raise NetlistError(
                        f"memory compartment {s.pre} may only drive a "
                        f"soft-reset integrator (synapse to {s.post})"
                    )
                if s.weight <= 0:
                    raise NetlistError("drive coupling weight must be positive")
                if self._soft_drive[soft_rank[s.post]] >= 0:
                    raise NetlistError(
                        f"soft-reset integrator {s.post} has multiple drives"
                    )
                self._soft_drive[soft_rank[s.post]] = mem_rank[s.pre]
                continue  # couplings do not transmit spike charge
            pre_l.append(s.pre)
            post_l.append(s.post)
            w_l.append(s.weight)
        # pre-major CSR: row = presynaptic compartment
        w = sparse.csr_matrix(
            (np.array(w_l, dtype=np.int64), (pre_l, post_l)), shape=(n, n)
        )
        self._w_indptr = w.indptr.astype(np.int64)
        self._w_indices = w.indices.astype(np.int64)
        self._w_data = w.data.astype(np.int64)
        self._w_post_major = w.T.tocsr()  # numpy path does post @ spikes

        for tap in self.inputs:
            for p, wt in zip(tap.posts, tap.weights):
                if not 0 <= p < n:
                    raise NetlistError(f"input tap target out of range: {p}")
                if wt == 0:
                    raise NetlistError("input tap weight must be nonzero")
                if is_tonic[p] and wt > 0:
                    raise NetlistError(
                        f"tonic compartment {p} accepts only inhibition"
                    )

        self.n = n
        self.t = 0
        self._acc = np.zeros(len(self._idx_soft), dtype=np.int64)
        self._qmem = np.zeros(len(self._idx_memory), dtype=np.int64)
        self._latch_on = np.zeros(len(self._idx_latch), dtype=np.uint8)
        self._spikes = np.zeros(n, dtype=np.int64)  # spikes emitted at t-1
        self._pending_input = np.zeros(n, dtype=np.int64)
        self._delivered = np.zeros(n, dtype=np.int64)
        self._counts = np.zeros(n, dtype=np.int64)

    # -- state accessors ---------------------------------------------------

    def _rank(self, index: int, idx_array: np.ndarray, what: str) -> int:
        r = int(np.searchsorted(idx_array, index))
        if r >= len(idx_array) or idx_array[r] != index:
            raise NetlistError(f"compartment {index} is not a {what}")
        return r

    def memory_charge(self, index: int) -> int:
        """Persistent charge of a memory compartment (diagnostic read)."""
        return int(self._qmem[self._rank(index, self._idx_memory, "memory compartment")])

    def set_memory_charge(self, index: int, value: int) -> None:
        """Set a memory compartment's persistent charge (init/diagnostic)."""
        r = self._rank(index, self._idx_memory, "memory compartment")
        if not 0 <= value <= self._th_memory[r]:
            raise NetlistError(f"memory charge {value} outside [0, threshold]")
        self._qmem[r] = value

    def memory_charges(self, indices: np.ndarray) -> np.ndarray:
        """Vectorized memory_charge over an array of compartment indices."""
        r = np.searchsorted(self._idx_memory, indices)
        if np.any(self._idx_memory[r] != indices):
            raise NetlistError("not all indices are memory compartments")
        return self._qmem[r].copy()

    def latch_state(self, index: int) -> bool:
        return bool(self._latch_on[self._rank(index, self._idx_latch, "latch")])

    def latch_states(self, indices: np.ndarray) -> np.ndarray:
        r = np.searchsorted(self._idx_latch, indices)
        if np.any(self._idx_latch[r] != indices):
            raise NetlistError("not all indices are latches")
        return self._latch_on[r].astype(bool)

    def spike_counts(self) -> np.ndarray:
        """Lifetime spike totals per compartment (monotone nondecreasing)."""
        return self._counts.copy()

    # -- dynamics ------------------------------------------------------------

    def _advance(self, n_steps: int) -> None:
        """Run injection-free steps without touching python per step."""
        _run_steps(
            n_steps,
            self._w_indptr,
            self._w_indices,
            self._w_data,
            self._spikes,
            self._pending_input,
            self._delivered,
            self._idx_hard,
            self._th_hard,
            self._idx_soft,
            self._th_soft,
            self._acc,
            self._soft_drive,
            self._idx_tonic,
            self._idx_latch,
            self._latch_on,
            self._idx_memory,
            self._th_memory,
            self._qmem,
            self._counts,
        )
        self.t += n_steps

    def _step_numpy(self) -> None:
        delivered = self._w_post_major.dot(self._spikes)
        delivered += self._pending_input
        self._pending_input[:] = 0
        spikes = np.zeros(self.n, dtype=np.int64)
        if len(self._idx_hard):
            spikes[self._idx_hard] = delivered[self._idx_hard] >= self._th_hard
        if len(self._idx_memory):
            np.add(self._qmem, delivered[self._idx_memory], out=self._qmem)
            np.clip(self._qmem, 0, self._th_memory, out=self._qmem)
        if len(self._idx_soft):
            acc = self._acc
            acc += delivered[self._idx_soft]
            driven = self._soft_drive >= 0
            acc[driven] += self._qmem[self._soft_drive[driven]]
            np.maximum(acc, 0, out=acc)
            fired = acc >= self._th_soft
            acc[fired] -= self._th_soft[fired]
            spikes[self._idx_soft] = fired
        if len(self._idx_tonic):
            spikes[self._idx_tonic] = delivered[self._idx_tonic] >= 0
        if len(self._idx_latch):
            d = delivered[self._idx_latch]
            self._latch_on[d > 0] = 1
            self._latch_on[d < 0] = 0
            spikes[self._idx_latch] = self._latch_on
        self._counts += spikes
        self._spikes = spikes
        self.t += 1

    def step(
        self,
        external: Iterable[int] = (),
        input_spikes: Iterable[int] = (),
    ) -> np.ndarray:
        """Advance one timestep; returns indices of compartments that spiked.

        ``external`` forces the named compartments to emit a spike this
        step. ``input_spikes`` pulses the named input lines; their charge
        lands next step, exactly like a compartment spike would.
        """
        if self._use_numba:
            self._advance(1)
        else:
            self._step_numpy()
        for i in external:
            if not 0 <= i < self.n:
                raise NetlistError(f"external spike index out of range: {i}")
            if self._spikes[i] == 0:
                self._spikes[i] = 1
                self._counts[i] += 1
        for i in input_spikes:
            tap = self.inputs[i]
            for p, w in zip(tap.posts, tap.weights):
                self._pending_input[p] += w
        return np.flatnonzero(self._spikes)

    def run(self, steps: int) -> None:
        """Run ``steps`` quiescent timesteps (no injections, no raster)."""
        if steps <= 0:
            return
        if self._use_numba:
            self._advance(steps)
        else:
            for _ in range(steps):
                self._step_numpy()

    def run_window(
        self,
        steps: int,
        schedule: Mapping[int, Iterable[int]] | None = None,
        input_schedule: Mapping[int, Iterable[int]] | None = None,
        record: bool = True,
    ) -> np.ndarray | None:
        """Run ``steps`` timesteps; schedules are keyed by window offset.

        Returns the (steps x n) binary raster, or None when ``record`` is
        false (training loops avoid the allocation). State persists across
        windows: two consecutive windows equal one window of their total
        length.
        """
        if steps < 1:
            raise NetlistError("window length must be >= 1")
        if not record and not schedule and not input_schedule:
            self.run(steps)
            return None
        raster = np.zeros((steps, self.n), dtype=np.uint8) if record else None
        for k in range(steps):
            ext = schedule.get(k, ()) if schedule else ()
            inp = input_schedule.get(k, ()) if input_schedule else ()
            fired = self.step(ext, inp)
            if raster is not None:
                raster[k, fired] = 1
        return raster


def raster_to_csv(raster: np.ndarray, path) -> None:
    """Dump a raster as CSV rows (timestep, compartment), one per spike."""
    ts, comps = np.nonzero(raster)
    with open(path, "w", newline="") as fh:
        fh.write("timestep,compartment\n")
        for t, c in zip(ts, comps):
            fh.write(f"{t},{c}\n")


def srif_spike_count(a0: int, q: int, theta: int, steps: int) -> int:
    """Closed-form spike count of a soft-reset integrator.

    From accumulator a0 with constant drive q and threshold theta, the
    number of spikes in ``steps`` timesteps is
    floor((a0 + steps*q)/theta) - floor(a0/theta).
    """
    return (a0 + steps * q) // theta - a0 // theta
