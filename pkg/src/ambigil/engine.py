"""Exact upper/lower expectations of path functionals by backward induction.

The value computed by ``evaluate_upper`` is the nested supremum of the
recursive product structure: at each step the maximizing measure is chosen
*after* seeing the realized history, so the result is the value of a zero-sum
control problem against an adapted adversary.  "Independent" steps therefore
do not mean a single product measure; they mean the family available at step
k does not depend on the past, while the adversary's pick may.

Payoffs are finite-state automata over (step, lattice partial sum, auxiliary
state).  Two representations are evaluated on a fast vectorized lattice path:

* ``TerminalSumPayoff`` — payoff is a function of the terminal partial sum;
* ``WindowEvent`` — indicator of a windowed threshold event on partial sums
  (state = (partial sum, triggered flag)).

Everything else (full outcome vectors, product automata, float-accumulator
states) runs through a dictionary-layered generic path.  Both paths perform
per-state inner sums in a fixed left-to-right order over support points, so
results are bit-identical for any worker count and across the two paths.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .model import SequenceModel, StepAmbiguity, TruncationSpec, clamp

DEFAULT_STATE_CAP = 2 ** 28


class StateSpaceError(RuntimeError):
    """Estimated DP state count exceeds the configured cap."""

    def __init__(self, estimate: int, cap: int):
        self.estimate = estimate
        self.cap = cap
        super().__init__(
            f"state space estimate {estimate} exceeds cap {cap}; "
            f"raise state_cap explicitly to proceed")


@dataclass(frozen=True)
class ExpectationPair:
    """Lower (conjugate) and upper expectation of one payoff."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError(f"lower {self.lower!r} exceeds upper {self.upper!r}")

    @property
    def width(self) -> float:
        return self.upper - self.lower


# ---------------------------------------------------------------------------
# payoff / automaton types
#
# Engine protocol: initial state, advance(state, k, point, value) with the
# outcome given both as lattice index and real value, terminal(state) -> real.
# bind(model) lets a payoff capture the lattice spacing before evaluation.
# ---------------------------------------------------------------------------


class FullVectorPayoff(object):
    """Reference mode: payoff is a plain function of the full outcome vector.

    State is the realized history tuple, so the DP degenerates to the
    exhaustive tree; usable for short horizons only.
    """

    def __init__(self, fn: Callable[[tuple], float]):
        self.fn = fn
        self.initial = ()

    def bind(self, model):
        return self

    def advance(self, state, k, point, value):
        return state + (value,)

    def terminal(self, state):
        return float(self.fn(state))

    def negate(self):
        return FullVectorPayoff(lambda xs: -self.fn(xs))


class TerminalSumPayoff(object):
    """Payoff fn(S_N) of the terminal partial sum (real-valued argument)."""

    def __init__(self, fn: Callable[[float], float], _delta: float | None = None):
        self.fn = fn
        self._delta = _delta
        self.initial = 0

    def bind(self, model):
        return TerminalSumPayoff(self.fn, model.delta)

    def advance(self, state, k, point, value):
        return state + point

    def terminal(self, state):
        return float(self.fn(self._delta * state))

    def terminal_array(self, positions: np.ndarray) -> np.ndarray:
        return np.array([float(self.fn(float(p))) for p in positions])

    def negate(self):
        return TerminalSumPayoff(lambda s: -self.fn(s), self._delta)


_SIDES = {
    "ge": lambda a, b: a >= b,
    "gt": lambda a, b: a > b,
    "le": lambda a, b: a <= b,
    "lt": lambda a, b: a < b,
}
_STATS = ("S", "-S", "absS")


@dataclass(frozen=True)
class WindowEvent:
    """Path event {exists m in [lo, hi]: stat(S_m) <side> threshold(m)}.

    Automaton state is (triggered flag, lattice partial sum); the flag
    latches once the windowed comparison fires.  ``accept_on_flag=False``
    is the complement event (same transitions, flipped acceptance), and
    the terminal values generalize the indicator so that negation stays
    on the fast lattice path.
    """

    lo: int
    hi: int
    threshold: Callable[[int], float]
    side: str = "ge"
    stat: str = "S"
    accept_on_flag: bool = True
    terminal_accept: float = 1.0
    terminal_reject: float = 0.0
    _delta: float | None = None

    def __post_init__(self):
        if self.side not in _SIDES:
            raise ValueError(f"side must be one of {sorted(_SIDES)}, got {self.side!r}")
        if self.stat not in _STATS:
            raise ValueError(f"stat must be one of {_STATS}, got {self.stat!r}")
        if not 1 <= self.lo <= self.hi:
            raise ValueError(f"window [{self.lo}, {self.hi}] is invalid")

    def state_bound(self, model: SequenceModel) -> int:
        lo, hi, _ = _sum_range(model)
        return 2 * (hi - lo + 1) * (model.horizon + 1)

    def complement(self) -> "WindowEvent":
        return replace(self, accept_on_flag=not self.accept_on_flag)

    def negate(self) -> "WindowEvent":
        return replace(self, terminal_accept=-self.terminal_accept,
                       terminal_reject=-self.terminal_reject)

    # engine protocol ------------------------------------------------------

    @property
    def initial(self):
        return (0, 0)

    def bind(self, model: SequenceModel) -> "WindowEvent":
        if model.horizon < self.hi:
            raise ValueError(f"window [{self.lo}, {self.hi}] exceeds horizon {model.horizon}")
        return replace(self, _delta=model.delta)

    def _stat_value(self, position: float) -> float:
        if self.stat == "S":
            return position
        if self.stat == "-S":
            return -position
        return abs(position)

    def triggers(self, m: int, position: float) -> bool:
        if m < self.lo or m > self.hi:
            return False
        return _SIDES[self.side](self._stat_value(position), float(self.threshold(m)))

    def trigger_mask(self, m: int, positions: np.ndarray) -> np.ndarray:
        if m < self.lo or m > self.hi:
            return np.zeros(len(positions), dtype=bool)
        if self.stat == "S":
            sv = positions
        elif self.stat == "-S":
            sv = -positions
        else:
            sv = np.abs(positions)
        return _SIDES[self.side](sv, float(self.threshold(m)))

    def advance(self, state, k, point, value):
        flag, s = state
        s2 = s + point
        if flag:
            return (1, s2)
        return (1 if self.triggers(k, self._delta * s2) else 0, s2)

    def terminal_flag(self, flag: bool) -> float:
        accepted = flag if self.accept_on_flag else not flag
        return self.terminal_accept if accepted else self.terminal_reject

    def terminal(self, state):
        return self.terminal_flag(bool(state[0]))


class GenericAutomaton(object):
    """Arbitrary deterministic total automaton over path outcomes."""

    def __init__(self, initial, advance: Callable, terminal: Callable):
        self.initial = initial
        self._advance = advance
        self._terminal = terminal

    def bind(self, model):
        return self

    def advance(self, state, k, point, value):
        return self._advance(state, k, point, value)

    def terminal(self, state):
        return float(self._terminal(state))

    def negate(self):
        return GenericAutomaton(self.initial, self._advance,
                                lambda s: -self._terminal(s))


class _Negated(object):
    def __init__(self, payoff):
        self._p = payoff
        self.initial = payoff.initial

    def bind(self, model):
        return _Negated(self._p.bind(model) if hasattr(self._p, "bind") else self._p)

    def advance(self, state, k, point, value):
        return self._p.advance(state, k, point, value)

    def terminal(self, state):
        return -self._p.terminal(state)


def negate_payoff(payoff):
    if hasattr(payoff, "negate"):
        return payoff.negate()
    return _Negated(payoff)


# ---------------------------------------------------------------------------
# lattice geometry
# ---------------------------------------------------------------------------


def _sum_range(model: SequenceModel) -> tuple[int, int, int]:
    """(LO, HI, pad): bounds of reachable partial sums and the max step jump."""
    lo = hi = 0
    cur_lo = cur_hi = 0
    pad = 0
    for step in model.steps():
        pts = step.support.points
        cur_lo += pts[0]
        cur_hi += pts[-1]
        lo = min(lo, cur_lo)
        hi = max(hi, cur_hi)
        pad = max(pad, abs(pts[0]), abs(pts[-1]))
    return lo, hi, pad


def _step_arrays(step: StepAmbiguity):
    pts = np.asarray(step.support.points, dtype=np.int64)
    return pts, step.matrix()


def _layer_max(points: np.ndarray, matrix: np.ndarray, merged: np.ndarray,
               pad: int, workers: int) -> np.ndarray:
    """max over measures of the one-step expectation of the next-layer values.

    Accumulation over support points runs left to right, per state; identical
    results for any chunking of the state axis.
    """
    w = len(merged)
    padded = np.zeros(w + 2 * pad)
    padded[pad:pad + w] = merged

    def run(c0: int, c1: int, out_best):
        best = None
        for row in matrix:
            acc = np.zeros(c1 - c0)
            for j, pt in enumerate(points):
                o = pad + int(pt) + c0
                acc = acc + row[j] * padded[o:o + (c1 - c0)]
            best = acc if best is None else np.maximum(best, acc)
        out_best[c0:c1] = best

    out = np.empty(w)
    if workers <= 1 or w < 4096:
        run(0, w, out)
        return out
    bounds = [(i * w) // workers for i in range(workers + 1)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(run, bounds[i], bounds[i + 1], out)
                for i in range(workers) if bounds[i] < bounds[i + 1]]
        for f in futs:
            f.result()
    return out


def _lattice_window_upper(model: SequenceModel, ev: WindowEvent, workers: int,
                          state_cap: int) -> float:
    lo, hi, pad = _sum_range(model)
    w = hi - lo + 1
    estimate = 2 * w * (model.horizon + 1)
    if estimate > state_cap:
        raise StateSpaceError(estimate, state_cap)
    positions = model.delta * np.arange(lo, hi + 1, dtype=float)

    v1 = np.full(w, float(ev.terminal_flag(True)))
    v0 = np.full(w, float(ev.terminal_flag(False)))
    for k in range(model.horizon, 0, -1):
        trig = ev.trigger_mask(k, positions)
        m1 = v1
        m0 = np.where(trig, v1, v0)
        points, matrix = _step_arrays(model.step(k))
        v1 = _layer_max(points, matrix, m1, pad, workers)
        v0 = _layer_max(points, matrix, m0, pad, workers)
    return float(v0[0 - lo])


def _lattice_terminal_upper(model: SequenceModel, payoff: TerminalSumPayoff,
                            workers: int, state_cap: int) -> float:
    lo, hi, pad = _sum_range(model)
    w = hi - lo + 1
    estimate = w * (model.horizon + 1)
    if estimate > state_cap:
        raise StateSpaceError(estimate, state_cap)
    positions = model.delta * np.arange(lo, hi + 1, dtype=float)
    v = payoff.terminal_array(positions)
    for k in range(model.horizon, 0, -1):
        points, matrix = _step_arrays(model.step(k))
        v = _layer_max(points, matrix, v, pad, workers)
    return float(v[0 - lo])


# ---------------------------------------------------------------------------
# generic layered path
# ---------------------------------------------------------------------------


def _generic_upper(model: SequenceModel, payoff, state_cap: int) -> float:
    n = model.horizon
    states = [payoff.initial]
    layers = []  # (states, transitions) per step
    total = 1
    for k in range(1, n + 1):
        step = model.step(k)
        pts = step.support.points
        vals = step.support.values()
        nxt_index: dict = {}
        nxt_states: list = []
        trans = []
        for s in states:
            row = []
            for pt, val in zip(pts, vals):
                c = payoff.advance(s, k, pt, float(val))
                ci = nxt_index.get(c)
                if ci is None:
                    ci = len(nxt_states)
                    nxt_index[c] = ci
                    nxt_states.append(c)
                row.append(ci)
            trans.append(row)
        total += len(nxt_states)
        if total > state_cap:
            raise StateSpaceError(total, state_cap)
        layers.append((states, trans))
        states = nxt_states

    values = [payoff.terminal(s) for s in states]
    for k in range(n, 0, -1):
        prev_states, trans = layers[k - 1]
        measures = model.step(k).measures
        new_values = []
        for si in range(len(prev_states)):
            row = trans[si]
            best = None
            for m in measures:
                acc = 0.0
                for j in range(len(row)):
                    acc = acc + m[j] * values[row[j]]
                if best is None or acc > best:
                    best = acc
            new_values.append(best)
        values = new_values
    return float(values[0])


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def evaluate_upper(model: SequenceModel, payoff, *, workers: int = 1,
                   state_cap: int = DEFAULT_STATE_CAP, method: str = "auto") -> float:
    """Exact upper expectation of the payoff over the model.

    Deterministic for any ``workers`` value; ``method`` forces the lattice or
    generic evaluation path (both produce bit-identical values for payoffs
    the lattice path supports).
    """
    bound = payoff.bind(model) if hasattr(payoff, "bind") else payoff
    if method not in ("auto", "lattice", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method != "generic":
        if isinstance(bound, WindowEvent):
            return _lattice_window_upper(model, bound, workers, state_cap)
        if isinstance(bound, TerminalSumPayoff):
            return _lattice_terminal_upper(model, bound, workers, state_cap)
        if method == "lattice":
            raise ValueError(f"payoff {type(payoff).__name__} has no lattice evaluation path")
    return _generic_upper(model, bound, state_cap)


def evaluate_lower(model: SequenceModel, payoff, **kw) -> float:
    """Conjugate (lower) expectation: -E_upper[-payoff]."""
    return -evaluate_upper(model, negate_payoff(payoff), **kw)


def evaluate_pair(model: SequenceModel, payoff, **kw) -> ExpectationPair:
    return ExpectationPair(lower=evaluate_lower(model, payoff, **kw),
                           upper=evaluate_upper(model, payoff, **kw))


@dataclass(frozen=True)
class BreveResult:
    """Clamped-expectation sweep along a truncation schedule."""

    schedule: tuple[float, ...]
    values: tuple[float, ...]
    value: float
    stabilized: bool
    stabilized_at: int | None


def breve_expectation(step: StepAmbiguity, payoff: Callable[[float], float],
                      c_schedule: Sequence[float]) -> BreveResult:
    """Upper expectation of the clamped payoff along an increasing c schedule.

    On a finite support the sweep is exact as soon as c exceeds the payoff's
    sup-norm over the support, so the limit value is computed directly and
    the first schedule entry attaining it is reported.  A sweep that never
    reaches the exact value comes back with ``stabilized=False``.
    """
    cs = tuple(float(c) for c in c_schedule)
    if any(b <= a for a, b in zip(cs, cs[1:])):
        raise ValueError(f"c schedule must be strictly increasing, got {cs}")
    exact = step.upper_expectation(payoff)
    values = []
    for c in cs:
        spec = TruncationSpec(c)
        values.append(step.upper_expectation(lambda v: clamp(payoff(v), spec)))
    stab_at = None
    for i, v in enumerate(values):
        if v == exact:
            stab_at = i
            break
    return BreveResult(schedule=cs, values=tuple(values),
                       value=values[-1] if values else exact,
                       stabilized=stab_at is not None, stabilized_at=stab_at)


def sum_upper_mean(model: SequenceModel, k: int) -> float:
    """Upper expectation of S_k: sum of per-step upper means (independence)."""
    return sum(model.step(i).upper_expectation(lambda v: v) for i in range(1, k + 1))


def sum_lower_mean(model: SequenceModel, k: int) -> float:
    return sum(model.step(i).lower_expectation(lambda v: v) for i in range(1, k + 1))
