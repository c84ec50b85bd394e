"""Upper/lower capacities of path events, Choquet integrals, and MC checks.

On a finite lattice the indicator of any automaton event is itself an
admissible test function, so the upper capacity is exactly the upper
expectation of the indicator and one capacity pair serves for every
capacity construction that is sandwiched between E[f] and E[g] for
f <= 1_A <= g.  Lower capacities are computed from the complement
automaton (acceptance flipped, transitions shared), never from a
re-derived event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import iterlog
from .engine import DEFAULT_STATE_CAP, WindowEvent, evaluate_upper
from .model import SequenceModel
from .rng import substream

_SIDE_ALIASES = {
    "ge": "ge", ">=": "ge", "≥": "ge",
    "gt": "gt", ">": "gt",
    "le": "le", "<=": "le", "≤": "le",
    "lt": "lt", "<": "lt",
}
_STAT_ALIASES = {"S": "S", "S_m": "S", "-S": "-S", "-S_m": "-S",
                 "absS": "absS", "|S|": "absS", "|S_m|": "absS"}

_SIDE_FNS = {
    "ge": lambda a, b: a >= b,
    "gt": lambda a, b: a > b,
    "le": lambda a, b: a <= b,
    "lt": lambda a, b: a < b,
}


@dataclass(frozen=True)
class CapacityPair:
    """Lower and upper capacity of one event.

    The slack absorbs float drift only: measure vectors may sum to 1 within
    1e-12 per step, which compounds multiplicatively over long horizons
    (about 1e-8 at ten thousand steps).
    """

    lower: float
    upper: float

    def __post_init__(self):
        if not (-1e-8 <= self.lower <= self.upper + 1e-12 <= 1.0 + 1e-8):
            raise ValueError(f"capacity pair out of order: ({self.lower!r}, {self.upper!r})")


class OutcomeFlagEvent(object):
    """Event {exists k: trigger(k, x_k)} on single outcomes; state = latched flag."""

    def __init__(self, trigger: Callable[[int, float], bool], accept_on_flag: bool = True,
                 terminal_accept: float = 1.0, terminal_reject: float = 0.0):
        self.trigger = trigger
        self.accept_on_flag = accept_on_flag
        self.terminal_accept = terminal_accept
        self.terminal_reject = terminal_reject
        self.initial = 0

    def bind(self, model):
        return self

    def advance(self, state, k, point, value):
        if state:
            return 1
        return 1 if self.trigger(k, value) else 0

    def flag_of(self, state) -> int:
        return state

    def terminal(self, state):
        accepted = bool(state) if self.accept_on_flag else not state
        return self.terminal_accept if accepted else self.terminal_reject

    def complement(self) -> "OutcomeFlagEvent":
        return OutcomeFlagEvent(self.trigger, not self.accept_on_flag,
                                self.terminal_accept, self.terminal_reject)

    def negate(self) -> "OutcomeFlagEvent":
        return OutcomeFlagEvent(self.trigger, self.accept_on_flag,
                                -self.terminal_accept, -self.terminal_reject)


def window_max_event(n: int, N: int, threshold_fn, side: str = "ge",
                     on: str = "S") -> WindowEvent:
    """Automaton for {exists m in [n, N]: stat(S_m) <side> threshold(m)}.

    ``threshold_fn`` may be a constant or a callable of the step index m;
    state is (lattice partial sum, triggered flag).
    """
    if side not in _SIDE_ALIASES:
        raise ValueError(f"unknown side {side!r}")
    if on not in _STAT_ALIASES:
        raise ValueError(f"unknown stat {on!r}")
    if callable(threshold_fn):
        thr = threshold_fn
    else:
        const = float(threshold_fn)
        thr = lambda m: const
    return WindowEvent(lo=n, hi=N, threshold=thr, side=_SIDE_ALIASES[side],
                       stat=_STAT_ALIASES[on])


def complement_event(event):
    return event.complement()


def upper_capacity(model: SequenceModel, event, *, workers: int = 1,
                   state_cap: int = DEFAULT_STATE_CAP, method: str = "auto") -> float:
    """Exact upper capacity: the upper expectation of the event indicator."""
    return evaluate_upper(model, event, workers=workers, state_cap=state_cap, method=method)


def lower_capacity(model: SequenceModel, event, *, workers: int = 1,
                   state_cap: int = DEFAULT_STATE_CAP, method: str = "auto") -> float:
    """Exact lower capacity: 1 - upper capacity of the complement automaton."""
    return 1.0 - upper_capacity(model, event.complement(), workers=workers,
                                state_cap=state_cap, method=method)


def capacity_pair(model: SequenceModel, event, **kw) -> CapacityPair:
    return CapacityPair(lower=lower_capacity(model, event, **kw),
                        upper=upper_capacity(model, event, **kw))


# ---------------------------------------------------------------------------
# Choquet integral
# ---------------------------------------------------------------------------


def _check_nonincreasing(ts, vs):
    for (t0, v0), (t1, v1) in zip(zip(ts, vs), list(zip(ts, vs))[1:]):
        if v1 > v0 + 1e-9:
            raise ValueError(
                f"tail capacity is not nonincreasing: V({t0})={v0} < V({t1})={v1}")


def choquet_integral(tail_capacity: Callable[[float], float],
                     lower_bound: float, upper_bound: float,
                     quadrature_step: float | None = None,
                     atoms: Sequence[float] | None = None) -> float:
    """Two-piece tail integral of V(X >= t).

    The positive piece integrates V(X >= t) over t > 0 and the negative piece
    integrates V(X >= t) - 1 over t <= 0.  With ``atoms`` supplied the
    variable is lattice-valued and the integral is the exact finite sum over
    inter-atom intervals, the tail being constant on each (a_i, a_{i+1}];
    otherwise a trapezoid rule with ``quadrature_step`` is used on
    [lower_bound, upper_bound].
    """
    if atoms is not None:
        if len(atoms) == 0:
            raise ValueError("atom list must be nonempty")
        bounds = sorted(set(float(a) for a in atoms) | {0.0})
        ts = [b for b in bounds if b > 0] or []
        vs_pos = [float(tail_capacity(t)) for t in ts]
        neg = [b for b in bounds if b < 0]
        ts_neg = neg[1:] + [0.0] if neg else []
        vs_neg = [float(tail_capacity(t)) for t in ts_neg]
        _check_nonincreasing((neg[1:] + [0.0] if neg else []) + ts, vs_neg + vs_pos)
        total = 0.0
        prev = 0.0
        for t, v in zip(ts, vs_pos):
            total += (t - prev) * v
            prev = t
        if neg:
            prev = neg[0]
            for t, v in zip(ts_neg, vs_neg):
                total += (t - prev) * (v - 1.0)
                prev = t
        return total

    if quadrature_step is None or quadrature_step <= 0:
        raise ValueError("quadrature_step must be positive when no atoms are given")
    if upper_bound < lower_bound:
        raise ValueError("upper_bound below lower_bound")

    def trapz(a: float, b: float, shift: float) -> float:
        if b <= a:
            return 0.0
        n = max(1, int(math.ceil((b - a) / quadrature_step)))
        ts = np.linspace(a, b, n + 1)
        vs = np.array([float(tail_capacity(t)) for t in ts])
        _check_nonincreasing(ts, vs)
        vs = vs + shift
        return float(np.sum((vs[1:] + vs[:-1]) * 0.5 * np.diff(ts)))

    return trapz(max(lower_bound, 0.0), upper_bound, 0.0) + \
        trapz(lower_bound, min(upper_bound, 0.0), -1.0)


# ---------------------------------------------------------------------------
# Borel-Cantelli product identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BCProductReport:
    """Exact intersection/product/union numbers for per-coordinate events."""

    intersection_lower: float     # lower capacity of the intersection of complements
    product_bound: float          # prod over i of (1 - upper(A_i))
    union_upper: float            # upper capacity of the union
    per_event_upper: tuple[float, ...]


def bc_product_check(model: SequenceModel, thresholds: Sequence[float],
                     side: str = "ge", **kw) -> BCProductReport:
    """Factorization check for events A_i = {x_i <side> c_i}, one per coordinate.

    On finite models with indicator test functions the lower capacity of the
    intersection of complements equals the product of per-event complements
    exactly; both are returned together with the union's upper capacity.
    """
    n = len(thresholds)
    if n < 1 or n > model.horizon:
        raise ValueError(f"need 1 <= len(thresholds) <= horizon, got {n}")
    if side not in _SIDE_ALIASES:
        raise ValueError(f"unknown side {side!r}")
    cmp_fn = _SIDE_FNS[_SIDE_ALIASES[side]]
    sub = model if model.horizon == n else _prefix_model(model, n)

    per = []
    for i in range(1, n + 1):
        c = float(thresholds[i - 1])
        per.append(sub.step(i).upper_expectation(lambda v: 1.0 if cmp_fn(v, c) else 0.0))
    product = 1.0
    for v in per:
        product *= (1.0 - v)

    trig = lambda k, x: cmp_fn(x, float(thresholds[k - 1]))
    union = upper_capacity(sub, OutcomeFlagEvent(trig), **kw)
    return BCProductReport(intersection_lower=1.0 - union, product_bound=product,
                           union_upper=union, per_event_upper=tuple(per))


def _prefix_model(model: SequenceModel, n: int) -> SequenceModel:
    if model.is_iid:
        return SequenceModel.iid(model.step(1), n)
    return SequenceModel(n, steps=[model.step(k) for k in range(1, n + 1)])


# ---------------------------------------------------------------------------
# Monte Carlo lower bound via a fixed strategy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MCResult:
    estimate: float
    std_error: float
    replications: int
    accepted: int


def mc_capacity_lower_bound(model: SequenceModel, event, strategy,
                            replications: int, seed: int, *,
                            workers: int = 1) -> MCResult:
    """Unbiased MC estimate of P_strategy(event) for one admissible strategy.

    Any strategy that picks a member of the step family (even adaptively)
    induces a probability measure dominated by the upper capacity, so the
    estimate is a statistical lower bound for it.  Strategies:

    * ``("constant", i)`` — measure index i at every step;
    * ``"greedy-one-step"`` — maximize the immediate trigger probability of
      the event flag (lowest index wins ties); requires a flag event;
    * ``("schedule", [i_1, ..., i_N])`` — fixed per-step indices.

    Replication r draws from the derived stream substream(seed, r), so the
    result is bit-identical for any worker count.
    """
    if replications < 100:
        raise ValueError(f"replications must be >= 100, got {replications}")
    mode, const_idx, sched = _parse_strategy(strategy, model)
    ev = event.bind(model) if hasattr(event, "bind") else event
    if mode == "greedy" and not hasattr(ev, "flag_of") and not isinstance(ev, WindowEvent):
        raise ValueError("greedy-one-step strategy needs a flag-bearing event")

    steps = [model.step(k) for k in range(1, model.horizon + 1)]
    step_data = [(s.support.points, s.support.values(), s.measures) for s in steps]

    def flag_of(state):
        if isinstance(ev, WindowEvent):
            return state[0]
        return ev.flag_of(state)

    def run(r0: int, r1: int) -> int:
        acc = 0
        for r in range(r0, r1):
            stream = substream(seed, r)
            state = ev.initial
            for k in range(1, model.horizon + 1):
                points, values, measures = step_data[k - 1]
                if mode == "constant":
                    mi = const_idx
                elif mode == "schedule":
                    mi = sched[k - 1]
                else:
                    mi = _greedy_index(ev, state, k, points, values, measures, flag_of)
                m = measures[mi]
                u = stream.uniform()
                cum = 0.0
                j = len(points) - 1
                for jj, p in enumerate(m):
                    cum += p
                    if u < cum:
                        j = jj
                        break
                state = ev.advance(state, k, points[j], float(values[j]))
            if ev.terminal(state) >= 0.5:
                acc += 1
        return acc

    accepted = 0
    if workers <= 1:
        accepted = run(0, replications)
    else:
        bounds = [(i * replications) // workers for i in range(workers + 1)]
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(run, bounds[i], bounds[i + 1]) for i in range(workers)]
            accepted = sum(f.result() for f in futs)

    p = accepted / replications
    se = math.sqrt(max(p * (1.0 - p), 0.0) / replications)
    return MCResult(estimate=p, std_error=se, replications=replications, accepted=accepted)


def _parse_strategy(strategy, model: SequenceModel):
    if strategy == "greedy-one-step" or strategy == "greedy":
        return "greedy", None, None
    if isinstance(strategy, (tuple, list)) and len(strategy) == 2:
        kind, arg = strategy
        if kind == "constant":
            idx = int(arg)
            if not all(idx < s.n_measures for s in model.steps()):
                raise ValueError(f"constant strategy index {idx} exceeds some step's family")
            return "constant", idx, None
        if kind in ("schedule", "user-schedule"):
            sched = [int(i) for i in arg]
            if len(sched) != model.horizon:
                raise ValueError(f"schedule length {len(sched)} != horizon {model.horizon}")
            for k, idx in enumerate(sched, start=1):
                if idx >= model.step(k).n_measures:
                    raise ValueError(f"schedule index {idx} invalid at step {k}")
            return "schedule", None, sched
    raise ValueError(f"unknown strategy {strategy!r}")


def _greedy_index(ev, state, k, points, values, measures, flag_of) -> int:
    if flag_of(state):
        return 0
    best_i = 0
    best = None
    for mi, m in enumerate(measures):
        acc = 0.0
        for j in range(len(points)):
            nxt = ev.advance(state, k, points[j], float(values[j]))
            acc += m[j] * (1.0 if flag_of(nxt) else 0.0)
        if best is None or acc > best:
            best = acc
            best_i = mi
    return best_i


# ---------------------------------------------------------------------------
# event description grammar (config surface)
# ---------------------------------------------------------------------------


def event_from_config(cfg: dict, model: SequenceModel | None = None) -> WindowEvent:
    """Build a window event from its config-file description.

    Schema: ``{"window": {"n": int, "N": int}, "stat": "S"|"-S"|"absS",
    "side": ">="|">"|"<="|"<", "threshold": T}`` where T is one of
    ``{"kind": "const", "c": real}``, ``{"kind": "d_n", "scale": real}``
    (scale * sqrt(2 m loglog m)) or ``{"kind": "a_n", "scale": real}``
    (scale * s_m t_m, needing the model for the running second moments).
    """
    try:
        win = cfg["window"]
        n, N = int(win["n"]), int(win["N"])
        thr = cfg["threshold"]
    except (KeyError, TypeError) as e:
        raise ValueError(f"bad event description: missing {e}") from None
    stat = cfg.get("stat", "S")
    side = cfg.get("side", ">=")
    kind = thr.get("kind") if isinstance(thr, dict) else None
    if kind == "const":
        c = float(thr["c"])
        fn = lambda m: c
    elif kind == "d_n":
        scale = float(thr.get("scale", 1.0))
        fn = lambda m: scale * iterlog.d_n(m)
    elif kind == "a_n":
        if model is None:
            raise ValueError("a_n threshold needs a model for its normalizers")
        scale = float(thr.get("scale", 1.0))
        s2 = _cumulative_upper_second_moments(model)
        fn = lambda m: scale * math.sqrt(s2[m]) * math.sqrt(2.0 * iterlog.loglog_(s2[m]))
    else:
        raise ValueError(f"unknown threshold kind {kind!r}")
    return window_max_event(n, N, fn, side=side, on=stat)


def _cumulative_upper_second_moments(model: SequenceModel) -> list[float]:
    out = [0.0]
    acc = 0.0
    for step in model.steps():
        acc += step.upper_expectation(lambda v: v * v)
        out.append(acc)
    return out


def centered_max_sum_event(model: SequenceModel, x: float, n: int | None = None,
                           center: str = "upper") -> WindowEvent:
    """Event {max_{k<=n} (S_k - center_k) >= x} with running-mean centering."""
    n = model.horizon if n is None else n
    if center == "upper":
        one = lambda s: s.upper_expectation(lambda v: v)
    elif center == "lower":
        one = lambda s: s.lower_expectation(lambda v: v)
    elif center == "none":
        one = None
    else:
        raise ValueError(f"unknown centering {center!r}")
    cents = [0.0]
    acc = 0.0
    for k in range(1, n + 1):
        if one is not None:
            acc += one(model.step(k))
        cents.append(acc)
    return window_max_event(1, n, lambda m: x + cents[m], side="ge", on="S")
