"""Normalizers, moment-series condition checkers, and finite-horizon
iterated-logarithm experiments.

All experiments here are desk-scale: they emit exact capacities over finite
(n, N) windows plus trend diagnostics, and never claim limits.  The window
form {max over n <= m <= N} is exactly what gets probed; monotonicity in N
(event inclusion) and anti-monotonicity in the threshold are exact
self-checks that every experiment run can assert.

Normalizers follow the convention log x = ln max(e, x) at every level, so
loglog x = 1 for any x <= e**e and all normalizers are positive from n = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import iterlog
from .bounds import _rate_table, kolmogorov_bound, RateTable
from .capacity import capacity_pair, lower_capacity, upper_capacity, window_max_event
from .model import SequenceModel, StepAmbiguity


# ---------------------------------------------------------------------------
# normalizers
# ---------------------------------------------------------------------------


class NormalizerSeries(object):
    """s_n, t_n = sqrt(2 loglog s_n^2), a_n = s_n t_n, d_n = sqrt(2 n loglog n)."""

    def __init__(self, s2: Callable[[int], float]):
        self._s2 = s2

    def s2(self, n: int) -> float:
        return float(self._s2(n))

    def s(self, n: int) -> float:
        return math.sqrt(self.s2(n))

    def t(self, n: int) -> float:
        return math.sqrt(2.0 * iterlog.loglog_(self.s2(n)))

    def a(self, n: int) -> float:
        return self.s(n) * self.t(n)

    @staticmethod
    def d(n: int) -> float:
        return iterlog.d_n(n)


def cumulative_upper_second_moments(model: SequenceModel) -> list[float]:
    """[0, s_1^2, ..., s_N^2] from per-step upper second moments."""
    out = [0.0]
    acc = 0.0
    for step in model.steps():
        acc += step.upper_expectation(lambda v: v * v)
        out.append(acc)
    return out


def normalizers(source) -> NormalizerSeries:
    """Normalizer series from a model or an explicit nondecreasing s^2 series.

    A sequence source is read 1-based: source[n-1] = s_n^2.
    """
    if isinstance(source, SequenceModel):
        cum = cumulative_upper_second_moments(source)

        def s2(n: int) -> float:
            if not 1 <= n <= source.horizon:
                raise IndexError(f"n={n} outside 1..{source.horizon}")
            return cum[n]

        return NormalizerSeries(s2)
    if callable(source):
        return NormalizerSeries(source)
    seq = [float(v) for v in source]
    if not seq or seq[0] < 0:
        raise ValueError("s2 series must be nonempty with s2(1) >= 0")
    if any(b < a for a, b in zip(seq, seq[1:])):
        raise ValueError("s2 series must be nondecreasing")

    def s2(n: int) -> float:
        if not 1 <= n <= len(seq):
            raise IndexError(f"n={n} outside 1..{len(seq)}")
        return seq[n - 1]

    return NormalizerSeries(s2)


# ---------------------------------------------------------------------------
# moment series
# ---------------------------------------------------------------------------


class MomentSeries(object):
    """Per-step clipped-overshoot moments and their partial sums.

    gamma(n)      upper expectation of ((|X_n| - alpha s_n/t_n)^+)^p
    gamma_bar(n)  same with |X_n| capped at a_n before the overshoot
    lam(n)        sum over j <= n of the gamma-style term with the threshold
                  and cap taken at n (not j)
    lam_bar(n)    capped variant of lam
    """

    def __init__(self, model: SequenceModel, p: float, alpha: float):
        if p < 2:
            raise ValueError(f"p must be >= 2, got {p}")
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.model = model
        self.p = float(p)
        self.alpha = float(alpha)
        self.norms = normalizers(model)

    def _threshold(self, n: int) -> float:
        return self.alpha * self.norms.s(n) / self.norms.t(n)

    def _term(self, j: int, thr: float, cap: float | None) -> float:
        p = self.p

        def fn(v: float) -> float:
            a = abs(v)
            if cap is not None:
                a = min(a, cap)
            return max(a - thr, 0.0) ** p

        return self.model.step(j).upper_expectation(fn)

    def gamma(self, n: int) -> float:
        return self._term(n, self._threshold(n), None)

    def gamma_bar(self, n: int) -> float:
        return self._term(n, self._threshold(n), self.norms.a(n))

    def _lam(self, n: int, cap: float | None) -> float:
        thr = self._threshold(n)
        if self.model.is_iid:
            return n * self._term(1, thr, cap)
        return sum(self._term(j, thr, cap) for j in range(1, n + 1))

    def lam(self, n: int) -> float:
        return self._lam(n, None)

    def lam_bar(self, n: int) -> float:
        return self._lam(n, self.norms.a(n))


def moment_series(model: SequenceModel, p: float, alpha: float) -> MomentSeries:
    return MomentSeries(model, p, alpha)


# ---------------------------------------------------------------------------
# condition checking
# ---------------------------------------------------------------------------

VERDICTS = ("convergent-trend", "divergent-trend", "inconclusive")


@dataclass(frozen=True)
class ConditionRecord:
    id: str
    kind: str                      # "series" or "ratio"
    checkpoints: tuple[int, ...]
    values: tuple[float, ...]      # partial sums (series) or ratios at checkpoints
    terms: tuple[float, ...]       # series terms at checkpoints (empty for ratios)
    verdict: str
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConditionReport:
    records: tuple[ConditionRecord, ...]
    termwise_checked: int
    termwise_violations: tuple[str, ...]
    growth_check: dict

    def record(self, rec_id: str) -> ConditionRecord:
        for r in self.records:
            if r.id == rec_id:
                return r
        raise KeyError(rec_id)


def _last_decade(checkpoints: Sequence[int]):
    last = checkpoints[-1]
    return [i for i, c in enumerate(checkpoints) if c > last / 10.0]


def series_verdict(checkpoints, partials, terms) -> str:
    """Trend rule (heuristic, documented): over the last decade of
    checkpoints, a series is convergent-trend when partial-sum increments
    stay below 1e-6 and term ratios stay below 0.9; divergent-trend when
    increments grow or terms stay at or above 1e-4; inconclusive otherwise.
    """
    idx = _last_decade(checkpoints)
    if len(idx) < 2:
        return "inconclusive"
    incs = [partials[j] - partials[i] for i, j in zip(idx, idx[1:])]
    decade_terms = [terms[i] for i in idx]
    ratios = [b / a for a, b in zip(decade_terms, decade_terms[1:]) if a > 0]
    if all(inc < 1e-6 for inc in incs) and all(r < 0.9 for r in ratios):
        return "convergent-trend"
    growing = all(b >= a for a, b in zip(incs, incs[1:])) and incs[-1] > 0
    if growing or all(t >= 1e-4 for t in decade_terms):
        return "divergent-trend"
    return "inconclusive"


def ratio_verdict(checkpoints, values) -> str:
    """Trend rule for to-zero ratio conditions: convergent-trend when the
    last value is zero-like (< 1e-9) or has dropped below 0.9x the first
    value and below 0.05; divergent-trend when the last decade is
    nondecreasing and ends at or above 1e-4; inconclusive otherwise."""
    if not values:
        return "inconclusive"
    first, last = values[0], values[-1]
    if last < 1e-9:
        return "convergent-trend"
    if last < 0.9 * first and last < 0.05:
        return "convergent-trend"
    idx = _last_decade(checkpoints)
    decade = [values[i] for i in idx]
    if len(decade) >= 2 and all(b >= a for a, b in zip(decade, decade[1:])) and last >= 1e-4:
        return "divergent-trend"
    return "inconclusive"


def check_conditions(model: SequenceModel, checkpoints: Sequence[int], *,
                     p: float = 2.0, alpha: float = 1.0, d: int = 1,
                     eps: float = 1.0, delta: float = 0.5,
                     power_p: float = 3.0) -> ConditionReport:
    """Evaluate the moment-series conditions behind the iterated-logarithm
    theorems at the given checkpoints and report trend verdicts.

    Emits one record per condition family (tail sums, barred and unbarred
    overshoot series, variance divergence, mean ratio, boundedness ratio,
    power-moment series), checks the termwise implication chain

        (eps/2)^p V(|X_n| >= eps a_n) <= gamma_bar_n / a_n^p
                                      <= gamma_n / a_n^p

    at every n where eps a_n / 2 > alpha s_n / t_n and eps <= 1, and probes
    the bounded-growth derivation (growing s_n^2 with bounded one-step
    ratios forces the variance series to diverge).
    """
    cps = [int(c) for c in checkpoints]
    if not cps or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1:
        raise ValueError("checkpoints must be a strictly increasing list of n >= 1")
    n_max = cps[-1]
    if n_max > model.horizon:
        raise ValueError(f"checkpoint {n_max} exceeds horizon {model.horizon}")
    ms = MomentSeries(model, p, alpha)
    norms = ms.norms
    cpset = set(cps)

    tail_partial, tail_terms = [], []
    bar_partial, bar_terms = [], []
    unb_partial, unb_terms = [], []
    var_partial, var_terms = [], []
    wit_partial, wit_terms = [], []
    mean_ratios, alpha_ratios = [], []
    s2_at = []

    run_tail = run_bar = run_unb = run_var = run_wit = 0.0
    run_mean_u = run_mean_l = 0.0
    termwise_checked = 0
    termwise_viol = []
    max_step_ratio = 0.0
    prev_s2 = None

    for n in range(1, n_max + 1):
        step = model.step(n)
        a_n = norms.a(n)
        s_n = norms.s(n)
        s2_n = norms.s2(n)
        t_n = norms.t(n)
        if prev_s2 not in (None, 0.0):
            max_step_ratio = max(max_step_ratio, s2_n / prev_s2)
        prev_s2 = s2_n

        tail_n = step.upper_expectation(lambda v: 1.0 if abs(v) >= eps * a_n else 0.0)
        run_tail += tail_n
        g_bar = ms.gamma_bar(n)
        g_unb = ms.gamma(n)
        term_bar = (g_bar / a_n ** p) * (ms.lam_bar(n) / a_n ** p) ** d
        term_unb = (g_unb / a_n ** p) * (ms.lam(n) / a_n ** p) ** d
        run_bar += term_bar
        run_unb += term_unb
        e2 = step.upper_expectation(lambda v: v * v)
        term_var = e2 / s2_n * iterlog.log_(s2_n) ** (delta - 1.0)
        run_var += term_var
        term_wit = step.upper_expectation(lambda v: abs(v) ** power_p) / a_n ** power_p
        run_wit += term_wit
        run_mean_u += abs(step.upper_expectation(lambda v: v))
        run_mean_l += abs(step.lower_expectation(lambda v: v))

        if eps <= 1.0 and eps * a_n / 2.0 > alpha * s_n / t_n:
            termwise_checked += 1
            lo = (eps / 2.0) ** p * tail_n
            mid = g_bar / a_n ** p
            hi = g_unb / a_n ** p
            if lo > mid + 1e-12 or mid > hi + 1e-12:
                termwise_viol.append(
                    f"n={n}: ({lo!r}, {mid!r}, {hi!r}) breaks the termwise chain")

        if n in cpset:
            tail_partial.append(run_tail)
            tail_terms.append(tail_n)
            bar_partial.append(run_bar)
            bar_terms.append(term_bar)
            unb_partial.append(run_unb)
            unb_terms.append(term_unb)
            var_partial.append(run_var)
            var_terms.append(term_var)
            wit_partial.append(run_wit)
            wit_terms.append(term_wit)
            mean_ratios.append((run_mean_u + run_mean_l) / a_n)
            alpha_ratios.append(step.support.radius * t_n / s_n)
            s2_at.append(s2_n)

    cps_t = tuple(cps)

    def series_rec(rec_id, partial, terms, details=None):
        return ConditionRecord(id=rec_id, kind="series", checkpoints=cps_t,
                               values=tuple(partial), terms=tuple(terms),
                               verdict=series_verdict(cps, partial, terms),
                               details=details or {})

    def ratio_rec(rec_id, values, details=None):
        return ConditionRecord(id=rec_id, kind="ratio", checkpoints=cps_t,
                               values=tuple(values), terms=(),
                               verdict=ratio_verdict(cps, values),
                               details=details or {})

    records = (
        series_rec("tail-sum", tail_partial, tail_terms, {"eps": eps}),
        series_rec("capped-overshoot", bar_partial, bar_terms,
                   {"p": p, "alpha": alpha, "d": d}),
        series_rec("overshoot", unb_partial, unb_terms,
                   {"p": p, "alpha": alpha, "d": d}),
        series_rec("variance-divergence", var_partial, var_terms, {"delta": delta}),
        series_rec("power-moment", wit_partial, wit_terms, {"p": power_p}),
        ratio_rec("mean-ratio", mean_ratios),
        ratio_rec("boundedness-ratio", alpha_ratios, {"s2": tuple(s2_at)}),
    )
    growth = {
        "max_onestep_s2_ratio": float(max_step_ratio),
        "s2_first": float(s2_at[0]) if s2_at else 0.0,
        "s2_last": float(s2_at[-1]) if s2_at else 0.0,
        "variance_series_first": float(var_partial[0]) if var_partial else 0.0,
        "variance_series_last": float(var_partial[-1]) if var_partial else 0.0,
        "variance_series_growing":
            bool(var_partial and var_partial[-1] > var_partial[0]),
    }
    return ConditionReport(records=records, termwise_checked=termwise_checked,
                           termwise_violations=tuple(termwise_viol),
                           growth_check=growth)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _center_series(model: SequenceModel, upto: int, center: str) -> list[float]:
    if center == "none":
        return [0.0] * (upto + 1)
    if center in ("upper-mean", "upper"):
        one = lambda s: s.upper_expectation(lambda v: v)
    elif center in ("lower-mean", "lower"):
        one = lambda s: s.lower_expectation(lambda v: v)
    else:
        raise ValueError(f"unknown centering {center!r}")
    out = [0.0]
    acc = 0.0
    for k in range(1, upto + 1):
        acc += one(model.step(k))
        out.append(acc)
    return out


@dataclass(frozen=True)
class BlockDiagnostic:
    lo: int
    hi: int
    x: float
    y: float
    b2y: float
    max_tail_bound: float
    bound: float


@dataclass(frozen=True)
class LILUpperResult:
    n: int
    N: int
    eps: float
    center: str
    capacity: float
    bound_crosscheck: float
    blocks: tuple[BlockDiagnostic, ...]


def lil_upper_experiment(model: SequenceModel, n: int, N: int, eps: float,
                         center: str = "upper-mean", **engine_kw) -> LILUpperResult:
    """Exact upper capacity of {sup_{n<=m<=N} (S_m - c_m)/a_m > 1+eps}.

    ``center`` picks c_m as the running upper mean, running lower mean, or 0.
    The crosscheck is a geometric-block assembly of the maximal-sum
    exponential bound: the window event is covered by per-block maximal
    events, each bounded by a per-step tail sum plus the exponential term.
    It is a true upper bound for any block/y choice, so capacity <= crosscheck
    must hold in every run (diagnostics, not a tight estimate).
    """
    if not 1 <= n <= N <= model.horizon:
        raise ValueError(f"window [{n}, {N}] invalid for horizon {model.horizon}")
    norms = normalizers(model)
    cents = _center_series(model, N, center)
    a = [0.0] + [norms.a(m) for m in range(1, N + 1)]

    ev = window_max_event(n, N, lambda m: (1.0 + eps) * a[m] + cents[m],
                          side="gt", on="S")
    cap = upper_capacity(model, ev, **engine_kw)

    upper_means = (cents if center in ("upper-mean", "upper")
                   else _center_series(model, N, "upper-mean"))
    blocks = []
    total = 0.0
    lo = n
    while lo <= N:
        hi = min(N, 2 * lo)
        x_j = min((1.0 + eps) * a[m] + cents[m] - upper_means[m] for m in range(lo, hi + 1))
        y_j = norms.s(hi) / norms.t(hi)
        b2 = sum(model.step(i).upper_expectation(lambda v: min(v, y_j) ** 2)
                 for i in range(1, hi + 1))
        mt = min(1.0, sum(model.step(i).upper_expectation(
            lambda v: 1.0 if v > y_j else 0.0) for i in range(1, hi + 1)))
        if x_j <= 0:
            bound = 1.0
        else:
            bound = min(1.0, mt + kolmogorov_bound(x_j, y_j, b2))
        blocks.append(BlockDiagnostic(lo=lo, hi=hi, x=x_j, y=y_j, b2y=b2,
                                      max_tail_bound=mt, bound=bound))
        total += bound
        lo = hi + 1
    return LILUpperResult(n=n, N=N, eps=eps, center=center, capacity=cap,
                          bound_crosscheck=min(1.0, total), blocks=tuple(blocks))


def lil_lower_experiment(model: SequenceModel, n: int, N: int, eps: float,
                         **engine_kw) -> float:
    """Exact upper capacity of {max_{n<=m<=N} S_m / a_m >= 1 - eps}.

    Nondecreasing in N by event inclusion (exact, a self-check for grids).
    """
    if not 1 <= n <= N <= model.horizon:
        raise ValueError(f"window [{n}, {N}] invalid for horizon {model.horizon}")
    norms = normalizers(model)
    a = [0.0] + [norms.a(m) for m in range(1, N + 1)]
    ev = window_max_event(n, N, lambda m: (1.0 - eps) * a[m], side="ge", on="S")
    return upper_capacity(model, ev, **engine_kw)


@dataclass(frozen=True)
class ClusterRow:
    sigma: float
    upper: float
    lower: float


def _require_centered(step: StepAmbiguity):
    lo, hi = step.expectation_interval(lambda v: v)
    if abs(lo) > 1e-12 or abs(hi) > 1e-12:
        raise ValueError("experiment needs a centered step: both mean bounds zero")


def cluster_probe(step: StepAmbiguity, N: int, sigma_grid: Sequence[float],
                  **engine_kw) -> list[ClusterRow]:
    """Capacity pair of {max_{m<=N} S_m / d_m >= sigma} over a sigma grid.

    Desk-scale shadow of the cluster-set statements: no asymptotic verdicts,
    just exact window capacities, anti-monotone in sigma.
    """
    _require_centered(step)
    model = SequenceModel.iid(step, N)
    rows = []
    for sigma in sigma_grid:
        s = float(sigma)
        ev = window_max_event(1, N, lambda m: s * iterlog.d_n(m), side="ge", on="S")
        pair = capacity_pair(model, ev, **engine_kw)
        rows.append(ClusterRow(sigma=s, upper=pair.upper, lower=pair.lower))
    return rows


class _MeanEvent(object):
    """{ (1/m) sum phi(X_i) <side> threshold } via a float-accumulator state."""

    def __init__(self, fn, m, threshold, side, accept=True):
        self.fn = fn
        self.m = m
        self.threshold = threshold
        self.side = side
        self.accept = accept
        self.initial = 0.0

    def bind(self, model):
        return self

    def advance(self, state, k, point, value):
        return state + self.fn(value)

    def terminal(self, state):
        mean = state / self.m
        hit = mean >= self.threshold if self.side == "ge" else mean <= self.threshold
        ok = hit if self.accept else not hit
        return 1.0 if ok else 0.0

    def complement(self):
        return _MeanEvent(self.fn, self.m, self.threshold, self.side, not self.accept)


@dataclass(frozen=True)
class ContinuityProbeResult:
    phi_lower: float
    phi_upper: float
    high_event_upper: float     # V(mean >= upper mean - eps)
    low_event_upper: float      # V(mean <= lower mean + eps)
    high_event_lower: float     # v(mean >= upper mean - eps)
    low_event_lower: float      # v(mean <= lower mean + eps)


def continuity_probe(step: StepAmbiguity, payoff: Callable[[float], float],
                     m: int, eps: float, **engine_kw) -> ContinuityProbeResult:
    """Both mean events at full upper capacity while both lower capacities
    vanish: the finite-m mechanism that forbids capacity continuity whenever
    the payoff's upper and lower means differ.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    lo, hi = step.expectation_interval(payoff)
    model = SequenceModel.iid(step, m)
    high = _MeanEvent(payoff, m, hi - eps, "ge")
    low = _MeanEvent(payoff, m, lo + eps, "le")
    return ContinuityProbeResult(
        phi_lower=lo, phi_upper=hi,
        high_event_upper=upper_capacity(model, high, **engine_kw),
        low_event_upper=upper_capacity(model, low, **engine_kw),
        high_event_lower=lower_capacity(model, high, **engine_kw),
        low_event_lower=lower_capacity(model, low, **engine_kw),
    )


def conjecture_probe(model_family: Callable[[int], SequenceModel], z: float,
                     gamma: float, n_list: Sequence[int], *,
                     x_fn: Callable[[int], float] | None = None,
                     alpha: float | None = None, slack: float = 0.1,
                     **engine_kw) -> RateTable:
    """Lower-capacity analogue of the converse-rate table, report only.

    Rows show x_n^{-2} ln v(S_n >= z s_lo_n x_n) against -z^2(1+gamma)/2,
    with the scale built from lower second moments.  The numbers neither
    confirm nor refute the conjectured rate; no verdicts are attached.
    """
    return _rate_table(model_family, z, gamma, n_list, x_fn, alpha, slack,
                       side="lower", **engine_kw)
