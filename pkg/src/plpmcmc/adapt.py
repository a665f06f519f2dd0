"""Q-value bookkeeping, reward propagation and adapted proposal distributions.

Each (switch, instance, outcome) triple carries a Q-value in [0,1]: the
learned estimate of the probability that choosing that outcome leads to an
evidence-consistent sample.  After every evidence evaluation the trace is
walked backwards: the last triple gets the raw 0/1 reward, and each earlier
triple receives the probability-weighted expectation of the just-updated
successor's Q-values.  Unseen triples count as Q = 1 ("optimistic" prior).

Averaging mode keeps Q = (sum of rewards) / (number of rewards), which gives
the diminishing-adaptation increment bound |dQ| <= 1/(c+1).  LastReward mode
stores the most recent reward directly; it is only sound for program/query
pairs with a Markovian evaluation structure, where it additionally enables
independent sampling.
"""

from __future__ import annotations

import random
from typing import NamedTuple

from .lang import Program
from .evaluator import EvalError, sample_eval, DEFAULT_STEP_LIMIT

# Floor applied to Q-values inside adapted distributions only (stored Q-values
# are not clamped).  A proposal probability of exactly 0 for a realized
# outcome would break acceptance ratios and the support condition for
# ergodicity.
Q_FLOOR = 1e-6

AVERAGING = "avg"
LAST_REWARD = "last"


class QStore:
    """Per-(switch, instance, outcome) Q-value, cumulative reward and count."""

    __slots__ = ("mode", "q", "total", "count", "version")

    def __init__(self, mode=AVERAGING):
        if mode not in (AVERAGING, LAST_REWARD):
            raise ValueError(f"unknown QStore mode {mode!r}")
        self.mode = mode
        self.q = {}
        self.total = {}
        self.count = {}
        self.version = 0

    def q_value(self, key) -> float:
        return self.q.get(key, 1.0)

    def update(self, key, reward, on_update=None):
        c_before = self.count.get(key, 0)
        q_before = self.q.get(key, 1.0)
        t_new = self.total.get(key, 0.0) + reward
        c_new = c_before + 1
        self.total[key] = t_new
        self.count[key] = c_new
        q_new = t_new / c_new if self.mode == AVERAGING else reward
        self.q[key] = q_new
        self.version += 1
        if on_update is not None:
            on_update(key, reward, c_before, q_before, q_new)

    def items(self):
        """(key, Q, count, total) rows for reporting, insertion-ordered."""
        for key, qv in self.q.items():
            yield key, qv, self.count[key], self.total[key]


def adapt(trace, reward, store: QStore, prog: Program, on_update=None):
    """Propagate a 0/1 evidence reward backwards through a trace.

    The triple at position j is updated with the incoming reward, then the
    reward handed to position j-1 is sum_v P(s_j,i_j,v) * Q(s_j,i_j,v) over
    the outcomes of the switch instance just updated (its unseen outcomes
    contributing Q = 1).  Duplicate keys are updated once per occurrence,
    later positions first.  Empty traces are a no-op.
    """
    r = reward
    qd = store.q
    for s, i, v in reversed(trace):
        store.update((s, i, v), r, on_update)
        info = prog.switch_info(s)
        acc = 0.0
        outs = info.outcomes
        probs = info.probs
        for k in range(len(outs)):
            acc += probs[k] * qd.get((s, i, outs[k]), 1.0)
        r = acc
    return store


def adapted_probs(store: QStore, s, i, info, floor=Q_FLOOR):
    """Probability vector proportional to P(v) * max(Q(s,i,v), floor).

    Returns the declared vector object itself when all (floored) Q-values are
    equal — the common factor cancels, and reusing the original tuple keeps
    an unadapted run bit-identical to the non-adaptive code path.
    """
    qd = store.q
    outs = info.outcomes
    qs = []
    uniform = True
    first = None
    for v in outs:
        qv = qd.get((s, i, v), 1.0)
        if qv < floor:
            qv = floor
        if first is None:
            first = qv
        elif qv != first:
            uniform = False
        qs.append(qv)
    if uniform:
        return info.probs
    probs = info.probs
    weights = [probs[k] * qs[k] for k in range(len(outs))]
    total = sum(weights)
    return tuple(w / total for w in weights)


def adapted_dist(store: QStore, s, i, prog: Program, floor=Q_FLOOR):
    """Public helper: adapted distribution of (s, i) as a probability list."""
    info = prog.switch_info(s)
    return list(adapted_probs(store, s, i, info, floor))


class AdaptedSource:
    """Distribution source backed by a QStore, cached per store version.

    Instances are callables with the `(s, i, info) -> probs` signature the
    evaluator expects for its `dist` argument.
    """

    __slots__ = ("store", "floor", "_cache", "_cache_version")

    def __init__(self, store: QStore, floor=Q_FLOOR):
        self.store = store
        self.floor = floor
        self._cache = {}
        self._cache_version = -1

    def __call__(self, s, i, info):
        ver = self.store.version
        if ver != self._cache_version:
            self._cache.clear()
            self._cache_version = ver
        key = (s, i)
        probs = self._cache.get(key)
        if probs is None:
            probs = adapted_probs(self.store, s, i, info, self.floor)
            self._cache[key] = probs
        return probs


def increment_within_bound(q_before, q_after, count_before, slack=1e-12) -> bool:
    """Diminishing-adaptation check: |dQ| <= 1/(c+1) for an averaging update.

    The identity dQ = (reward - Q) / (c+1) with rewards and Q in [0,1] gives
    the bound exactly in real arithmetic; `slack` absorbs float rounding.
    """
    return abs(q_after - q_before) <= 1.0 / (count_before + 1) + slack


class IndependentResult(NamedTuple):
    estimate: float
    samples: int
    evidence_successes: int
    joint_successes: int
    monotonicity_violations: list
    qstore: QStore


def independent_sampler(
    prog: Program,
    query,
    evidence,
    n: int,
    seed=0,
    step_limit=DEFAULT_STEP_LIMIT,
    monitor=True,
) -> IndependentResult:
    """LastReward adaptive *independent* sampling for Markovian program/query
    pairs.

    Each of the `n` samples starts from the empty assignment and draws through
    the current LastReward-adapted distribution; after each sample the
    evidence trace is adapted with reward 1/0.  The estimate is
    (#samples where evidence and query both hold) / (#samples where evidence
    holds).  The caller is responsible for only using this on Markovian
    structures; the reward-monotonicity diagnostic (per-key rewards should be
    non-increasing) reports violations, which are expected on non-Markovian
    programs.
    """
    if n <= 0:
        raise ValueError("sample count must be positive")
    store = QStore(mode=LAST_REWARD)
    source = AdaptedSource(store)
    rng = random.Random(f"{seed}/indep")
    n_e = 0
    n_qe = 0
    violations = []
    last_reward = {}

    def on_update(key, reward, c_before, q_before, q_after):
        prev = last_reward.get(key)
        if prev is not None and reward > prev + 1e-9:
            violations.append((key, prev, reward))
        last_reward[key] = reward

    hook = on_update if monitor else None
    for _ in range(n):
        res_e = sample_eval(prog, evidence, {}, dist=source, rng=rng, step_limit=step_limit)
        if res_e.success:
            n_e += 1
            # Query-side fresh picks use the *original* distribution: given an
            # evidence-consistent draw, unconstrained switches keep their
            # prior, and sampling them from the adapted source would bias the
            # conditional estimate.
            res_q = sample_eval(
                prog, query, res_e.assignment, rng=rng, step_limit=step_limit
            )
            if res_q.success:
                n_qe += 1
        adapt(res_e.trace, 1.0 if res_e.success else 0.0, store, prog, on_update=hook)
    if n_e == 0:
        raise EvalError("no evidence-consistent samples; cannot estimate")
    return IndependentResult(n_qe / n_e, n, n_e, n_qe, violations, store)
