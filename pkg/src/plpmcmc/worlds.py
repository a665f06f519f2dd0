"""Assignments: partial maps from switch instances to outcomes.

An assignment is a plain dict `{(switch, instance): outcome}` whose keys and
values are ground terms.  It stands for the set of possible worlds that agree
with it, and is the state of the MCMC chain.  Insertion order is preserved by
Python dicts, which keeps runs bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from .lang import Program, ProgramError, term_to_str


def pick_value(assignment, s, i, prog: Program, dist=None, rng=None):
    """Look up or sample the outcome of switch instance (s, i).

    If the assignment already binds (s, i) the stored outcome is returned and
    the assignment is returned unchanged (no rng draw).  Otherwise an outcome
    is sampled from `dist` (a callable (s, i, info) -> probability vector; the
    original distribution when None) and a new, extended assignment is
    returned.  The result always extends the input.
    """
    key = (s, i)
    v = assignment.get(key)
    if v is not None:
        return v, assignment
    info = prog.switch_info(s)
    probs = info.probs if dist is None else dist(s, i, info)
    v = sample_outcome(info.outcomes, probs, rng)
    out = dict(assignment)
    out[key] = v
    return v, out


def sample_outcome(outcomes, probs, rng):
    """One categorical draw using a single rng.random() and a CDF walk."""
    r = rng.random()
    acc = 0.0
    for k in range(len(outcomes) - 1):
        acc += probs[k]
        if r < acc:
            return outcomes[k]
    return outcomes[-1]


def extends(bigger, smaller) -> bool:
    """True iff `bigger` agrees with `smaller` everywhere `smaller` is defined."""
    if len(bigger) < len(smaller):
        return False
    for key, v in smaller.items():
        if bigger.get(key, _MISSING) != v:
            return False
    return True


_MISSING = object()


def mutually_exclusive(a, b) -> bool:
    """True iff the two assignments disagree on some shared switch instance
    (their world sets are then disjoint)."""
    if len(b) < len(a):
        a, b = b, a
    for key, v in a.items():
        w = b.get(key, _MISSING)
        if w is not _MISSING and w != v:
            return True
    return False


def compatible(a, b) -> bool:
    return not mutually_exclusive(a, b)


def prob(assignment, prog: Program) -> float:
    """Product of the original outcome probabilities of all entries.

    The empty assignment has probability 1.
    """
    p = 1.0
    for (s, _i), v in assignment.items():
        info = prog.switch_info(s)
        pv = info.prob_of.get(v)
        if pv is None:
            raise ProgramError(
                f"outcome {term_to_str(v)} is not declared for switch {term_to_str(s)}"
            )
        p *= pv
    return p


def forget(assignment, keys):
    """Copy of the assignment with the given switch-instance keys removed.
    Forgetting an absent key is a no-op."""
    if not keys:
        return dict(assignment)
    drop = set(keys)
    return {k: v for k, v in assignment.items() if k not in drop}


def partition(a, b):
    """Split `a` relative to `b` into (dropped, conflicting, agreeing):

    - dropped: keys of `a` that `b` does not define
    - conflicting: keys defined in both with different outcomes
    - agreeing: keys defined in both with equal outcomes

    The three parts are disjoint and their union is `a`; the agreeing part is
    symmetric in the two arguments.
    """
    dropped, conflicting, agreeing = {}, {}, {}
    for key, v in a.items():
        w = b.get(key, _MISSING)
        if w is _MISSING:
            dropped[key] = v
        elif w == v:
            agreeing[key] = v
        else:
            conflicting[key] = v
    return dropped, conflicting, agreeing


def assignment_to_str(assignment) -> str:
    """Debug rendering: one `switch/instance=outcome` line per entry."""
    lines = []
    for (s, i), v in assignment.items():
        lines.append(f"{term_to_str(s)}/{term_to_str(i)}={term_to_str(v)}")
    return "\n".join(lines)
