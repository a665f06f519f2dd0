"""First-derivation resolution engine threading an assignment and a trace.

Two entry points share the same machinery:

- `sample_eval`: depth-first, left-to-right, textual-clause-order evaluation
  to the *first* derivation.  `msw(s,i,v)` goals consult the assignment; a
  fresh instance is sampled once and then frozen for the rest of the call,
  even across backtracking.  Every msw access (fresh or lookup, duplicates
  included) is recorded in the trace.  The returned assignment holds exactly
  the entries touched by this call.

- `initial_sample`: a randomized backtracking *search* for one derivation of
  the evidence.  Clause order and switch-outcome order are shuffled per choice
  point, and switch outcomes are revised on backtracking — this explores
  worlds rather than sampling one.  The switch bindings of the derivation
  found are returned as the initial chain state.

The engine is iterative (explicit goal stack, choicepoint stack and binding
trail) so deep derivations do not hit Python's recursion limit.  Clause
selection goes through a per-program dispatch table with first-argument
indexing: for a ground first argument only the clauses that could match it
are tried, in textual order.  Skipped clauses are exactly those whose head
unification would have failed, so derivation order is unchanged.
"""

from __future__ import annotations

from typing import NamedTuple

from .lang import Program, PlpError, Slot, is_ground, term_to_str

DEFAULT_STEP_LIMIT = 10**6

_COMPARE = {
    "<": lambda a, b: a < b,
    "=<": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class EvalError(PlpError):
    """Runtime evaluation problem: unknown predicate, unbound goal, ..."""


class StepLimitExceeded(EvalError):
    """The resolution step budget ran out (possibly infinite SLD tree)."""


class UnsatisfiableEvidence(EvalError):
    """The evidence has no derivation in any world."""


class EvalResult(NamedTuple):
    success: bool
    assignment: dict
    trace: list


class Cell:
    """Mutable binding cell for engine variables (trail-undone on backtrack)."""

    __slots__ = ("ref",)

    def __init__(self):
        self.ref = None

    def __repr__(self):
        return f"<cell {id(self):#x}>" if self.ref is None else repr(self.ref)


def _deref(t):
    while type(t) is Cell:
        r = t.ref
        if r is None:
            return t
        t = r
    return t


def _occurs(cell, t):
    stack = [t]
    while stack:
        u = _deref(stack.pop())
        if u is cell:
            return True
        if type(u) is tuple:
            stack.extend(u[1:])
    return False


def _unify(a, b, trail):
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        while type(x) is Cell and x.ref is not None:
            x = x.ref
        while type(y) is Cell and y.ref is not None:
            y = y.ref
        if x is y:
            continue
        if type(x) is Cell:
            if type(y) is tuple and _occurs(x, y):
                return False
            x.ref = y
            trail.append(x)
            continue
        if type(y) is Cell:
            if type(x) is tuple and _occurs(y, x):
                return False
            y.ref = x
            trail.append(y)
            continue
        if type(x) is tuple:
            if type(y) is not tuple or len(x) != len(y) or x[0] != y[0]:
                return False
            stack.extend(zip(x[1:], y[1:]))
            continue
        if x == y and type(x) is type(y):
            continue
        return False
    return True


def _build_fill(t, frame):
    """Instantiate a clause template; slots not yet bound get fresh cells."""
    tt = type(t)
    if tt is Slot:
        v = frame[t.i]
        if v is None:
            v = frame[t.i] = Cell()
        return v
    if tt is not tuple:
        return t
    n = len(t)
    if n == 2:
        return (t[0], _build_fill(t[1], frame))
    if n == 3:
        return (t[0], _build_fill(t[1], frame), _build_fill(t[2], frame))
    return (t[0],) + tuple(_build_fill(a, frame) for a in t[1:])


def _unify_head(g, t, frame, trail):
    """Unify a runtime term against a clause-head template without building it.

    First slot occurrences capture the (dereferenced) goal subterm directly in
    `frame` — untrailed, since a failed frame is simply discarded.  Goal-side
    cell bindings are trailed as usual.
    """
    stack = [(g, t)]
    while stack:
        x, t = stack.pop()
        while type(x) is Cell and x.ref is not None:
            x = x.ref
        tt = type(t)
        if tt is Slot:
            v = frame[t.i]
            if v is None:
                frame[t.i] = x
                continue
            if _unify(x, v, trail):
                continue
            return False
        if tt is tuple:
            tx = type(x)
            if tx is tuple:
                if len(x) != len(t) or x[0] != t[0]:
                    return False
                stack.extend(zip(x[1:], t[1:]))
                continue
            if tx is Cell:
                built = _build_fill(t, frame)
                if _occurs(x, built):
                    return False
                x.ref = built
                trail.append(x)
                continue
            return False
        if type(x) is Cell:
            x.ref = t
            trail.append(x)
            continue
        if x == t and type(x) is type(t):
            continue
        return False
    return True


def _resolve_ground(t, what):
    """Fully dereference to a ground term; raises EvalError on unbound cells."""
    t = _deref(t)
    tt = type(t)
    if tt is Cell:
        raise EvalError(f"{what} is not ground")
    if tt is tuple:
        return (t[0],) + tuple(_resolve_ground(a, what) for a in t[1:])
    return t


def _resolve_key(t):
    """Dereference to a ground term for index lookup, or None if not ground."""
    while type(t) is Cell:
        r = t.ref
        if r is None:
            return None
        t = r
    if type(t) is not tuple:
        return t
    args = []
    same = True
    for a in t[1:]:
        ra = _resolve_key(a)
        if ra is None:
            return None
        if ra is not a:
            same = False
        args.append(ra)
    return t if same else (t[0], *args)


def _undo(trail, mark):
    while len(trail) > mark:
        trail.pop().ref = None


# ---------------------------------------------------------------------------
# Clause dispatch with first-argument indexing
# ---------------------------------------------------------------------------


def _template_ground(t):
    """The template term itself when it contains no slots, else None."""
    tt = type(t)
    if tt is Slot:
        return None
    if tt is tuple:
        for a in t[1:]:
            if _template_ground(a) is None:
                return None
    return t


def _dispatch_table(prog: Program):
    """Per-predicate (all-clauses, first-arg index) pairs, cached on the program.

    The index maps each ground first argument appearing in some clause head to
    the tuple of clauses able to match it — exact matches merged with clauses
    whose first head argument is non-ground, in textual order — plus a generic
    fallback for arguments matching no ground head.  Predicates with no ground
    first argument anywhere get no index (lookups would be pure overhead).
    """
    table = getattr(prog, "_engine_dispatch", None)
    if table is None:
        table = {}
        for key, clauses in prog.clauses.items():
            clauses = tuple(clauses)
            if key[1] == 0 or len(clauses) <= 1:
                table[key] = (clauses, None)
                continue
            keyed = [(c, _template_ground(c.chead[1])) for c in clauses]
            ground_keys = {k for _, k in keyed if k is not None}
            if not ground_keys:
                table[key] = (clauses, None)
                continue
            generic = tuple(c for c, k in keyed if k is None)
            index = {
                gk: tuple(c for c, k in keyed if k is None or k == gk)
                for gk in ground_keys
            }
            table[key] = (clauses, (index, generic))
        prog._engine_dispatch = table
    return table


# ---------------------------------------------------------------------------
# First-derivation evaluation with frozen switch picks
# ---------------------------------------------------------------------------


def run_first(prog: Program, goal, assignment, picker, step_limit=DEFAULT_STEP_LIMIT):
    """Raw engine: evaluate `goal` to its first derivation.

    `picker(key)` supplies the outcome for a switch instance not found in the
    accumulated output nor in the input `assignment`.  Returns
    (success, touched-assignment, trace).
    """
    dispatch = _dispatch_table(prog)
    sigma_out = {}
    sigma_in = assignment
    trace = []
    trail = []
    cps = []
    goals = (goal, None)
    steps = 0
    failed = False

    while True:
        if failed:
            # Backtrack: resume the most recent choicepoint with alternatives.
            while cps:
                cp = cps[-1]
                _undo(trail, cp[3])
                if cp[0] == "c":
                    g, rest, tl, cl, idx = cp[1], cp[2], cp[3], cp[4], cp[5]
                    n = len(cl)
                    body = None
                    frame = None
                    while idx < n:
                        c = cl[idx]
                        idx += 1
                        if c.nvars == 0:
                            if _unify(g, c.chead, trail):
                                body = c.cbody
                                frame = None
                                break
                        else:
                            frame = [None] * c.nvars
                            if _unify_head(g, c.chead, frame, trail):
                                body = c.cbody
                                break
                        _undo(trail, tl)
                    if body is None:
                        cps.pop()
                        continue
                    if idx < n:
                        cp[5] = idx
                    else:
                        cps.pop()
                    goals = rest
                    for k in range(len(body) - 1, -1, -1):
                        b = body[k]
                        goals = ((b if frame is None else _build_fill(b, frame)), goals)
                    failed = False
                    break
                else:  # disjunction
                    cps.pop()
                    goals = (cp[1], cp[2])
                    failed = False
                    break
            if failed:
                return False, sigma_out, trace

        if goals is None:
            return True, sigma_out, trace
        g, rest = goals
        steps += 1
        if steps > step_limit:
            raise StepLimitExceeded(f"evaluation exceeded {step_limit} steps")
        while type(g) is Cell:
            r = g.ref
            if r is None:
                raise EvalError("unbound goal")
            g = r
        tg = type(g)
        if tg is str:
            if g == "true":
                goals = rest
                continue
            key = (g, 0)
        elif tg is tuple:
            f = g[0]
            if f == "msw" and len(g) == 4:
                s = _resolve_ground(g[1], "msw switch name")
                inst = _resolve_ground(g[2], "msw instance")
                skey = (s, inst)
                v = sigma_out.get(skey)
                if v is None:
                    v = sigma_in.get(skey)
                    if v is None:
                        v = picker(skey)
                    sigma_out[skey] = v
                trace.append((s, inst, v))
                if _unify(g[3], v, trail):
                    goals = rest
                else:
                    failed = True
                continue
            if f == ",":
                goals = (g[1], (g[2], rest))
                continue
            if f == ";":
                cps.append(["d", g[2], rest, len(trail)])
                goals = (g[1], rest)
                continue
            if f == "=" and len(g) == 3:
                if _unify(g[1], g[2], trail):
                    goals = rest
                else:
                    failed = True
                continue
            if f in _COMPARE and len(g) == 3:
                a = _deref(g[1])
                b = _deref(g[2])
                if type(a) is not int or type(b) is not int:
                    raise EvalError(f"comparison {f} needs ground integers")
                if _COMPARE[f](a, b):
                    goals = rest
                else:
                    failed = True
                continue
            key = (f, len(g) - 1)
        else:
            raise EvalError(f"invalid goal: {g!r}")
        entry = dispatch.get(key)
        if entry is None:
            raise EvalError(f"unknown predicate {key[0]}/{key[1]}")
        cl, idxinfo = entry
        if idxinfo is not None:
            k1 = _resolve_key(g[1])
            if k1 is not None:
                cl = idxinfo[0].get(k1, idxinfo[1])
        n = len(cl)
        if n == 0:
            failed = True
            continue
        if n == 1:
            # Sole candidate: try it inline, no choicepoint to push and pop.
            c = cl[0]
            tl = len(trail)
            if c.nvars == 0:
                frame = None
                ok = _unify(g, c.chead, trail)
            else:
                frame = [None] * c.nvars
                ok = _unify_head(g, c.chead, frame, trail)
            if not ok:
                _undo(trail, tl)
                failed = True
                continue
            body = c.cbody
            goals = rest
            for k in range(len(body) - 1, -1, -1):
                b = body[k]
                goals = ((b if frame is None else _build_fill(b, frame)), goals)
            continue
        cps.append(["c", g, rest, len(trail), cl, 0])
        failed = True


def sample_eval(
    prog: Program,
    goal,
    assignment,
    dist=None,
    rng=None,
    step_limit=DEFAULT_STEP_LIMIT,
) -> EvalResult:
    """Evaluate a ground goal against an assignment, sampling fresh switches.

    `dist` is an optional distribution source `(s, i, info) -> probs` (for
    adapted proposals); the declared distribution is used when it is None.
    With `rng=None` a fresh switch instance raises EvalError, which makes the
    call a deterministic replay against the given assignment.
    """
    if not is_ground(goal):
        raise EvalError(f"goal must be ground: {term_to_str(goal)}")
    switch_info = prog.switch_info

    if rng is None:

        def picker(key):
            raise EvalError(
                f"fresh switch instance {term_to_str(key[0])}/{term_to_str(key[1])}"
                " encountered but no rng was provided"
            )

    else:
        rand = rng.random

        def picker(key):
            info = switch_info(key[0])
            probs = info.probs if dist is None else dist(key[0], key[1], info)
            r = rand()
            outs = info.outcomes
            acc = 0.0
            for k in range(len(outs) - 1):
                acc += probs[k]
                if r < acc:
                    return outs[k]
            return outs[-1]

    ok, sigma, trace = run_first(prog, goal, assignment, picker, step_limit)
    return EvalResult(ok, sigma, trace)


# ---------------------------------------------------------------------------
# Randomized backtracking search for an evidence-consistent assignment
# ---------------------------------------------------------------------------


def initial_sample(prog: Program, evidence, rng, step_limit=DEFAULT_STEP_LIMIT):
    """Find one derivation of `evidence` with shuffled clause/outcome order and
    return the switch bindings it used.  Raises UnsatisfiableEvidence when the
    search exhausts every branch."""
    if not is_ground(evidence):
        raise EvalError(f"evidence must be ground: {term_to_str(evidence)}")
    sigma = _search_one(prog, evidence, rng, step_limit)
    if sigma is None:
        raise UnsatisfiableEvidence(
            f"evidence {term_to_str(evidence)} has no derivation in any world"
        )
    return sigma


def _search_one(prog, goal, rng, step_limit):
    dispatch = _dispatch_table(prog)
    switch_info = prog.switch_info
    shuffle = rng.shuffle
    sigma = {}
    atrail = []  # keys to delete from sigma on backtracking
    trail = []
    cps = []
    goals = (goal, None)
    steps = 0
    failed = False

    while True:
        if failed:
            while cps:
                cp = cps[-1]
                _undo(trail, cp[3])
                while len(atrail) > cp[4]:
                    del sigma[atrail.pop()]
                kind = cp[0]
                if kind == "c":
                    g, rest, tl, cl, idx = cp[1], cp[2], cp[3], cp[5], cp[6]
                    n = len(cl)
                    body = None
                    frame = None
                    while idx < n:
                        c = cl[idx]
                        idx += 1
                        if c.nvars == 0:
                            if _unify(g, c.chead, trail):
                                body = c.cbody
                                frame = None
                                break
                        else:
                            frame = [None] * c.nvars
                            if _unify_head(g, c.chead, frame, trail):
                                body = c.cbody
                                break
                        _undo(trail, tl)
                    if body is None:
                        cps.pop()
                        continue
                    if idx < n:
                        cp[6] = idx
                    else:
                        cps.pop()
                    goals = rest
                    for k in range(len(body) - 1, -1, -1):
                        b = body[k]
                        goals = ((b if frame is None else _build_fill(b, frame)), goals)
                    failed = False
                    break
                elif kind == "m":
                    skey, vterm, rest, tl, outs, idx = (
                        cp[1], cp[2], cp[5], cp[3], cp[6], cp[7],
                    )
                    bound = False
                    while idx < len(outs):
                        v = outs[idx]
                        idx += 1
                        if _unify(vterm, v, trail):
                            sigma[skey] = v
                            atrail.append(skey)
                            bound = True
                            break
                        _undo(trail, tl)
                    if not bound:
                        cps.pop()
                        continue
                    if idx < len(outs):
                        cp[7] = idx
                    else:
                        cps.pop()
                    goals = rest
                    failed = False
                    break
                else:  # disjunction
                    cps.pop()
                    goals = (cp[1], cp[2])
                    failed = False
                    break
            if failed:
                return None

        if goals is None:
            return sigma
        g, rest = goals
        steps += 1
        if steps > step_limit:
            raise StepLimitExceeded(f"initial-sample search exceeded {step_limit} steps")
        g = _deref(g)
        tg = type(g)
        if tg is str:
            if g == "true":
                goals = rest
                continue
            key = (g, 0)
        elif tg is tuple:
            f = g[0]
            if f == "msw" and len(g) == 4:
                s = _resolve_ground(g[1], "msw switch name")
                inst = _resolve_ground(g[2], "msw instance")
                skey = (s, inst)
                v = sigma.get(skey)
                if v is not None:
                    if _unify(g[3], v, trail):
                        goals = rest
                    else:
                        failed = True
                    continue
                info = switch_info(s)
                outs = [o for o, p in zip(info.outcomes, info.probs) if p > 0.0]
                if len(outs) > 1:
                    shuffle(outs)
                cps.append(["m", skey, g[3], len(trail), len(atrail), rest, outs, 0])
                failed = True
                continue
            if f == ",":
                goals = (g[1], (g[2], rest))
                continue
            if f == ";":
                order = [g[1], g[2]]
                shuffle(order)
                cps.append(["d", order[1], rest, len(trail), len(atrail)])
                goals = (order[0], rest)
                continue
            if f == "=" and len(g) == 3:
                if _unify(g[1], g[2], trail):
                    goals = rest
                else:
                    failed = True
                continue
            if f in _COMPARE and len(g) == 3:
                a = _deref(g[1])
                b = _deref(g[2])
                if type(a) is not int or type(b) is not int:
                    raise EvalError(f"comparison {f} needs ground integers")
                if _COMPARE[f](a, b):
                    goals = rest
                else:
                    failed = True
                continue
            key = (f, len(g) - 1)
        else:
            raise EvalError(f"invalid goal: {g!r}")
        entry = dispatch.get(key)
        if entry is None:
            raise EvalError(f"unknown predicate {key[0]}/{key[1]}")
        cl, idxinfo = entry
        if idxinfo is not None:
            k1 = _resolve_key(g[1])
            if k1 is not None:
                cl = idxinfo[0].get(k1, idxinfo[1])
        n = len(cl)
        if n == 0:
            failed = True
            continue
        if n == 1:
            c = cl[0]
            tl = len(trail)
            if c.nvars == 0:
                frame = None
                ok = _unify(g, c.chead, trail)
            else:
                frame = [None] * c.nvars
                ok = _unify_head(g, c.chead, frame, trail)
            if not ok:
                _undo(trail, tl)
                failed = True
                continue
            body = c.cbody
            goals = rest
            for k in range(len(body) - 1, -1, -1):
                b = body[k]
                goals = ((b if frame is None else _build_fill(b, frame)), goals)
            continue
        cl = list(cl)
        shuffle(cl)
        cps.append(["c", g, rest, len(trail), len(atrail), cl, 0])
        failed = True
