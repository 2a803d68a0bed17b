"""Direct semantic evaluation of formulas on finite structures.

Raw enumeration of set quantifiers is hopeless beyond tiny universes, so the
evaluator recognizes guarded quantifier shapes and enumerates only candidate
sets that can possibly satisfy the guard:

* ``defset``   -- ``exists S (and (forall t (iff (in t S) delta)) ...)``:
  the defining biconditional pins S to exactly one set, which is computed
  pointwise.  Complete by construction.
* ``section``  -- a conjunct ``(lib section S U P)`` with U, P already bound:
  the only satisfying sets are the maximal uniform runs of U under P, found
  by a single ordered scan.  Complete because sections partition U.
* ``partsection`` -- all uniform contiguous runs of U (sub-intervals of the
  maximal sections) plus the empty set; every partial section is such a run.
* ``consec`` + subset bound -- contiguous windows of the host set plus the
  empty set; sound when the subset bound is contained in the host.
* pointwise upper bound -- ``(forall t (implies (in t S) psi))`` restricts S
  to subsets of ``{v : psi(v)}``; enumeration is raw but over the bound only.

Anything else falls back to raw enumeration, charged against an explicit
width budget; exceeding any budget surfaces as the distinct
``budget-exceeded`` outcome, never as a truth value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

from . import logic
from .logic import ELEMENT, SET, EDGESET, EXISTENTIALS, QUANTIFIER_SORTS, UNIVERSALS


class EvalError(Exception):
    pass


class BudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class Budget:
    max_steps: int = 1_000_000_000
    max_width: int = 1 << 22


@dataclass(frozen=True)
class EvalResult:
    outcome: str                 # "true" | "false" | "budget-exceeded"
    steps: int
    witness: dict | None = None

    @property
    def is_true(self):
        return self.outcome == "true"


@dataclass(frozen=True)
class DerivedRelationTable:
    name: str
    level: int
    table: tuple

    def holds(self, x, y):
        return self.table[x][y]


# ---------------------------------------------------------------------------
# guard matchers


def _free_names(ctx, f):
    cached = ctx.freecache.get(id(f))
    if cached is not None:
        return cached
    if f.kind in QUANTIFIER_SORTS:
        names = _free_names(ctx, f.children[0]) - {f.var}
    elif f.kind in ("atom", "lib"):
        names = frozenset(f.args)
    else:
        names = frozenset()
        for c in f.children:
            names |= _free_names(ctx, c)
    ctx.freecache[id(f)] = names
    ctx.keepalive.append(f)
    return names


def _match_defset(ctx, var, sort, conjuncts, env):
    for c in conjuncts:
        if c.kind != "forall1":
            continue
        body = c.children[0]
        if body.kind != "iff":
            continue
        t = c.var
        left, right = body.children
        for member, delta in ((left, right), (right, left)):
            if (
                member.kind == "atom"
                and member.pred == ("inE" if sort == EDGESET else "in")
                and member.args == (t, var)
                and _free_names(ctx, delta) <= (env.keys() | {t})
            ):
                dom = ctx.set_universe(sort)
                picked = set()
                outside = False
                shadow = env.pop(t, _MISSING)
                try:
                    for v in ctx.s.elements():
                        env[t] = v
                        hit = ctx.eval(delta, env)
                        del env[t]
                        if hit:
                            if v in dom:
                                picked.add(v)
                            else:
                                outside = True
                finally:
                    if shadow is not _MISSING:
                        env[t] = shadow
                if outside:
                    return []          # no set of this sort satisfies the definition
                return [frozenset(picked)]
    return None


def _match_section(ctx, var, sort, conjuncts, env):
    if sort != SET:
        return None
    for c in conjuncts:
        if c.kind == "lib" and c.lib == "section" and c.args and c.args[0] == var:
            rest = c.args[1:]
            if len(rest) == 2 and all(r in env for r in rest):
                return ctx.sections(env[rest[0]], env[rest[1]])
    return None


def _match_partsection(ctx, var, sort, conjuncts, env):
    if sort != SET:
        return None
    for c in conjuncts:
        if c.kind == "lib" and c.lib == "partsection" and c.args and c.args[0] == var:
            rest = c.args[1:]
            if len(rest) == 2 and all(r in env for r in rest):
                out = [frozenset()]
                for sec in ctx.sections(env[rest[0]], env[rest[1]]):
                    ordered = ctx.ordered(sec)
                    for i in range(len(ordered)):
                        for j in range(i, len(ordered)):
                            out.append(frozenset(ordered[i : j + 1]))
                return out
    return None


def _match_consec_window(ctx, var, sort, conjuncts, env):
    if sort != SET:
        return None
    host = None
    for c in conjuncts:
        if c.kind == "lib" and c.lib == "consec" and c.args and c.args[0] == var:
            if c.args[1] in env:
                host = env[c.args[1]]
    if host is None:
        return None
    bound = _pointwise_bound(ctx, var, sort, conjuncts, env)
    if bound is None or not bound <= host:
        return None
    ordered = ctx.ordered(host)
    out = [frozenset()]
    for i in range(len(ordered)):
        for j in range(i, len(ordered)):
            out.append(frozenset(ordered[i : j + 1]))
    return out


def _pointwise_bound(ctx, var, sort, conjuncts, env):
    member_pred = "inE" if sort == EDGESET else "in"
    for c in conjuncts:
        if c.kind != "forall1":
            continue
        body = c.children[0]
        if body.kind != "implies":
            continue
        ant, con = body.children
        t = c.var
        if (
            ant.kind == "atom"
            and ant.pred == member_pred
            and ant.args == (t, var)
            and _free_names(ctx, con) <= (env.keys() | {t})
        ):
            picked = set()
            shadow = env.pop(t, _MISSING)
            try:
                for v in ctx.set_universe(sort):
                    env[t] = v
                    if ctx.eval(con, env):
                        picked.add(v)
                    del env[t]
            finally:
                if shadow is not _MISSING:
                    env[t] = shadow
            return frozenset(picked)
    return None


def _match_upper_bound(ctx, var, sort, conjuncts, env):
    bound = _pointwise_bound(ctx, var, sort, conjuncts, env)
    if bound is None:
        return None
    return ctx.subsets(bound)


DEFAULT_GUARDS = (
    ("defset", _match_defset),
    ("section", _match_section),
    ("partsection", _match_partsection),
    ("consec-window", _match_consec_window),
    ("upper-bound", _match_upper_bound),
)


def guard_registry():
    return list(DEFAULT_GUARDS)


def register_guard_enumerator(registry, name, matcher):
    """Add a guard shape to a registry copy.

    The matcher must yield a superset of every set satisfying its guard; the
    docstring of this module records the argument for each built-in.
    """
    out = [g for g in registry if g[0] != name]
    out.insert(0, (name, matcher))
    return out


# ---------------------------------------------------------------------------
# evaluation context


class _Ctx:
    def __init__(self, s, budget, oracles, registry, guards):
        self.s = s
        self.budget = budget
        self.steps = 0
        self.oracles = oracles or {}
        self.registry = registry
        self.guards = guards if guards is not None else list(DEFAULT_GUARDS)
        self.memo = {}
        self.libcache = {}
        self.freecache = {}
        self.keepalive = []
        self.fresh_base = 0
        self._order = s.order

    def charge(self, amount=1):
        self.steps += amount
        if self.steps > self.budget.max_steps:
            raise BudgetExceeded()

    def order_key(self, x):
        return self._order[x] if self._order is not None else x

    def ordered(self, xs):
        return sorted(xs, key=self.order_key)

    def sections(self, host, marks):
        """Maximal runs of ``host`` with uniform ``marks`` membership."""
        ordered = self.ordered(host)
        out = []
        run = []
        flag = None
        for v in ordered:
            f = v in marks
            if flag is None or f == flag:
                run.append(v)
            else:
                out.append(frozenset(run))
                run = [v]
            flag = f
        if run:
            out.append(frozenset(run))
        return out

    def set_universe(self, sort):
        if sort == EDGESET:
            return frozenset(self.s.edge_elements())
        return frozenset(self.s.vertices())

    def subsets(self, base):
        width = 1 << len(base)
        if width > self.budget.max_width:
            raise BudgetExceeded()
        ordered = sorted(base)
        for mask in range(width):
            yield frozenset(ordered[i] for i in range(len(ordered)) if mask >> i & 1)

    # -- candidate streams ---------------------------------------------------

    def quantifier_parts(self, f):
        """Conjunct lists driving guard detection for a quantifier body."""
        body = f.children[0]
        if f.kind in EXISTENTIALS:
            conjuncts = body.children if body.kind == "and" else (body,)
            return conjuncts, None
        if body.kind == "implies":
            ant, con = body.children
            conjuncts = ant.children if ant.kind == "and" else (ant,)
            return conjuncts, con
        return (), body

    def element_candidates(self, f, conjuncts, env):
        var = f.var
        for c in conjuncts:
            if c.kind != "atom" or var not in c.args:
                continue
            if c.pred == "in" and c.args[0] == var and c.args[1] in env:
                return self.ordered(env[c.args[1]])
            if c.pred == "inE" and c.args[0] == var and c.args[1] in env:
                return sorted(env[c.args[1]])
            if c.pred == "color":
                return [v for v in self.s.vertices() if self.s.has_color(c.color, v)]
            if c.pred == "=":
                other = c.args[1] if c.args[0] == var else c.args[0]
                if other in env and other != var:
                    return [env[other]]
        return list(self.s.elements())

    def set_candidates(self, f, sort, conjuncts, env):
        for _, matcher in self.guards:
            got = matcher(self, f.var, sort, conjuncts, env)
            if got is not None:
                return got
        return self.subsets(self.set_universe(sort))

    # -- core recursion -------------------------------------------------------

    def eval(self, f, env):
        self.charge()
        kind = f.kind
        if kind == "atom":
            return self.eval_atom(f, env)
        if kind == "and":
            for c in f.children:
                if not self.eval(c, env):
                    return False
            return True
        if kind == "or":
            for c in f.children:
                if self.eval(c, env):
                    return True
            return False
        if kind == "not":
            return not self.eval(f.children[0], env)
        if kind == "implies":
            return not self.eval(f.children[0], env) or self.eval(f.children[1], env)
        if kind == "iff":
            return self.eval(f.children[0], env) == self.eval(f.children[1], env)
        if kind == "lib":
            return self.eval_lib(f, env)
        if kind in QUANTIFIER_SORTS:
            return self.eval_quantifier(f, env)
        raise EvalError(f"unknown node kind {kind!r}")

    def eval_atom(self, f, env):
        s = self.s
        pred = f.pred
        try:
            if pred == "prec":
                return s.prec(env[f.args[0]], env[f.args[1]])
            if pred == "in":
                return env[f.args[0]] in env[f.args[1]]
            if pred == "=":
                return env[f.args[0]] == env[f.args[1]]
            if pred == "color":
                return s.has_color(f.color, env[f.args[0]])
            if pred == "edge":
                return s.has_edge(env[f.args[0]], env[f.args[1]])
            if pred == "child":
                return s.is_child(env[f.args[0]], env[f.args[1]])
            if pred == "incident":
                return s.incident(env[f.args[0]], env[f.args[1]])
            if pred == "inE":
                return env[f.args[0]] in env[f.args[1]]
        except KeyError as e:
            raise EvalError(f"missing assignment for variable {e.args[0]!r}")
        raise EvalError(f"unknown predicate {pred!r}")

    def eval_lib(self, f, env):
        oracle = self.oracles.get(f.lib)
        if oracle is not None:
            try:
                values = [env[a] for a in f.args]
            except KeyError as e:
                raise EvalError(f"missing assignment for variable {e.args[0]!r}")
            return bool(oracle(self.s, f.params, values))
        key = (f.lib, f.params, f.args)
        body = self.libcache.get(key)
        if body is None:
            if self.registry is None:
                raise EvalError(f"no oracle or registry for lib {f.lib!r}")
            definition = self.registry.get(f.lib)
            if definition is None:
                raise EvalError(f"unknown library predicate {f.lib!r}")
            expander = logic._Expander(self.registry, frozenset(self.registry.names()))
            body = definition.generate(f.params)
            body = expander.freshen(body)
            body = logic._rename(body, dict(zip(definition.formals, f.args)))
            self.libcache[key] = body
        return self.eval_memo(body, env)

    def eval_memo(self, f, env):
        names = _free_names(self, f)
        key = (id(f), tuple((n, env[n]) for n in sorted(names)))
        hit = self.memo.get(key)
        if hit is not None:
            self.charge()
            return hit[0]
        val = self.eval(f, env)
        self.memo[key] = (val,)
        return val

    def eval_quantifier(self, f, env):
        names = _free_names(self, f)
        key = (id(f), tuple((n, env[n]) for n in sorted(names)))
        hit = self.memo.get(key)
        if hit is not None:
            self.charge()
            return hit[0]
        val = self._eval_quantifier(f, env)
        self.memo[key] = (val,)
        return val

    def _eval_quantifier(self, f, env):
        sort = QUANTIFIER_SORTS[f.kind]
        existential = f.kind in EXISTENTIALS
        conjuncts, consequent = self.quantifier_parts(f)
        if sort == ELEMENT:
            candidates = self.element_candidates(f, conjuncts, env)
        else:
            candidates = self.set_candidates(f, sort, conjuncts, env)
        var = f.var
        bound_before = env.keys() | set()
        ready = [c for c in conjuncts if _free_names(self, c) <= (bound_before | {var})]
        later = [c for c in conjuncts if _free_names(self, c) > (bound_before | {var})]
        shadow = env.pop(var, _MISSING)
        try:
            for v in candidates:
                self.charge()
                env[var] = v
                ok = True
                for c in ready:
                    if not self.eval(c, env):
                        ok = False
                        break
                if ok:
                    for c in later:
                        if not self.eval(c, env):
                            ok = False
                            break
                if existential:
                    if ok and (consequent is None or self.eval(consequent, env)):
                        return True
                elif ok and not self.eval(consequent, env):
                    return False
                del env[var]
            return not existential
        finally:
            env.pop(var, None)
            if shadow is not _MISSING:
                env[var] = shadow


_MISSING = object()


# ---------------------------------------------------------------------------
# public entry points


def _check_assignment(s, f, assignment):
    env = dict(assignment or {})
    free = logic.free_variables(f)
    missing = [v for v in free if v not in env]
    if missing:
        raise EvalError(f"missing assignment for free variables {sorted(missing)}")
    return env


def evaluate(
    s,
    f,
    assignment=None,
    budget=None,
    oracles=None,
    registry=None,
    guards=None,
    witness=False,
):
    """Decide ``structure, assignment |= formula`` within an explicit budget.

    Library calls go through a registered semantic oracle when one exists,
    otherwise through expansion.  With ``witness`` set, the values of the
    outer existential chain are captured and returned on a true outcome.
    """
    env = _check_assignment(s, f, assignment)
    ctx = _Ctx(s, budget or Budget(), oracles, registry, guards)
    try:
        if witness:
            trail = []
            ok = _witness_search(ctx, f, env, trail)
            w = {var: val for var, val in trail} if ok else None
            return EvalResult("true" if ok else "false", ctx.steps, w)
        ok = ctx.eval(f, env)
        return EvalResult("true" if ok else "false", ctx.steps)
    except BudgetExceeded:
        return EvalResult("budget-exceeded", ctx.steps)


def _witness_search(ctx, f, env, trail):
    if f.kind in EXISTENTIALS:
        sort = QUANTIFIER_SORTS[f.kind]
        conjuncts, _ = ctx.quantifier_parts(f)
        if sort == ELEMENT:
            candidates = ctx.element_candidates(f, conjuncts, env)
        else:
            candidates = ctx.set_candidates(f, sort, conjuncts, env)
        shadow = env.pop(f.var, _MISSING)
        try:
            for v in candidates:
                ctx.charge()
                env[f.var] = v
                trail.append((f.var, v))
                if _witness_search(ctx, f.children[0], env, trail):
                    return True
                trail.pop()
                del env[f.var]
            return False
        finally:
            env.pop(f.var, None)
            if shadow is not _MISSING:
                env[f.var] = shadow
    return ctx.eval(f, env)


def enumerate_models(s, f, free_vars, budget=None, oracles=None, registry=None):
    """All satisfying assignments over ``free_vars``, in canonical order.

    Canonical order: elements ascending, sets in ascending bitmask order over
    the sorted universe; variables vary rightmost-fastest in listed order.
    """
    budget = budget or Budget()
    ctx = _Ctx(s, budget, oracles, registry, None)
    domains = []
    total = 1
    for name, sort in free_vars:
        if sort == ELEMENT:
            dom = list(s.elements())
        else:
            base = sorted(ctx.set_universe(sort))
            dom = [
                frozenset(base[i] for i in range(len(base)) if mask >> i & 1)
                for mask in range(1 << len(base))
            ]
        domains.append(dom)
        total *= len(dom)
    if total > budget.max_width:
        raise BudgetExceeded()
    out = []
    names = [n for n, _ in free_vars]
    for combo in product(*domains):
        env = dict(zip(names, combo))
        if ctx.eval(f, env):
            out.append(env)
    return out


def register_semantic_oracle(registry, name, fn):
    """Attach a pure contract evaluator for a library predicate."""
    if name in registry:
        raise EvalError(f"oracle for {name!r} already registered")
    out = dict(registry)
    out[name] = fn
    return out


# ---------------------------------------------------------------------------
# derived eq-tables on colored trees


def _base_colors(colors):
    return frozenset(c for c in colors if c.isdigit())


def compute_eq_tables(t, max_k):
    """Bottom-up tables for the level-k subtree-equivalence predicate.

    Level 0 relates leaves with identical base colors; level k+1 additionally
    requires every child of either node to have a level-k equivalent child on
    the other side.  Runs in O(n^2 * max_k * deg^2).
    """
    if t.kind != "tree":
        raise EvalError("eq tables are defined on trees only")
    n = t.n
    base = [_base_colors(t.colors[i]) for i in range(n)]
    kids = [[] for _ in range(n)]
    for i in range(n):
        p = t.parent[i]
        if p is not None:
            kids[p].append(i)
    samecols = [[base[x] == base[y] for y in range(n)] for x in range(n)]
    leaf = [not kids[x] for x in range(n)]
    levels = []
    cur = [
        [samecols[x][y] and leaf[x] and leaf[y] for y in range(n)] for x in range(n)
    ]
    levels.append(DerivedRelationTable("eq", 0, tuple(map(tuple, cur))))
    for k in range(1, max_k + 1):
        prev = cur
        cur = [[False] * n for _ in range(n)]
        for x in range(n):
            for y in range(n):
                if not samecols[x][y]:
                    continue
                ok = True
                for u in kids[x]:
                    if not any(prev[u][v] for v in kids[y]):
                        ok = False
                        break
                if ok:
                    for u in kids[y]:
                        if not any(prev[u][v] for v in kids[x]):
                            ok = False
                            break
                cur[x][y] = ok
        levels.append(DerivedRelationTable("eq", k, tuple(map(tuple, cur))))
    return levels


# ---------------------------------------------------------------------------
# JSON plumbing for assignments and results


def assignment_from_json(s, data):
    out = {}
    pair_index = None
    for name, value in (data or {}).items():
        if isinstance(value, int):
            out[name] = value
        elif isinstance(value, list) and value and isinstance(value[0], list):
            if pair_index is None:
                if s.edge_pairs is None:
                    raise EvalError("edge-set value on a structure without edges")
                pair_index = {frozenset(p): s.n + i for i, p in enumerate(s.edge_pairs)}
            ids = set()
            for a, b in value:
                key = frozenset((a, b))
                if key not in pair_index:
                    raise EvalError(f"unknown edge {a},{b}")
                ids.add(pair_index[key])
            out[name] = frozenset(ids)
        elif isinstance(value, list):
            out[name] = frozenset(value)
        else:
            raise EvalError(f"bad assignment value for {name!r}")
    return out


def witness_to_json(s, witness):
    if witness is None:
        return None
    out = {}
    for name, value in witness.items():
        if isinstance(value, int):
            out[name] = value
        else:
            ids = sorted(value)
            if ids and s.edge_pairs is not None and ids[0] >= s.n:
                out[name] = [sorted(s.edge_pairs[i - s.n]) for i in ids]
            else:
                out[name] = ids
    return out


def result_to_json(s, result):
    return {
        "outcome": result.outcome,
        "steps": result.steps,
        "witness": witness_to_json(s, result.witness),
    }
