"""Formula ASTs for FO/MSO1/MSO2 over pluggable vocabularies.

Formulas are immutable trees.  The surface syntax is s-expressions; a few
surface conveniences (``subset``, ``=`` on sets, ``setminus`` set terms) are
desugared at parse time into element-level quantification so the core AST
stays small.  Named library predicates appear as ``lib`` nodes and are
expanded on demand from a registry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

ELEMENT = "element"
SET = "set"
EDGESET = "edgeset"

QUANTIFIER_SORTS = {
    "exists1": ELEMENT,
    "forall1": ELEMENT,
    "existsSet": SET,
    "forallSet": SET,
    "existsEdgeSet": EDGESET,
    "forallEdgeSet": EDGESET,
}
EXISTENTIALS = {"exists1", "existsSet", "existsEdgeSet"}
UNIVERSALS = {"forall1", "forallSet", "forallEdgeSet"}
CONNECTIVES = {"and", "or", "not", "implies", "iff"}

# argument sorts for the core atoms; "color" is special-cased (payload + element)
ATOM_SORTS = {
    "prec": (ELEMENT, ELEMENT),
    "edge": (ELEMENT, ELEMENT),
    "child": (ELEMENT, ELEMENT),
    "=": (ELEMENT, ELEMENT),
    "in": (ELEMENT, SET),
    "incident": (ELEMENT, ELEMENT),
    "inE": (ELEMENT, EDGESET),
}


class FormulaError(Exception):
    """Raised on malformed formula text or ill-sorted construction."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class Formula:
    kind: str
    children: tuple = ()
    var: str | None = None        # binder variable
    pred: str | None = None       # atom predicate
    color: str | None = None      # color atom payload
    lib: str | None = None        # library predicate name
    params: tuple = ()            # library parameters (ints)
    args: tuple = ()              # atom / lib argument variables

    def __repr__(self):
        return f"Formula({to_text(self)!r})"


@dataclass(frozen=True)
class Signature:
    """Vocabulary a formula is checked against.

    ``predicates`` lists the atomic predicates available (besides ``=`` and
    ``in``, which every signature has).  Edge-set quantification is only legal
    when the signature carries the incidence relation.
    """

    name: str
    predicates: frozenset
    colors: tuple = ()
    edge_sets: bool = False

    def __post_init__(self):
        if self.edge_sets and "incident" not in self.predicates:
            raise FormulaError("edge-set sort requires the incident relation")
        if len(set(self.colors)) != len(self.colors):
            raise FormulaError("color identifiers must be unique")


def word_signature(alphabet="01"):
    return Signature("word", frozenset({"prec", "color"}), tuple(alphabet))


def unary_signature():
    return Signature("unary", frozenset({"prec"}))


def graph_signature():
    return Signature("graph", frozenset({"edge"}))


def tree_signature(colors):
    return Signature("tree", frozenset({"child", "color"}), tuple(colors))


def clique_signature():
    return Signature(
        "clique", frozenset({"edge", "incident"}), edge_sets=True
    )


# ---------------------------------------------------------------------------
# constructors


def _quant(kind, var, body):
    if not isinstance(body, Formula):
        raise FormulaError(f"{kind} body must be a formula")
    return Formula(kind, children=(body,), var=var)


def ex1(var, body):
    return _quant("exists1", var, body)


def all1(var, body):
    return _quant("forall1", var, body)


def exs(var, body):
    return _quant("existsSet", var, body)


def alls(var, body):
    return _quant("forallSet", var, body)


def exes(var, body):
    return _quant("existsEdgeSet", var, body)


def alles(var, body):
    return _quant("forallEdgeSet", var, body)


def conj(*parts):
    if not parts:
        raise FormulaError("and needs at least one operand")
    return Formula("and", children=tuple(parts))


def disj(*parts):
    if not parts:
        raise FormulaError("or needs at least one operand")
    return Formula("or", children=tuple(parts))


def neg(f):
    return Formula("not", children=(f,))


def impl(a, b):
    return Formula("implies", children=(a, b))


def iff(a, b):
    return Formula("iff", children=(a, b))


def atom(pred, *args):
    return Formula("atom", pred=pred, args=tuple(args))


def a_color(color, var):
    return Formula("atom", pred="color", color=color, args=(var,))


def libcall(name, params, args):
    return Formula("lib", lib=name, params=tuple(params), args=tuple(args))


# emission helpers for the desugared surface forms; callers supply the fresh
# bound-variable name so generated trees stay deterministic

def f_subset(small, big, fresh):
    return all1(fresh, impl(atom("in", fresh, small), atom("in", fresh, big)))


def f_seteq(a, b, fresh):
    return all1(fresh, iff(atom("in", fresh, a), atom("in", fresh, b)))


def f_disjoint(a, b, fresh):
    return all1(fresh, impl(atom("in", fresh, a), neg(atom("in", fresh, b))))


def f_defset_diff(name, base, minus, fresh):
    """Pin ``name`` to ``base`` minus ``minus``, element by element."""
    return all1(
        fresh,
        iff(
            atom("in", fresh, name),
            conj(atom("in", fresh, base), neg(atom("in", fresh, minus))),
        ),
    )


def f_nonempty(name, fresh):
    return ex1(fresh, atom("in", fresh, name))


# ---------------------------------------------------------------------------
# s-expression reader


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append((c, i))
            i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i:
                raise FormulaError(f"unexpected character {c!r}", i)
            tokens.append((text[i:j], i))
            i = j
    return tokens


class _Reader:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, -1)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise FormulaError("unexpected end of input", tok[1])
        self.pos += 1
        return tok

    def read(self):
        tok, at = self.next()
        if tok == ")":
            raise FormulaError("unexpected ')'", at)
        if tok != "(":
            return tok, at
        items = []
        while True:
            nxt, nat = self.peek()
            if nxt is None:
                raise FormulaError("missing ')'", at)
            if nxt == ")":
                self.next()
                return items, at
            items.append(self.read())


def _is_atom(node):
    return isinstance(node[0], str)


class _Parser:
    """Turns read s-expressions into sorted core formulas."""

    def __init__(self, sig, registry):
        self.sig = sig
        self.registry = registry
        self.fresh = 0
        self.free = {}

    def gensym(self):
        name = f"_d{self.fresh}"
        self.fresh += 1
        return name

    def parse(self, node, env):
        if _is_atom(node):
            raise FormulaError("expected a formula", node[1])
        items, at = node
        if not items:
            raise FormulaError("empty form", at)
        if not _is_atom(items[0]):
            raise FormulaError("operator must be an identifier", at)
        head, hat = items[0]
        rest = items[1:]
        if head in QUANTIFIER_SORTS:
            if len(rest) != 2 or not _is_atom(rest[0]):
                raise FormulaError(f"{head} needs a variable and a body", at)
            var, vat = rest[0]
            if var.isdigit():
                raise FormulaError("all-digit variable names are reserved", vat)
            sort = QUANTIFIER_SORTS[head]
            if sort == EDGESET and not self.sig.edge_sets:
                raise FormulaError("edge-set quantifier outside MSO2", at)
            inner = dict(env)
            inner[var] = sort
            return _quant(head, var, self.parse(rest[1], inner))
        if head == "and" or head == "or":
            if not rest:
                raise FormulaError(f"{head} needs operands", at)
            return Formula(head, children=tuple(self.parse(r, env) for r in rest))
        if head == "not":
            if len(rest) != 1:
                raise FormulaError("not takes one operand", at)
            return neg(self.parse(rest[0], env))
        if head in ("implies", "iff"):
            if len(rest) != 2:
                raise FormulaError(f"{head} takes two operands", at)
            return Formula(head, children=(self.parse(rest[0], env), self.parse(rest[1], env)))
        if head == "color":
            if len(rest) != 2 or not _is_atom(rest[0]) or not _is_atom(rest[1]):
                raise FormulaError("color takes a color id and a variable", at)
            if "color" not in self.sig.predicates:
                raise FormulaError(f"unknown predicate 'color' in signature {self.sig.name}", at)
            cid = rest[0][0]
            if cid not in self.sig.colors:
                raise FormulaError(f"unknown color {cid!r}", rest[0][1])
            v = self.var(rest[1], ELEMENT, env)
            return a_color(cid, v)
        if head == "lib":
            return self.parse_lib(rest, env, at)
        if head == "subset":
            a = self.set_term(rest[0], env)
            b = self.set_term(rest[1], env)
            return self.with_terms([a, b], env, lambda vs: f_subset(vs[0], vs[1], self.gensym()))
        if head == "=":
            # element equality, or set equality desugared to an iff
            sort_a = self.term_sort(rest[0], env)
            if sort_a == SET:
                a = self.set_term(rest[0], env)
                b = self.set_term(rest[1], env)
                return self.with_terms([a, b], env, lambda vs: f_seteq(vs[0], vs[1], self.gensym()))
            x = self.var(rest[0], ELEMENT, env)
            y = self.var(rest[1], ELEMENT, env)
            return atom("=", x, y)
        if head == "in":
            if len(rest) != 2:
                raise FormulaError("in takes an element and a set", at)
            x = self.var(rest[0], ELEMENT, env)
            term = self.set_term(rest[1], env)
            return self.membership(x, term)
        if head in ATOM_SORTS:
            if head not in self.sig.predicates and head not in ("=", "in", "inE"):
                raise FormulaError(f"unknown predicate {head!r} in signature {self.sig.name}", at)
            if head == "inE" and not self.sig.edge_sets:
                raise FormulaError("inE outside MSO2", at)
            sorts = ATOM_SORTS[head]
            if len(rest) != len(sorts):
                raise FormulaError(f"{head} takes {len(sorts)} arguments", at)
            vals = [self.var(r, s, env) for r, s in zip(rest, sorts)]
            return atom(head, *vals)
        raise FormulaError(f"unknown predicate {head!r}", hat)

    def parse_lib(self, rest, env, at):
        if not rest or not _is_atom(rest[0]):
            raise FormulaError("lib needs a name", at)
        name = rest[0][0]
        params = []
        idx = 1
        while idx < len(rest) and _is_atom(rest[idx]) and rest[idx][0].isdigit():
            params.append(int(rest[idx][0]))
            idx += 1
        terms = []
        for item in rest[idx:]:
            terms.append(self.any_term(item, env))
        if self.registry is not None:
            definition = self.registry.get(name)
            if definition is None:
                raise FormulaError(f"unknown library predicate {name!r}", at)
            if len(terms) != len(definition.arg_sorts):
                raise FormulaError(f"lib {name} takes {len(definition.arg_sorts)} arguments", at)
            for t, want in zip(terms, definition.arg_sorts):
                got = t[1] if isinstance(t, tuple) else SET
                if got != want:
                    raise FormulaError(f"lib {name}: argument sort mismatch", at)
        simple = [t[0] if isinstance(t, tuple) else t for t in terms]
        diffs = [t for t in terms if not isinstance(t, tuple)]
        if not diffs:
            return libcall(name, params, simple)
        # set-difference arguments get a fresh defined set in front of the call
        body_args = []
        wrappers = []
        for t in terms:
            if isinstance(t, tuple):
                body_args.append(t[0])
            else:
                fresh = self.gensym()
                wrappers.append((fresh, t))
                body_args.append(fresh)
        out = libcall(name, params, body_args)
        for fresh, term in reversed(wrappers):
            out = exs(fresh, conj(self.defining(fresh, term), out))
        return out

    def defining(self, name, term):
        base, minus = term
        return f_defset_diff(name, base, minus, self.gensym())

    def with_terms(self, terms, env, build):
        """Bind any setminus terms to fresh defined sets, then build."""
        names = []
        wrappers = []
        for t in terms:
            if isinstance(t, tuple):
                names.append(t[0])
            else:
                fresh = self.gensym()
                wrappers.append((fresh, t))
                names.append(fresh)
        out = build(names)
        for fresh, term in reversed(wrappers):
            out = exs(fresh, conj(self.defining(fresh, term), out))
        return out

    def membership(self, x, term):
        if isinstance(term, tuple):
            return atom("in", x, term[0])
        base, minus = term
        inner = self.membership(x, base)
        return conj(inner, neg(self.membership(x, minus)))

    def term_sort(self, node, env):
        if not _is_atom(node):
            return SET
        name = node[0]
        return env.get(name) or self.free.get(name) or ELEMENT

    def set_term(self, node, env):
        """A set variable ``(name, SET)`` or a difference ``(base, minus)``."""
        if not _is_atom(node):
            items, at = node
            if not items or not _is_atom(items[0]) or items[0][0] != "setminus":
                raise FormulaError("expected a set variable or (setminus A B)", at)
            if len(items) != 3:
                raise FormulaError("setminus takes two sets", at)
            return (self.set_term(items[1], env), self.set_term(items[2], env))
        return (self.var(node, SET, env), SET)

    def any_term(self, node, env):
        if not _is_atom(node):
            return self.set_term(node, env)
        name, at = node
        sort = env.get(name) or self.free.get(name)
        if sort is None:
            sort = ELEMENT if name[:1].islower() or name[:1] == "_" else SET
            # free variable: fix the sort on first use
            self.free[name] = sort
        return (name, sort)

    def var(self, node, sort, env):
        if not _is_atom(node):
            raise FormulaError("expected a variable", node[1])
        name, at = node
        if name.isdigit():
            raise FormulaError("all-digit variable names are reserved", at)
        bound = env.get(name)
        if bound is not None:
            if bound != sort:
                raise FormulaError(f"sort mismatch for {name}: {bound} used as {sort}", at)
            return name
        seen = self.free.get(name)
        if seen is not None and seen != sort:
            raise FormulaError(f"sort mismatch for free variable {name}", at)
        self.free[name] = sort
        return name


def parse_formula(text, sig, registry=None):
    """Parse formula text against ``sig``; returns the core AST.

    Free variables (with inferred sorts) are available afterwards through
    :func:`free_variables`.
    """
    tokens = _tokenize(text)
    reader = _Reader(tokens)
    node = reader.read()
    if reader.peek()[0] is not None:
        raise FormulaError("trailing input", reader.peek()[1])
    parser = _Parser(sig, registry)
    return parser.parse(node, {})


def to_text(f):
    """Render a core formula back to s-expression text."""
    k = f.kind
    if k in QUANTIFIER_SORTS:
        return f"({k} {f.var} {to_text(f.children[0])})"
    if k in CONNECTIVES:
        return "(" + " ".join([k] + [to_text(c) for c in f.children]) + ")"
    if k == "atom":
        if f.pred == "color":
            return f"(color {f.color} {f.args[0]})"
        return "(" + " ".join([f.pred] + list(f.args)) + ")"
    if k == "lib":
        parts = [str(p) for p in f.params] + list(f.args)
        return "(" + " ".join(["lib", f.lib] + parts) + ")"
    raise FormulaError(f"unknown node kind {k!r}")


# ---------------------------------------------------------------------------
# inspection


def free_variables(f):
    """Map of free variable name -> sort."""
    out = {}

    def walk(node, bound):
        if node.kind in QUANTIFIER_SORTS:
            walk(node.children[0], {**bound, node.var: QUANTIFIER_SORTS[node.kind]})
            return
        if node.kind == "atom":
            sorts = (ELEMENT,) if node.pred == "color" else ATOM_SORTS[node.pred]
            for a, s in zip(node.args, sorts):
                if a not in bound:
                    out.setdefault(a, s)
            return
        if node.kind == "lib":
            for a in node.args:
                if a not in bound:
                    out.setdefault(a, None)
            return
        for c in node.children:
            walk(c, bound)

    walk(f, {})
    return out


@dataclass(frozen=True)
class Metrics:
    size: int
    first_order_quantifiers: int
    set_quantifiers: int
    edge_set_quantifiers: int
    quantifier_depth: int


def formula_metrics(f, registry=None, expand=False):
    """Node counts and quantifier statistics.

    With ``expand`` set, library calls are unfolded through ``registry``
    first; otherwise each lib node counts as a single node.
    """
    if expand:
        f = expand_lib(f, registry)

    def walk(node):
        if node.kind in QUANTIFIER_SORTS:
            size, fo, so, eo, depth = walk(node.children[0])
            sort = QUANTIFIER_SORTS[node.kind]
            return (
                size + 1,
                fo + (sort == ELEMENT),
                so + (sort == SET),
                eo + (sort == EDGESET),
                depth + 1,
            )
        size, fo, so, eo, depth = 1, 0, 0, 0, 0
        for c in node.children:
            s2, f2, s3, e2, d2 = walk(c)
            size += s2
            fo += f2
            so += s3
            eo += e2
            depth = max(depth, d2)
        return size, fo, so, eo, depth

    size, fo, so, eo, depth = walk(f)
    return Metrics(size, fo, so, eo, depth)


def validate(f, sig, registry=None):
    """Well-sortedness violations, each tagged with the offending node path."""
    issues = []

    def report(path, msg):
        issues.append(f"{'/'.join(map(str, path)) or 'root'}: {msg}")

    def walk(node, env, path):
        k = node.kind
        if k in QUANTIFIER_SORTS:
            sort = QUANTIFIER_SORTS[k]
            if sort == EDGESET and not sig.edge_sets:
                report(path, "edge-set quantifier outside MSO2")
            walk(node.children[0], {**env, node.var: sort}, path + [0])
            return
        if k in CONNECTIVES:
            if k == "not" and len(node.children) != 1:
                report(path, "not takes one operand")
            if k in ("implies", "iff") and len(node.children) != 2:
                report(path, f"{k} takes two operands")
            for i, c in enumerate(node.children):
                walk(c, env, path + [i])
            return
        if k == "atom":
            pred = node.pred
            if pred == "color":
                if "color" not in sig.predicates:
                    report(path, "color atom outside a colored signature")
                elif node.color not in sig.colors:
                    report(path, f"unknown color {node.color!r}")
                sorts = (ELEMENT,)
            else:
                if pred not in ATOM_SORTS:
                    report(path, f"unknown predicate {pred!r}")
                    return
                if pred not in sig.predicates and pred not in ("=", "in", "inE"):
                    report(path, f"predicate {pred!r} absent from signature {sig.name}")
                if pred == "inE" and not sig.edge_sets:
                    report(path, "inE outside MSO2")
                sorts = ATOM_SORTS[pred]
            if len(node.args) != len(sorts):
                report(path, f"{pred} arity mismatch")
                return
            for a, s in zip(node.args, sorts):
                have = env.get(a)
                if have is None:
                    report(path, f"unbound variable {a}")
                elif have != s:
                    report(path, f"variable {a} has sort {have}, expected {s}")
            return
        if k == "lib":
            if registry is not None:
                definition = registry.get(node.lib)
                if definition is None:
                    report(path, f"unknown library predicate {node.lib!r}")
                    return
                if len(node.args) != len(definition.arg_sorts):
                    report(path, f"lib {node.lib} arity mismatch")
                    return
                for a, s in zip(node.args, definition.arg_sorts):
                    have = env.get(a)
                    if have is None:
                        report(path, f"unbound variable {a}")
                    elif have != s:
                        report(path, f"variable {a} has sort {have}, expected {s}")
            else:
                for a in node.args:
                    if a not in env:
                        report(path, f"unbound variable {a}")
            return
        report(path, f"unknown node kind {k!r}")

    free = free_variables(f)
    env = {name: sort or SET for name, sort in free.items()}
    walk(f, env, [])
    return issues


def is_first_order(f):
    m = formula_metrics(f)
    return m.set_quantifiers == 0 and m.edge_set_quantifiers == 0


# ---------------------------------------------------------------------------
# library registry and expansion


@dataclass(frozen=True)
class LibDef:
    """A named sub-formula: formal arguments plus a body generator.

    ``generate(params)`` must return a formula whose free variables are
    exactly ``formals``; the oracle, when present, decides the predicate
    directly on a structure (see the evaluator).
    """

    name: str
    arg_sorts: tuple
    formals: tuple
    generate: object
    oracle: object = None


class LibRegistry:
    def __init__(self):
        self._defs = {}

    def register(self, libdef):
        if libdef.name in self._defs:
            raise FormulaError(f"library predicate {libdef.name!r} already registered")
        self._defs[libdef.name] = libdef

    def get(self, name):
        return self._defs.get(name)

    def names(self):
        return sorted(self._defs)


def _rename(f, mapping):
    """Capture-free variable renaming; binders shadow the mapping."""
    k = f.kind
    if k in QUANTIFIER_SORTS:
        inner = {a: b for a, b in mapping.items() if a != f.var}
        return replace(f, children=(_rename(f.children[0], inner),))
    if k == "atom" or k == "lib":
        return replace(f, args=tuple(mapping.get(a, a) for a in f.args))
    if f.children:
        return replace(f, children=tuple(_rename(c, mapping) for c in f.children))
    return f


class _Expander:
    def __init__(self, registry, stop):
        self.registry = registry
        self.stop = stop
        self.fresh = 0

    def freshen(self, f):
        """Rename every bound variable in ``f`` to a fresh name."""
        k = f.kind
        if k in QUANTIFIER_SORTS:
            new = f"_e{self.fresh}"
            self.fresh += 1
            body = _rename(f.children[0], {f.var: new})
            return replace(f, var=new, children=(self.freshen(body),))
        if f.children:
            return replace(f, children=tuple(self.freshen(c) for c in f.children))
        return f

    def expand(self, f, stack):
        if f.kind == "lib" and f.lib not in self.stop:
            key = (f.lib, f.params)
            if key in stack:
                raise FormulaError(f"cyclic library definition through {f.lib!r}")
            definition = self.registry.get(f.lib) if self.registry else None
            if definition is None:
                raise FormulaError(f"unknown library predicate {f.lib!r}")
            body = definition.generate(f.params)
            body = self.freshen(body)
            body = _rename(body, dict(zip(definition.formals, f.args)))
            return self.expand(body, stack | {key})
        if f.children:
            return replace(f, children=tuple(self.expand(c, stack) for c in f.children))
        return f


def expand_lib(f, registry, stop=frozenset()):
    """Unfold library calls into a lib-free formula.

    ``stop`` names predicates to leave in place (used by the growth bench to
    count recursion fan-out one level at a time).
    """
    return _Expander(registry, stop).expand(f, frozenset())
