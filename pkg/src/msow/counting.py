"""Counting and arithmetic predicates over ordered sets.

Each predicate bundles a syntactic generator (an MSO formula family over the
word vocabulary), a pure cardinality contract, and a direct automaton
builder.  Guaranteed-complete cardinality ranges live in the capacity ledger:

    cap_eq(0) = 4          cap_eq(d+1) = cap_eq(d) * 2 ** cap_eq(d)

The generated equality formula is sound everywhere (true implies equal
cardinalities) and complete within its ledger capacity; the other predicates
inherit their capacity from the equality levels they use.

A handful of places repair formal slips in the classical write-up of these
formulas (membership constraints on first/last markers, an orientation guard
on section adjacency, a subset constraint on root representatives); each
repair is the reading the construction's prose demands, and the exhaustive
suites below pin the behavior.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product

from . import evaluate as ev
from . import logic
from .logic import (
    ELEMENT,
    SET,
    LibDef,
    LibRegistry,
    a_color,
    all1,
    alls,
    atom,
    conj,
    disj,
    ex1,
    exs,
    f_defset_diff,
    f_subset,
    iff,
    impl,
    libcall,
    neg,
)

CAP_BASE = 4

_caps = [CAP_BASE]


def cap_eq(d):
    """Exact equality capacity at recursion depth ``d`` (a Python int)."""
    while len(_caps) <= d:
        c = _caps[-1]
        _caps.append(c * 2**c)
    return _caps[d]


def capacity_at_least(d, value):
    """Does cap_eq(d) reach ``value``?  Never materializes towering caps."""
    c = CAP_BASE
    for _ in range(d):
        if c >= max(int(value).bit_length(), 1):
            return True
        c = c * 2**c
    return c >= value


def eq_depth_for(value):
    """Smallest depth whose capacity covers ``value``."""
    d = 0
    while not capacity_at_least(d, value):
        d += 1
    return d


# ---------------------------------------------------------------------------
# cardinality contracts


def contract_eq(d, a, b):
    return a == b and capacity_at_least(d, a)


def contract_double(d, a, b):
    return b == 2 * a and capacity_at_least(d, a)


def contract_exp(d, a, b):
    return a >= 2 and b == 2**a and capacity_at_least(d, 2 ** (a - 2))


def contract_div(d, a, b):
    return b == 0 or (1 <= a and capacity_at_least(d, a) and b % a == 0)


def contract_less(d, a, b):
    return a < b and capacity_at_least(d, b)


def contract_mod(d, a, b, r):
    return 1 <= a and capacity_at_least(d, a) and r < a and r <= b and (b - r) % a == 0


def contract_root(k, d, a, b):
    return b == a**k and capacity_at_least(d, a ** (k // 2))


# ---------------------------------------------------------------------------
# base equality: pure first-order enumeration up to the base capacity


def _distinct_members(host, names, inner):
    """exists names, all distinct, all in host, then ``inner``."""
    out = inner
    for i in reversed(range(len(names))):
        parts = [atom("in", names[i], host)]
        parts += [neg(atom("=", names[i], names[j])) for j in range(i)]
        parts.append(out)
        out = ex1(names[i], conj(*parts))
    return out


def _at_most(host, k):
    names = [f"m{i}" for i in range(k + 1)]
    witness = _distinct_members(host, names, atom("=", names[0], names[0]))
    return neg(witness)


def _exactly(host, k):
    if k == 0:
        return neg(ex1("t", atom("in", "t", host)))
    names = [f"x{i}" for i in range(k)]
    closure = all1(
        "y",
        impl(
            atom("in", "y", host),
            disj(*[atom("=", "y", nm) for nm in names]),
        ),
    )
    return _distinct_members(host, names, closure)


def gen_eq_base():
    """Equality of set sizes up to the base capacity, in plain FO."""
    cases = [conj(_exactly("P1", k), _exactly("P2", k)) for k in range(CAP_BASE + 1)]
    return conj(_at_most("P1", CAP_BASE), _at_most("P2", CAP_BASE), disj(*cases))


# ---------------------------------------------------------------------------
# structural sub-formulas: sections, adjacency, counter steps


def gen_consec():
    # S is contiguous inside U: no U-element lies strictly between two S-elements
    return all1(
        "cx",
        impl(
            atom("in", "cx", "S"),
            all1(
                "cy",
                impl(
                    atom("in", "cy", "S"),
                    all1(
                        "cz",
                        impl(
                            conj(
                                atom("in", "cz", "U"),
                                atom("prec", "cx", "cz"),
                                atom("prec", "cz", "cy"),
                            ),
                            atom("in", "cz", "S"),
                        ),
                    ),
                ),
            ),
        ),
    )


def gen_partsection():
    uniform = all1(
        "px",
        impl(
            atom("in", "px", "S"),
            all1(
                "py",
                impl(
                    atom("in", "py", "S"),
                    iff(atom("in", "px", "P"), atom("in", "py", "P")),
                ),
            ),
        ),
    )
    return conj(f_subset("S", "U", "pt"), libcall("consec", (), ("S", "U")), uniform)


def gen_section():
    # maximal partial section: no strictly larger partial section contains S
    maximal = alls(
        "S2",
        impl(
            conj(
                f_subset("S", "S2", "st"),
                libcall("partsection", (), ("S2", "U", "P")),
            ),
            all1("se", iff(atom("in", "se", "S2"), atom("in", "se", "S"))),
        ),
    )
    return conj(libcall("partsection", (), ("S", "U", "P")), maximal)


def gen_adj():
    # the last element of S1 immediately precedes the first element of S2;
    # the explicit (prec ax ay) pins the orientation
    return ex1(
        "ax",
        conj(
            atom("in", "ax", "S1"),
            ex1(
                "ay",
                conj(
                    atom("in", "ay", "S2"),
                    atom("prec", "ax", "ay"),
                    all1(
                        "az",
                        impl(
                            atom("in", "az", "U"),
                            disj(
                                atom("prec", "az", "ax"),
                                atom("prec", "ay", "az"),
                                atom("=", "az", "ax"),
                                atom("=", "az", "ay"),
                            ),
                        ),
                    ),
                ),
            ),
        ),
    )


def _is_first(var, host):
    return all1(
        "ff", impl(atom("in", "ff", host), disj(atom("prec", var, "ff"), atom("=", var, "ff")))
    )


def _is_last_member(var, host):
    return conj(
        atom("in", var, host),
        all1(
            "fl",
            impl(atom("in", "fl", host), disj(atom("prec", "fl", var), atom("=", "fl", var))),
        ),
    )


def gen_same(d):
    """Equal binary digits on two marked runs, read through B1/B2.

    Every pair of equal-length prefixes must agree on the digit carried by
    its last element.
    """
    prefix1 = conj(
        atom("in", "f1", "S1L"),
        f_subset("S1L", "S1", "sp"),
        libcall("consec", (), ("S1L", "S1")),
    )
    prefix2 = conj(
        atom("in", "f2", "S2L"),
        f_subset("S2L", "S2", "sq"),
        libcall("consec", (), ("S2L", "S2")),
        libcall("eq", (d,), ("S1L", "S2L")),
    )
    digits = ex1(
        "l1",
        conj(
            _is_last_member("l1", "S1L"),
            ex1(
                "l2",
                conj(
                    _is_last_member("l2", "S2L"),
                    iff(atom("in", "l1", "B1"), atom("in", "l2", "B2")),
                ),
            ),
        ),
    )
    return ex1(
        "f1",
        conj(
            _is_first("f1", "S1"),
            ex1(
                "f2",
                conj(
                    _is_first("f2", "S2"),
                    alls("S1L", impl(prefix1, alls("S2L", impl(prefix2, digits)))),
                ),
            ),
        ),
    )


def gen_next(d):
    """S2's counter value is one above S1's: flip the pivot digit, ones below
    become zeros, digits above stay equal."""
    def covered(host, left, pivot, right):
        return all1(
            "nc",
            impl(
                atom("in", "nc", host),
                disj(
                    atom("in", "nc", left),
                    atom("=", "nc", pivot),
                    atom("in", "nc", right),
                ),
            ),
        )

    side2 = ex1(
        "n2",
        conj(
            atom("in", "n2", "S2"),
            atom("in", "n2", "B"),
            exs(
                "S2L",
                conj(
                    f_subset("S2L", "S2", "na"),
                    all1("nx", impl(atom("in", "nx", "S2L"), atom("prec", "nx", "n2"))),
                    exs(
                        "S2R",
                        conj(
                            f_subset("S2R", "S2", "nb"),
                            all1("ny", impl(atom("in", "ny", "S2R"), atom("prec", "n2", "ny"))),
                            covered("S2", "S2L", "n2", "S2R"),
                            all1("nz", impl(atom("in", "nz", "S2R"), neg(atom("in", "nz", "B")))),
                            libcall("eq", (d,), ("S1R", "S2R")),
                            libcall("same", (d,), ("S1L", "S2L", "B", "B")),
                        ),
                    ),
                ),
            ),
        ),
    )
    return ex1(
        "n1",
        conj(
            atom("in", "n1", "S1"),
            neg(atom("in", "n1", "B")),
            exs(
                "S1L",
                conj(
                    f_subset("S1L", "S1", "nd"),
                    all1("nu", impl(atom("in", "nu", "S1L"), atom("prec", "nu", "n1"))),
                    exs(
                        "S1R",
                        conj(
                            f_subset("S1R", "S1", "ne"),
                            all1("nv", impl(atom("in", "nv", "S1R"), atom("prec", "n1", "nv"))),
                            covered("S1", "S1L", "n1", "S1R"),
                            f_subset("S1R", "B", "nf"),
                            side2,
                        ),
                    ),
                ),
            ),
        ),
    )


# ---------------------------------------------------------------------------
# the recursive equality construction


def _last_section(var, host, marks):
    other = alls(
        "SO",
        impl(
            conj(
                libcall("section", (), ("SO", host, marks)),
                all1("lo", impl(atom("in", "lo", "SO"), neg(atom("in", "lo", var)))),
            ),
            ex1(
                "lx",
                conj(
                    atom("in", "lx", "SO"),
                    ex1("ly", conj(atom("in", "ly", var), atom("prec", "lx", "ly"))),
                ),
            ),
        ),
    )
    return conj(libcall("section", (), (var, host, marks)), other)


def _matrix_eq(d):
    """The section/counter matrix of the recursive equality formula, with
    Q1,Q2,R1,R2,B1,B2 free."""
    cross = alls(
        "SA",
        impl(
            libcall("section", (), ("SA", "U1", "Q1")),
            alls(
                "SB",
                impl(
                    libcall("section", (), ("SB", "U2", "Q2")),
                    libcall("eq", (d - 1,), ("SA", "SB")),
                ),
            ),
        ),
    )
    last_same = exs(
        "S1F",
        conj(
            _last_section("S1F", "U1", "Q1"),
            exs(
                "S2F",
                conj(
                    _last_section("S2F", "U2", "Q2"),
                    libcall("same", (d - 1,), ("S1F", "S2F", "B1", "B2")),
                ),
            ),
        ),
    )

    def chain(host, marks, bits):
        return alls(
            "SC",
            impl(
                libcall("section", (), ("SC", host, marks)),
                alls(
                    "SD",
                    impl(
                        conj(
                            libcall("section", (), ("SD", host, marks)),
                            all1(
                                "cd",
                                impl(atom("in", "cd", "SC"), neg(atom("in", "cd", "SD"))),
                            ),
                            libcall("adj", (), ("SC", "SD", host)),
                        ),
                        libcall("next", (d - 1,), ("SC", "SD", bits)),
                    ),
                ),
            ),
        )

    def no_overflow(host, marks, bits):
        return alls(
            "SE",
            impl(
                libcall("section", (), ("SE", host, marks)),
                ex1("oe", conj(atom("in", "oe", "SE"), neg(atom("in", "oe", bits)))),
            ),
        )

    def zero_start(host, marks, bits):
        return exs(
            "SZ",
            conj(
                libcall("section", (), ("SZ", host, marks)),
                all1("ze", impl(atom("in", "ze", "SZ"), neg(atom("in", "ze", bits)))),
            ),
        )

    body = conj(
        cross,
        last_same,
        chain("U1", "Q1", "B1"),
        chain("U2", "Q2", "B2"),
        no_overflow("U1", "Q1", "B1"),
        no_overflow("U2", "Q2", "B2"),
        zero_start("U1", "Q1", "B1"),
        zero_start("U2", "Q2", "B2"),
    )
    return exs(
        "U1",
        conj(
            f_defset_diff("U1", "P1", "R1", "du"),
            exs("U2", conj(f_defset_diff("U2", "P2", "R2", "dv"), body)),
        ),
    )


EQ_WITNESS_VARS = ("Q1", "Q2", "R1", "R2", "B1", "B2")


def gen_eq(d):
    """Set-size equality, complete up to cap_eq(d), sound everywhere.

    Depth 0 is the first-order base; each further depth removes matched
    remainders, cuts both sets into equal sections, and compares section
    counts with a binary counter written on the sections.  A small-size
    escape disjunct keeps sets below one section (including empty sets)
    inside the guarantee.
    """
    if d == 0:
        return gen_eq_base()
    core = _matrix_eq(d)
    core = exs("B2", conj(f_subset("B2", "P2", "gb"), core))
    core = exs("B1", conj(f_subset("B1", "P1", "ga"), core))
    core = exs(
        "R2",
        conj(f_subset("R2", "P2", "gr"), libcall("eq", (d - 1,), ("R1", "R2")), core),
    )
    core = exs("R1", conj(f_subset("R1", "P1", "gq"), core))
    core = exs("Q2", conj(f_subset("Q2", "P2", "gp"), core))
    core = exs("Q1", conj(f_subset("Q1", "P1", "go"), core))
    return disj(libcall("eq", (d - 1,), ("P1", "P2")), core)


# ---------------------------------------------------------------------------
# arithmetic built on equality


def gen_double(d):
    return exs(
        "DS",
        conj(
            f_subset("DS", "S2", "dt"),
            libcall("eq", (d,), ("S1", "DS")),
            exs(
                "DC",
                conj(f_defset_diff("DC", "S2", "DS", "dw"), libcall("eq", (d,), ("S1", "DC"))),
            ),
        ),
    )


def gen_ddist(d):
    """The block [y,z) is twice the block [x,y), measured inside U."""
    def interval(name, lo, hi):
        return all1(
            "iv",
            iff(
                atom("in", "iv", name),
                conj(
                    atom("in", "iv", "U"),
                    disj(atom("prec", lo, "iv"), atom("=", lo, "iv")),
                    atom("prec", "iv", hi),
                ),
            ),
        )

    return exs(
        "D1",
        conj(
            interval("D1", "x", "y"),
            exs(
                "D2",
                conj(interval("D2", "y", "z"), libcall("double", (d,), ("D1", "D2"))),
            ),
        ),
    )


def gen_exp(d):
    """|P2| = 2^|P1| via markers whose consecutive distances double."""
    boundary = all1(
        "eu",
        impl(
            atom("in", "eu", "P2"),
            conj(
                disj(atom("prec", "eu", "el"), atom("=", "eu", "el")),
                disj(
                    atom("prec", "es", "eu"),
                    atom("=", "es", "eu"),
                    atom("=", "ef", "eu"),
                ),
            ),
        ),
    )
    triple = all1(
        "tx",
        impl(
            atom("in", "tx", "Q"),
            all1(
                "ty",
                impl(
                    conj(atom("in", "ty", "Q"), atom("prec", "tx", "ty")),
                    all1(
                        "tz",
                        impl(
                            conj(
                                atom("in", "tz", "Q"),
                                atom("prec", "ty", "tz"),
                                neg(
                                    ex1(
                                        "tu",
                                        conj(
                                            atom("in", "tu", "Q"),
                                            disj(
                                                conj(
                                                    atom("prec", "tx", "tu"),
                                                    atom("prec", "tu", "ty"),
                                                ),
                                                conj(
                                                    atom("prec", "ty", "tu"),
                                                    atom("prec", "tu", "tz"),
                                                ),
                                            ),
                                        ),
                                    )
                                ),
                            ),
                            libcall("ddist", (d,), ("tx", "ty", "tz", "P2")),
                        ),
                    ),
                ),
            ),
        ),
    )
    marked_size = exs(
        "QL",
        conj(
            all1(
                "qt",
                iff(
                    atom("in", "qt", "QL"),
                    conj(atom("in", "qt", "Q"), neg(atom("=", "qt", "el"))),
                ),
            ),
            libcall("eq", (d,), ("P1", "QL")),
        ),
    )
    return exs(
        "Q",
        conj(
            f_subset("Q", "P2", "eb"),
            ex1(
                "ef",
                conj(
                    atom("in", "ef", "Q"),
                    ex1(
                        "es",
                        conj(
                            atom("in", "es", "Q"),
                            atom("prec", "ef", "es"),
                            ex1(
                                "el",
                                conj(
                                    atom("in", "el", "Q"),
                                    atom("prec", "es", "el"),
                                    boundary,
                                    marked_size,
                                    triple,
                                ),
                            ),
                        ),
                    ),
                ),
            ),
        ),
    )


def gen_root(k, d):
    """|P2| = |P1|^k for k a power of two, by halving the exponent."""
    if k < 2 or k & (k - 1):
        raise logic.FormulaError("root exponent must be a power of two >= 2")
    if k == 2:
        sections_match = alls(
            "RS",
            impl(
                libcall("section", (), ("RS", "P2", "RQ")),
                libcall("eq", (d,), ("RS", "P1")),
            ),
        )
        one_rep = alls(
            "RT",
            impl(
                libcall("section", (), ("RT", "P2", "RQ")),
                ex1(
                    "rt",
                    conj(
                        atom("in", "rt", "RT"),
                        atom("in", "rt", "RP"),
                        all1(
                            "ru",
                            impl(
                                conj(atom("in", "ru", "RT"), atom("in", "ru", "RP")),
                                atom("=", "ru", "rt"),
                            ),
                        ),
                    ),
                ),
            ),
        )
        reps = exs(
            "RP",
            conj(f_subset("RP", "P2", "rr"), libcall("eq", (d,), ("RP", "P1")), one_rep),
        )
        return exs("RQ", conj(f_subset("RQ", "P2", "rq"), sections_match, reps))
    return exs(
        "RH",
        conj(
            f_subset("RH", "P2", "rh"),
            libcall("root", (2, d), ("RH", "P2")),
            libcall("root", (k // 2, d), ("P1", "RH")),
        ),
    )


def gen_div(d):
    return exs(
        "DQ",
        conj(
            f_subset("DQ", "P2", "dq"),
            alls(
                "DS",
                impl(
                    libcall("section", (), ("DS", "P2", "DQ")),
                    libcall("eq", (d,), ("DS", "P1")),
                ),
            ),
        ),
    )


def gen_less(d):
    return exs(
        "LS",
        conj(
            f_subset("P1", "LS", "lt"),
            ex1("lw", conj(atom("in", "lw", "LS"), neg(atom("in", "lw", "P1")))),
            libcall("eq", (d,), ("LS", "P2")),
        ),
    )


def gen_mod(d):
    return exs(
        "MS",
        conj(
            f_subset("MS", "P2", "mt"),
            libcall("eq", (d,), ("MS", "R")),
            libcall("less", (d,), ("R", "P1")),
            exs(
                "MD",
                conj(f_defset_diff("MD", "P2", "MS", "mu"), libcall("div", (d,), ("P1", "MD"))),
            ),
        ),
    )


def gen_double_ddist(d):
    return {"double": gen_double(d), "ddist": gen_ddist(d)}


# ---------------------------------------------------------------------------
# semantic oracles (independent of the formulas)


def _ordered(s, xs):
    if s.order is not None:
        return sorted(xs, key=lambda v: s.order[v])
    return sorted(xs)


def _sections_of(s, host, marks):
    out, run, flag = [], [], None
    for v in _ordered(s, host):
        f = v in marks
        if flag is None or f == flag:
            run.append(v)
        else:
            out.append(run)
            run = [v]
        flag = f
    if run:
        out.append(run)
    return out


def oracle_consec(s, params, values):
    sub, host = values
    ordered = _ordered(s, sub)
    if len(ordered) <= 1:
        return True
    lo, hi = ordered[0], ordered[-1]
    key = (lambda v: s.order[v]) if s.order is not None else (lambda v: v)
    return all(
        not (key(lo) < key(z) < key(hi)) or z in sub for z in host
    )


def oracle_partsection(s, params, values):
    sub, host, marks = values
    if not sub <= host:
        return False
    if not oracle_consec(s, params, [sub, host]):
        return False
    flags = {v in marks for v in sub}
    return len(flags) <= 1


def oracle_section(s, params, values):
    sub, host, marks = values
    return any(sub == set(sec) or sub == frozenset(sec) for sec in _sections_of(s, host, marks))


def oracle_adj(s, params, values):
    s1, s2, host = values
    if not s1 or not s2:
        return False
    o1, o2 = _ordered(s, s1), _ordered(s, s2)
    key = (lambda v: s.order[v]) if s.order is not None else (lambda v: v)
    x, y = o1[-1], o2[0]
    if not key(x) < key(y):
        return False
    return all(not (key(x) < key(z) < key(y)) for z in host)


def _prefix_digits_agree(s, d, s1, s2, b1, b2):
    o1, o2 = _ordered(s, s1), _ordered(s, s2)
    limit = min(len(o1), len(o2))
    for k in range(1, limit + 1):
        if not capacity_at_least(d, k):
            break
        if (o1[k - 1] in b1) != (o2[k - 1] in b2):
            return False
    return True


def oracle_same(s, params, values):
    (d,) = params
    s1, s2, b1, b2 = values
    return _prefix_digits_agree(s, d, s1, s2, b1, b2)


def oracle_next(s, params, values):
    (d,) = params
    s1, s2, b = values
    o1, o2 = _ordered(s, s1), _ordered(s, s2)
    for p1, v1 in enumerate(o1):
        if v1 in b:
            continue
        sfx1 = o1[p1 + 1 :]
        if not all(v in b for v in sfx1):
            continue
        for p2, v2 in enumerate(o2):
            if v2 not in b:
                continue
            sfx2 = o2[p2 + 1 :]
            if any(v in b for v in sfx2):
                continue
            if not contract_eq(d, len(sfx1), len(sfx2)):
                continue
            if _prefix_digits_agree(s, d, o1[:p1], o2[:p2], b, b):
                return True
    return False


def oracle_ddist(s, params, values):
    (d,) = params
    x, y, z, host = values
    key = (lambda v: s.order[v]) if s.order is not None else (lambda v: v)
    a = sum(1 for v in host if key(x) <= key(v) < key(y))
    b = sum(1 for v in host if key(y) <= key(v) < key(z))
    return contract_double(d, a, b)


def _size_oracle(contract):
    def oracle(s, params, values):
        return contract(*params, *[len(v) for v in values])

    return oracle


# ---------------------------------------------------------------------------
# the equal-size-partition guard

_EQ_LIKE = {"eq"}


def _match_equal_partition(ctx, var, sort, conjuncts, env):
    """Candidates for a marker set whose sections must all equal a fixed
    reference set in size.

    Sound because a true size-equality predicate forces every section to
    have exactly the reference size (the soundness half of the equality
    invariant, verified level by level); only the two alternating block
    patterns of that size create such sections.
    """
    if sort != SET:
        return None
    for c in conjuncts:
        if c.kind != "forallSet":
            continue
        body = c.children[0]
        if body.kind != "implies":
            continue
        ant, con = body.children
        if not (
            ant.kind == "lib"
            and ant.lib == "section"
            and len(ant.args) == 3
            and ant.args[0] == c.var
            and ant.args[2] == var
            and ant.args[1] in env
        ):
            continue
        if not (
            con.kind == "lib"
            and con.lib in _EQ_LIKE
            and len(con.args) == 2
            and c.var in con.args
        ):
            continue
        ref = con.args[1] if con.args[0] == c.var else con.args[0]
        if ref not in env:
            continue
        host = ctx.ordered(env[ant.args[1]])
        size = len(env[ref])
        if not host:
            return [frozenset()]
        if size < 1 or size > len(host) or len(host) % size:
            return []
        blocks = [frozenset(host[i : i + size]) for i in range(0, len(host), size)]
        even = frozenset().union(*blocks[0::2])
        odd = frozenset().union(*blocks[1::2]) if len(blocks) > 1 else frozenset()
        return [odd, even]
    return None


def counting_guards():
    guards = ev.guard_registry()
    return ev.register_guard_enumerator(guards, "equal-size-partition", _match_equal_partition)


# ---------------------------------------------------------------------------
# registry assembly


@dataclass(frozen=True)
class LibPredicate:
    """A named counting predicate: formula family, contract, capacity."""

    name: str
    arg_sorts: tuple
    formals: tuple
    generate: object
    contract: object            # contract(*params, *sizes) -> bool
    capacity_note: str
    dfa_profile: object = None  # see automata.counter_dfa


_LIB_SPECS = [
    ("consec", (SET, SET), ("S", "U"), lambda p: gen_consec(), None, "structural"),
    (
        "partsection",
        (SET, SET, SET),
        ("S", "U", "P"),
        lambda p: gen_partsection(),
        None,
        "structural",
    ),
    (
        "section",
        (SET, SET, SET),
        ("S", "U", "P"),
        lambda p: gen_section(),
        None,
        "structural",
    ),
    ("adj", (SET, SET, SET), ("S1", "S2", "U"), lambda p: gen_adj(), None, "structural"),
    (
        "same",
        (SET, SET, SET, SET),
        ("S1", "S2", "B1", "B2"),
        lambda p: gen_same(p[0]),
        None,
        "digit comparison bounded by cap_eq(d)",
    ),
    (
        "next",
        (SET, SET, SET),
        ("S1", "S2", "B"),
        lambda p: gen_next(p[0]),
        None,
        "counter increment bounded by cap_eq(d)",
    ),
    (
        "eq",
        (SET, SET),
        ("P1", "P2"),
        lambda p: gen_eq(p[0]),
        contract_eq,
        "cap_eq(d): 4, then cap * 2**cap per level",
    ),
    (
        "double",
        (SET, SET),
        ("S1", "S2"),
        lambda p: gen_double(p[0]),
        contract_double,
        "half size within cap_eq(d)",
    ),
    (
        "ddist",
        (ELEMENT, ELEMENT, ELEMENT, SET),
        ("x", "y", "z", "U"),
        lambda p: gen_ddist(p[0]),
        None,
        "interval doubling within cap_eq(d)",
    ),
    (
        "exp",
        (SET, SET),
        ("P1", "P2"),
        lambda p: gen_exp(p[0]),
        contract_exp,
        "exponent a with 2 <= a and 2**(a-2) <= cap_eq(d)",
    ),
    (
        "root",
        (SET, SET),
        ("P1", "P2"),
        lambda p: gen_root(p[0], p[1]),
        contract_root,
        "base a with a**(k/2) <= cap_eq(d)",
    ),
    (
        "div",
        (SET, SET),
        ("P1", "P2"),
        lambda p: gen_div(p[0]),
        contract_div,
        "divisor within cap_eq(d)",
    ),
    (
        "less",
        (SET, SET),
        ("P1", "P2"),
        lambda p: gen_less(p[0]),
        contract_less,
        "larger side within cap_eq(d)",
    ),
    (
        "mod",
        (SET, SET, SET),
        ("P1", "P2", "R"),
        lambda p: gen_mod(p[0]),
        contract_mod,
        "modulus within cap_eq(d)",
    ),
]


def word_registry():
    reg = LibRegistry()
    for name, sorts, formals, make, _, _ in _LIB_SPECS:
        reg.register(LibDef(name, sorts, formals, make))
    return reg


def word_oracles():
    oracles = {
        "consec": oracle_consec,
        "partsection": oracle_partsection,
        "section": oracle_section,
        "adj": oracle_adj,
        "same": oracle_same,
        "next": oracle_next,
        "ddist": oracle_ddist,
    }
    for name, _, _, _, contract, _ in _LIB_SPECS:
        if contract is not None:
            oracles[name] = _size_oracle(contract)
    return oracles


def lib_predicates():
    out = {}
    for name, sorts, formals, make, contract, note in _LIB_SPECS:
        out[name] = LibPredicate(name, sorts, formals, make, contract, note)
    return out


def capacity_ledger(max_depth=3):
    """Per-predicate guaranteed ranges, from the equality recursion."""
    rows = []
    for d in range(max_depth + 1):
        cap = cap_eq(d) if d <= 2 else None
        rows.append(
            {
                "name": "eq",
                "params": [d],
                "capacity": str(cap_eq(d)) if d <= 2 else "cap_eq(2) * 2**cap_eq(2)",
                "note": "cap_eq(0)=4; cap_eq(d+1)=cap_eq(d)*2**cap_eq(d)",
            }
        )
    for name, note in [
        ("double", "arguments with |S1| <= cap_eq(d)"),
        ("exp", "2 <= |P1| and 2**(|P1|-2) <= cap_eq(d)"),
        ("root", "|P1|**(k/2) <= cap_eq(d)"),
        ("div", "|P1| <= cap_eq(d)"),
        ("less", "|P2| <= cap_eq(d)"),
        ("mod", "|P1| <= cap_eq(d)"),
    ]:
        rows.append({"name": name, "params": ["d"], "capacity": note, "note": note})
    return rows


# ---------------------------------------------------------------------------
# canonical witnesses and the structured decision procedure


def _counter_bits(block, value):
    s = len(block)
    return {block[t] for t in range(s) if value >> (s - 1 - t) & 1}


def build_eq_witness(s, d, p1, p2, size=None):
    """Canonical section/remainder/counter assignment for an equal pair.

    Remainders are suffixes, sections are consecutive blocks of one common
    size, the counter writes 0,1,2,... most-significant-bit first.  Returns
    None when no assignment of this shape exists (e.g. beyond capacity).
    """
    o1, o2 = _ordered(s, p1), _ordered(s, p2)
    sizes = [size] if size else range(min(CAP_BASE, cap_eq(max(d - 1, 0))), 0, -1)
    for blk in sizes:
        for r in range(0, min(cap_eq(max(d - 1, 0)), len(o1), len(o2)) + 1):
            if (len(o1) - r) % blk or (len(o2) - r) % blk:
                continue
            m1 = (len(o1) - r) // blk
            m2 = (len(o2) - r) // blk
            if m1 < 1 or m2 < 1 or m1 > 2**blk - 1 or m2 > 2**blk - 1:
                continue
            return _witness_at(o1, o2, r, blk)
    return None


def _witness_at(o1, o2, r, blk):
    def side(ordered):
        body = ordered[: len(ordered) - r] if r else list(ordered)
        rem = ordered[len(ordered) - r :] if r else []
        blocks = [body[i : i + blk] for i in range(0, len(body), blk)]
        marks = set()
        for j, b in enumerate(blocks):
            if j % 2 == 1:
                marks.update(b)
        bits = set()
        for j, b in enumerate(blocks):
            bits.update(_counter_bits(b, j))
        return frozenset(marks), frozenset(rem), frozenset(bits)

    q1, r1, b1 = side(o1)
    q2, r2, b2 = side(o2)
    return {"Q1": q1, "Q2": q2, "R1": r1, "R2": r2, "B1": b1, "B2": b2}


def _witness_candidates(s, d, p1, p2):
    o1, o2 = _ordered(s, p1), _ordered(s, p2)
    cap_prev = cap_eq(max(d - 1, 0))
    for blk in range(1, min(CAP_BASE, cap_prev) + 1):
        for r in range(0, min(cap_prev, len(o1), len(o2)) + 1):
            if (len(o1) - r) % blk or (len(o2) - r) % blk:
                continue
            m1 = (len(o1) - r) // blk
            m2 = (len(o2) - r) // blk
            if m1 < 1 or m2 < 1 or m1 > 2**blk - 1 or m2 > 2**blk - 1:
                continue
            yield _witness_at(o1, o2, r, blk)


def _strip_existentials(f, names):
    if f.kind == "existsSet" and f.var in names:
        return _strip_existentials(f.children[0], names)
    if f.kind == "and":
        return conj(*[_strip_existentials(c, names) for c in f.children])
    return f


def eval_eq_matrix(s, d, p1, p2, witness, registry=None, budget=None, guards=None):
    """Evaluate the recursive equality matrix under an explicit witness."""
    registry = registry or word_registry()
    f = gen_eq(d)
    core = f.children[1]
    stripped = _strip_existentials(core, set(EQ_WITNESS_VARS))
    env = {"P1": frozenset(p1), "P2": frozenset(p2)}
    env.update(witness)
    return ev.evaluate(
        s,
        stripped,
        env,
        budget=budget or ev.Budget(),
        registry=registry,
        guards=guards if guards is not None else counting_guards(),
    )


def decide_eq_structured(s, d, p1, p2, registry=None, budget=None):
    """Decide the depth-d equality formula by structured witness search.

    The search covers suffix remainders of matching size, uniform section
    blocks, and the canonical counter bits; outside that family it reports
    false, which the verification suites flag as coverage "guarded".
    """
    registry = registry or word_registry()
    if d == 0:
        res = ev.evaluate(
            s,
            gen_eq(0),
            {"P1": frozenset(p1), "P2": frozenset(p2)},
            budget=budget or ev.Budget(),
            registry=registry,
        )
        if res.outcome == "budget-exceeded":
            raise ev.BudgetExceeded()
        return res.is_true
    if decide_eq_structured(s, d - 1, p1, p2, registry, budget):
        return True
    for witness in _witness_candidates(s, d, p1, p2):
        res = eval_eq_matrix(s, d, p1, p2, witness, registry, budget)
        if res.outcome == "budget-exceeded":
            raise ev.BudgetExceeded()
        if res.is_true:
            return True
    return False


# ---------------------------------------------------------------------------
# verification harness


def _random_subset(rng, universe, size):
    return frozenset(rng.sample(universe, size))


def verify_lib_predicate(
    predicate,
    params,
    max_len,
    seed=0,
    samples_per_shape=3,
    registry=None,
    budget=None,
    guards=None,
):
    """Compare syntactic evaluation against the cardinality contract.

    Coverage is exhaustive over argument-size shapes for every length up to
    ``max_len``; each shape is additionally probed with seeded random
    concrete tuples (position-invariance spot checks).  Mismatching tuples
    are reported and must be empty.
    """
    registry = registry or word_registry()
    guards = guards if guards is not None else counting_guards()
    rng = random.Random(seed)
    formula = predicate.generate(params)
    arity = len(predicate.formals)
    mismatches = []
    checked = 0
    for n in range(max_len + 1):
        s = build_unary_word(n)
        universe = list(range(n))
        for sizes in product(range(n + 1), repeat=arity):
            tuples = []
            if sum(sizes) <= n:
                acc, canon = 0, []
                for sz in sizes:
                    canon.append(frozenset(range(acc, acc + sz)))
                    acc += sz
                tuples.append(tuple(canon))
            for _ in range(samples_per_shape):
                tuples.append(tuple(_random_subset(rng, universe, sz) for sz in sizes))
            for values in tuples:
                env = dict(zip(predicate.formals, values))
                res = ev.evaluate(
                    s, formula, env, budget=budget or ev.Budget(), registry=registry, guards=guards
                )
                if res.outcome == "budget-exceeded":
                    raise ev.BudgetExceeded()
                expected = predicate.contract(*params, *[len(v) for v in values])
                checked += 1
                if res.is_true != expected:
                    mismatches.append(
                        {"n": n, "sizes": list(sizes), "values": [sorted(v) for v in values],
                         "syntactic": res.is_true, "contract": expected}
                    )
    return {
        "name": predicate.name,
        "params": list(params),
        "maxLen": max_len,
        "checked": checked,
        "mismatches": mismatches,
        "coverage": "size-shapes exhaustive, positions sampled",
    }


def build_unary_word(n):
    from . import structures

    return structures.build_unary(n)
