"""Double Butcher tableaus for IMEX Runge-Kutta pairs.

Coefficients are shipped as plain-text ``.tab`` files holding exact rationals
or long decimals; they are parsed with :class:`fractions.Fraction` and rounded
to binary floating point once.  File layout::

    # comment
    name RK(2,3)
    stages 3
    order 3
    A_I
    <s rows of s numbers>
    b_I
    <s numbers>
    A_E
    <s rows of s numbers>
    b_E
    <s numbers>
    c_I            (optional, row sums of A_I otherwise)
    c_E            (optional, row sums of A_E otherwise)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import TableauError

REGISTRY = {
    "RK(1,2)": "rk12_imex_midpoint.tab",
    "RK(2,3)": "rk23_ars233.tab",
    "RK(6,4)": "rk64_ark436l2sa.tab",
    "RK(8,5)": "rk85_ark548l2sa.tab",
}

TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DoubleButcherTableau:
    name: str
    stages: int
    order: int
    A_I: np.ndarray
    b_I: np.ndarray
    A_E: np.ndarray
    b_E: np.ndarray
    c_I: np.ndarray = None
    c_E: np.ndarray = None

    def __post_init__(self):
        s = self.stages
        for key, shape in (("A_I", (s, s)), ("A_E", (s, s)), ("b_I", (s,)), ("b_E", (s,))):
            arr = np.asarray(getattr(self, key), dtype=float)
            if arr.shape != shape:
                raise TableauError(f"{self.name}: {key} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, key, arr)
        for key, A in (("c_I", self.A_I), ("c_E", self.A_E)):
            c = getattr(self, key)
            c = A.sum(axis=1) if c is None else np.asarray(c, dtype=float)
            if c.shape != (s,):
                raise TableauError(f"{self.name}: {key} has shape {c.shape}, expected {(s,)}")
            object.__setattr__(self, key, c)

    @property
    def implicit_stages(self) -> int:
        """Number of stages that need an implicit solve (nonzero diagonal)."""
        return int(np.count_nonzero(np.diag(self.A_I)))

    def part(self, which: str):
        if which == "I":
            return self.A_I, self.b_I, self.c_I
        if which == "E":
            return self.A_E, self.b_E, self.c_E
        raise ValueError(which)


# -- order conditions --------------------------------------------------------
#
# Each rooted tree is a function of (b, A, c) for a single part; coupling
# variants draw each of b, A, c from either part independently.

def _trees():
    return {
        1: [("sum b", lambda b, A, c: b.sum(), Fraction(1))],
        2: [("b.c", lambda b, A, c: b @ c, Fraction(1, 2))],
        3: [
            ("b.c^2", lambda b, A, c: b @ c**2, Fraction(1, 3)),
            ("b.Ac", lambda b, A, c: b @ (A @ c), Fraction(1, 6)),
        ],
        4: [
            ("b.c^3", lambda b, A, c: b @ c**3, Fraction(1, 4)),
            ("b.(c*Ac)", lambda b, A, c: b @ (c * (A @ c)), Fraction(1, 8)),
            ("b.Ac^2", lambda b, A, c: b @ (A @ c**2), Fraction(1, 12)),
            ("b.AAc", lambda b, A, c: b @ (A @ (A @ c)), Fraction(1, 24)),
        ],
        5: [
            ("b.c^4", lambda b, A, c: b @ c**4, Fraction(1, 5)),
            ("b.(c^2*Ac)", lambda b, A, c: b @ (c**2 * (A @ c)), Fraction(1, 10)),
            ("b.(c*Ac^2)", lambda b, A, c: b @ (c * (A @ c**2)), Fraction(1, 15)),
            ("b.(c*AAc)", lambda b, A, c: b @ (c * (A @ (A @ c))), Fraction(1, 30)),
            ("b.(Ac*Ac)", lambda b, A, c: b @ ((A @ c) ** 2), Fraction(1, 20)),
            ("b.Ac^3", lambda b, A, c: b @ (A @ c**3), Fraction(1, 20)),
            ("b.A(c*Ac)", lambda b, A, c: b @ (A @ (c * (A @ c))), Fraction(1, 40)),
            ("b.AAc^2", lambda b, A, c: b @ (A @ (A @ c**2)), Fraction(1, 60)),
            ("b.AAAc", lambda b, A, c: b @ (A @ (A @ (A @ c))), Fraction(1, 120)),
        ],
    }


TREES = _trees()

# coupling trees written with explicit part labels, orders 2..4
_COUPLED = {
    2: [("b{0}.c{1}", lambda t, X, Y: t[X][1] @ t[Y][2], Fraction(1, 2), 2)],
    3: [
        ("b{0}.(c{1}*c{2})", lambda t, X, Y, Z: t[X][1] @ (t[Y][2] * t[Z][2]), Fraction(1, 3), 3),
        ("b{0}.A{1}c{2}", lambda t, X, Y, Z: t[X][1] @ (t[Y][0] @ t[Z][2]), Fraction(1, 6), 3),
    ],
    4: [
        ("b{0}.(c{1}*c{2}*c{3})",
         lambda t, X, Y, Z, W: t[X][1] @ (t[Y][2] * t[Z][2] * t[W][2]), Fraction(1, 4), 4),
        ("b{0}.(c{1}*A{2}c{3})",
         lambda t, X, Y, Z, W: t[X][1] @ (t[Y][2] * (t[Z][0] @ t[W][2])), Fraction(1, 8), 4),
        ("b{0}.A{1}(c{2}*c{3})",
         lambda t, X, Y, Z, W: t[X][1] @ (t[Y][0] @ (t[Z][2] * t[W][2])), Fraction(1, 12), 4),
        ("b{0}.A{1}A{2}c{3}",
         lambda t, X, Y, Z, W: t[X][1] @ (t[Y][0] @ (t[Z][0] @ t[W][2])), Fraction(1, 24), 4),
    ],
}


@dataclass
class Condition:
    name: str
    order: int
    part: str  # "I", "E", "coupling" or "structure"
    residual: float
    enforced: bool

    @property
    def passed(self) -> bool:
        return self.residual <= TOL


@dataclass
class ValidationReport:
    name: str
    declared_order: int
    conditions: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [c for c in self.conditions if c.enforced and not c.passed]

    @property
    def warnings(self) -> list:
        return [c for c in self.conditions if not c.enforced and not c.passed and c.part == "coupling"]

    @property
    def ok(self) -> bool:
        return not self.failures

    def passes_order(self, p: int, part: str | None = None) -> bool:
        """True when every per-part condition of order <= ``p`` holds."""
        parts = ("I", "E") if part is None else (part,)
        return all(
            c.passed for c in self.conditions if c.part in parts and c.order <= p
        ) and p <= max(TREES)

    def summary(self) -> str:
        lines = [f"{self.name} (declared order {self.declared_order}): {'OK' if self.ok else 'FAILED'}"]
        for c in self.failures:
            lines.append(f"  FAIL [{c.part}] order {c.order} {c.name}: residual {c.residual:.3e}")
        for c in self.warnings:
            lines.append(f"  warn [coupling] order {c.order} {c.name}: residual {c.residual:.3e}")
        return "\n".join(lines)


def validate_tableau(t: DoubleButcherTableau) -> ValidationReport:
    """Check structure, row sums and order conditions; never raises."""
    report = ValidationReport(t.name, t.order)
    add = report.conditions.append
    s = t.stages

    upper_I = [t.A_I[i, j] for i in range(s) for j in range(i + 1, s)]
    upper_E = [t.A_E[i, j] for i in range(s) for j in range(i, s)]
    add(Condition("A_I lower triangular", 0, "structure", float(any(v != 0 for v in upper_I)), True))
    add(Condition("A_E strictly lower triangular", 0, "structure", float(any(v != 0 for v in upper_E)), True))
    for part in ("I", "E"):
        A, b, c = t.part(part)
        add(Condition(f"c_{part} = row sums of A_{part}", 0, "structure",
                      float(np.max(np.abs(A.sum(axis=1) - c))), True))

    enforce_upto = min(t.order, 4)
    for order, trees in TREES.items():
        for part in ("I", "E"):
            A, b, c = t.part(part)
            for name, fn, target in trees:
                add(Condition(name, order, part, abs(float(fn(b, A, c)) - float(target)),
                              order <= enforce_upto))

    parts = {"I": t.part("I"), "E": t.part("E")}
    for order, trees in _COUPLED.items():
        if order > enforce_upto:
            continue
        for name, fn, target, n_labels in trees:
            for labels in itertools.product("IE", repeat=n_labels):
                if len(set(labels)) == 1:
                    continue
                add(Condition(name.format(*labels), order, "coupling",
                              abs(float(fn(parts, *labels)) - float(target)), False))
    return report


# -- parsing -----------------------------------------------------------------

_MATRIX_KEYS = ("A_I", "A_E")
_VECTOR_KEYS = ("b_I", "b_E", "c_I", "c_E")


def _parse_row(line: str, lineno: int) -> list:
    try:
        return [Fraction(tok) for tok in line.split()]
    except (ValueError, ZeroDivisionError) as exc:
        raise TableauError(f"line {lineno}: cannot parse number in {line!r} ({exc})") from None


def parse_tableau(text: str, validate: bool = True) -> DoubleButcherTableau:
    lines = [
        (n, ln.strip()) for n, ln in enumerate(text.splitlines(), 1)
        if ln.strip() and not ln.strip().startswith("#")
    ]
    header = {}
    for key in ("name", "stages", "order"):
        if not lines:
            raise TableauError(f"missing '{key}' line")
        n, ln = lines.pop(0)
        parts = ln.split(None, 1)
        if parts[0] != key or len(parts) != 2:
            raise TableauError(f"line {n}: expected '{key} <value>', got {ln!r}")
        header[key] = parts[1].strip()
    try:
        s = int(header["stages"])
        p = int(header["order"])
    except ValueError:
        raise TableauError("stages and order must be integers") from None
    if s < 1 or p < 1:
        raise TableauError("stages and order must be positive")

    blocks = {}
    while lines:
        n, key = lines.pop(0)
        if key not in _MATRIX_KEYS + _VECTOR_KEYS:
            raise TableauError(f"line {n}: unknown block {key!r}")
        if key in blocks:
            raise TableauError(f"line {n}: duplicate block {key!r}")
        nrows = s if key in _MATRIX_KEYS else 1
        if len(lines) < nrows:
            raise TableauError(f"block {key} truncated: expected {nrows} row(s)")
        rows = []
        for _ in range(nrows):
            rn, ln = lines.pop(0)
            row = _parse_row(ln, rn)
            if len(row) != s:
                raise TableauError(f"line {rn}: block {key} row has {len(row)} entries, expected {s}")
            rows.append(row)
        blocks[key] = rows if key in _MATRIX_KEYS else rows[0]

    for key in ("A_I", "b_I", "A_E", "b_E"):
        if key not in blocks:
            raise TableauError(f"missing block {key}")

    def to_float(x):
        return np.array([[float(v) for v in r] for r in x]) if isinstance(x[0], list) \
            else np.array([float(v) for v in x])

    tab = DoubleButcherTableau(
        name=header["name"], stages=s, order=p,
        A_I=to_float(blocks["A_I"]), b_I=to_float(blocks["b_I"]),
        A_E=to_float(blocks["A_E"]), b_E=to_float(blocks["b_E"]),
        c_I=to_float(blocks["c_I"]) if "c_I" in blocks else None,
        c_E=to_float(blocks["c_E"]) if "c_E" in blocks else None,
    )
    if validate:
        report = validate_tableau(tab)
        if not report.ok:
            bad = ", ".join(f"[{c.part}] {c.name} (order {c.order}, residual {c.residual:.2e})"
                            for c in report.failures)
            raise TableauError(f"tableau {tab.name} failed validation: {bad}")
    return tab


def format_tableau(t: DoubleButcherTableau) -> str:
    def row(v):
        return " ".join(repr(float(x)) for x in v)

    out = [f"name {t.name}", f"stages {t.stages}", f"order {t.order}", "A_I"]
    out += [row(r) for r in t.A_I]
    out += ["b_I", row(t.b_I), "A_E"]
    out += [row(r) for r in t.A_E]
    out += ["b_E", row(t.b_E), "c_I", row(t.c_I), "c_E", row(t.c_E)]
    return "\n".join(out) + "\n"


def load_tableau(source, validate: bool = True) -> DoubleButcherTableau:
    """Load a registered tableau by name (e.g. ``"RK(2,3)"``) or from a ``.tab`` file."""
    if isinstance(source, str) and source in REGISTRY:
        text = resources.files("erlogse.data").joinpath(REGISTRY[source]).read_text("utf-8")
    else:
        path = Path(source)
        if not path.is_file():
            raise TableauError(
                f"unknown tableau {source!r}; expected a file or one of {sorted(REGISTRY)}"
            )
        text = path.read_text("utf-8")
    return parse_tableau(text, validate=validate)
