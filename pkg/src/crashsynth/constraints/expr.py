"""Backend-neutral polynomial relations over named real variables.

A ``Poly`` maps monomials (sorted tuples of variable names, ``()`` for the
constant term) to float coefficients.  Relations compare a polynomial with
zero; ``AnyOf`` is a disjunction of conjunctions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

Monomial = tuple[str, ...]


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, float] | None = None):
        self.terms: dict[Monomial, float] = {m: c for m, c in (terms or {}).items() if c != 0.0}

    @classmethod
    def var(cls, name: str) -> "Poly":
        return cls({(name,): 1.0})

    @classmethod
    def const(cls, value: float) -> "Poly":
        return cls({(): float(value)})

    @staticmethod
    def lift(value: "Poly | float | int") -> "Poly":
        return value if isinstance(value, Poly) else Poly.const(value)

    def __add__(self, other):
        other = Poly.lift(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-Poly.lift(other))

    def __rsub__(self, other):
        return Poly.lift(other) - self

    def __mul__(self, other):
        other = Poly.lift(other)
        out: dict[Monomial, float] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(sorted(m1 + m2))
                out[m] = out.get(m, 0.0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    @property
    def variables(self) -> set[str]:
        return {v for m in self.terms for v in m}

    @property
    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def is_constant(self) -> bool:
        return all(not m for m in self.terms)

    def evaluate(self, values: Mapping[str, float]) -> float:
        total = 0.0
        for m, c in self.terms.items():
            term = c
            for v in m:
                term *= values[v]
            total += term
        return total

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms, key=lambda k: (len(k), k)):
            c = self.terms[m]
            body = "*".join(m)
            parts.append(f"{c:.6g}" if not m else (body if c == 1 else f"{c:.6g}*{body}"))
        return " + ".join(parts)

    __repr__ = __str__


Num = Union[Poly, float, int]


@dataclass(frozen=True)
class Atom:
    """``poly op 0`` with op one of ``>=``, ``>`` or ``==``."""

    poly: Poly
    op: str

    def holds(self, values: Mapping[str, float], *, eq_tol: float = 1e-6, strict_tol: float = 1e-9,
              ineq_tol: float = 1e-9) -> bool:
        r = self.poly.evaluate(values)
        if self.op == "==":
            return abs(r) <= eq_tol
        if self.op == ">":
            return r > strict_tol
        return r >= -ineq_tol

    @property
    def variables(self) -> set[str]:
        return self.poly.variables

    def atoms(self) -> Iterator["Atom"]:
        yield self

    def __str__(self) -> str:
        return f"{self.poly} {self.op} 0"


@dataclass(frozen=True)
class AnyOf:
    options: tuple[tuple[Atom, ...], ...]

    def holds(self, values: Mapping[str, float], **tol) -> bool:
        return any(all(a.holds(values, **tol) for a in conj) for conj in self.options)

    @property
    def variables(self) -> set[str]:
        return {v for conj in self.options for a in conj for v in a.variables}

    def atoms(self) -> Iterator[Atom]:
        for conj in self.options:
            yield from conj

    def __str__(self) -> str:
        return " OR ".join("(" + " AND ".join(str(a) for a in conj) + ")" for conj in self.options)


Relation = Union[Atom, AnyOf]


def ge(a: Num, b: Num = 0.0) -> Atom:
    return Atom(Poly.lift(a) - b, ">=")


def le(a: Num, b: Num = 0.0) -> Atom:
    return Atom(Poly.lift(b) - a, ">=")


def gt(a: Num, b: Num = 0.0) -> Atom:
    return Atom(Poly.lift(a) - b, ">")


def lt(a: Num, b: Num = 0.0) -> Atom:
    return Atom(Poly.lift(b) - a, ">")


def eq(a: Num, b: Num = 0.0) -> Atom:
    return Atom(Poly.lift(a) - b, "==")


def any_of(options: Iterable[Iterable[Atom]]) -> AnyOf:
    return AnyOf(tuple(tuple(conj) for conj in options))


@dataclass(frozen=True)
class Tag:
    group: int
    participant: str
    action: str
    note: str = ""
    extrapolated: bool = False
    # Exact relation that a stronger linear companion already guarantees; backends may skip it.
    implied: bool = False

    @property
    def label(self) -> str:
        return f"group{self.group} participant{self.participant} action{self.action}"


@dataclass(frozen=True)
class Constraint:
    relation: Relation
    tag: Tag

    def __str__(self) -> str:
        note = f" [{self.tag.note}]" if self.tag.note else ""
        ext = " (extrapolated)" if self.tag.extrapolated else ""
        ext += " (implied)" if self.tag.implied else ""
        return f"{self.tag.label}: {self.relation}{note}{ext}"


@dataclass(frozen=True)
class ConstraintSet:
    variables: tuple[str, ...] = ()
    constraints: tuple[Constraint, ...] = ()
    # Solver-independent plan layout, filled by the scenario assembler.
    skeleton: object = field(default=None, compare=False)

    def __post_init__(self):
        declared = set(self.variables)
        for c in self.constraints:
            missing = c.relation.variables - declared
            if missing:
                raise ValueError(f"relation {c} uses undeclared variables {sorted(missing)}")

    def __add__(self, other: "ConstraintSet") -> "ConstraintSet":
        seen = set(self.variables)
        extra = tuple(v for v in other.variables if v not in seen)
        return ConstraintSet(self.variables + extra, self.constraints + other.constraints,
                             self.skeleton if self.skeleton is not None else other.skeleton)

    def __len__(self) -> int:
        return len(self.constraints)

    def by_group(self, group: int) -> list[Constraint]:
        return [c for c in self.constraints if c.tag.group == group]

    def violations(self, values: Mapping[str, float], **tol) -> list[Constraint]:
        return [c for c in self.constraints if not c.relation.holds(values, **tol)]

    def dump(self) -> str:
        return "".join(f"{c}\n" for c in self.constraints)
