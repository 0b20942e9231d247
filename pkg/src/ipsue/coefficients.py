"""Scalar coefficient functions of the affine decompositions.

Each coefficient is a small expression tree over the Laplace variable ``s``
and the physical parameters ``mu``. Trees serialize to nested JSON lists:

=====================  ==========================================
JSON                   meaning
=====================  ==========================================
``2.5``                constant
``["const", re, im]``  complex constant
``"s"``                the Laplace variable
``["s", k]``           ``s**k``
``["param", i]``       ``mu[i]`` (``i`` an index or parameter name)
``["mul", a, b, ...]`` product
``["add", a, b, ...]`` sum
``["neg", a]``         negation
``["pow", a, k]``      integer power
=====================  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Coefficient",
    "Const",
    "Freq",
    "Param",
    "Product",
    "Sum",
    "Power",
    "as_coefficient",
    "parse_coefficient",
]


class Coefficient:
    """Base class; subclasses are immutable and hashable."""

    def __call__(self, s, mu):
        return self.evaluate(np.asarray(s), np.asarray(mu, dtype=float))

    def evaluate(self, s: np.ndarray, mu: np.ndarray):
        """Vectorized evaluation; ``mu`` has the parameter index on its last axis."""
        raise NotImplementedError

    def depends_on_s(self) -> bool:
        raise NotImplementedError

    def is_constant(self) -> bool:
        raise NotImplementedError

    def to_json(self, names: Sequence[str] | None = None):
        raise NotImplementedError

    def __mul__(self, other):
        return Product((self, as_coefficient(other)))

    __rmul__ = __mul__

    def __neg__(self):
        return Product((Const(-1.0), self))


@dataclass(frozen=True)
class Const(Coefficient):
    value: complex = 1.0

    def evaluate(self, s, mu):
        return np.full(np.shape(s), self.value, dtype=complex)

    def depends_on_s(self):
        return False

    def is_constant(self):
        return True

    def __neg__(self):
        return Const(-self.value)

    def to_json(self, names=None):
        v = complex(self.value)
        if v.imag == 0.0:
            return v.real
        return ["const", v.real, v.imag]


@dataclass(frozen=True)
class Freq(Coefficient):
    power: int = 1

    def evaluate(self, s, mu):
        return np.asarray(s, dtype=complex) ** self.power

    def depends_on_s(self):
        return self.power != 0

    def is_constant(self):
        return self.power == 0

    def to_json(self, names=None):
        return "s" if self.power == 1 else ["s", self.power]


@dataclass(frozen=True)
class Param(Coefficient):
    index: int

    def evaluate(self, s, mu):
        return np.asarray(mu[..., self.index], dtype=complex)

    def depends_on_s(self):
        return False

    def is_constant(self):
        return False

    def to_json(self, names=None):
        if names is not None:
            return ["param", names[self.index]]
        return ["param", self.index]


@dataclass(frozen=True)
class Product(Coefficient):
    factors: tuple

    def evaluate(self, s, mu):
        out = np.ones(np.shape(s), dtype=complex)
        for f in self.factors:
            out = out * f.evaluate(s, mu)
        return out

    def depends_on_s(self):
        return any(f.depends_on_s() for f in self.factors)

    def is_constant(self):
        return all(f.is_constant() for f in self.factors)

    def to_json(self, names=None):
        if (
            len(self.factors) == 2
            and isinstance(self.factors[0], Const)
            and self.factors[0].value == -1.0
        ):
            return ["neg", self.factors[1].to_json(names)]
        return ["mul", *(f.to_json(names) for f in self.factors)]


@dataclass(frozen=True)
class Sum(Coefficient):
    terms: tuple

    def evaluate(self, s, mu):
        out = np.zeros(np.shape(s), dtype=complex)
        for t in self.terms:
            out = out + t.evaluate(s, mu)
        return out

    def depends_on_s(self):
        return any(t.depends_on_s() for t in self.terms)

    def is_constant(self):
        return all(t.is_constant() for t in self.terms)

    def to_json(self, names=None):
        return ["add", *(t.to_json(names) for t in self.terms)]


@dataclass(frozen=True)
class Power(Coefficient):
    base: Coefficient
    exponent: int

    def evaluate(self, s, mu):
        return self.base.evaluate(s, mu) ** self.exponent

    def depends_on_s(self):
        return self.exponent != 0 and self.base.depends_on_s()

    def is_constant(self):
        return self.exponent == 0 or self.base.is_constant()

    def to_json(self, names=None):
        return ["pow", self.base.to_json(names), self.exponent]


def as_coefficient(obj) -> Coefficient:
    if isinstance(obj, Coefficient):
        return obj
    if isinstance(obj, (int, float, complex, np.number)):
        return Const(complex(obj) if isinstance(obj, complex) else float(obj))
    raise TypeError(f"cannot interpret {obj!r} as a coefficient")


def parse_coefficient(data, names: Sequence[str] | None = None) -> Coefficient:
    """Build a coefficient from its JSON form (see module docstring)."""
    if isinstance(data, bool):
        raise ValueError(f"invalid coefficient {data!r}")
    if isinstance(data, (int, float)):
        return Const(float(data))
    if data == "s":
        return Freq(1)
    if not isinstance(data, (list, tuple)) or not data or not isinstance(data[0], str):
        raise ValueError(f"invalid coefficient {data!r}")
    tag, args = data[0], list(data[1:])
    if tag == "const":
        if len(args) not in (1, 2):
            raise ValueError(f"'const' takes one or two numbers, got {args!r}")
        return Const(complex(*args) if len(args) == 2 else float(args[0]))
    if tag == "s":
        return Freq(int(args[0]) if args else 1)
    if tag == "param":
        if len(args) != 1:
            raise ValueError("'param' takes exactly one argument")
        key = args[0]
        if isinstance(key, str):
            if names is None or key not in names:
                raise ValueError(f"unknown parameter name {key!r}")
            return Param(list(names).index(key))
        return Param(int(key))
    if tag == "mul":
        return Product(tuple(parse_coefficient(a, names) for a in args))
    if tag == "add":
        return Sum(tuple(parse_coefficient(a, names) for a in args))
    if tag == "neg":
        if len(args) != 1:
            raise ValueError("'neg' takes exactly one argument")
        return Product((Const(-1.0), parse_coefficient(args[0], names)))
    if tag == "pow":
        if len(args) != 2:
            raise ValueError("'pow' takes a base and an integer exponent")
        return Power(parse_coefficient(args[0], names), int(args[1]))
    raise ValueError(f"unknown coefficient tag {tag!r}")
