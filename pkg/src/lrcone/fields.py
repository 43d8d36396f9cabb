"""Transverse magnetic field sequences for the one-dimensional chain.

Four families are supported: Sturmian circle-map sequences (the golden
rotation gives the Fibonacci word), random dimer fields with paired signs,
periodic repetitions of a finite pattern, and constant fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

#: Inverse golden mean, the default circle-map rotation number.
GOLDEN_ROTATION = (math.sqrt(5.0) - 1.0) / 2.0

FIELD_KINDS = ("sturmian", "dimer", "periodic", "constant")

#: Default cap on generated word lengths (substitution words, trace checks).
DEFAULT_LENGTH_CAP = 1_000_000


@dataclass(frozen=True)
class FieldSpec:
    """Recipe for a transverse field h_1..h_N.

    Parameters
    ----------
    kind : one of ``sturmian``, ``dimer``, ``periodic``, ``constant``.
    length : chain length N >= 1.
    coupling : field strength lambda >= 0 (ignored for ``periodic``).
    rotation : circle-map rotation in (0, 1); Sturmian only. The float
        value is taken as the best available approximation of the
        intended irrational; rational rotations are outside the model.
    offset : circle-map phase in [0, 1); Sturmian only.
    pattern : finite list of real values; periodic only.
    seed : RNG seed; dimer only.
    """

    kind: str
    length: int
    coupling: float = 0.0
    rotation: float = GOLDEN_ROTATION
    offset: float = 0.0
    pattern: Optional[Tuple[float, ...]] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if int(self.length) != self.length or self.length < 1:
            raise ValueError("length must be an integer >= 1")
        if self.coupling < 0:
            raise ValueError("coupling must be >= 0")
        if self.kind == "sturmian":
            if not 0.0 < self.rotation < 1.0:
                raise ValueError("rotation must lie strictly inside (0, 1)")
            if not 0.0 <= self.offset < 1.0:
                raise ValueError("offset must lie in [0, 1)")
        if self.kind == "periodic":
            if self.pattern is None or len(self.pattern) == 0:
                raise ValueError("periodic field needs a nonempty pattern")
        if self.kind == "dimer" and self.seed is None:
            raise ValueError("dimer field needs a seed")
        if self.pattern is not None:
            object.__setattr__(self, "pattern", tuple(float(v) for v in self.pattern))


@dataclass(frozen=True)
class Field:
    """A realized field: values h_1..h_N plus the spec that produced it."""

    values: np.ndarray
    spec: FieldSpec

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return len(self.values)

    def json_payload(self) -> dict:
        spec = self.spec
        payload = {"kind": spec.kind, "length": spec.length, "coupling": spec.coupling}
        if spec.kind == "sturmian":
            payload["rotation"] = spec.rotation
            payload["offset"] = spec.offset
        if spec.kind == "periodic":
            payload["pattern"] = list(spec.pattern)
        if spec.kind == "dimer":
            payload["seed"] = spec.seed
        return {"spec": payload, "values": [float(v) for v in self.values]}


def _require_kind(spec: FieldSpec, kind: str):
    if spec.kind != kind:
        raise ValueError(f"expected a {kind} spec, got {spec.kind}")


def sturmian_word(rotation: float, offset: float, length: int) -> np.ndarray:
    """Binary circle-map word: w_x = 1 iff (x*rotation + offset) mod 1 >= 1 - rotation.

    The accumulated angle is evaluated in exact rational arithmetic on the
    binary values of ``rotation`` and ``offset``, so the half-open window
    test is never corrupted by accumulated rounding, no matter how large
    x gets.
    """
    theta = Fraction(float(rotation))
    omega = Fraction(float(offset))
    lower = 1 - theta
    word = np.empty(length, dtype=np.int8)
    acc = omega
    for x in range(length):
        acc = (acc + theta) % 1
        word[x] = 1 if acc >= lower else 0
    return word


def sturmian_field(spec: FieldSpec) -> Field:
    """Sturmian field h_x = coupling * w_x with w the circle-map word."""
    _require_kind(spec, "sturmian")
    word = sturmian_word(spec.rotation, spec.offset, spec.length)
    return Field(spec.coupling * word.astype(np.float64), spec)


def fibonacci_word(generation: int, length_cap: int = DEFAULT_LENGTH_CAP) -> np.ndarray:
    """Fibonacci substitution word of a given generation, as 0/1 letters.

    Generation 1 is the single letter word [1]; each next generation is the
    previous word followed by the one before it, so lengths run through
    1, 2, 3, 5, 8, ...  The letter values (1 for the long letter, 0 for the
    short one) are fixed so that the generation-k word equals the golden
    circle-map word at offset 0 on its full length; that agreement is what
    the test suite certifies.
    """
    if generation < 1:
        raise ValueError("generation must be >= 1")
    fib_prev, fib = 1, 1  # lengths of generations 0 and 1
    for _ in range(generation - 1):
        fib_prev, fib = fib, fib + fib_prev
    if fib > length_cap:
        raise ValueError(f"word length {fib} exceeds cap {length_cap}")
    if generation == 1:
        return np.array([1], dtype=np.int8)
    prev, word = [1], [1, 0]
    for _ in range(generation - 2):
        prev, word = word, word + prev
    return np.array(word, dtype=np.int8)


def dimer_field(spec: FieldSpec) -> Field:
    """Random dimer field: +/-coupling in adjacent equal pairs.

    Pair signs are i.i.d. fair draws from the seeded generator; an odd
    final site takes one fresh draw of its own.
    """
    _require_kind(spec, "dimer")
    rng = np.random.default_rng(spec.seed)
    pairs = (spec.length + 1) // 2
    signs = 1 - 2 * rng.integers(0, 2, size=pairs)
    values = spec.coupling * np.repeat(signs, 2)[: spec.length].astype(np.float64)
    return Field(values, spec)


def periodic_field(spec: FieldSpec) -> Field:
    """Cyclic repetition of the pattern out to the chain length."""
    _require_kind(spec, "periodic")
    pattern = np.asarray(spec.pattern, dtype=np.float64)
    reps = -(-spec.length // len(pattern))
    return Field(np.tile(pattern, reps)[: spec.length], spec)


def constant_field(spec: FieldSpec) -> Field:
    _require_kind(spec, "constant")
    return Field(np.full(spec.length, spec.coupling, dtype=np.float64), spec)


_GENERATORS = {
    "sturmian": sturmian_field,
    "dimer": dimer_field,
    "periodic": periodic_field,
    "constant": constant_field,
}


def generate_field(spec: FieldSpec) -> Field:
    """Dispatch to the generator matching ``spec.kind``."""
    return _GENERATORS[spec.kind](spec)


def factor_complexity(word: Sequence, n: int) -> int:
    """Number of distinct length-n factors (contiguous blocks) of the word."""
    if n < 1 or n > len(word):
        raise ValueError("factor length out of range")
    seq = [int(v) for v in word]
    return len({tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)})
