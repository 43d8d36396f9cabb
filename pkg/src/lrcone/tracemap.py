"""Half-trace recursion for transfer matrices over golden-rotation words.

Traces of transfer matrices over successive substitution-word generations
obey the three-term polynomial recursion x_{k+1} = 2 x_k x_{k-1} - x_{k-2}
and conserve the Fricke invariant

    I = x_{k+1}^2 + x_k^2 + x_{k-1}^2 - 2 x_{k+1} x_k x_{k-1} - 1,

which equals coupling^2 / 4 on the physical initial data.  Bounded orbits
flag energies in (a cover of) the spectrum; orbits with two consecutive
half-traces beyond 1 in modulus escape super-exponentially.  The
``trace_check`` routine certifies the convention against explicitly
multiplied transfer matrices, so nothing here rests on an unchecked sign
or ordering choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fields import DEFAULT_LENGTH_CAP, fibonacci_word
from .onebody import transfer_matrix

#: Iteration aborts once any half-trace passes this magnitude.
OVERFLOW_GUARD = 1e150

MAX_ESCAPE_GENERATION = 200


@dataclass(frozen=True)
class TraceState:
    """Consecutive half-traces (x_{k-1}, x_k, x_{k+1}) around generation k."""

    previous: float
    current: float
    upcoming: float
    generation: int
    energy: float
    coupling: float
    overflowed: bool = False


@dataclass(frozen=True)
class EscapeResult:
    escaped: bool
    generation: Optional[int]
    checked_through: int


def initial_traces(coupling: float, energy: float) -> TraceState:
    """Half-trace triple for generations (-1, 0, 1): (1, E/2, (E - coupling)/2)."""
    return TraceState(
        previous=1.0,
        current=energy / 2.0,
        upcoming=(energy - coupling) / 2.0,
        generation=0,
        energy=float(energy),
        coupling=float(coupling),
    )


def invariant(state: TraceState) -> float:
    p, c, u = state.previous, state.current, state.upcoming
    return p * p + c * c + u * u - 2.0 * p * c * u - 1.0


def iterate(state: TraceState) -> TraceState:
    """One recursion step; refuses to run past an overflow."""
    if state.overflowed:
        raise ValueError("orbit already overflowed; no further iteration")
    fresh = 2.0 * state.upcoming * state.current - state.previous
    return TraceState(
        previous=state.current,
        current=state.upcoming,
        upcoming=fresh,
        generation=state.generation + 1,
        energy=state.energy,
        coupling=state.coupling,
        overflowed=abs(fresh) > OVERFLOW_GUARD,
    )


def escape_time(coupling: float, energy: float, max_generation: int = 100) -> EscapeResult:
    """First generation with two consecutive half-traces beyond 1 in modulus.

    Escape at that point is monotone (the orbit then grows without bound),
    so the scan stops there; otherwise the orbit counts as bounded through
    ``max_generation``.
    """
    if not 1 <= max_generation <= MAX_ESCAPE_GENERATION:
        raise ValueError(f"max_generation must lie in 1..{MAX_ESCAPE_GENERATION}")
    state = initial_traces(coupling, energy)
    # pairs (x_{k-1}, x_k) for k = 0 and k = 1 come from the initial triple
    if abs(state.previous) > 1.0 and abs(state.current) > 1.0:
        return EscapeResult(True, 0, max_generation)
    if abs(state.current) > 1.0 and abs(state.upcoming) > 1.0:
        return EscapeResult(True, 1, max_generation)
    while state.generation + 1 < max_generation:
        state = iterate(state)
        if abs(state.current) > 1.0 and abs(state.upcoming) > 1.0:
            return EscapeResult(True, state.generation + 1, max_generation)
        if state.overflowed:
            # unreachable before the modulus test fires, kept as a safety net
            return EscapeResult(True, state.generation + 1, max_generation)
    return EscapeResult(False, None, max_generation)


def trace_check(coupling: float, energy: float, generation: int,
                length_cap: int = DEFAULT_LENGTH_CAP):
    """Recursion value x_k next to the directly multiplied half-trace.

    The direct side multiplies the one-step matrices over the golden
    substitution word of the requested generation (in extended precision,
    since off-spectrum products grow fast).  Agreement of the two numbers
    certifies initial conditions, letter values, and product order at once.
    """
    if generation < 1:
        raise ValueError("generation must be >= 1")
    word = fibonacci_word(generation, length_cap=length_cap)
    state = initial_traces(coupling, energy)
    for _ in range(generation - 1):
        state = iterate(state)
    map_value = state.upcoming

    values = coupling * word.astype(np.float64)
    product = transfer_matrix(values, energy, 1, len(values), dtype=np.longdouble)
    half_trace = float((product.matrix[0, 0] + product.matrix[1, 1]) / 2.0)
    return map_value, half_trace


def spectrum_scan(coupling: float, energies: Sequence[float],
                  max_generation: int = 100) -> np.ndarray:
    """Escape generation per energy; -1 marks orbits bounded through the cap."""
    out = np.empty(len(energies), dtype=np.int64)
    for i, energy in enumerate(energies):
        result = escape_time(coupling, float(energy), max_generation)
        out[i] = result.generation if result.escaped else -1
    return out
