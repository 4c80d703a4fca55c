"""Divided differences of F(x) = exp(-beta * x).

Three independent routes are provided:

* :func:`dd_exp` -- production routine.  Inputs are shifted by their maximum so
  that, after the substitution u = -beta * x, every Taylor coefficient of the
  shifted problem is non-negative.  The series then has no cancellation at all
  and is summed in log space, so neither clustered inputs nor large
  ``beta * q`` products lose accuracy.
* :func:`dd_exp_recursive` -- the classical recursion on sorted inputs, with the
  derivative formula for repeated inputs, in adaptive extended precision.
* :func:`dd_exp_taylor` -- the plain Taylor series about a centre (the mean by
  default), summed in extended precision sized to the worst-case cancellation.

:class:`DividedDifferenceTable` carries an evaluated multiset so that samplers
can append and remove energies without re-validating inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from scipy.signal import lfilter
from scipy.special import gammaln

from .errors import DividedDifferenceError, DomainError

CONFLUENCE_TOL = 1e-12
MAX_PRECISION_BITS = 1 << 14
_LOG_TAIL = math.log(1e-17)


def _validate(inputs: Iterable[float], beta: float) -> tuple[tuple[float, ...], float]:
    xs = tuple(float(x) for x in inputs)
    if not xs:
        raise DomainError("divided differences need at least one input")
    if not all(math.isfinite(x) for x in xs):
        raise DomainError(f"non-finite input in {xs!r}")
    beta = float(beta)
    if not math.isfinite(beta):
        raise DomainError(f"non-finite beta {beta!r}")
    return xs, beta


def _snap(xs: Sequence[float]) -> list[float]:
    """Sort and merge inputs closer than CONFLUENCE_TOL to the first of their cluster."""
    out = sorted(xs)
    anchor = out[0]
    for i in range(1, len(out)):
        if out[i] - anchor <= CONFLUENCE_TOL:
            out[i] = anchor
        else:
            anchor = out[i]
    return out


def _log_positive_series(v: np.ndarray) -> float:
    """log of exp[v_0, ..., v_q] for non-negative v.

    Uses exp[v] = sum_k h_k(v) / (k + q)!, where h_k is the complete homogeneous
    symmetric polynomial.  Coefficients are rescaled by the largest input so
    they stay O(binomial) in size.
    """
    q = len(v) - 1
    lam = float(v.max())
    if lam == 0.0:
        return -math.lgamma(q + 1)
    n_terms = int(math.e * lam) + 50
    h = np.zeros(n_terms)
    h[0] = 1.0
    for r in v / lam:
        h = lfilter([1.0], [1.0, -r], h)
    if not np.all(np.isfinite(h)):
        raise OverflowError("series coefficients overflowed")
    k = np.arange(n_terms)
    log_terms = np.log(h) + k * math.log(lam) - gammaln(k + q + 1)
    top = float(log_terms.max())
    log_sum = top + math.log(math.fsum(np.exp(log_terms - top)))
    if log_terms[-1] - log_sum > _LOG_TAIL:
        raise OverflowError("series tail did not decay")
    return log_sum


@lru_cache(maxsize=1 << 16)
def _signed_log_cached(xs: tuple[float, ...], beta: float) -> tuple[int, float]:
    q = len(xs) - 1
    if q == 0:
        return 1, -beta * xs[0]
    if beta == 0.0:
        return 0, -math.inf
    u = np.array(xs) * -beta
    shift = float(u.min())
    try:
        log_series = _log_positive_series(u - shift)
    except OverflowError:
        value = _recursive_mpfr(list(xs), beta)
        if value == 0:
            raise DividedDifferenceError(f"escalation underflowed for {xs!r}")
        return (1 if value > 0 else -1), float(gmpy2.log(abs(value)))
    sign = -1 if (beta > 0 and q % 2) else 1
    return sign, q * math.log(abs(beta)) + shift + log_series


def dd_exp_signed_log(inputs: Iterable[float], beta: float) -> tuple[int, float]:
    """Return ``(sign, log|value|)`` of exp(-beta[x_0, ..., x_q]).

    The result is a symmetric function of the inputs; they are sorted before
    evaluation, so any permutation gives bit-identical output.
    """
    xs, beta = _validate(inputs, beta)
    return _signed_log_cached(tuple(_snap(xs)), beta)


def dd_exp(inputs: Iterable[float], beta: float) -> float:
    """Divided difference exp(-beta[x_0, ..., x_q]) of the exponential.

    Repeated inputs are handled as the confluent limit.  For beta > 0 the sign
    is (-1)**q.

    >>> dd_exp([0.0, 0.0, 0.0], 1.0)
    0.5
    """
    sign, log_mag = dd_exp_signed_log(inputs, beta)
    return sign * math.exp(log_mag) if sign else 0.0


def _recursive_at(xs: list[float], beta: float, bits: int):
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        mb = gmpy2.mpfr(beta)
        x = [gmpy2.mpfr(v) for v in xs]
        table = [gmpy2.exp(-mb * xi) for xi in x]
        q = len(x) - 1
        for j in range(1, q + 1):
            table = [
                (table[i + 1] - table[i]) / (x[i + j] - x[i])
                if xs[i + j] != xs[i]
                else (-mb) ** j * gmpy2.exp(-mb * x[i]) / gmpy2.fac(j)
                for i in range(q - j + 1)
            ]
        return +table[0]


def _recursive_mpfr(xs: list[float], beta: float):
    xs = _snap(xs)
    bits = 128
    prev = _recursive_at(xs, beta, bits)
    while bits < MAX_PRECISION_BITS:
        bits *= 2
        cur = _recursive_at(xs, beta, bits)
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            if abs(cur - prev) <= abs(cur) * gmpy2.mpfr(2) ** -64:
                return cur
        prev = cur
    raise DividedDifferenceError(
        f"recursion did not stabilise below {MAX_PRECISION_BITS} bits for {xs!r}"
    )


def dd_exp_recursive(inputs: Iterable[float], beta: float) -> float:
    """Divided difference via the two-point recursion, in extended precision.

    Inputs are sorted so that repeated values sit next to each other; a
    recursion step whose end points coincide uses F^(j)(x) / j! instead.
    Precision doubles from 128 bits until two successive results agree.
    """
    xs, beta = _validate(inputs, beta)
    return float(_recursive_mpfr(list(xs), beta))


def dd_exp_taylor(
    inputs: Iterable[float],
    beta: float,
    terms: int | None = None,
    center: float | None = None,
) -> float:
    """Partial Taylor sum  e^{-beta c} sum_n (-beta)^n [y_0..y_q]^n / n!,  y = x - c.

    ``[y]^n`` is the divided difference of the monomial, i.e. the complete
    homogeneous polynomial h_{n-q}(y).  ``terms`` counts n = 0 .. terms-1;
    ``None`` sums until the tail is below double precision.  ``c`` defaults to
    the mean of the inputs.  Working precision covers the alternating-sign
    cancellation, which is at most exp(2 beta max|y|).
    """
    xs, beta = _validate(inputs, beta)
    if terms is not None and terms < 1:
        raise DomainError("terms must be >= 1")
    q = len(xs) - 1
    c = math.fsum(xs) / len(xs) if center is None else float(center)
    spread = abs(beta) * max(abs(x - c) for x in xs)
    bits = 80 + int(2.0 * spread * math.log2(math.e)) + 4 * q
    n_max = terms if terms is not None else q + int(math.e * spread) + 60
    n_h = max(n_max - q, 0)
    if n_h == 0:
        return 0.0
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        mb = gmpy2.mpfr(beta)
        h = [gmpy2.mpfr(0)] * n_h
        h[0] = gmpy2.mpfr(1)
        for x in xs:
            y = gmpy2.mpfr(x) - gmpy2.mpfr(c)
            for k in range(1, n_h):
                h[k] = h[k] + y * h[k - 1]
        coef = (-mb) ** q / gmpy2.fac(q)
        total = gmpy2.mpfr(0)
        for k in range(n_h):
            total += coef * h[k]
            coef = coef * (-mb) / (k + q + 1)
        return float(total * gmpy2.exp(-mb * gmpy2.mpfr(c)))


@dataclass(frozen=True)
class DividedDifferenceTable:
    """An evaluated multiset of energies.

    ``shift`` is the largest input, about which the positive series is
    expanded.  Tables are values: :func:`table_extend` and :func:`table_remove`
    return new tables.
    """

    inputs: tuple[float, ...]
    beta: float
    shift: float
    value: float
    magnitude_log: float
    sign: int

    @classmethod
    def build(cls, inputs: Iterable[float], beta: float) -> "DividedDifferenceTable":
        xs, beta = _validate(inputs, beta)
        sign, log_mag = _signed_log_cached(tuple(_snap(xs)), beta)
        value = sign * math.exp(log_mag) if sign else 0.0
        return cls(xs, beta, max(xs), value, log_mag, sign)

    @property
    def order(self) -> int:
        return len(self.inputs) - 1


def table_extend(table: DividedDifferenceTable, new_energy: float) -> DividedDifferenceTable:
    return DividedDifferenceTable.build(table.inputs + (float(new_energy),), table.beta)


def table_remove(table: DividedDifferenceTable, position: int) -> DividedDifferenceTable:
    n = len(table.inputs)
    if n < 2:
        raise DomainError("cannot remove from a single-input table")
    if not -n <= position < n:
        raise IndexError(position)
    position %= n
    rest = table.inputs[:position] + table.inputs[position + 1 :]
    return DividedDifferenceTable.build(rest, table.beta)
