"""Closed paths, generalized Boltzmann weights and the truncated series for Z.

A configuration is a start state z0 and a sequence of term indices
(i_1, ..., i_q); term i_k moves the walker from z_{k-1} to z_k and
contributes the amplitude d_{i_k}[z_k].  Its weight is

    W = Re(prod_k d_{i_k}[z_k]) * exp(-beta [E_{z_0}, ..., E_{z_q}]).

:func:`series_partition` does not visit configurations one by one.  Paths are
merged while they agree on (start, current state, amplitude product); what
the merged paths need from their energies is the sum of their divided
differences, which is linear in a truncated power series (see
:mod:`odesign.divided_differences`), so every bucket carries one coefficient
vector.  All paths in a bucket share the sign of Re(product) and every
order-q divided difference has sign (-1)^q, so |W| sums stay exact too.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy.signal import lfilter
from scipy.special import gammaln

from .divided_differences import dd_exp_signed_log
from .errors import ClosureError, TruncationWarning, UndefinedSignError
from .pmr import PmrHamiltonian

DEFAULT_QMAX = 80
DEFAULT_TAIL_TOL = 1e-10
REAL_ZERO_TOL = 1e-12
_KEY_DIGITS = 11


@dataclass(frozen=True)
class Configuration:
    z0: int
    sequence: tuple[int, ...] = ()

    @property
    def q(self) -> int:
        return len(self.sequence)


@dataclass(frozen=True)
class PathTrace:
    states: tuple[int, ...]
    energies: tuple[float, ...]
    amplitude_product: complex


@dataclass(frozen=True)
class Gbw:
    real_weight: float
    sign: int
    log_magnitude: float
    order: int


class SeriesResult(NamedTuple):
    z: float
    abs_sum: float
    achieved_q: int
    converged: bool
    z_by_order: tuple[float, ...]
    abs_by_order: tuple[float, ...]


def real_sign(p: complex) -> int:
    """Sign of Re(p); real parts below 1e-12 |p| count as zero."""
    re = p.real
    if abs(re) <= REAL_ZERO_TOL * abs(p):
        return 0
    return 1 if re > 0 else -1


def trace_path(h: PmrHamiltonian, config: Configuration, require_closed: bool = True) -> PathTrace:
    z = config.z0
    if not 0 <= z < h.dim:
        raise IndexError(f"start state {z} outside [0, {h.dim})")
    states = [z]
    amp = 1 + 0j
    for j in config.sequence:
        t = h.terms[j]
        z = int(t.perm[z])
        amp *= complex(t.diag[z])
        states.append(z)
    if require_closed and z != config.z0:
        raise ClosureError(f"sequence {config.sequence} does not return to state {config.z0}")
    energies = tuple(float(h.d0[s]) for s in states)
    return PathTrace(tuple(states), energies, amp)


def is_closed(h: PmrHamiltonian, config: Configuration) -> bool:
    return trace_path(h, config, require_closed=False).states[-1] == config.z0


def weight(h: PmrHamiltonian, config: Configuration, beta: float) -> Gbw:
    path = trace_path(h, config)
    amp_sign = real_sign(path.amplitude_product)
    q = config.q
    if amp_sign == 0:
        return Gbw(0.0, 0, -math.inf, q)
    dd_sign, dd_log = dd_exp_signed_log(path.energies, beta)
    sign = amp_sign * dd_sign
    log_mag = math.log(abs(path.amplitude_product.real)) + dd_log
    return Gbw(sign * math.exp(log_mag) if sign else 0.0, sign, log_mag, q)


def weight_sign(h: PmrHamiltonian, config: Configuration) -> int:
    """sgn Re prod(-d) along the path: the weight's sign for any beta > 0."""
    path = trace_path(h, config)
    return real_sign(path.amplitude_product * (-1) ** config.q)


def conjugate_configuration(h: PmrHamiltonian, config: Configuration) -> Configuration:
    """Same start, reversed sequence of inverse terms.

    Raises LookupError when a needed inverse term is absent.
    """
    seq = []
    for j in reversed(config.sequence):
        k = h.inverse_index(j)
        if k is None:
            raise LookupError(f"term {j} has no inverse partner")
        seq.append(k)
    return Configuration(config.z0, tuple(seq))


def _hop_tables(h: PmrHamiltonian) -> tuple[np.ndarray, np.ndarray]:
    nxt = np.array([t.perm for t in h.terms], dtype=np.int64).reshape(h.n_terms, h.dim)
    amp = np.array([t.diag[t.perm] for t in h.terms], dtype=complex).reshape(h.n_terms, h.dim)
    return nxt, amp


def return_distances(h: PmrHamiltonian, skip_zero: bool = True) -> np.ndarray:
    """dist[z0, z] = fewest hops from z back to z0 (dim + 1 when unreachable)."""
    n = h.dim
    nxt, amp = _hop_tables(h)
    preds: list[list[int]] = [[] for _ in range(n)]
    for j in range(h.n_terms):
        for z in range(n):
            if not skip_zero or amp[j, z] != 0:
                preds[nxt[j, z]].append(z)
    dist = np.full((n, n), n + 1, dtype=np.int64)
    for target in range(n):
        dist[target, target] = 0
        todo = deque([target])
        while todo:
            b = todo.popleft()
            for a in preds[b]:
                if dist[target, a] > dist[target, b] + 1:
                    dist[target, a] = dist[target, b] + 1
                    todo.append(a)
    return dist


def enumerate_closed(
    h: PmrHamiltonian, q_max: int, skip_zero: bool = True
) -> Iterator[Configuration]:
    """All closed configurations with q <= q_max, ordered by (q, z0, sequence).

    Depth-first over term sequences, pruning any branch whose remaining budget
    is shorter than the hop distance back to the start.  With ``skip_zero``
    hops with a zero coefficient are not followed.
    """
    if q_max < 0:
        return
    nxt, amp = _hop_tables(h)
    dist = return_distances(h, skip_zero)
    m = h.n_terms
    for q in range(q_max + 1):
        for z0 in range(h.dim):
            back = dist[z0]
            seq: list[int] = []

            def walk(z: int, left: int) -> Iterator[Configuration]:
                if left == 0:
                    if z == z0:
                        yield Configuration(z0, tuple(seq))
                    return
                for j in range(m):
                    if skip_zero and amp[j, z] == 0:
                        continue
                    nz = int(nxt[j, z])
                    if back[nz] > left - 1:
                        continue
                    seq.append(j)
                    yield from walk(nz, left - 1)
                    seq.pop()

            yield from walk(z0, q)


def _bucket_key(p: complex) -> tuple[float, float, float]:
    mag = abs(p)
    return (
        round(p.real / mag, _KEY_DIGITS),
        round(p.imag / mag, _KEY_DIGITS),
        round(math.log(mag), _KEY_DIGITS),
    )


def series_partition(
    h: PmrHamiltonian,
    beta: float,
    q_max: int = DEFAULT_QMAX,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> SeriesResult:
    """Sum W and |W| over closed configurations order by order.

    Stops at the first order q >= 1 where orders q-1 and q together add less
    than ``tail_tol`` times the running |W| sum, or when no open path can still
    close.  Reaching ``q_max`` first emits a TruncationWarning and returns
    ``converged=False``.
    """
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    if q_max < 0:
        raise ValueError("q_max must be non-negative")
    n = h.dim
    e = h.d0
    e_max = float(e.max())
    spread = beta * (e_max - float(e.min()))
    scale = spread if spread > 0 else 1.0
    ratio = beta * (e_max - e) / scale
    n_coef = int(math.e * spread) + 50
    k = np.arange(n_coef)
    log_beta = math.log(beta) if beta > 0 else -math.inf
    nxt, amp = _hop_tables(h)
    dist = return_distances(h)

    unit = np.zeros(n_coef)
    unit[0] = 1.0
    frontier: dict[tuple, list] = {}
    for z0 in range(n):
        g = lfilter([1.0], [1.0, -ratio[z0]], unit)
        frontier[(z0, z0, _bucket_key(1 + 0j))] = [1 + 0j, g]

    z_orders: list[float] = []
    a_orders: list[float] = []
    achieved, converged = q_max, False
    for q in range(q_max + 1):
        log_w = k * math.log(scale) - gammaln(k + q + 1)
        top = float(log_w.max())
        w = np.exp(log_w - top)
        log_pref = (q * log_beta if q else 0.0) - beta * e_max + top
        z_q = a_q = 0.0
        for (z0, z, _), (p, g) in frontier.items():
            if z != z0:
                continue
            s = real_sign(p)
            if s == 0:
                continue
            mag = abs(p.real) * float(g @ w) * math.exp(log_pref)
            a_q += mag
            z_q += s * (-1) ** q * mag
        z_orders.append(z_q)
        a_orders.append(a_q)
        total = math.fsum(a_orders)
        if q >= 1 and a_orders[-1] + a_orders[-2] < tail_tol * total:
            achieved, converged = q, True
            break
        if h.n_terms == 0:
            achieved, converged = q, True
            break
        if q == q_max:
            break

        budget = q_max - (q + 1)
        grown: dict[tuple, list] = {}
        for (z0, z, _), (p, g) in frontier.items():
            back = dist[z0]
            for j in range(h.n_terms):
                d = complex(amp[j, z])
                if d == 0:
                    continue
                nz = int(nxt[j, z])
                if back[nz] > budget:
                    continue
                p_new = p * d
                key = (z0, nz, _bucket_key(p_new))
                slot = grown.get(key)
                if slot is None:
                    grown[key] = [p_new, g.copy()]
                else:
                    slot[1] += g
        if not grown:
            achieved, converged = q, True
            break
        by_state: dict[int, list[tuple]] = {}
        for key in grown:
            by_state.setdefault(key[1], []).append(key)
        for state, keys in by_state.items():
            block = np.stack([grown[key][1] for key in keys])
            block = lfilter([1.0], [1.0, -ratio[state]], block, axis=1)
            for key, row in zip(keys, block):
                grown[key][1] = row
        frontier = grown

    if not converged:
        warnings.warn(
            f"series tail criterion {tail_tol:g} unmet at q_max={q_max}",
            TruncationWarning,
            stacklevel=2,
        )
    return SeriesResult(
        math.fsum(z_orders),
        math.fsum(a_orders),
        achieved,
        converged,
        tuple(z_orders),
        tuple(a_orders),
    )


def series_sign(
    h: PmrHamiltonian,
    beta: float,
    q_max: int = DEFAULT_QMAX,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> float:
    """sum W / sum |W| over the truncated configuration set."""
    res = series_partition(h, beta, q_max, tail_tol)
    if res.abs_sum == 0:
        raise UndefinedSignError("all weights vanish; the average sign is undefined")
    return res.z / res.abs_sum


def enumerated_sums(h: PmrHamiltonian, beta: float, q_max: int) -> tuple[float, float]:
    """(sum W, sum |W|) by explicit enumeration; for cross-checks at tiny scale."""
    ws = [weight(h, c, beta).real_weight for c in enumerate_closed(h, q_max)]
    return math.fsum(ws), math.fsum(abs(w) for w in ws)
