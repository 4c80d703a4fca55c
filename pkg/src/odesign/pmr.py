"""Permutation-matrix representation  H = D_0 + sum_j D_j P_j.

Each off-diagonal term is stored as a (diagonal, permutation) pair with the
convention

    D_j P_j |z>  =  d_j[P_j(z)] |P_j(z)>,

i.e. the diagonal entry is read at the *target* state of the hop, so the
matrix element <P_j(z)| H |z> equals ``d_j[P_j(z)]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

HERMITIAN_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def check_permutation(mapping: Sequence[int]) -> np.ndarray:
    """Validate a fixed-point-free bijection and return it as an int array."""
    m = np.asarray(mapping, dtype=np.int64)
    n = m.size
    if m.ndim != 1 or not np.array_equal(np.sort(m), np.arange(n)):
        raise ValidationError(f"{list(m)} is not a permutation of range({n})")
    if np.any(m == np.arange(n)):
        raise ValidationError(f"{list(m)} has fixed points")
    return m


def inverse_permutation(mapping: np.ndarray) -> np.ndarray:
    inv = np.empty_like(mapping)
    inv[mapping] = np.arange(mapping.size)
    return inv


def cycles(mapping: Sequence[int]) -> list[tuple[int, ...]]:
    """Disjoint-cycle decomposition, each cycle starting at its smallest index."""
    seen = set()
    out = []
    for start in range(len(mapping)):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        nxt = int(mapping[start])
        while nxt != start:
            cyc.append(nxt)
            seen.add(nxt)
            nxt = int(mapping[nxt])
        out.append(tuple(cyc))
    return out


@dataclass(frozen=True)
class Term:
    diag: np.ndarray
    perm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diag", _frozen(np.array(self.diag, dtype=complex)))
        object.__setattr__(self, "perm", _frozen(check_permutation(self.perm).copy()))
        if self.diag.shape != self.perm.shape:
            raise ValidationError("diagonal and permutation sizes differ")


@dataclass(frozen=True)
class PmrHamiltonian:
    """Classical energies ``d0`` plus off-diagonal ``terms``.

    Use :meth:`build` to merge terms that share a permutation and to drop
    all-zero ones; the plain constructor only validates.
    """

    d0: np.ndarray
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        d0 = np.asarray(self.d0)
        if np.iscomplexobj(d0):
            if np.any(np.abs(d0.imag) > HERMITIAN_TOL):
                raise ValidationError("classical energies must be real")
            d0 = d0.real
        object.__setattr__(self, "d0", _frozen(np.array(d0, dtype=float)))
        object.__setattr__(self, "terms", tuple(self.terms))
        keys = set()
        for t in self.terms:
            if t.perm.size != self.dim:
                raise ValidationError("term dimension does not match d0")
            k = t.perm.tobytes()
            if k in keys:
                raise ValidationError("duplicate permutation in terms")
            keys.add(k)

    @classmethod
    def build(cls, d0, terms) -> "PmrHamiltonian":
        """Accepts ``terms`` as Term objects or (diag, perm) pairs."""
        merged: dict[bytes, list] = {}
        for t in terms:
            if not isinstance(t, Term):
                t = Term(*t)
            key = t.perm.tobytes()
            if key in merged:
                merged[key][0] = merged[key][0] + t.diag
            else:
                merged[key] = [np.array(t.diag), t.perm]
        kept = tuple(Term(d, p) for d, p in merged.values() if np.any(d != 0))
        return cls(d0, kept)

    @property
    def dim(self) -> int:
        return int(self.d0.size)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def inverse_index(self, j: int) -> int | None:
        """Index of the term whose permutation inverts term ``j`` (None if absent)."""
        target = inverse_permutation(self.terms[j].perm).tobytes()
        for k, t in enumerate(self.terms):
            if t.perm.tobytes() == target:
                return k
        return None


def as_hermitian(matrix, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = np.array(matrix, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] == 0:
        raise ValidationError(f"expected a non-empty square matrix, got shape {h.shape}")
    err = np.max(np.abs(h - h.conj().T))
    if err > tol:
        raise ValidationError(f"matrix is not Hermitian (max asymmetry {err:.3g})")
    return h


def _family(h: np.ndarray, perms) -> list[Term]:
    n = h.shape[0]
    cols = np.arange(n)
    out = []
    for perm in perms:
        diag = np.zeros(n, dtype=complex)
        diag[perm] = h[perm, cols]
        if np.any(diag != 0):
            out.append(Term(diag, perm))
    return out


def decompose(matrix, tol: float = HERMITIAN_TOL) -> PmrHamiltonian:
    """Split a Hermitian matrix into permutation-matrix form.

    Two complete families of fixed-point-free permutations are tried: cyclic
    shifts z -> z + s (mod n), and, when n is a power of two, bit masks
    z -> z XOR m.  Each off-diagonal entry lies on exactly one member of
    either family, so both reproduce the matrix exactly; the family needing
    fewer non-zero terms wins (cyclic on ties).  Both families are closed
    under inversion, so every term's Hermitian partner is present.
    """
    h = as_hermitian(matrix, tol)
    n = h.shape[0]
    d0 = np.real(np.diag(h)).copy()
    base = np.arange(n)
    best = _family(h, [(base + s) % n for s in range(1, n)])
    if n & (n - 1) == 0 and n > 1:
        xor = _family(h, [base ^ m for m in range(1, n)])
        if len(xor) < len(best):
            best = xor
    return PmrHamiltonian(d0, tuple(best))


def recompose(h: PmrHamiltonian) -> np.ndarray:
    n = h.dim
    out = np.diag(h.d0).astype(complex)
    cols = np.arange(n)
    for t in h.terms:
        out[t.perm, cols] += t.diag[t.perm]
    return out


def is_stoquastic(matrix, tol: float = HERMITIAN_TOL) -> bool:
    """True iff every off-diagonal entry is real (to ``tol``) and <= tol."""
    h = np.asarray(matrix, dtype=complex)
    off = ~np.eye(h.shape[0], dtype=bool)
    return bool(np.all(h.real[off] <= tol) and np.all(np.abs(h.imag[off]) <= tol))


def stoquasticize(h: PmrHamiltonian) -> PmrHamiltonian:
    """Replace each off-diagonal coefficient d by -|d|; classical energies unchanged."""
    return PmrHamiltonian(h.d0, tuple(Term(-np.abs(t.diag), t.perm) for t in h.terms))


def conjugate_by_unitary(matrix, u, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return U H U^dagger."""
    h = as_hermitian(matrix, tol)
    u = np.asarray(u, dtype=complex)
    if u.shape != h.shape:
        raise ValidationError(f"unitary shape {u.shape} does not match {h.shape}")
    err = np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])))
    if err > tol:
        raise ValidationError(f"matrix is not unitary (deviation {err:.3g})")
    return u @ h @ u.conj().T


def hopping_amplitude(h: PmrHamiltonian, j: int, z: int) -> complex:
    """Coefficient picked up when term ``j`` acts on basis state ``z``."""
    if not 0 <= j < h.n_terms:
        raise IndexError(f"term index {j} outside [0, {h.n_terms})")
    if not 0 <= z < h.dim:
        raise IndexError(f"state {z} outside [0, {h.dim})")
    t = h.terms[j]
    return complex(t.diag[t.perm[z]])
