"""Constructors for the example Hamiltonians and their closed-form results.

Basis conventions: the single qutrit uses (g1, e, g2) = (0, 1, 2); many-body
bases are little-endian, i.e. site ``i`` is bit (or base-3 digit) ``i`` of the
state index.  For spins, bit 0 is the Z = +1 state.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ValidationError
from .pmr import PmrHamiltonian

MAX_QUBIT_SITES = 10
MAX_QUTRIT_SITES = 8
SIGN_ZERO_TOL = 1e-12

QUTRIT_P1 = (1, 2, 0)
QUTRIT_P2 = (2, 0, 1)
CYCLE_P = (1, 2, 3, 0)


@dataclass
class LatticeParams:
    """Couplings, fields and transverse strength for spin-1/2 lattices.

    ``edges`` defaults to the keys of ``couplings``.  ``bipartition`` maps
    site -> colour (0/1); it is inferred when absent.
    """

    n_sites: int
    couplings: dict[tuple[int, int], float] = field(default_factory=dict)
    fields: dict[int, float] = field(default_factory=dict)
    gamma: float = 0.0
    edges: list[tuple[int, int]] | None = None
    bipartition: dict[int, int] | None = None

    def __post_init__(self):
        for i, j in list(self.couplings) + list(self.edges or []):
            if not (0 <= i < self.n_sites and 0 <= j < self.n_sites) or i == j:
                raise ValidationError(f"edge ({i}, {j}) invalid for {self.n_sites} sites")
        for i in self.fields:
            if not 0 <= i < self.n_sites:
                raise ValidationError(f"field on invalid site {i}")

    @property
    def edge_list(self) -> list[tuple[int, int]]:
        return list(self.edges) if self.edges is not None else list(self.couplings)


def single_qubit(alpha0: float, alpha1: float, alpha2: float, alpha3: float) -> PmrHamiltonian:
    """a0*1 + a1*X + a2*Y + a3*Z with D_0 = a0 + a3 Z and D_1 = a1 - i a2 Z on P_1 = X."""
    d0 = np.array([alpha0 + alpha3, alpha0 - alpha3], dtype=float)
    diag = np.array([alpha1 - 1j * alpha2, alpha1 + 1j * alpha2])
    return PmrHamiltonian.build(d0, [(diag, (1, 0))])


def qutrit(phi: float, J: float) -> PmrHamiltonian:
    """e^{i phi} P_1 + e^{-i phi} P_2 + J diag(0, 1, 0)."""
    if not J > 0:
        raise ValidationError(f"qutrit model requires J > 0, got {J}")
    phase = complex(math.cos(phi), math.sin(phi))
    return PmrHamiltonian.build(
        [0.0, J, 0.0],
        [(np.full(3, phase), QUTRIT_P1), (np.full(3, phase.conjugate()), QUTRIT_P2)],
    )


def qutrit_sign_free_angles() -> tuple[float, float, float]:
    """Angles in [0, 2pi) at which the qutrit model has no negative weights."""
    return (math.pi / 3, math.pi, 5 * math.pi / 3)


def _sgn(x: float) -> int:
    if abs(x) <= SIGN_ZERO_TOL:
        return 0
    return 1 if x > 0 else -1


def qutrit_weight_sign_formula(n1: int, n2: int, phi: float) -> int:
    """Sign of a closed qutrit weight with n1 P_1 and n2 P_2 factors.

    sgn Re exp(i[(n1 - n2) phi + (n1 + n2) pi]); the (-1)^(n1+n2) factor is
    the sign of the order-(n1+n2) divided difference.
    """
    if n1 < 0 or n2 < 0 or (n1 + 2 * n2) % 3:
        raise ValueError(f"(n1, n2) = ({n1}, {n2}) is not a closed qutrit sequence")
    return (-1) ** (n1 + n2) * _sgn(math.cos((n1 - n2) * phi))


def qutrit_phase_sign(n1: int, n2: int, phi: float) -> int:
    """sgn cos((n1 - n2) phi): the path phase alone, without the (-1)^q factor.

    This is what a sign column listing sgn(cos 3 phi) at q = 3 tabulates; it
    disagrees with :func:`qutrit_weight_sign_formula` at odd q.
    """
    if n1 < 0 or n2 < 0 or (n1 + 2 * n2) % 3:
        raise ValueError(f"(n1, n2) = ({n1}, {n2}) is not a closed qutrit sequence")
    return _sgn(math.cos((n1 - n2) * phi))


def _digits(n_sites: int, base: int) -> np.ndarray:
    idx = np.arange(base**n_sites)
    return np.stack([(idx // base**s) % base for s in range(n_sites)], axis=1)


def _index(digits: np.ndarray, base: int) -> np.ndarray:
    weights = base ** np.arange(digits.shape[1])
    return digits @ weights


def multi_qutrit(
    edges: Iterable[tuple[int, int]],
    phi: float,
    d0_site: Sequence[Sequence[float]],
) -> PmrHamiltonian:
    """sum_j D_0^j + sum_<ij> (e^{i phi} P1^i P2^j + e^{-i phi} P1^j P2^i).

    ``d0_site[j]`` is the classical-energy triple of site j.
    """
    n = len(d0_site)
    if n == 0:
        raise ValidationError("need at least one site")
    if n > MAX_QUTRIT_SITES:
        raise CapacityError(f"3^{n} exceeds the 3^{MAX_QUTRIT_SITES} dimension cap")
    digits = _digits(n, 3)
    site_e = np.asarray(d0_site, dtype=float)
    if site_e.shape != (n, 3):
        raise ValidationError("d0_site must hold one triple per site")
    d0 = site_e[np.arange(n), digits].sum(axis=1)
    phase = complex(math.cos(phi), math.sin(phi))
    terms = []
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValidationError(f"edge ({i}, {j}) invalid for {n} sites")
        for a, b, c in ((i, j, phase), (j, i, phase.conjugate())):
            moved = digits.copy()
            moved[:, a] = (moved[:, a] + 1) % 3
            moved[:, b] = (moved[:, b] + 2) % 3
            terms.append((np.full(3**n, c), _index(moved, 3)))
    return PmrHamiltonian.build(d0, terms)


def _ising_energies(p: LatticeParams) -> np.ndarray:
    spins = 1 - 2 * _digits(p.n_sites, 2)
    e = np.zeros(2**p.n_sites)
    for (i, j), J in p.couplings.items():
        e += J * spins[:, i] * spins[:, j]
    for i, h in p.fields.items():
        e += h * spins[:, i]
    return e


def _check_sites(p: LatticeParams) -> None:
    if p.n_sites < 1:
        raise ValidationError("need at least one site")
    if p.n_sites > MAX_QUBIT_SITES:
        raise CapacityError(f"2^{p.n_sites} exceeds the 2^{MAX_QUBIT_SITES} dimension cap")


def tfim(p: LatticeParams) -> PmrHamiltonian:
    """sum J_ij Z_i Z_j + sum h_j Z_j + gamma sum X_j, one bit-flip term per site."""
    _check_sites(p)
    dim = 2**p.n_sites
    base = np.arange(dim)
    terms = [(np.full(dim, p.gamma, dtype=complex), base ^ (1 << s)) for s in range(p.n_sites)]
    return PmrHamiltonian.build(_ising_energies(p), terms)


def two_coloring(n_sites: int, edges: Iterable[tuple[int, int]]) -> dict[int, int]:
    """Colour sites so every edge joins different colours; ValidationError on an odd cycle."""
    adj: dict[int, list[int]] = {s: [] for s in range(n_sites)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    colour: dict[int, int] = {}
    for root in range(n_sites):
        if root in colour:
            continue
        colour[root] = 0
        todo = deque([root])
        while todo:
            a = todo.popleft()
            for b in adj[a]:
                if b not in colour:
                    colour[b] = 1 - colour[a]
                    todo.append(b)
                elif colour[b] == colour[a]:
                    raise ValidationError(
                        f"edge set is not bipartite: edge ({a}, {b}) closes an odd cycle"
                    )
    return colour


def xx_bipartite(p: LatticeParams) -> PmrHamiltonian:
    """sum J_ij Z_i Z_j + gamma sum_<ij> X_i X_j on a bipartite edge set."""
    _check_sites(p)
    edges = p.edge_list
    if p.bipartition is not None:
        for i, j in edges:
            if p.bipartition.get(i) == p.bipartition.get(j):
                raise ValidationError(f"bipartition does not separate edge ({i}, {j})")
    else:
        two_coloring(p.n_sites, edges)
    dim = 2**p.n_sites
    base = np.arange(dim)
    terms = [
        (np.full(dim, p.gamma, dtype=complex), base ^ ((1 << i) | (1 << j))) for i, j in edges
    ]
    return PmrHamiltonian.build(_ising_energies(p), terms)


def perm_cycle(epsilon: float) -> PmrHamiltonian:
    """-(P + P^3) + epsilon P^2 on the 4-cycle P: |z> -> |z+1 mod 4>."""
    p = np.array(CYCLE_P)
    p2, p3 = p[p], p[p[p]]
    ones = np.ones(4)
    return PmrHamiltonian.build(
        np.zeros(4), [(-ones, p), (epsilon * ones, p2), (-ones, p3)]
    )


def perm_cycle_sign_closed_form(epsilon: float, beta: float) -> float:
    """Tr e^{-beta H} / Tr e^{-beta H_s} for the 4-cycle model.

    Equal to (2e^{2b(e+1)} + e^{4b} + 1) / (e^{2be} + e^{2b(e+2)} + 2e^{2b});
    evaluated after dividing through by e^{2b(e+2)} to avoid overflow.
    """
    b, e = beta, epsilon
    num = 2 * math.exp(-2 * b) + math.exp(-2 * b * e) + math.exp(-2 * b * (e + 2))
    den = math.exp(-4 * b) + 1 + 2 * math.exp(-2 * b * (e + 1))
    return num / den
