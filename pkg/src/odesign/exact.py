"""Exact diagonalization oracle: spectra, thermal traces and the trace-ratio sign."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ValidationError
from .pmr import HERMITIAN_TOL, PmrHamiltonian, as_hermitian, recompose, stoquasticize

JACOBI_MAX_DIM = 64
JACOBI_MAX_SWEEPS = 100
DEGENERACY_TOL = 1e-9
AMPLITUDE_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


class GroundStateClass(str, Enum):
    ALL_SAME_SIGN = "all_same_sign"
    MIXED_SIGN = "mixed_sign"
    DEGENERATE_AMBIGUOUS = "degenerate_ambiguous"


@dataclass
class SignReport:
    """Average-sign estimates for one model at one inverse temperature."""

    beta: float
    model: str = ""
    trace_ratio_sign: float | None = None
    series_sign: float | None = None
    sampler_sign: float | None = None
    sampler_stderr: float | None = None
    warnings: list[str] = field(default_factory=list)


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi sweeps for a complex Hermitian matrix.

    Each rotation first removes the phase of a[p, q] with a diagonal unitary
    and then applies the real symmetric 2x2 rotation.
    """
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off < 1e-14 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r < 1e-20 * scale:
                    continue
                phase = apq / r
                theta = (a[q, q].real - a[p, p].real) / (2.0 * r)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ rot
    else:
        raise ArithmeticError("Jacobi sweeps did not converge")
    return np.real(np.diag(a)), v


def diagonalize(matrix, tol: float = HERMITIAN_TOL, method: str = "auto") -> Spectrum:
    """Ascending eigenvalues with orthonormal eigenvector columns.

    ``method`` is "jacobi", "lapack", or "auto" (Jacobi up to dimension 64).
    """
    h = as_hermitian(matrix, tol)
    h = (h + h.conj().T) / 2
    if method == "auto":
        method = "jacobi" if h.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        w, v = _jacobi(h)
    elif method == "lapack":
        w, v = np.linalg.eigh(h)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(w, kind="stable")
    return Spectrum(w[order], v[:, order])


def log_trace_exp(matrix, beta: float) -> float:
    """log Tr e^{-beta H}, evaluated with the ground energy factored out."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    w = diagonalize(matrix).eigenvalues
    x = -beta * w
    top = x.max()
    return float(top + math.log(math.fsum(np.exp(x - top))))


def trace_exp(matrix, beta: float) -> float:
    return math.exp(log_trace_exp(matrix, beta))


def _as_matrix(h) -> np.ndarray:
    return recompose(h) if isinstance(h, PmrHamiltonian) else np.asarray(h, dtype=complex)


def exact_sign(h: PmrHamiltonian, beta: float) -> float:
    """Tr e^{-beta H} / Tr e^{-beta H_s} with H_s the stoquasticized model."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return math.exp(log_trace_exp(recompose(h), beta) - log_trace_exp(recompose(stoquasticize(h)), beta))


def thermal_diagonal(h, beta: float) -> np.ndarray:
    """Diagonal of e^{-beta H} / Z, i.e. <z|rho|z> for every basis state."""
    spec = diagonalize(_as_matrix(h))
    x = -beta * spec.eigenvalues
    wts = np.exp(x - x.max())
    wts /= wts.sum()
    return np.real(np.abs(spec.eigenvectors) ** 2 @ wts)


def ground_state_sign_class(matrix) -> GroundStateClass:
    """Classify the sign pattern of the ground-state amplitudes.

    The global phase is fixed by making the largest-magnitude amplitude real
    and positive; amplitudes below 1e-10 count as zero.
    """
    m = _as_matrix(matrix)
    spec = diagonalize(m)
    w = spec.eigenvalues
    norm = max(float(np.max(np.abs(w))), 1.0)
    if w.size > 1 and w[1] - w[0] <= DEGENERACY_TOL * norm:
        return GroundStateClass.DEGENERATE_AMBIGUOUS
    vec = spec.eigenvectors[:, 0]
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    nonzero = np.abs(vec) > AMPLITUDE_ZERO_TOL
    amps = vec[nonzero]
    if np.all(np.abs(amps.imag) <= AMPLITUDE_ZERO_TOL) and np.all(amps.real > 0):
        return GroundStateClass.ALL_SAME_SIGN
    return GroundStateClass.MIXED_SIGN


def check_spectrum(matrix, spec: Spectrum, tol: float = 1e-9) -> None:
    """Raise ValidationError if ``spec`` does not reconstruct ``matrix``."""
    m = np.asarray(matrix, dtype=complex)
    norm = max(np.linalg.norm(m, 2), 1.0)
    v, w = spec.eigenvectors, spec.eigenvalues
    if np.max(np.abs(m @ v - v * w)) > tol * norm:
        raise ValidationError("eigen-equation residual too large")
    if np.max(np.abs(v.conj().T @ v - np.eye(len(w)))) > 1e-10:
        raise ValidationError("eigenvectors not orthonormal")
