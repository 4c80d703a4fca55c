"""Parsing of angles, model descriptors, dense-matrix files and lattice files."""

from __future__ import annotations

import math
import re
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import models
from .errors import ValidationError
from .pmr import PmrHamiltonian, decompose

_PI_TOKEN = re.compile(r"^\s*([+-]?)\s*(\d+(?:\.\d+)?)?\s*\*?\s*pi\s*(?:/\s*(\d+))?\s*$", re.IGNORECASE)


def parse_angle(text: str) -> float:
    """Decimal radians, or a rational multiple of pi such as ``pi/3``, ``-2pi/3``, ``5*pi/3``."""
    m = _PI_TOKEN.match(text)
    if m:
        sign, num, den = m.groups()
        frac = Fraction(num or "1") / Fraction(den or "1")
        return (-1 if sign == "-" else 1) * float(frac) * math.pi
    return parse_real(text)


def parse_real(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise ValidationError(f"not a finite number: {text!r}")
    return value


def parse_real_list(text: str) -> list[float]:
    return [parse_real(tok) for tok in text.split(",") if tok.strip()]


def read_dense_matrix(path) -> np.ndarray:
    """First line ``n``, then lines ``row col re im``; absent entries are zero."""
    lines = [ln.split("#", 1)[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValidationError(f"{path}: empty matrix file")
    try:
        n = int(lines[0])
    except ValueError:
        raise ValidationError(f"{path}: first line must be the dimension") from None
    if n < 1:
        raise ValidationError(f"{path}: dimension must be positive")
    m = np.zeros((n, n), dtype=complex)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ValidationError(f"{path}: expected 'row col re im', got {ln!r}")
        r, c = int(parts[0]), int(parts[1])
        if not (0 <= r < n and 0 <= c < n):
            raise ValidationError(f"{path}: index ({r}, {c}) outside {n}x{n}")
        m[r, c] = complex(parse_real(parts[2]), parse_real(parts[3]))
    return m


def write_dense_matrix(path, matrix) -> None:
    m = np.asarray(matrix, dtype=complex)
    n = m.shape[0]
    rows = [str(n)]
    for r in range(n):
        for c in range(n):
            z = complex(m[r, c])
            rows.append(f"{r} {c} {z.real!r} {z.imag!r}")
    Path(path).write_text("\n".join(rows) + "\n")


def read_lattice(path) -> tuple[int, dict[tuple[int, int], float], dict[int, float]]:
    """Return (n_sites, couplings, fields) from ``i j J`` and ``h i value`` lines."""
    couplings: dict[tuple[int, int], float] = {}
    fields: dict[int, float] = {}
    sites = set()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        ln = raw.split("#", 1)[0].split()
        if not ln:
            continue
        try:
            if ln[0] == "h" and len(ln) == 3:
                i = int(ln[1])
                fields[i] = fields.get(i, 0.0) + parse_real(ln[2])
                sites.add(i)
            elif len(ln) == 3:
                i, j = int(ln[0]), int(ln[1])
                if i == j or i < 0 or j < 0:
                    raise ValidationError(f"{path}:{lineno}: invalid edge ({i}, {j})")
                key = (min(i, j), max(i, j))
                couplings[key] = couplings.get(key, 0.0) + parse_real(ln[2])
                sites.update(key)
            else:
                raise ValueError
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"{path}:{lineno}: cannot parse {raw!r}") from None
    if any(i < 0 for i in sites):
        raise ValidationError(f"{path}: negative site index")
    if not sites:
        raise ValidationError(f"{path}: no sites")
    return max(sites) + 1, couplings, fields


def _args(body: str, count: int, kind: str) -> list[str]:
    parts = [p.strip() for p in body.split(",")]
    if len(parts) != count or not all(parts):
        raise ValidationError(f"{kind} model needs {count} comma-separated arguments, got {body!r}")
    return parts


def parse_model_spec(spec: str) -> PmrHamiltonian:
    """Build a Hamiltonian from a ``kind:args`` descriptor."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise ValidationError(f"model spec {spec!r} lacks a 'kind:' prefix")
    kind = kind.strip().lower()
    if kind == "qubit":
        return models.single_qubit(*(parse_real(a) for a in _args(body, 4, kind)))
    if kind == "qutrit":
        phi, j = _args(body, 2, kind)
        return models.qutrit(parse_angle(phi), parse_real(j))
    if kind == "multiqutrit":
        path, phi, j = _args(body, 3, kind)
        n_sites, couplings, _ = read_lattice(path)
        jj = parse_real(j)
        return models.multi_qutrit(list(couplings), parse_angle(phi), [(0.0, jj, 0.0)] * n_sites)
    if kind in ("tfim", "xx"):
        path, gamma = _args(body, 2, kind)
        n_sites, couplings, fields = read_lattice(path)
        p = models.LatticeParams(n_sites, couplings, fields, parse_real(gamma))
        return models.tfim(p) if kind == "tfim" else models.xx_bipartite(p)
    if kind == "permcycle":
        (eps,) = _args(body, 1, kind)
        return models.perm_cycle(parse_real(eps))
    if kind == "file":
        return decompose(read_dense_matrix(body.strip()))
    raise ValidationError(f"unknown model kind {kind!r}")


def read_diagonal(path, dim: int) -> np.ndarray:
    """Whitespace-separated real values, one per basis state."""
    vals = [parse_real(tok) for ln in Path(path).read_text().splitlines() for tok in ln.split("#", 1)[0].split()]
    if len(vals) != dim:
        raise ValidationError(f"{path}: expected {dim} diagonal entries, found {len(vals)}")
    return np.array(vals)
