"""Local limit functionals on the cell grid.

All energies are midpoint quadratures of pointwise densities built from
``grid.gradient_array``. Their gradients differentiate those sums exactly,
through the adjoint of the difference matrix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InputError
from .grid import DiscreteField, diff_axis_adjoint, gradient_array
from .summation import exact_sum


def as_matrix(value, name: str) -> np.ndarray:
    arr = np.array(getattr(value, "matrix", value), dtype=float)
    if arr.shape != (3, 3) or not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be a finite 3x3 matrix")
    return arr


@dataclass(frozen=True, eq=False)
class DzyaloshinskiiMatrix:
    """Column ``i`` is the Dzyaloshinskii vector ``d_i``."""

    matrix: np.ndarray

    def __post_init__(self):
        d = as_matrix(self.matrix, "D")
        norms = np.linalg.norm(d, axis=0)
        if np.any(norms > 1.0 + 1e-9):
            raise InputError(f"Dzyaloshinskii vectors must have |d_i| <= 1, got {norms.tolist()}")
        d.setflags(write=False)
        object.__setattr__(self, "matrix", d)

    def column(self, i: int) -> np.ndarray:
        return self.matrix[:, i]

    def to_list(self) -> list[list[float]]:
        return self.matrix.tolist()


@dataclass(frozen=True, eq=False)
class AnisotropyMatrix:
    """Second moment of a probability measure on the sphere."""

    matrix: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.matrix, "A")
        if np.max(np.abs(a - a.T)) > 1e-12:
            raise InputError("A must be symmetric")
        if np.min(np.linalg.eigvalsh(a)) < -1e-12:
            raise InputError("A must be positive semidefinite")
        if abs(np.trace(a) - 1.0) > 1e-9:
            raise InputError(f"A must have trace 1, got {np.trace(a)!r}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    def to_list(self) -> list[list[float]]:
        return self.matrix.tolist()


def coefficient_matrix(A) -> np.ndarray:
    """Symmetric coefficient matrix for the Dirichlet form.

    Any symmetric matrix is accepted here (``I/2`` gives the classical
    exchange), not only trace-one second moments.
    """
    a = as_matrix(A, "A")
    if np.max(np.abs(a - a.T)) > 1e-12 * max(1.0, np.max(np.abs(a))):
        raise InputError("A must be symmetric")
    return a


def _values(m: DiscreteField) -> np.ndarray:
    if not np.all(np.isfinite(m.values)):
        raise InputError("field contains non-finite values")
    return m.values


def dirichlet_energy(m: DiscreteField, A) -> float:
    """``sum_k int A grad m_k . grad m_k``."""
    a = coefficient_matrix(A)
    _values(m)
    g = gradient_array(m)
    dens = np.einsum("ab,a...k,b...k->...", a, g, g)
    return m.domain.cell_volume * exact_sum(dens)


def dirichlet_gradient(m: DiscreteField, A) -> np.ndarray:
    a = coefficient_matrix(A)
    g = gradient_array(m)
    flux = np.einsum("ab,b...->a...", a, g)
    h = m.domain.spacing
    out = sum(diff_axis_adjoint(flux[i], h[i], i) for i in range(3))
    return 2.0 * m.domain.cell_volume * out


def dmi_energy(m: DiscreteField, D) -> float:
    """``sum_i int m . (d_i x d/dx_i m)``."""
    d = as_matrix(D, "D")
    vals = _values(m)
    g = gradient_array(m)
    dens = sum(np.einsum("...c,...c->...", vals, np.cross(d[:, i], g[i])) for i in range(3))
    return m.domain.cell_volume * exact_sum(dens)


def dmi_gradient(m: DiscreteField, D) -> np.ndarray:
    d = as_matrix(D, "D")
    vals = m.values
    g = gradient_array(m)
    h = m.domain.spacing
    out = np.zeros_like(vals)
    for i in range(3):
        out += np.cross(d[:, i], g[i])
        out += diff_axis_adjoint(np.cross(vals, d[:, i]), h[i], i)
    return m.domain.cell_volume * out


def discrete_curl(m: DiscreteField) -> np.ndarray:
    g = gradient_array(m)
    return np.stack([
        g[1][..., 2] - g[2][..., 1],
        g[2][..., 0] - g[0][..., 2],
        g[0][..., 1] - g[1][..., 0],
    ], axis=-1)


def bulk_dmi_energy(m: DiscreteField, gamma: float) -> float:
    """``gamma int curl m . m``."""
    if not np.isfinite(gamma):
        raise InputError("gamma must be finite")
    vals = _values(m)
    dens = np.einsum("...c,...c->...", discrete_curl(m), vals)
    return float(gamma) * m.domain.cell_volume * exact_sum(dens)


def limit_energy(m: DiscreteField, A, D) -> float:
    return dirichlet_energy(m, A) + dmi_energy(m, D)


def anisotropy_well_energy(m: DiscreteField, strength: float, axis=(0.0, 0.0, 1.0)) -> float:
    """Easy-axis well ``K int (1 - (m . u)^2)``; used only by the relaxer."""
    u = np.asarray(axis, dtype=float)
    proj = np.einsum("...c,c->...", _values(m), u)
    return float(strength) * m.domain.cell_volume * exact_sum(1.0 - proj * proj)


def anisotropy_well_gradient(m: DiscreteField, strength: float, axis=(0.0, 0.0, 1.0)) -> np.ndarray:
    u = np.asarray(axis, dtype=float)
    proj = np.einsum("...c,c->...", m.values, u)
    return -2.0 * float(strength) * m.domain.cell_volume * proj[..., None] * u


CSV_COLUMNS = ("energy", "value", "parameters")


def write_local_csv(rows: Iterable[tuple[str, float, dict]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for name, value, params in rows:
            writer.writerow([name, repr(float(value)), json.dumps(params, sort_keys=True)])
