"""Box domains, cell-centered vector fields and their discrete calculus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DegenerateProjectionError, InputError
from .summation import exact_sum

SPHERE_TOL = 1e-12
PROJECTION_FLOOR = 1e-8


@dataclass(frozen=True)
class BoxDomain:
    lower: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sides: tuple[float, float, float] = (1.0, 1.0, 1.0)
    shape: tuple[int, int, int] = (16, 16, 16)

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "sides", tuple(float(v) for v in self.sides))
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))
        if len(self.lower) != 3 or len(self.sides) != 3 or len(self.shape) != 3:
            raise InputError("BoxDomain needs three corners, sides and resolutions")
        if not all(math.isfinite(v) for v in self.lower + self.sides):
            raise InputError("non-finite domain geometry")
        if min(self.sides) <= 0:
            raise InputError("side lengths must be positive")
        if min(self.shape) < 4:
            raise InputError("every resolution must be at least 4")

    @classmethod
    def cube(cls, n: int, side: float = 1.0) -> "BoxDomain":
        return cls((0.0, 0.0, 0.0), (side,) * 3, (n,) * 3)

    @property
    def spacing(self) -> np.ndarray:
        return np.array(self.sides) / np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        h = self.spacing
        return float(h[0] * h[1] * h[2])

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.lower[axis] + h * (np.arange(self.shape[axis]) + 0.5)

    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(n1, n2, n3, 3)``."""
        axes = [self.axis_centers(a) for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def to_dict(self) -> dict[str, Any]:
        return {"lower": list(self.lower), "sides": list(self.sides), "shape": list(self.shape)}


@dataclass(frozen=True, eq=False)
class DiscreteField:
    domain: BoxDomain
    values: np.ndarray
    on_sphere: bool = False

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != self.domain.shape + (3,):
            raise InputError(f"field shape {vals.shape} does not match {self.domain.shape + (3,)}")
        if not np.all(np.isfinite(vals)):
            raise InputError("field has non-finite values")
        if self.on_sphere:
            dev = float(np.max(np.abs(np.linalg.norm(vals, axis=-1) - 1.0)))
            if dev > SPHERE_TOL:
                raise InputError(f"field flagged on_sphere deviates from |m| = 1 by {dev:.3e}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray, on_sphere: bool | None = None) -> "DiscreteField":
        flag = self.on_sphere if on_sphere is None else on_sphere
        return DiscreteField(self.domain, values, flag)

    def __neg__(self) -> "DiscreteField":
        return self.with_values(-self.values)


# ---------------------------------------------------------------------------
# field families


def _helix(x: np.ndarray, k: float, axis: int) -> np.ndarray:
    a = axis - 1
    b, c = (a + 1) % 3, (a + 2) % 3
    out = np.zeros(x.shape)
    out[..., b] = np.cos(k * x[..., a])
    out[..., c] = np.sin(k * x[..., a])
    return out


def _skyrmion(domain: BoxDomain, x: np.ndarray, radius: float, chirality: int) -> np.ndarray:
    """Belavin-Polyakov profile in the (x1, x2) plane, Bloch helicity, uniform in x3."""
    center = np.array(domain.lower) + np.array(domain.sides) / 2.0
    dx = x[..., 0] - center[0]
    dy = x[..., 1] - center[1]
    r = np.hypot(dx, dy)
    theta = 2.0 * np.arctan2(radius, r)  # pi at the core, -> 0 far away
    phi = np.arctan2(dy, dx) + chirality * math.pi / 2.0
    return np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1
    )


def _random_bandlimited(domain: BoxDomain, x: np.ndarray, seed: int, max_frequency: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rel = (x - np.array(domain.lower)) / np.array(domain.sides)
    freqs = np.arange(-max_frequency, max_frequency + 1)
    modes = np.array(np.meshgrid(freqs, freqs, freqs, indexing="ij")).reshape(3, -1).T
    modes = modes[np.linalg.norm(modes, axis=1) <= max_frequency]
    amps = rng.normal(size=(len(modes), 3)) / math.sqrt(len(modes))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=len(modes))
    out = np.zeros(x.shape)
    for kvec, amp, ph in zip(modes, amps, phases):
        out += np.cos(2.0 * math.pi * rel @ kvec + ph)[..., None] * amp
    return out


FIELD_FAMILIES = ("constant", "linear", "helix", "skyrmion_bubble", "random_bandlimited")


def build_field(domain: BoxDomain, spec: dict[str, Any]) -> DiscreteField:
    """Sample a closed-form field at the cell centers.

    ``spec`` holds ``family`` plus its parameters and an optional ``sphere``
    flag requesting pointwise normalization.
    """
    spec = dict(spec)
    family = spec.pop("family", None)
    sphere = bool(spec.pop("sphere", False))
    x = domain.centers()
    try:
        if family == "constant":
            c = np.asarray(spec.pop("c", (0.0, 0.0, 1.0)), dtype=float)
            if sphere and np.linalg.norm(c) < PROJECTION_FLOOR:
                raise InputError("cannot project a zero constant onto the sphere")
            vals = np.broadcast_to(c, x.shape).copy()
        elif family == "linear":
            a = np.asarray(spec.pop("A", np.eye(3)), dtype=float).reshape(3, 3)
            vals = x @ a.T
        elif family == "helix":
            vals = _helix(x, float(spec.pop("k", 2.0 * math.pi)), int(spec.pop("axis", 3)))
        elif family == "skyrmion_bubble":
            chir = int(spec.pop("chirality", 1))
            if chir not in (-1, 1):
                raise InputError("chirality must be +1 or -1")
            vals = _skyrmion(domain, x, float(spec.pop("radius", 0.2)), chir)
        elif family == "random_bandlimited":
            vals = _random_bandlimited(
                domain, x, int(spec.pop("seed", 0)), int(spec.pop("max_frequency", 2))
            )
        else:
            raise InputError(f"unknown field family {family!r}; expected one of {FIELD_FAMILIES}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad parameters for field family {family!r}: {exc}") from exc
    if spec:
        raise InputError(f"unknown keys for field family {family!r}: {sorted(spec)}")
    field = DiscreteField(domain, vals)
    return project_to_sphere(field) if sphere else field


def project_to_sphere(field: DiscreteField) -> DiscreteField:
    norms = np.linalg.norm(field.values, axis=-1)
    if np.any(norms < PROJECTION_FLOOR):
        cell = tuple(int(i) for i in np.unravel_index(np.argmin(norms), norms.shape))
        raise DegenerateProjectionError(cell, float(norms[cell]))
    vals = field.values / norms[..., None]
    return DiscreteField(field.domain, vals, on_sphere=True)


# ---------------------------------------------------------------------------
# discrete calculus


@lru_cache(maxsize=32)
def difference_matrix(n: int, h: float) -> np.ndarray:
    """Second-order first-derivative matrix: central inside, 3-point one-sided at the ends."""
    d = np.zeros((n, n))
    i = np.arange(1, n - 1)
    d[i, i - 1] = -1.0
    d[i, i + 1] = 1.0
    d[0, :3] = (-3.0, 4.0, -1.0)
    d[n - 1, n - 3:] = (1.0, -4.0, 3.0)
    d /= 2.0 * h
    d.setflags(write=False)
    return d


def diff_axis(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Derivative of a ``(n1, n2, n3, ...)`` array along spatial ``axis``."""
    d = difference_matrix(values.shape[axis], float(h))
    moved = np.moveaxis(values, axis, -1)
    return np.moveaxis(moved @ d.T, -1, axis)


def diff_axis_adjoint(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Transpose of ``diff_axis`` (used for exact gradients of quadratures)."""
    d = difference_matrix(values.shape[axis], float(h))
    moved = np.moveaxis(values, axis, -1)
    return np.moveaxis(moved @ d, -1, axis)


def gradient_array(field: DiscreteField) -> np.ndarray:
    """``g[a, i, j, k, c] = d m_c / d x_a`` at every cell."""
    h = field.domain.spacing
    return np.stack([diff_axis(field.values, h[a], a) for a in range(3)])


def discrete_gradient(field: DiscreteField) -> tuple[DiscreteField, DiscreteField, DiscreteField]:
    g = gradient_array(field)
    return tuple(DiscreteField(field.domain, g[a]) for a in range(3))


def h1_seminorm_sq(field: DiscreteField) -> float:
    g = gradient_array(field)
    return field.domain.cell_volume * exact_sum(g * g)


def l2_norm_sq(field: DiscreteField) -> float:
    return field.domain.cell_volume * exact_sum(field.values * field.values)


def h1_norm_sq(field: DiscreteField) -> float:
    return l2_norm_sq(field) + h1_seminorm_sq(field)


# ---------------------------------------------------------------------------
# text format: one row per cell, "i j k mx my mz"


def save_field_text(field: DiscreteField, path: str | Path) -> None:
    d = field.domain
    idx = np.indices(d.shape).reshape(3, -1).T
    rows = np.column_stack([idx, field.values.reshape(-1, 3)])
    header = (
        f"lower {' '.join(repr(v) for v in d.lower)}\n"
        f"sides {' '.join(repr(v) for v in d.sides)}\n"
        f"shape {' '.join(str(v) for v in d.shape)}\n"
        f"on_sphere {int(field.on_sphere)}\n"
        "i j k mx my mz"
    )
    fmt = ["%d", "%d", "%d", "%.17g", "%.17g", "%.17g"]
    np.savetxt(path, rows, fmt=fmt, header=header)


def load_field_text(path: str | Path, domain: BoxDomain | None = None) -> DiscreteField:
    meta: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            parts = line[1:].split()
            if parts and parts[0] in ("lower", "sides", "shape", "on_sphere"):
                meta[parts[0]] = parts[1:]
    if domain is None:
        try:
            domain = BoxDomain(
                tuple(float(v) for v in meta["lower"]),
                tuple(float(v) for v in meta["sides"]),
                tuple(int(v) for v in meta["shape"]),
            )
        except KeyError as exc:
            raise InputError(f"{path}: missing domain header {exc}") from exc
    data = np.loadtxt(path, ndmin=2)
    if data.shape != (domain.n_cells, 6):
        raise InputError(f"{path}: expected {domain.n_cells} rows of 6 columns")
    vals = np.zeros(domain.shape + (3,))
    idx = data[:, :3].astype(int)
    vals[idx[:, 0], idx[:, 1], idx[:, 2]] = data[:, 3:]
    on_sphere = bool(int(meta.get("on_sphere", ["0"])[0]))
    field = DiscreteField(domain, vals)
    if on_sphere:
        field = project_to_sphere(field)
    return field


def domain_from_spec(spec: dict[str, Any]) -> BoxDomain:
    spec = dict(spec)
    lower = spec.pop("lower", spec.pop("corner", (0.0, 0.0, 0.0)))
    sides = spec.pop("sides", (1.0, 1.0, 1.0))
    shape = spec.pop("shape", spec.pop("resolution", (16, 16, 16)))
    if isinstance(sides, (int, float)):
        sides = (sides,) * 3
    if isinstance(shape, int):
        shape = (shape,) * 3
    if spec:
        raise InputError(f"unknown domain keys: {sorted(spec)}")
    return BoxDomain(tuple(lower), tuple(sides), tuple(shape))


def max_spacing(domain: BoxDomain) -> float:
    return float(np.max(domain.spacing))
