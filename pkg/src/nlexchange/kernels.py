"""Scaled exchange-kernel families and numerical audits of their hypotheses.

A kernel pair couples a nonnegative symmetric profile ``rho`` with an odd
vector profile ``nu``. Both are scaled as ``f_eps(z) = eps**-3 f(z / eps)``,
which keeps every L1 mass independent of ``eps``.

All integrals over the support ball use a spherical product rule
(Gauss-Legendre in radius and polar cosine, uniform midpoints in azimuth).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .errors import HypothesisViolation, InputError
from .summation import exact_sum, exact_sum_axis0

SPHERE_AREA = 4.0 * math.pi

# ---------------------------------------------------------------------------
# profiles


class Profile:
    """Unit-scale kernel profile evaluated on arrays of points ``(..., 3)``."""

    profile_id: str = "abstract"
    kind: str = "symmetric"  # or "antisymmetric"
    support_radius: float = 1.0

    def __call__(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_vector(self) -> bool:
        return self.kind == "antisymmetric"

    def describe(self) -> dict[str, Any]:
        return {"profile": self.profile_id, "support_radius": self.support_radius}


def _norm(y: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("...i,...i->...", y, y))


class BallAbs(Profile):
    """rho(y) = |y| / pi on the closed unit ball; equals |nu| for ``BallLinear``."""

    profile_id = "ball_abs"

    def __call__(self, y):
        r = _norm(y)
        return np.where(r <= 1.0, r / math.pi, 0.0)


class BallUniform(Profile):
    profile_id = "ball_uniform"

    def __call__(self, y):
        r = _norm(y)
        return np.where(r <= 1.0, 3.0 / (4.0 * math.pi), 0.0)


class GaussianTruncated(Profile):
    """Gaussian of width ``sigma`` restricted to the unit ball, unit mass."""

    profile_id = "gaussian_truncated"

    def __init__(self, sigma: float = 0.5):
        if not sigma > 0:
            raise InputError("sigma must be positive")
        self.sigma = float(sigma)
        radial, _ = integrate.quad(
            lambda r: 4.0 * math.pi * r * r * math.exp(-r * r / (2.0 * sigma**2)),
            0.0, 1.0, epsabs=1e-15, epsrel=1e-14,
        )
        self._scale = 1.0 / radial

    def __call__(self, y):
        r = _norm(y)
        return np.where(r <= 1.0, self._scale * np.exp(-r * r / (2.0 * self.sigma**2)), 0.0)

    def describe(self):
        return {**super().describe(), "sigma": self.sigma}


class BallLinear(Profile):
    """nu(y) = (4 / |S^2|) y on the closed unit ball."""

    profile_id = "ball_linear"
    kind = "antisymmetric"

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        r = _norm(y)
        return np.where((r <= 1.0)[..., None], (4.0 / SPHERE_AREA) * y, 0.0)


class CustomProfile(Profile):
    """User profile from a callable or a regular-grid table.

    Symmetric profiles are optionally symmetrized (even part), antisymmetric
    ones antisymmetrized (odd part). With ``normalize`` the L1 mass is
    rescaled to one; otherwise ``scale`` multiplies the raw values.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        kind: str = "antisymmetric",
        support_radius: float = 1.0,
        symmetrize: bool = True,
        normalize: bool = False,
        scale: float = 1.0,
        profile_id: str | None = None,
    ):
        if kind not in ("symmetric", "antisymmetric"):
            raise InputError(f"unknown profile kind {kind!r}")
        if not support_radius > 0:
            raise InputError("support_radius must be positive")
        self._func = func
        self.kind = kind
        self.support_radius = float(support_radius)
        self.symmetrize = symmetrize
        self.profile_id = profile_id or ("custom_odd" if kind == "antisymmetric" else "custom")
        self._scale = float(scale)
        if normalize:
            mass = l1_mass_profile(self)
            if not mass > 0:
                raise InputError("cannot normalize a profile with zero mass")
            self._scale /= mass

    def _raw(self, y):
        y = np.asarray(y, dtype=float)
        vals = np.asarray(self._func(y), dtype=float)
        inside = _norm(y) <= self.support_radius
        if self.is_vector:
            return np.where(inside[..., None], vals, 0.0)
        return np.where(inside, vals, 0.0)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if not self.symmetrize:
            return self._scale * self._raw(y)
        a = self._raw(y)
        b = self._raw(-y)
        part = (a - b) / 2.0 if self.is_vector else (a + b) / 2.0
        return self._scale * part

    def describe(self):
        return {**super().describe(), "symmetrize": self.symmetrize}

    @classmethod
    def from_table(cls, path: str | Path, kind: str, **kwargs) -> "CustomProfile":
        """Load rows ``x y z value(s)`` sampled on a full regular grid.

        Values are trilinearly interpolated and vanish outside the table.
        """
        data = np.loadtxt(path, ndmin=2)
        ncomp = 3 if kind == "antisymmetric" else 1
        if data.shape[1] != 3 + ncomp:
            raise InputError(f"{path}: expected {3 + ncomp} columns, got {data.shape[1]}")
        axes = [np.unique(data[:, c]) for c in range(3)]
        shape = tuple(len(a) for a in axes)
        if np.prod(shape) != data.shape[0] or min(shape) < 2:
            raise InputError(f"{path}: rows do not form a full regular grid")
        idx = tuple(np.searchsorted(axes[c], data[:, c]) for c in range(3))
        grid_vals = np.zeros(shape + (ncomp,))
        grid_vals[idx] = data[:, 3:]
        interps = [
            RegularGridInterpolator(axes, grid_vals[..., c], bounds_error=False, fill_value=0.0)
            for c in range(ncomp)
        ]
        nonzero = np.any(data[:, 3:] != 0.0, axis=1)
        support = float(np.max(_norm(data[nonzero, :3]))) if nonzero.any() else 1.0
        support = kwargs.pop("support_radius", support) or 1.0

        def func(y):
            flat = y.reshape(-1, 3)
            out = np.stack([f(flat) for f in interps], axis=-1)
            if ncomp == 1:
                return out[:, 0].reshape(y.shape[:-1])
            return out.reshape(y.shape)

        kwargs.setdefault("profile_id", "custom_odd" if kind == "antisymmetric" else "custom")
        return cls(func, kind=kind, support_radius=support, **kwargs)


BUILTIN_RHO = {"ball_abs": BallAbs, "ball_uniform": BallUniform, "gaussian_truncated": GaussianTruncated}
BUILTIN_NU = {"ball_linear": BallLinear}


def profile_from_spec(spec: dict[str, Any] | str, kind: str, base_dir: Path | None = None) -> Profile:
    """Build a profile from a config entry such as ``{"profile": "ball_abs"}``."""
    if isinstance(spec, str):
        spec = {"profile": spec}
    spec = dict(spec)
    pid = spec.pop("profile", None)
    builtins = BUILTIN_NU if kind == "antisymmetric" else BUILTIN_RHO
    if pid in builtins:
        return builtins[pid](**spec)
    if pid in ("custom", "custom_odd"):
        table = spec.pop("table", None)
        if table is None:
            raise InputError(f"profile {pid!r} requires a 'table' path")
        path = Path(table)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        sym_key = "antisymmetrize" if kind == "antisymmetric" else "symmetrize"
        symmetrize = bool(spec.pop(sym_key, spec.pop("symmetrize", True)))
        normalize = bool(spec.pop("normalize", True))
        if spec:
            raise InputError(f"unknown keys for profile {pid!r}: {sorted(spec)}")
        return CustomProfile.from_table(path, kind, symmetrize=symmetrize, normalize=normalize)
    raise InputError(f"unknown {kind} profile {pid!r}")


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSettings:
    n_radial: int = 64
    n_polar: int = 64
    n_azimuth: int = 128
    envelope_directions: int = 512
    envelope_radii: int = 128
    ratio_radii: int = 128
    pair_subcells: int = 8


DEFAULT_QUADRATURE = QuadratureSettings()


def _frame(axis: np.ndarray) -> np.ndarray:
    """Orthonormal frame with third column ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(a, helper)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    return np.column_stack([u, v, a])


def spherical_rule(
    r_max: float,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
    r_min: float = 0.0,
    axis: Sequence[float] | None = None,
    cos_min: float = -1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(M, 3)`` and weights ``(M,)`` for the region
    ``r_min < |y| < r_max`` intersected with the cone ``y . axis / |y| > cos_min``."""
    xr, wr = np.polynomial.legendre.leggauss(settings.n_radial)
    r = r_min + (xr + 1.0) * (r_max - r_min) / 2.0
    wr = wr * (r_max - r_min) / 2.0 * r * r
    xu, wu = np.polynomial.legendre.leggauss(settings.n_polar)
    u = cos_min + (xu + 1.0) * (1.0 - cos_min) / 2.0
    wu = wu * (1.0 - cos_min) / 2.0
    nphi = settings.n_azimuth
    phi = (np.arange(nphi) + 0.5) * (2.0 * math.pi / nphi)
    wphi = 2.0 * math.pi / nphi
    s = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    dirs = np.stack(
        [s[:, None] * np.cos(phi)[None, :], s[:, None] * np.sin(phi)[None, :],
         np.broadcast_to(u[:, None], (len(u), nphi))],
        axis=-1,
    ).reshape(-1, 3)
    wdir = np.repeat(wu * wphi, nphi)
    if axis is not None:
        dirs = dirs @ _frame(np.asarray(axis, dtype=float)).T
    nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    weights = (wr[:, None] * wdir[None, :]).reshape(-1)
    return nodes, weights


def fibonacci_sphere(n: int) -> np.ndarray:
    """Deterministic near-uniform unit directions."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(1.0 - z * z)
    theta = math.pi * (3.0 - math.sqrt(5.0)) * k
    return np.column_stack([rho * np.cos(theta), rho * np.sin(theta), z])


def _integrate(values: np.ndarray, weights: np.ndarray) -> np.ndarray | float:
    if values.ndim == 1:
        return exact_sum(values * weights)
    return exact_sum_axis0(values * weights.reshape((-1,) + (1,) * (values.ndim - 1)))


def l1_mass_profile(profile: Profile, settings: QuadratureSettings = DEFAULT_QUADRATURE) -> float:
    nodes, w = spherical_rule(profile.support_radius, settings)
    vals = profile(nodes)
    if profile.is_vector:
        vals = _norm(vals)
    return float(_integrate(np.abs(vals), w))


# ---------------------------------------------------------------------------
# kernel pair


@dataclass
class KernelPair:
    rho: Profile
    nu: Profile
    quadrature: QuadratureSettings = field(default=DEFAULT_QUADRATURE)
    name: str = ""

    def __post_init__(self):
        if self.rho.kind != "symmetric" or self.nu.kind != "antisymmetric":
            raise InputError("KernelPair needs a symmetric rho and an antisymmetric nu")
        if not self.name:
            self.name = f"{self.rho.profile_id}+{self.nu.profile_id}"

    @property
    def support_radius(self) -> float:
        return max(self.rho.support_radius, self.nu.support_radius)

    def cutoff(self, eps: float) -> float:
        return eps * self.support_radius

    def rho_eps(self, eps: float, z: np.ndarray) -> np.ndarray:
        return self.rho(np.asarray(z, dtype=float) / eps) / eps**3

    def nu_eps(self, eps: float, z: np.ndarray) -> np.ndarray:
        return self.nu(np.asarray(z, dtype=float) / eps) / eps**3

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, "rho": self.rho.describe(), "nu": self.nu.describe()}


def prototype_pair(quadrature: QuadratureSettings = DEFAULT_QUADRATURE) -> KernelPair:
    """nu(y) = (4/|S^2|) y and rho = |nu| on the unit ball."""
    return KernelPair(BallAbs(), BallLinear(), quadrature, name="prototype")


def pair_from_spec(spec: dict[str, Any], base_dir: Path | None = None) -> KernelPair:
    spec = dict(spec)
    rho = profile_from_spec(spec.pop("rho", "ball_abs"), "symmetric", base_dir)
    nu = profile_from_spec(spec.pop("nu", "ball_linear"), "antisymmetric", base_dir)
    name = spec.pop("name", "")
    quad = spec.pop("quadrature", None)
    if spec:
        raise InputError(f"unknown kernel keys: {sorted(spec)}")
    settings = QuadratureSettings(**quad) if quad else DEFAULT_QUADRATURE
    return KernelPair(rho, nu, settings, name=name)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (math.isfinite(eps) and eps > 0):
        raise InputError(f"eps must be positive and finite, got {eps!r}")
    return eps


def _check_point(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 3:
        raise InputError("points must have 3 components")
    if not np.all(np.isfinite(z)):
        raise InputError("non-finite point")
    return z


def eval_rho(pair: KernelPair, eps: float, z) -> np.ndarray | float:
    eps = _check_eps(eps)
    z = _check_point(z)
    out = pair.rho_eps(eps, z)
    return float(out) if out.ndim == 0 else out


def eval_nu(pair: KernelPair, eps: float, z) -> np.ndarray:
    eps = _check_eps(eps)
    return pair.nu_eps(eps, _check_point(z))


def _kernel_values(pair: KernelPair, eps: float, which: str, nodes: np.ndarray) -> np.ndarray:
    if which == "rho":
        return pair.rho_eps(eps, nodes)
    if which == "nu":
        return _norm(pair.nu_eps(eps, nodes))
    raise InputError(f"which must be 'rho' or 'nu', got {which!r}")


def l1_mass(pair: KernelPair, eps: float, which: str = "rho") -> float:
    eps = _check_eps(eps)
    prof = pair.rho if which == "rho" else pair.nu
    nodes, w = spherical_rule(eps * prof.support_radius, pair.quadrature)
    return float(_integrate(np.abs(_kernel_values(pair, eps, which, nodes)), w))


def mass_outside(pair: KernelPair, eps: float, delta: float, which: str = "rho") -> float:
    """Mass of ``rho_eps`` (or ``|nu_eps|``) outside the ball of radius ``delta``."""
    eps = _check_eps(eps)
    if not delta > 0:
        raise InputError("delta must be positive")
    prof = pair.rho if which == "rho" else pair.nu
    r_max = eps * prof.support_radius
    if r_max <= delta:
        return 0.0
    nodes, w = spherical_rule(r_max, pair.quadrature, r_min=delta)
    return float(_integrate(np.abs(_kernel_values(pair, eps, which, nodes)), w))


def cone_mass(pair: KernelPair, eps: float, v, delta_aperture: float) -> float:
    """Mass of ``rho_eps`` in the cone ``{w : w.v/|w| > 1 - delta}``."""
    eps = _check_eps(eps)
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-12:
        raise InputError("cone direction must be a unit vector")
    if not 0.0 < delta_aperture <= 1.0:
        raise InputError("aperture must lie in (0, 1]")
    nodes, w = spherical_rule(
        eps * pair.rho.support_radius, pair.quadrature, axis=v, cos_min=1.0 - delta_aperture
    )
    return float(_integrate(pair.rho_eps(eps, nodes), w))


def radial_envelope_kappa(pair: KernelPair, eps: float) -> float:
    """Mass of the radial lower envelope ``t -> min_{|x|=t} rho_eps(x)``.

    The infimum over each sphere is replaced by a minimum over a Fibonacci
    direction sample.
    """
    eps = _check_eps(eps)
    q = pair.quadrature
    dirs = fibonacci_sphere(q.envelope_directions)
    r_max = eps * pair.rho.support_radius
    xr, wr = np.polynomial.legendre.leggauss(q.envelope_radii)
    t = (xr + 1.0) * r_max / 2.0
    wt = wr * r_max / 2.0
    env = pair.rho_eps(eps, t[:, None, None] * dirs[None, :, :]).min(axis=1)
    env = np.clip(env, 0.0, None)
    kappa = exact_sum(SPHERE_AREA * t * t * env * wt)
    # the envelope never exceeds rho, whose mass is one
    return float(min(kappa, 1.0))


def dzyalo_vector(pair: KernelPair, eps: float, i: int) -> np.ndarray:
    """First angular moment ``int nu_eps(y) y_i / |y| dy`` (axis ``i`` in 1..3)."""
    eps = _check_eps(eps)
    if i not in (1, 2, 3):
        raise InputError("axis index must be 1, 2 or 3")
    nodes, w = spherical_rule(eps * pair.nu.support_radius, pair.quadrature)
    proj = nodes[:, i - 1] / _norm(nodes)
    return np.asarray(_integrate(pair.nu_eps(eps, nodes) * proj[:, None], w))


def dzyalo_matrix(pair: KernelPair, eps: float) -> np.ndarray:
    """3x3 matrix whose column ``i`` is the Dzyaloshinskii vector ``d_i``."""
    eps = _check_eps(eps)
    nodes, w = spherical_rule(eps * pair.nu.support_radius, pair.quadrature)
    hat = nodes / _norm(nodes)[:, None]
    nu = pair.nu_eps(eps, nodes)
    return np.asarray(_integrate(nu[:, :, None] * hat[:, None, :], w))


def second_moment(pair: KernelPair, eps: float) -> np.ndarray:
    """``int rho_eps(h) (h x h) / |h|^2 dh``."""
    eps = _check_eps(eps)
    nodes, w = spherical_rule(eps * pair.rho.support_radius, pair.quadrature)
    hat = nodes / _norm(nodes)[:, None]
    rho = pair.rho_eps(eps, nodes)
    return np.asarray(_integrate(rho[:, None, None] * hat[:, :, None] * hat[:, None, :], w))


def _ratio_samples(pair: KernelPair, eps: float) -> np.ndarray:
    q = pair.quadrature
    dirs = fibonacci_sphere(q.envelope_directions)
    radii = eps * pair.support_radius * np.arange(1, q.ratio_radii + 1) / q.ratio_radii
    return (radii[:, None, None] * dirs[None, :, :]).reshape(-1, 3)


def ratio_sup(pair: KernelPair, eps: float) -> float:
    """Sampled ``sup |nu_eps| / rho_eps`` over the support.

    Raises ``HypothesisViolation`` when ``nu_eps`` is nonzero where
    ``rho_eps`` vanishes.
    """
    eps = _check_eps(eps)
    pts = _ratio_samples(pair, eps)
    rho = pair.rho_eps(eps, pts)
    nu = _norm(pair.nu_eps(eps, pts))
    bad = (rho <= 0.0) & (nu > 0.0)
    if bad.any():
        where = pts[np.argmax(bad)]
        raise HypothesisViolation("A1", f"nu_eps != 0 where rho_eps = 0, e.g. at {where.tolist()}")
    keep = rho > 0.0
    if not keep.any():
        return 0.0
    return float(np.max(nu[keep] / rho[keep]))


def ratio_square_integral(pair: KernelPair, eps: float) -> float:
    """``int |nu_eps|^2 / rho_eps``, with zero where both kernels vanish."""
    eps = _check_eps(eps)
    nodes, w = spherical_rule(eps * pair.support_radius, pair.quadrature)
    rho = pair.rho_eps(eps, nodes)
    nu2 = _norm(pair.nu_eps(eps, nodes)) ** 2
    if np.any((rho <= 0) & (nu2 > 0)):
        raise HypothesisViolation("A1", "nu_eps != 0 where rho_eps = 0")
    vals = np.divide(nu2, rho, out=np.zeros_like(nu2), where=rho > 0)
    return float(_integrate(vals, w))


def oddness_residual(pair: KernelPair, eps: float) -> float:
    """max |nu_eps(z) + nu_eps(-z)| relative to max |nu_eps| on a sample."""
    pts = _ratio_samples(pair, eps)
    a = pair.nu_eps(eps, pts)
    b = pair.nu_eps(eps, -pts)
    scale = max(float(np.max(_norm(a))), np.finfo(float).tiny)
    return float(np.max(_norm(a + b)) / scale)


def min_rho_sample(pair: KernelPair, eps: float) -> float:
    return float(np.min(pair.rho_eps(eps, _ratio_samples(pair, eps))))


# ---------------------------------------------------------------------------
# hypothesis audit


@dataclass(frozen=True)
class AuditTolerances:
    mass: float = 1e-6
    oddness: float = 1e-14
    outside: float = 1e-6
    cone_min: float = 1e-6
    kappa_min: float = 1e-6
    dzyalo_step: float = 1e-6
    ratio_variation: float = 1e-12


@dataclass
class EpsAudit:
    eps: float
    l1_mass_rho: float
    l1_mass_nu: float
    mass_outside_rho: dict[float, float]
    mass_outside_nu: dict[float, float]
    cone_masses: dict[float, list[float]]
    kappa_estimate: float
    dzyalo_estimate: list[list[float]]
    ratio_sup: float | None
    min_rho: float
    oddness_residual: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "l1_mass_rho": self.l1_mass_rho,
            "l1_mass_nu": self.l1_mass_nu,
            "mass_outside_rho": {str(k): v for k, v in self.mass_outside_rho.items()},
            "mass_outside_nu": {str(k): v for k, v in self.mass_outside_nu.items()},
            "cone_masses": {str(k): v for k, v in self.cone_masses.items()},
            "kappa_estimate": self.kappa_estimate,
            "dzyalo_estimate": self.dzyalo_estimate,
            "ratio_sup": self.ratio_sup,
            "min_rho": self.min_rho,
            "oddness_residual": self.oddness_residual,
        }


@dataclass
class HypothesisResult:
    name: str
    passed: bool
    tolerance: float
    detail: str = ""


@dataclass
class HypothesisReport:
    kernel: dict[str, Any]
    entries: list[EpsAudit]
    results: dict[str, HypothesisResult]
    dzyalo_limit: list[list[float]] | None = None

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    @property
    def failed(self) -> list[str]:
        return [k for k, r in self.results.items() if not r.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kernel": self.kernel,
            "all_passed": self.all_passed,
            "hypotheses": {
                k: {"passed": r.passed, "tolerance": r.tolerance, "detail": r.detail}
                for k, r in self.results.items()
            },
            "dzyalo_limit": self.dzyalo_limit,
            "entries": [e.to_dict() for e in self.entries],
        }


def cones_disjoint(dirs: Sequence[Sequence[float]], aperture: float) -> bool:
    """Cones ``C_delta(v_i)`` are pairwise disjoint iff ``1 - delta >= cos(angle/2)``
    for every pair of axes."""
    dirs = [np.asarray(v, float) for v in dirs]
    for a in range(len(dirs)):
        for b in range(a + 1, len(dirs)):
            angle = math.acos(float(np.clip(dirs[a] @ dirs[b], -1.0, 1.0)))
            if not 1.0 - aperture > math.cos(angle / 2.0):
                return False
    return True


def extrapolate_to_zero(eps: Sequence[float], values: Sequence[np.ndarray]) -> np.ndarray:
    """Linear least-squares extrapolation to eps = 0 over the last three points."""
    e = np.asarray(eps[-3:], dtype=float)
    v = np.asarray(values[-3:], dtype=float).reshape(len(e), -1)
    if len(e) == 1:
        return v[0].reshape(np.shape(values[0]))
    design = np.column_stack([np.ones_like(e), e])
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return coef[0].reshape(np.shape(values[0]))


def audit_hypotheses(
    pair: KernelPair,
    eps_list: Sequence[float],
    deltas: Sequence[float] = (0.5, 0.25),
    cone_dirs: Sequence[Sequence[float]] = ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    apertures: Sequence[float] = (0.29, 0.1),
    tol: AuditTolerances = AuditTolerances(),
) -> HypothesisReport:
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise InputError("eps_list must be nonempty")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InputError("eps_list must be strictly decreasing")
    if len(cone_dirs) != 3:
        raise InputError("exactly three cone directions are required")

    entries: list[EpsAudit] = []
    ratio_error: str | None = None
    for eps in eps_list:
        try:
            rs = ratio_sup(pair, eps)
        except HypothesisViolation as exc:
            rs, ratio_error = None, str(exc)
        entries.append(
            EpsAudit(
                eps=eps,
                l1_mass_rho=l1_mass(pair, eps, "rho"),
                l1_mass_nu=l1_mass(pair, eps, "nu"),
                mass_outside_rho={d: mass_outside(pair, eps, d, "rho") for d in deltas},
                mass_outside_nu={d: mass_outside(pair, eps, d, "nu") for d in deltas},
                cone_masses={a: [cone_mass(pair, eps, v, a) for v in cone_dirs] for a in apertures},
                kappa_estimate=radial_envelope_kappa(pair, eps),
                dzyalo_estimate=dzyalo_matrix(pair, eps).tolist(),
                ratio_sup=rs,
                min_rho=min_rho_sample(pair, eps),
                oddness_residual=oddness_residual(pair, eps),
            )
        )

    res: dict[str, HypothesisResult] = {}
    last = entries[-1]

    worst_mass = max(abs(e.l1_mass_rho - 1.0) for e in entries)
    nonneg = all(e.min_rho >= 0.0 for e in entries)
    res["G1"] = HypothesisResult(
        "G1", nonneg and worst_mass <= tol.mass, tol.mass,
        f"max |mass(rho_eps) - 1| = {worst_mass:.3e}; rho >= 0 on sample: {nonneg}",
    )
    worst_out = max(last.mass_outside_rho.values()) if deltas else 0.0
    res["G2"] = HypothesisResult(
        "G2", worst_out <= tol.outside, tol.outside,
        f"mass outside B_delta at eps = {last.eps:g}: {worst_out:.3e}",
    )

    g3_ok, g3_detail = False, "no aperture yields disjoint cones"
    independent = abs(np.linalg.det(np.asarray(cone_dirs, float))) > 1e-12
    for a in apertures:
        if not cones_disjoint(cone_dirs, a):
            continue
        masses = last.cone_masses[a]
        if independent and min(masses) > tol.cone_min:
            g3_ok, g3_detail = True, f"aperture {a}: cone masses {masses}"
            break
        weak = [i + 1 for i, m in enumerate(masses) if m <= tol.cone_min]
        g3_detail = f"aperture {a}: vanishing cone mass for v{weak}; masses {masses}"
    if not independent:
        g3_detail = "cone directions are linearly dependent"
    res["G3"] = HypothesisResult("G3", g3_ok, tol.cone_min, g3_detail)

    kappa = min(e.kappa_estimate for e in entries)
    res["G4"] = HypothesisResult(
        "G4", kappa >= tol.kappa_min, tol.kappa_min, f"inf_eps kappa = {kappa:.6g}"
    )

    worst_nu = max(abs(e.l1_mass_nu - 1.0) for e in entries)
    worst_odd = max(e.oddness_residual for e in entries)
    res["H1"] = HypothesisResult(
        "H1", worst_nu <= tol.mass and worst_odd <= tol.oddness, tol.oddness,
        f"max |mass(|nu_eps|) - 1| = {worst_nu:.3e}; oddness residual = {worst_odd:.3e}",
    )
    worst_out_nu = max(last.mass_outside_nu.values()) if deltas else 0.0
    res["H2"] = HypothesisResult(
        "H2", worst_out_nu <= tol.outside, tol.outside,
        f"|nu| mass outside B_delta at eps = {last.eps:g}: {worst_out_nu:.3e}",
    )

    mats = [np.asarray(e.dzyalo_estimate) for e in entries]
    steps = [float(np.max(np.abs(b - a))) for a, b in zip(mats, mats[1:])]
    limit = extrapolate_to_zero(eps_list, mats)
    if len(mats) < 2:
        h3_ok, h3_detail = False, "convergence needs at least two eps values"
    else:
        h3_ok = steps[-1] < tol.dzyalo_step
        h3_detail = f"last step {steps[-1]:.3e}; extrapolated d_i columns {np.round(limit, 12).tolist()}"
    res["H3"] = HypothesisResult("H3", h3_ok, tol.dzyalo_step, h3_detail)

    if ratio_error is not None:
        res["A1"] = HypothesisResult("A1", False, tol.ratio_variation, ratio_error)
    else:
        ratios = [e.ratio_sup for e in entries]
        var = (max(ratios) - min(ratios)) / max(max(ratios), np.finfo(float).tiny)
        res["A1"] = HypothesisResult(
            "A1", var <= tol.ratio_variation, tol.ratio_variation,
            f"ratio_sup = {ratios[-1]:.12g}; relative variation across eps = {var:.3e}",
        )

    return HypothesisReport(pair.describe(), entries, res, dzyalo_limit=limit.tolist())
