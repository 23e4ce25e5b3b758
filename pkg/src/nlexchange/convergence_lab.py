"""Epsilon sweeps, limit-object estimators, rate fits and bound audits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import ConvergenceFailure, FitDegenerateError, InputError, ResolutionError
from .grid import BoxDomain, DiscreteField, build_field, h1_norm_sq, l2_norm_sq
from .kernels import KernelPair, dzyalo_matrix, extrapolate_to_zero, l1_mass, ratio_sup, second_moment
from .local_energy import AnisotropyMatrix, DzyaloshinskiiMatrix, dirichlet_energy, dmi_energy
from .nonlocal_energy import (
    DEFAULT_FLOOR_FACTOR,
    NonlocalEnergyBreakdown,
    min_eps,
    total_energy,
    write_breakdowns_csv,
)

COMPONENTS = {"f": "f_eps", "h": "h_eps", "e": "e_eps"}
ZERO_ERROR = 1e-13


@dataclass
class RateFit:
    component: str
    rate: float
    constant: float
    residual: float
    used: int


@dataclass
class EnergySweep:
    field_id: str
    kernel_id: str
    rows: list[NonlocalEnergyBreakdown]
    f_limit: float | None = None
    h_limit: float | None = None
    e_limit: float | None = None
    rates: dict[str, RateFit] = field(default_factory=dict)

    @property
    def eps(self) -> list[float]:
        return [r.eps for r in self.rows]

    def column(self, component: str) -> np.ndarray:
        return np.array([getattr(r, COMPONENTS.get(component, component)) for r in self.rows])

    def limit(self, component: str) -> float | None:
        return getattr(self, f"{component}_limit")

    def errors(self, component: str) -> np.ndarray:
        lim = self.limit(component)
        if lim is None:
            raise InputError(f"sweep has no {component} limit attached")
        return np.abs(self.column(component) - lim)

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "field": self.field_id, "kernel": self.kernel_id, "eps": self.eps,
            "limits": {"f": self.f_limit, "h": self.h_limit, "e": self.e_limit},
            "rates": {k: vars(v) for k, v in self.rates.items()},
        }
        return out


def check_eps_list(eps_list: Sequence[float], domain: BoxDomain, pair: KernelPair,
                   floor_factor: float = DEFAULT_FLOOR_FACTOR) -> list[float]:
    eps = [float(e) for e in eps_list]
    if not eps:
        raise InputError("eps list is empty")
    if not all(math.isfinite(e) and e > 0 for e in eps):
        raise InputError("eps values must be positive and finite")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InputError("eps list must be strictly decreasing")
    floor = min_eps(pair, domain, floor_factor)
    if eps[-1] < floor * (1.0 - 1e-12):
        raise ResolutionError(eps[-1], floor)
    return eps


def sweep(pair: KernelPair, m: DiscreteField, eps_list: Sequence[float], A=None, D=None,
          field_id: str = "field", floor_factor: float = DEFAULT_FLOOR_FACTOR) -> EnergySweep:
    """One nonlocal breakdown per eps, with local limits attached when ``A`` and ``D`` are given."""
    eps = check_eps_list(eps_list, m.domain, pair, floor_factor)
    rows = [total_energy(pair, e, m, floor_factor=floor_factor) for e in eps]
    out = EnergySweep(field_id, pair.name, rows)
    if A is not None:
        out.f_limit = dirichlet_energy(m, A)
    if D is not None:
        out.h_limit = dmi_energy(m, D)
    if out.f_limit is not None and out.h_limit is not None:
        out.e_limit = out.f_limit + out.h_limit
    return out


def fit_rate(sw: EnergySweep, component: str, noise_floor: float = 0.0) -> RateFit:
    """Fit ``|value - limit| ~ c * eps^p`` by least squares in log-log space.

    Rows whose error is below ``1e-13`` or below ``10 * noise_floor`` are skipped.
    """
    if component not in COMPONENTS:
        raise InputError(f"component must be one of {sorted(COMPONENTS)}")
    if len(sw.rows) < 3:
        raise InputError("rate fit needs at least three sweep rows")
    err = sw.errors(component)
    eps = np.asarray(sw.eps)
    keep = (err > ZERO_ERROR) & (err > 10.0 * noise_floor)
    if keep.sum() < 2:
        raise FitDegenerateError(f"only {int(keep.sum())} usable rows for the {component} rate fit")
    x = np.log(eps[keep])
    y = np.log(err[keep])
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - y) ** 2)))
    fit = RateFit(component, float(coef[0]), float(math.exp(coef[1])), resid, int(keep.sum()))
    sw.rates[component] = fit
    return fit


def quadrature_noise(domain: BoxDomain, field_spec: dict, A, D) -> float:
    """Richardson estimate of the grid error in the local limit.

    The difference matrix is second order, so ``|L(h) - L(2h)| / 3`` estimates
    the error of ``L(h)``. Needs an even resolution of at least 8 per axis.
    """
    shape = tuple(n // 2 for n in domain.shape)
    if min(shape) < 4:
        return 0.0
    coarse = BoxDomain(domain.lower, domain.sides, shape)
    fine_m = build_field(domain, field_spec)
    coarse_m = build_field(coarse, field_spec)
    fine = dirichlet_energy(fine_m, A) + dmi_energy(fine_m, D)
    rough = dirichlet_energy(coarse_m, A) + dmi_energy(coarse_m, D)
    return abs(fine - rough) / 3.0


def estimate_dzyalo(pair: KernelPair, eps_list: Sequence[float], tol: float = 1e-12) -> DzyaloshinskiiMatrix:
    """Dzyaloshinskii vectors extrapolated to eps = 0 from per-eps moments."""
    eps = [float(e) for e in eps_list]
    if len(eps) < 2:
        raise InputError("estimate_dzyalo needs at least two eps values")
    order = np.argsort(eps)[::-1]
    eps = [eps[i] for i in order]
    mats = [dzyalo_matrix(pair, e) for e in eps]
    diffs = [float(np.max(np.abs(b - a))) for a, b in zip(mats, mats[1:])]
    for k in range(1, len(diffs)):
        if diffs[k] > diffs[k - 1] + tol:
            raise ConvergenceFailure(
                "Dzyaloshinskii moments are not settling as eps decreases",
                {"eps": eps, "differences": diffs, "matrices": [m.tolist() for m in mats]},
            )
    if max(diffs) <= tol:
        return DzyaloshinskiiMatrix(mats[-1])
    return DzyaloshinskiiMatrix(extrapolate_to_zero(eps, mats))


def estimate_anisotropy(pair: KernelPair, eps: float) -> AnisotropyMatrix:
    """Finite-eps proxy ``A(eps) = int rho_eps(h) h (x) h / |h|^2 dh``.

    The moment is symmetrized and divided by the mass of ``rho_eps`` taken with
    the same rule, which pins the trace to one.
    """
    a = second_moment(pair, eps)
    a = 0.5 * (a + a.T)
    mass = float(np.trace(a))
    if not mass > 0:
        raise InputError("rho_eps has no mass")
    return AnisotropyMatrix(a / mass)


@dataclass
class BoundRow:
    eps: float
    energy_ratio: float
    coercivity_lhs: float
    coercivity_rhs: float
    coercivity_ok: bool
    cross_term: float
    cross_bound: float
    cross_ok: bool


@dataclass
class BoundsAudit:
    rows: list[BoundRow]
    delta_sq: float
    l2: float
    h1: float
    max_variation: float = 0.5
    max_growth: float = 10.0

    @property
    def max_energy_ratio(self) -> float:
        return max(r.energy_ratio for r in self.rows)

    @property
    def energy_ratios(self) -> list[float]:
        return [r.energy_ratio for r in self.rows]

    @property
    def ratio_variation(self) -> float:
        """``(max - min) / max`` of ``|e / |m|_{H1}^2|`` across the sweep."""
        ratios = np.abs(self.energy_ratios)
        top = float(ratios.max())
        return 0.0 if top == 0.0 else float((top - ratios.min()) / top)

    @property
    def uniform_ok(self) -> bool:
        ratios = np.abs(self.energy_ratios)
        if not np.all(np.isfinite(ratios)):
            return False
        return bool(self.ratio_variation < self.max_variation
                    and ratios.max() <= self.max_growth * ratios[0] + 1e-300)

    @property
    def coercivity_ok(self) -> bool:
        return all(r.coercivity_ok for r in self.rows)

    @property
    def cross_ok(self) -> bool:
        return all(r.cross_ok for r in self.rows)

    @property
    def all_passed(self) -> bool:
        return self.uniform_ok and self.coercivity_ok and self.cross_ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta_sq": self.delta_sq, "l2_norm_sq": self.l2, "h1_norm_sq": self.h1,
            "max_energy_ratio": self.max_energy_ratio, "ratio_variation": self.ratio_variation,
            "max_variation": self.max_variation, "max_growth": self.max_growth,
            "uniform_bound": self.uniform_ok, "coercivity": self.coercivity_ok,
            "cross_bound": self.cross_ok, "rows": [vars(r) for r in self.rows],
        }


def check_bounds(rows: Sequence[NonlocalEnergyBreakdown], l2: float, h1: float,
                 cross_constants: Sequence[float], delta_sq: float = 0.5) -> BoundsAudit:
    """Audit precomputed breakdowns.

    (a) ``e / |m|_{H1}^2`` per eps; (b) ``(1 - d^2) f - cross / (4 d^2) <= e``;
    (c) ``cross <= C * |m|_{L2}^2``.
    """
    if not 0.0 < delta_sq < 1.0:
        raise InputError("delta_sq must lie in (0, 1)")
    out = []
    for r, c in zip(rows, cross_constants):
        lhs = (1.0 - delta_sq) * r.f_eps - r.cross_term / (4.0 * delta_sq)
        slack = 1e-12 * max(abs(r.f_eps), abs(r.cross_term), abs(r.e_eps), 1e-300)
        bound = c * l2
        ratio = r.e_eps / h1 if h1 > 0 else 0.0
        out.append(BoundRow(
            r.eps, ratio, lhs, r.e_eps, bool(lhs <= r.e_eps + slack),
            r.cross_term, bound, bool(r.cross_term <= bound * (1.0 + 1e-12) and r.cross_term >= 0.0),
        ))
    return BoundsAudit(out, delta_sq, l2, h1)


def audit_bounds(pair: KernelPair, m: DiscreteField, eps_list: Sequence[float],
                 sw: EnergySweep | None = None, delta_sq: float = 0.5,
                 floor_factor: float = DEFAULT_FLOOR_FACTOR) -> BoundsAudit:
    if sw is None:
        sw = sweep(pair, m, eps_list, floor_factor=floor_factor)
    constants = [ratio_sup(pair, r.eps) * l1_mass(pair, r.eps, "nu") for r in sw.rows]
    return check_bounds(sw.rows, l2_norm_sq(m), h1_norm_sq(m), constants, delta_sq)


@dataclass
class RecoveryReport:
    eps: list[float]
    values: list[float]
    limit: float
    abs_errors: list[float]
    rel_errors: list[float]
    tolerance: float
    last_is_smallest: bool
    tail_decreasing: bool
    within_tolerance: bool

    @property
    def passed(self) -> bool:
        return self.last_is_smallest and self.within_tolerance

    def to_dict(self) -> dict[str, Any]:
        d = dict(vars(self))
        d["passed"] = self.passed
        return d


def recovery_check(pair: KernelPair, m: DiscreteField, eps_list: Sequence[float], A, D,
                   tolerance: float = 0.07, sw: EnergySweep | None = None,
                   floor_factor: float = DEFAULT_FLOOR_FACTOR) -> RecoveryReport:
    """Check ``E_eps(m) -> E_limit(m)`` along the constant family ``m_eps = m``.

    ``tolerance`` is relative to ``|E_limit|``, or absolute when the limit is
    zero.
    """
    if sw is None:
        sw = sweep(pair, m, eps_list, A, D, floor_factor=floor_factor)
    limit = dirichlet_energy(m, A) + dmi_energy(m, D)
    values = sw.column("e")
    err = np.abs(values - limit)
    scale = abs(limit) if abs(limit) > ZERO_ERROR else 1.0
    rel = err / scale
    exact = bool(np.all(err <= ZERO_ERROR))
    last_smallest = exact or bool(err[-1] <= err.min())
    tail = err[-3:]
    tail_dec = exact or bool(np.all(np.diff(tail) < 0))
    return RecoveryReport(
        sw.eps, values.tolist(), limit, err.tolist(), rel.tolist(), tolerance,
        last_smallest, tail_dec, bool(rel[-1] <= tolerance),
    )


def artifact_stem(field_id: str, kernel_id: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in f"{field_id}__{kernel_id}")
    return safe


def write_sweep_csv(sw: EnergySweep, path: str | Path, include_timing: bool = False) -> None:
    write_breakdowns_csv(sw.rows, path, include_timing)


def write_summary_json(payload: dict[str, Any], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
