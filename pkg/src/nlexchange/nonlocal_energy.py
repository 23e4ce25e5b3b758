"""Nonlocal exchange energies on a cell grid.

The double integrals over Omega x Omega are approximated by sums over pairs of
cells. For each cell offset ``o`` (displacement ``s = o * h``) the kernel is
integrated once over the neighbouring cell with a refined midpoint rule, so the
inner loops only read cached per-offset weights:

    F ~ sum_x sum_o V * M(o) / |s|^2 * |m_x - m_{x+o}|^2,   M(o) = int_cell rho_eps
    H ~ -sum_x sum_o V * W(o) . (m_x x m_{x+o}),            W(o) = int_cell nu_eps / |z|
    C ~ sum_x sum_o V * Q_T(o)(m_{x+o}),                    T(o) = int_cell nu (x) nu / rho

Pairs are visited once through the lexicographically positive half of the
stencil and the ordered-pair weights are doubled.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ._pairsum import fused_slab_sums, pair_gradient
from .errors import InputError, ResolutionError
from .grid import BoxDomain, DiscreteField, max_spacing
from .kernels import KernelPair
from .summation import exact_sum, exact_sum_axis0

DEFAULT_FLOOR_FACTOR = 2.0
_CHUNK_POINTS = 1 << 18
_SYM_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))


def _half_mask(offsets: np.ndarray) -> np.ndarray:
    """True for offsets that are lexicographically positive."""
    first = np.where(offsets[:, 0] != 0, offsets[:, 0],
                     np.where(offsets[:, 1] != 0, offsets[:, 1], offsets[:, 2]))
    return first > 0


def stencil_offsets(domain: BoxDomain, radius: float) -> np.ndarray:
    """All nonzero offsets whose neighbour cell meets the closed ball of ``radius``.

    Offsets are clipped to what fits inside the grid.
    """
    h = domain.spacing
    reach = [min(int(math.ceil(radius / h[a] + 0.5)), domain.shape[a] - 1) for a in range(3)]
    axes = [np.arange(-r, r + 1) for r in reach]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    gap = np.maximum(0.0, np.abs(grid) * h - 0.5 * h)
    keep = (np.sum(gap * gap, axis=1) < radius * radius) & np.any(grid != 0, axis=1)
    return np.ascontiguousarray(grid[keep], dtype=np.int64)


def _subcell_points(h: np.ndarray, subcells: int) -> np.ndarray:
    u = (np.arange(subcells) + 0.5) / subcells - 0.5
    pts = np.stack(np.meshgrid(u, u, u, indexing="ij"), axis=-1).reshape(-1, 3)
    return pts * h


def offset_weights(pair: KernelPair, eps: float, domain: BoxDomain, offsets: np.ndarray):
    """Cell integrals ``M(o)``, ``W(o)`` and packed ``T(o)`` for each offset."""
    h = domain.spacing
    sub = _subcell_points(h, pair.quadrature.pair_subcells)
    dv = domain.cell_volume / sub.shape[0]
    per_chunk = max(1, _CHUNK_POINTS // sub.shape[0])
    mass = np.empty(len(offsets))
    wd = np.empty((len(offsets), 3))
    tt = np.empty((len(offsets), 6))
    for start in range(0, len(offsets), per_chunk):
        block = offsets[start:start + per_chunk] * h
        z = block[:, None, :] + sub[None, :, :]
        rho = pair.rho_eps(eps, z)
        nu = pair.nu_eps(eps, z)
        r = np.linalg.norm(z, axis=-1)
        mass[start:start + len(block)] = rho.sum(axis=1) * dv
        wd[start:start + len(block)] = (nu / r[..., None]).sum(axis=1) * dv
        nu2 = np.einsum("psi,psi->ps", nu, nu)
        if np.any((rho <= 0.0) & (nu2 > 0.0)):
            raise InputError("nu_eps is nonzero where rho_eps vanishes; the cross term is unbounded")
        inv = np.divide(1.0, rho, out=np.zeros_like(rho), where=rho > 0.0)
        for c, (a, b) in enumerate(_SYM_PAIRS):
            tt[start:start + len(block), c] = (nu[..., a] * nu[..., b] * inv).sum(axis=1) * dv
    return mass, wd, tt


@dataclass
class PairSummationPlan:
    """Offsets and cached per-offset weights for one (kernel, eps, domain)."""

    domain: BoxDomain
    eps: float
    cutoff: float
    offsets: np.ndarray          # half stencil, lexicographically positive
    cell_mass: np.ndarray        # M(o)
    nu_over_r: np.ndarray        # W(o)
    cross_tensor: np.ndarray     # T(o) packed (xx, yy, zz, xy, xz, yz)
    diagonal: str = "exclude-self"
    summation: str = "compensated"

    @property
    def n_offsets(self) -> int:
        return 2 * len(self.offsets)

    @property
    def cost_estimate(self) -> int:
        return self.domain.n_cells * self.n_offsets

    @property
    def pair_count(self) -> int:
        """Number of ordered cell pairs inside the grid that the plan visits."""
        n = np.asarray(self.domain.shape)
        per = np.prod(np.clip(n[None, :] - np.abs(self.offsets), 0, None), axis=1)
        return int(2 * per.sum())

    @property
    def displacements(self) -> np.ndarray:
        return self.offsets * self.domain.spacing

    def energy_weights(self):
        """Half-stencil weights in the form the compiled loop consumes."""
        v = self.domain.cell_volume
        s2 = np.sum(self.displacements ** 2, axis=1)
        wf = 2.0 * v * self.cell_mass / s2
        wh = -2.0 * v * self.nu_over_r
        wt = v * self.cross_tensor
        return wf, wh, wt

    def full_stencil(self):
        """Offsets in both orientations with ordered-pair F and H weights."""
        v = self.domain.cell_volume
        s2 = np.sum(self.displacements ** 2, axis=1)
        wf = v * self.cell_mass / s2
        wd = -v * self.nu_over_r
        offsets = np.concatenate([self.offsets, -self.offsets])
        return (np.ascontiguousarray(offsets), np.concatenate([wf, wf]),
                np.ascontiguousarray(np.concatenate([wd, -wd])))

    def describe(self) -> dict:
        return {
            "eps": self.eps, "cutoff": self.cutoff, "offsets": self.n_offsets,
            "cost_estimate": self.cost_estimate, "pairs": self.pair_count,
            "diagonal": self.diagonal, "summation": self.summation,
        }


def min_eps(pair: KernelPair, domain: BoxDomain, floor_factor: float = DEFAULT_FLOOR_FACTOR) -> float:
    """Smallest eps the grid can resolve: ``eps * R >= floor_factor * max(h)``."""
    return floor_factor * max_spacing(domain) / pair.support_radius


def build_plan(pair: KernelPair, eps: float, domain: BoxDomain,
               floor_factor: float = DEFAULT_FLOOR_FACTOR) -> PairSummationPlan:
    if not (np.isfinite(eps) and eps > 0):
        raise InputError(f"eps must be a positive finite number, got {eps!r}")
    floor = min_eps(pair, domain, floor_factor)
    if eps < floor * (1.0 - 1e-12):
        raise ResolutionError(eps, floor)
    cutoff = pair.cutoff(eps)
    allowed = stencil_offsets(domain, cutoff)
    half = np.ascontiguousarray(allowed[_half_mask(allowed)])
    mass, wd, tt = offset_weights(pair, eps, domain, half)
    return PairSummationPlan(domain, float(eps), cutoff, half, mass, wd, tt)


@dataclass
class NonlocalEnergyBreakdown:
    eps: float
    f_eps: float
    h_eps: float
    e_eps: float
    cross_term: float
    pairs: int
    seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return asdict(self)


def _values(m: DiscreteField) -> np.ndarray:
    vals = np.ascontiguousarray(m.values, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise InputError("field contains non-finite values")
    return vals


def _resolve_plan(pair, eps, m, plan, floor_factor) -> PairSummationPlan:
    if plan is None:
        return build_plan(pair, eps, m.domain, floor_factor)
    if plan.domain != m.domain or plan.eps != eps:
        raise InputError("plan was built for a different domain or eps")
    return plan


def evaluate_plan(plan: PairSummationPlan, m: DiscreteField) -> NonlocalEnergyBreakdown:
    vals = _values(m)
    wf, wh, wt = plan.energy_weights()
    t0 = time.perf_counter()
    slabs = fused_slab_sums(vals, plan.offsets, wf, np.ascontiguousarray(wh), np.ascontiguousarray(wt))
    f, h, c = exact_sum_axis0(slabs)
    seconds = time.perf_counter() - t0
    f = max(float(f), 0.0)
    c = max(float(c), 0.0)
    h = float(h)
    return NonlocalEnergyBreakdown(plan.eps, f, h, f + h, c, plan.pair_count, seconds)


def total_energy(pair: KernelPair, eps: float, m: DiscreteField, plan: PairSummationPlan | None = None,
                 floor_factor: float = DEFAULT_FLOOR_FACTOR) -> NonlocalEnergyBreakdown:
    """``F_eps``, ``H_eps``, their sum and the cross term in one pass."""
    return evaluate_plan(_resolve_plan(pair, eps, m, plan, floor_factor), m)


def sym_energy(pair: KernelPair, eps: float, m: DiscreteField, plan: PairSummationPlan | None = None,
               floor_factor: float = DEFAULT_FLOOR_FACTOR) -> float:
    return total_energy(pair, eps, m, plan, floor_factor).f_eps


def asym_energy(pair: KernelPair, eps: float, m: DiscreteField, plan: PairSummationPlan | None = None,
                floor_factor: float = DEFAULT_FLOOR_FACTOR) -> float:
    return total_energy(pair, eps, m, plan, floor_factor).h_eps


def energy_gradient_nonlocal(pair: KernelPair, eps: float, m: DiscreteField,
                             plan: PairSummationPlan | None = None,
                             floor_factor: float = DEFAULT_FLOOR_FACTOR, which: str = "e") -> np.ndarray:
    """Euclidean gradient of ``E_eps`` (or of ``F_eps`` / ``H_eps`` alone) with respect to the cell values."""
    if which not in ("e", "f", "h"):
        raise InputError("which must be 'e', 'f' or 'h'")
    plan = _resolve_plan(pair, eps, m, plan, floor_factor)
    offsets, wf, wd = plan.full_stencil()
    if which == "f":
        wd = np.zeros_like(wd)
    elif which == "h":
        wf = np.zeros_like(wf)
    return pair_gradient(_values(m), offsets, wf, wd)


# lattice form


@dataclass
class LatticeEnergy:
    f_j: float
    h_d: float
    e_jd: float
    pairs: int


def _check_lattice_symmetry(J, d, s: np.ndarray, tol: float):
    j_plus = np.asarray(J(s), dtype=float)
    j_minus = np.asarray(J(-s), dtype=float)
    d_plus = np.asarray(d(s), dtype=float).reshape(-1, 3)
    d_minus = np.asarray(d(-s), dtype=float).reshape(-1, 3)
    if not (np.all(np.isfinite(j_plus)) and np.all(np.isfinite(d_plus))):
        raise InputError("J or d returned non-finite values")
    if np.any(j_plus < 0):
        raise InputError("J must be nonnegative")
    scale_j = max(np.max(np.abs(j_plus), initial=0.0), 1e-300)
    scale_d = max(np.max(np.abs(d_plus), initial=0.0), 1e-300)
    if np.max(np.abs(j_plus - j_minus), initial=0.0) > tol * scale_j:
        raise InputError("J must be even: J(z) = J(-z)")
    if np.max(np.abs(d_plus + d_minus), initial=0.0) > tol * scale_d:
        raise InputError("d must be odd: d(-z) = -d(z)")
    return j_plus, d_plus


def heisenberg_energy(J: Callable[[np.ndarray], np.ndarray], d: Callable[[np.ndarray], np.ndarray],
                      m: DiscreteField, cutoff: float | None = None, sym_tol: float = 1e-12) -> LatticeEnergy:
    """Continuum lattice energy ``1/2 int J |m(x)-m(y)|^2 + int d(x-y).(m(y) x m(x))``.

    ``J`` and ``d`` are sampled at cell-centre displacements. Without a
    ``cutoff`` every offset that fits in the grid is visited.
    """
    domain = m.domain
    if cutoff is None:
        offsets = stencil_offsets(domain, float(np.linalg.norm(domain.sides)) * 2.0)
    else:
        offsets = stencil_offsets(domain, cutoff)
    half = np.ascontiguousarray(offsets[_half_mask(offsets)])
    s = half * domain.spacing
    jv, dv = _check_lattice_symmetry(J, d, s, sym_tol)
    v2 = domain.cell_volume ** 2
    wf = v2 * jv
    wh = np.ascontiguousarray(2.0 * v2 * dv)
    wt = np.zeros((len(half), 6))
    slabs = fused_slab_sums(_values(m), half, wf, wh, wt)
    f, h, _ = exact_sum_axis0(slabs)
    n = np.asarray(domain.shape)
    pairs = int(2 * np.prod(np.clip(n[None, :] - np.abs(half), 0, None), axis=1).sum())
    return LatticeEnergy(f, h, f + h, pairs)


def lattice_kernels(plan: PairSummationPlan):
    """``J(z) = rho_eps/|z|^2`` and ``d(z) = nu_eps/|z|`` as lattice functions.

    Values are cell averages of the kernel at each stencil offset and zero off
    the stencil, matching the weights of ``plan`` exactly.
    """
    h = plan.domain.spacing
    v = plan.domain.cell_volume
    s2 = np.sum(plan.displacements ** 2, axis=1)
    table_j: dict[tuple, float] = {}
    table_d: dict[tuple, np.ndarray] = {}
    for o, mass, w, r2 in zip(plan.offsets, plan.cell_mass, plan.nu_over_r, s2):
        key = tuple(int(x) for x in o)
        neg = tuple(-x for x in key)
        table_j[key] = table_j[neg] = mass / (v * r2)
        table_d[key] = w / v
        table_d[neg] = -w / v

    def _keys(z):
        idx = np.rint(np.asarray(z, dtype=float).reshape(-1, 3) / h).astype(np.int64)
        return [tuple(int(x) for x in row) for row in idx]

    def J(z):
        return np.array([table_j.get(k, 0.0) for k in _keys(z)])

    def dvec(z):
        zero = np.zeros(3)
        return np.array([table_d.get(k, zero) for k in _keys(z)]).reshape(-1, 3)

    return J, dvec


# reference evaluator


def brute_force_energy(pair: KernelPair, eps: float, m: DiscreteField) -> NonlocalEnergyBreakdown:
    """All ordered cell pairs, no stencil or cutoff logic. Meant for tiny grids."""
    domain = m.domain
    if domain.n_cells > 1000:
        raise InputError("brute_force_energy is limited to grids of at most 1000 cells")
    vals = _values(m).reshape(-1, 3)
    idx = np.stack(np.meshgrid(*[np.arange(n) for n in domain.shape], indexing="ij"), axis=-1).reshape(-1, 3)
    h = domain.spacing
    v = domain.cell_volume
    k = pair.quadrature.pair_subcells
    u = (np.arange(k) + 0.5) / k - 0.5
    sub = np.array(list(itertools.product(u, u, u))) * h
    dv = v / len(sub)

    # kernel cell integrals for every distinct offset y - x in the grid
    spans = [np.arange(-(n - 1), n) for n in domain.shape]
    all_off = np.array(list(itertools.product(*spans)))
    cache_f, cache_h, cache_c = {}, {}, {}
    for o in all_off:
        key = tuple(int(x) for x in o)
        if key == (0, 0, 0):
            continue
        s = o * h
        z = s + sub
        rho = pair.rho_eps(eps, z)
        nu = pair.nu_eps(eps, z)
        r = np.sqrt(np.sum(z * z, axis=1))
        cache_f[key] = v * math.fsum((rho * dv).tolist()) / float(s @ s)
        cache_h[key] = -v * np.array([math.fsum((nu[:, a] / r * dv).tolist()) for a in range(3)])
        ratio = np.where(rho > 0, 1.0 / np.where(rho > 0, rho, 1.0), 0.0)
        cache_c[key] = v * np.einsum("pa,pb,p->ab", nu, nu, ratio * dv)

    f_terms, h_terms, c_terms = [], [], []
    pairs = 0
    for a in range(len(vals)):
        for b in range(len(vals)):
            if a == b:
                continue
            key = tuple(int(x) for x in idx[b] - idx[a])
            mx, my = vals[a], vals[b]
            wf = cache_f[key]
            if wf == 0.0 and not np.any(cache_h[key]) and not np.any(cache_c[key]):
                continue
            pairs += 1
            diff = mx - my
            f_terms.append(wf * float(diff @ diff))
            h_terms.append(float(cache_h[key] @ np.cross(mx, my)))
            t = cache_c[key]
            c_terms.append(float(my @ my) * float(np.trace(t)) - float(my @ t @ my))
    f = exact_sum(f_terms)
    hh = exact_sum(h_terms)
    c = exact_sum(c_terms)
    return NonlocalEnergyBreakdown(float(eps), f, hh, f + hh, c, pairs, 0.0)


CSV_COLUMNS = ("eps", "f_eps", "h_eps", "e_eps", "cross_term", "pairs", "seconds")


def write_breakdowns_csv(rows: Iterable[NonlocalEnergyBreakdown], path: str | Path,
                         include_timing: bool = False) -> None:
    """Write breakdown rows. Wall times are left blank unless requested so output is reproducible."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                repr(float(r.eps)), repr(float(r.f_eps)), repr(float(r.h_eps)), repr(float(r.e_eps)),
                repr(float(r.cross_term)),
                int(r.pairs), repr(float(r.seconds)) if include_timing else "",
            ])
