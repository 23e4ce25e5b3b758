"""Projected gradient descent on the product of unit spheres.

Descent directions use the L2 metric: the Euclidean gradient of the discrete
energy divided by the cell volume. Iterates are retracted by pointwise
normalization and every step passes an Armijo test on the true energy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .grid import DiscreteField, project_to_sphere
from .kernels import KernelPair
from .local_energy import (
    anisotropy_well_energy,
    anisotropy_well_gradient,
    coefficient_matrix,
    dirichlet_energy,
    dirichlet_gradient,
    dmi_energy,
    dmi_gradient,
    as_matrix,
)
from .nonlocal_energy import DEFAULT_FLOOR_FACTOR, PairSummationPlan, build_plan, energy_gradient_nonlocal, evaluate_plan


@dataclass
class NonlocalSelector:
    pair: KernelPair
    eps: float
    floor_factor: float = DEFAULT_FLOOR_FACTOR
    _plan: PairSummationPlan | None = field(default=None, repr=False, compare=False)

    name = "nonlocal"

    def plan(self, m: DiscreteField) -> PairSummationPlan:
        if self._plan is None or self._plan.domain != m.domain:
            self._plan = build_plan(self.pair, self.eps, m.domain, self.floor_factor)
        return self._plan

    def energy(self, m: DiscreteField) -> float:
        return evaluate_plan(self.plan(m), m).e_eps

    def gradient(self, m: DiscreteField) -> np.ndarray:
        return energy_gradient_nonlocal(self.pair, self.eps, m, self.plan(m))


@dataclass
class LocalSelector:
    A: np.ndarray
    D: np.ndarray
    well: float = 0.0
    well_axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    name = "local"

    def __post_init__(self):
        self.A = coefficient_matrix(self.A)
        self.D = as_matrix(self.D, "D")

    def energy(self, m: DiscreteField) -> float:
        e = dirichlet_energy(m, self.A) + dmi_energy(m, self.D)
        if self.well:
            e += anisotropy_well_energy(m, self.well, self.well_axis)
        return e

    def gradient(self, m: DiscreteField) -> np.ndarray:
        g = dirichlet_gradient(m, self.A) + dmi_gradient(m, self.D)
        if self.well:
            g += anisotropy_well_gradient(m, self.well, self.well_axis)
        return g


Selector = NonlocalSelector | LocalSelector


def energy_gradient(selector: Selector, m: DiscreteField) -> DiscreteField:
    """Exact gradient of the discrete energy with respect to the cell values."""
    return DiscreteField(m.domain, selector.gradient(m))


def project_tangent(m: DiscreteField, g: DiscreteField | np.ndarray) -> DiscreteField:
    """Pointwise ``g - (g . m) m``."""
    gv = g.values if isinstance(g, DiscreteField) else np.asarray(g, dtype=float)
    mv = m.values
    out = gv - np.einsum("...c,...c->...", gv, mv)[..., None] * mv
    return DiscreteField(m.domain, out)


@dataclass
class RelaxConfig:
    selector: Selector
    seed: DiscreteField
    max_iter: int = 200
    initial_step: float = 1.0
    factor: float = 0.5
    armijo: float = 1e-4
    tol: float = 1e-6
    min_step: float = 1e-14

    def __post_init__(self):
        if not self.initial_step > 0:
            raise InputError("initial step must be positive")
        if not 0.0 < self.factor < 1.0:
            raise InputError("backtracking factor must lie in (0, 1)")
        if not 0.0 < self.armijo < 1.0:
            raise InputError("Armijo constant must lie in (0, 1)")
        if not self.tol > 0:
            raise InputError("gradient tolerance must be positive")
        if self.max_iter < 0:
            raise InputError("max_iter must be nonnegative")


@dataclass
class TraceRow:
    iteration: int
    energy: float
    grad_norm: float
    step: float


@dataclass
class RelaxTrace:
    rows: list[TraceRow]
    final: DiscreteField
    reason: str

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.rows])

    @property
    def converged(self) -> bool:
        return self.reason == "converged"

    @property
    def increases(self) -> int:
        return int(np.sum(np.diff(self.energies) > 0))


def minimize(config: RelaxConfig) -> RelaxTrace:
    sel = config.selector
    m = config.seed if config.seed.on_sphere else project_to_sphere(config.seed)
    v = m.domain.cell_volume
    energy = sel.energy(m)
    step = config.initial_step
    rows: list[TraceRow] = []
    reason = "max_iter"
    it = 0
    while True:
        grad = sel.gradient(m)
        d = project_tangent(m, grad).values / v
        gnorm = float(np.sqrt(v * np.sum(d * d)))
        rows.append(TraceRow(it, energy, gnorm, step if it else 0.0))
        if gnorm <= config.tol:
            reason = "converged"
            break
        if it >= config.max_iter:
            break
        slope = v * float(np.sum(d * d))
        step = min(config.initial_step, 2.0 * step)
        while True:
            trial = project_to_sphere(m.with_values(m.values - step * d, on_sphere=False))
            e_trial = sel.energy(trial)
            if e_trial <= energy - config.armijo * step * slope and e_trial < energy:
                break
            step *= config.factor
            if step < config.min_step:
                break
        if step < config.min_step:
            reason = "stalled"
            break
        m, energy = trial, e_trial
        it += 1
    return RelaxTrace(rows, m, reason)


def finite_difference_check(selector: Selector, m: DiscreteField, direction: np.ndarray | None = None,
                            t: float = 1e-5, seed: int = 0) -> float:
    """Relative mismatch between ``<grad E, v>`` and a central difference along ``v``.

    The direction defaults to a smooth random field; the perturbation is not
    renormalized so the check covers the unconstrained energy.
    """
    if direction is None:
        rng = np.random.default_rng(seed)
        x = m.domain.centers()
        v = np.zeros(m.values.shape)
        for c in range(3):
            k = rng.normal(size=3) * 2.0 * np.pi
            phase = rng.uniform(0, 2 * np.pi)
            v[..., c] = np.sin(x @ k + phase)
    else:
        v = np.asarray(direction, dtype=float)
    plus = m.with_values(m.values + t * v, on_sphere=False)
    minus = m.with_values(m.values - t * v, on_sphere=False)
    fd = (selector.energy(plus) - selector.energy(minus)) / (2.0 * t)
    an = float(np.sum(selector.gradient(m) * v))
    return abs(fd - an) / max(abs(an), 1e-300)


def write_trace_csv(trace: RelaxTrace, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("iter", "energy", "grad_norm", "step"))
        for r in trace.rows:
            writer.writerow([r.iteration, repr(float(r.energy)), repr(float(r.grad_norm)), repr(float(r.step))])
