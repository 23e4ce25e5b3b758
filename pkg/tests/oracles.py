"""Independent reference computations.

Nothing here imports the package. Each function evaluates a quantity by a
route unrelated to the library code (closed forms, seeded Monte Carlo,
Cartesian midpoint grids), and the results are frozen in ``frozen.py``.
"""

from __future__ import annotations

import numpy as np


def _ball_samples(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, 3))
    g /= np.linalg.norm(g, axis=1)[:, None]
    r = rng.uniform(size=n) ** (1.0 / 3.0)
    return g * r[:, None]


def ball_abs_mass_inside(r: float) -> float:
    """int_{B_r} |y|/pi dy = r^4 (radial integral)."""
    t = np.linspace(0.0, r, 200001)
    f = 4.0 * np.pi * t**2 * t / np.pi
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(f, t))


def ball_abs_cone_fraction_mc(delta: float, n: int = 2_000_000, seed: int = 11) -> float:
    """Mass of rho = |y|/pi inside the cone {y1/|y| > 1 - delta}, Monte Carlo."""
    y = _ball_samples(n, seed)
    r = np.linalg.norm(y, axis=1)
    w = r / np.pi * (4.0 / 3.0 * np.pi)  # density times ball volume
    inside = y[:, 0] / r > 1.0 - delta
    return float(np.mean(w * inside))


def uniform_ratio_sup_dense(n: int = 100001) -> float:
    """max over the ball of |nu|/rho for nu = y/pi and rho = 3/(4 pi)."""
    t = np.linspace(0.0, 1.0, n)
    return float(np.max((t / np.pi) / (3.0 / (4.0 * np.pi))))


def sphere_average_quadratic(a: np.ndarray, n: int = 400_000, seed: int = 5) -> float:
    """int rho(h) |A h/|h||^2 dh for a radial unit-mass rho = mean over directions."""
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, 3))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return float(np.mean(np.sum((g @ a.T) ** 2, axis=1)))


def constant_field_cross_term(eps: float, sides=(1.0, 1.0, 1.0), n: int = 160) -> float:
    """Continuum cross term for m = e3 and the prototype kernels on a box.

    int g(z) |e3 x nu_eps(z)|^2 / rho_eps(z) dz with the overlap volume
    g(z) = prod (L_a - |z_a|); midpoint rule on a Cartesian grid over the ball.
    """
    u = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    z = np.stack(np.meshgrid(u, u, u, indexing="ij"), axis=-1).reshape(-1, 3) * eps
    dv = (2.0 * eps / n) ** 3
    r = np.linalg.norm(z, axis=1)
    inside = r <= eps
    z, r = z[inside], r[inside]
    dens = (z[:, 0] ** 2 + z[:, 1] ** 2) / (np.pi * eps**4 * r)
    g = np.prod(np.asarray(sides) - np.abs(z), axis=1)
    return float(np.sum(g * dens) * dv)


def dzyalo_cartesian(nu, n: int = 120) -> np.ndarray:
    """Column i = int_{B_1} nu(y) y_i/|y| dy on a Cartesian midpoint grid."""
    u = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    y = np.stack(np.meshgrid(u, u, u, indexing="ij"), axis=-1).reshape(-1, 3)
    r = np.linalg.norm(y, axis=1)
    y, r = y[r <= 1.0], r[r <= 1.0]
    dv = (2.0 / n) ** 3
    vals = nu(y)
    return np.einsum("pa,pi->ai", vals, y / r[:, None]) * dv


def double_cap_moment_mc(cos0: float, n: int = 2_000_000, seed: int = 3) -> np.ndarray:
    """Second moment of sigma uniform on the two caps {|sigma_1| > cos0}."""
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, 3))
    g /= np.linalg.norm(g, axis=1)[:, None]
    g = g[np.abs(g[:, 0]) > cos0]
    return g.T @ g / len(g)


def vector_laplacian_half(m: np.ndarray, h: float) -> np.ndarray:
    """Gradient of (V/2) sum |D m|^2 away from the boundary, written as a stencil.

    With the central difference D, D^T D is the wide second difference
    -(m[i+2] - 2 m[i] + m[i-2]) / (4 h^2) along each axis.
    """
    out = np.zeros_like(m)
    for ax in range(3):
        out += -(np.roll(m, -2, axis=ax) - 2.0 * m + np.roll(m, 2, axis=ax)) / (4.0 * h * h)
    return out * h**3


def linear_field_energy(a: np.ndarray, eps: float, sides=(1.0, 1.0, 1.0), n: int = 160) -> float:
    """Continuum F_eps(x -> A x) for rho = |y|/pi on a box.

    int rho_eps(z) g(z) |A z|^2 / |z|^2 dz with g the overlap volume of the box
    and its translate; midpoint rule on a Cartesian grid over the ball.
    """
    u = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    z = np.stack(np.meshgrid(u, u, u, indexing="ij"), axis=-1).reshape(-1, 3) * eps
    dv = (2.0 * eps / n) ** 3
    r = np.linalg.norm(z, axis=1)
    keep = r <= eps
    z, r = z[keep], r[keep]
    rho = r / (np.pi * eps**4)
    g = np.prod(np.asarray(sides) - np.abs(z), axis=1)
    q = np.sum((z @ a.T) ** 2, axis=1) / r**2
    return float(np.sum(rho * g * q) * dv)


def rotation(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * kx @ kx
