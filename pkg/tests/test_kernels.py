import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import frozen
from nlexchange.errors import HypothesisViolation, InputError
from nlexchange.kernels import (
    BallAbs,
    BallLinear,
    BallUniform,
    CustomProfile,
    GaussianTruncated,
    KernelPair,
    audit_hypotheses,
    cone_mass,
    cones_disjoint,
    dzyalo_vector,
    eval_nu,
    eval_rho,
    l1_mass,
    mass_outside,
    oddness_residual,
    pair_from_spec,
    radial_envelope_kappa,
    ratio_sup,
)


def test_eval_rho_closed_form(pair):
    assert eval_rho(pair, 1.0, (0.5, 0.0, 0.0)) == pytest.approx(frozen.RHO_BALL_ABS_HALF, rel=1e-14)
    assert eval_rho(pair, 0.5, (0.25, 0.0, 0.0)) == pytest.approx(frozen.RHO_BALL_ABS_SCALED, rel=1e-14)


def test_eval_nu_closed_form_and_oddness(pair):
    v = eval_nu(pair, 1.0, (0.5, 0.0, 0.0))
    np.testing.assert_allclose(v, [frozen.NU_BALL_LINEAR_HALF, 0.0, 0.0], rtol=1e-14)
    np.testing.assert_array_equal(eval_nu(pair, 1.0, (-0.5, 0.0, 0.0)), -v)
    np.testing.assert_array_equal(eval_nu(pair, 0.3, (0.0, 0.0, 0.0)), np.zeros(3))


@pytest.mark.parametrize("profile", [BallAbs(), BallUniform(), GaussianTruncated()])
def test_support_containment(profile):
    p = KernelPair(profile, BallLinear())
    z = np.array([[0.21, 0.0, 0.0], [0.0, 0.3, 0.3], [1.0, 1.0, 1.0]])
    assert np.all(p.rho_eps(0.2, z) == 0.0)
    assert np.all(p.nu_eps(0.2, z) == 0.0)


def test_eval_rejects_bad_input(pair):
    with pytest.raises(InputError):
        eval_rho(pair, 1.0, (np.nan, 0.0, 0.0))
    with pytest.raises(InputError):
        eval_nu(pair, 1.0, (np.inf, 0.0, 0.0))
    with pytest.raises(InputError):
        eval_rho(pair, 0.0, (0.1, 0.0, 0.0))


def test_mass_outside(pair):
    assert mass_outside(pair, 0.1, 0.2) == 0.0
    assert mass_outside(pair, 1.0, 1.0, which="nu") == 0.0
    assert mass_outside(pair, 1.0, 0.5) == pytest.approx(frozen.MASS_OUTSIDE_HALF, abs=1e-9)


@pytest.mark.parametrize("delta", [0.29, 0.1, 0.2])
def test_cone_mass_matches_monte_carlo(pair, delta):
    got = cone_mass(pair, 0.3, (1.0, 0.0, 0.0), delta)
    assert got == pytest.approx(frozen.CONE_FRACTION_MC[delta], abs=frozen.CONE_MC_TOL)
    assert got == pytest.approx(delta / 2.0, abs=1e-9)


def test_cone_mass_half_space_and_symmetry(pair):
    assert cone_mass(pair, 0.5, (1.0, 0.0, 0.0), 1.0) == pytest.approx(0.5, abs=1e-12)
    a = cone_mass(pair, 0.5, (1.0, 0.0, 0.0), 0.29)
    b = cone_mass(pair, 0.5, (0.0, 1.0, 0.0), 0.29)
    assert a == pytest.approx(b, rel=1e-12)
    assert cones_disjoint([(1, 0, 0), (0, 1, 0), (0, 0, 1)], 0.29)
    assert not cones_disjoint([(1, 0, 0), (0, 1, 0), (0, 0, 1)], 0.3)


@pytest.mark.parametrize("rho", [BallAbs(), BallUniform()])
def test_kappa_radial_is_one(rho):
    p = KernelPair(rho, BallLinear())
    assert radial_envelope_kappa(p, 0.2) == pytest.approx(1.0, abs=1e-6)


def test_kappa_half_ball_is_zero():
    half = CustomProfile(lambda y: (y[..., 0] > 0).astype(float), kind="symmetric",
                         symmetrize=False, normalize=True)
    p = KernelPair(half, BallLinear())
    assert radial_envelope_kappa(p, 0.2) == 0.0


def test_dzyalo_vectors_of_prototype(pair):
    np.testing.assert_allclose(dzyalo_vector(pair, 0.1, 1), [1 / 3, 0, 0], atol=1e-12)
    np.testing.assert_allclose(dzyalo_vector(pair, 0.7, 2), [0, 1 / 3, 0], atol=1e-12)


def test_dzyalo_of_antisymmetrized_even_kernel_is_zero():
    even = CustomProfile(lambda y: np.broadcast_to([1.0, 0.0, 0.0], y.shape), kind="antisymmetric")
    p = KernelPair(BallAbs(), even)
    np.testing.assert_array_equal(p.nu(np.array([[0.2, 0.1, 0.0]])), np.zeros((1, 3)))
    np.testing.assert_allclose(dzyalo_vector(p, 0.3, 1), np.zeros(3), atol=1e-15)


def test_ratio_sup_values(pair):
    assert ratio_sup(pair, 0.1) == pytest.approx(1.0, rel=1e-12)
    half = CustomProfile(BallLinear(), kind="antisymmetric", scale=0.5)
    assert ratio_sup(KernelPair(BallAbs(), half), 0.1) == pytest.approx(0.5, rel=1e-12)
    uniform = KernelPair(BallUniform(), BallLinear())
    assert ratio_sup(uniform, 0.1) == pytest.approx(frozen.RATIO_SUP_UNIFORM, rel=1e-12)


def test_ratio_sup_detects_violation():
    small_rho = CustomProfile(lambda y: np.ones(y.shape[:-1]), kind="symmetric",
                              support_radius=0.5, normalize=True)
    with pytest.raises(HypothesisViolation) as exc:
        ratio_sup(KernelPair(small_rho, BallLinear()), 0.2)
    assert exc.value.hypothesis == "A1"


def test_audit_prototype_passes(pair):
    report = audit_hypotheses(pair, [0.2, 0.1, 0.05])
    assert report.all_passed, report.failed
    np.testing.assert_allclose(report.dzyalo_limit, np.eye(3) / 3, atol=1e-12)
    for e in report.entries:
        assert 0 < e.kappa_estimate <= 1
        assert all(v >= 0 for v in e.mass_outside_rho.values())


def test_audit_flags_even_nu():
    even = CustomProfile(lambda y: np.abs(y) / math.pi, kind="antisymmetric", symmetrize=False)
    report = audit_hypotheses(KernelPair(BallAbs(), even), [0.2, 0.1])
    assert "H1" in report.failed


def test_audit_flags_one_sided_cone():
    cone = CustomProfile(lambda y: (np.abs(y[..., 0]) > 0.9 * np.linalg.norm(y, axis=-1)).astype(float),
                         kind="symmetric", normalize=True)
    report = audit_hypotheses(KernelPair(cone, BallLinear()), [0.2, 0.1])
    assert "G3" in report.failed
    assert "vanishing cone mass for v[2, 3]" in report.results["G3"].detail


def test_audit_rejects_unsorted_eps(pair):
    with pytest.raises(InputError):
        audit_hypotheses(pair, [0.1, 0.2])


def test_table_profile_is_odd_to_roundoff(tmp_path):
    u = np.linspace(-1.0, 1.0, 9)
    pts = np.array(np.meshgrid(u, u, u, indexing="ij")).reshape(3, -1).T
    vals = np.where((np.linalg.norm(pts, axis=1) <= 1.0)[:, None], pts / math.pi, 0.0)
    vals[:, 0] += 0.01 * pts[:, 1] ** 2  # even perturbation, removed by antisymmetrization
    path = tmp_path / "nu.txt"
    np.savetxt(path, np.column_stack([pts, vals]))
    p = pair_from_spec({"rho": "ball_abs", "nu": {"profile": "custom", "table": str(path)}})
    assert oddness_residual(p, 0.2) <= 1e-14


@given(st.floats(min_value=0.01, max_value=5.0))
def test_mass_is_scale_invariant(eps):
    p = KernelPair(BallAbs(), BallLinear())
    assert l1_mass(p, eps, "rho") == pytest.approx(1.0, abs=1e-10)
    assert l1_mass(p, eps, "nu") == pytest.approx(1.0, abs=1e-10)


@given(st.floats(min_value=0.01, max_value=5.0))
def test_ratio_sup_scale_invariant(eps):
    p = KernelPair(BallUniform(), BallLinear())
    assert ratio_sup(p, eps) == pytest.approx(ratio_sup(p, 1.0), rel=1e-12)


@given(st.floats(min_value=0.05, max_value=2.0),
       st.lists(st.floats(min_value=-3, max_value=3), min_size=3, max_size=3))
def test_exact_oddness_of_builtin(eps, z):
    p = KernelPair(BallAbs(), BallLinear())
    z = np.array(z)
    np.testing.assert_array_equal(p.nu_eps(eps, z) + p.nu_eps(eps, -z), np.zeros(3))
    assert p.rho_eps(eps, z) == p.rho_eps(eps, -z)
