import csv
import json
import math

import numpy as np
import pytest

from conftest import FIELD_SPECS, K, field_on
from nlexchange.errors import InputError
from nlexchange.grid import BoxDomain, build_field, h1_seminorm_sq, l2_norm_sq
from nlexchange.local_energy import (
    AnisotropyMatrix,
    DzyaloshinskiiMatrix,
    bulk_dmi_energy,
    coefficient_matrix,
    dirichlet_energy,
    dmi_energy,
    limit_energy,
    write_local_csv,
)

I3 = np.eye(3) / 3.0


@pytest.fixture(scope="module")
def helix64():
    return field_on(BoxDomain.cube(64), "helix")


def test_constant_field_all_zero(cube8):
    m = field_on(cube8, "constant")
    assert dirichlet_energy(m, I3) == 0.0
    assert dmi_energy(m, I3) == 0.0
    assert limit_energy(m, I3, I3) == 0.0


def test_helix_dirichlet(helix64):
    assert dirichlet_energy(helix64, I3) == pytest.approx(K**2 / 3, rel=0.01)


def test_linear_identity_dirichlet(cube8):
    m = build_field(cube8, {"family": "linear", "A": np.eye(3).tolist()})
    assert dirichlet_energy(m, I3) == pytest.approx(1.0, rel=1e-12)
    assert dirichlet_energy(m, np.eye(3) / 2) == pytest.approx(1.5, rel=1e-12)


def test_helix_dmi_and_handedness(helix64):
    assert dmi_energy(helix64, I3) == pytest.approx(-K / 3, rel=0.01)
    flipped = build_field(helix64.domain, {"family": "helix", "k": -K})
    assert dmi_energy(flipped, I3) == pytest.approx(-dmi_energy(helix64, I3), rel=1e-12)


def test_helix_bulk_dmi(helix64):
    assert bulk_dmi_energy(helix64, 1.0) == pytest.approx(-K, rel=0.01)
    assert bulk_dmi_energy(helix64, 0.0) == 0.0


@pytest.mark.parametrize("name", sorted(FIELD_SPECS))
@pytest.mark.parametrize("gamma", [1.0, -0.4, 2.5])
def test_bulk_equals_trace_form(cube8, name, gamma):
    m = field_on(cube8, name)
    a = bulk_dmi_energy(m, gamma)
    b = dmi_energy(m, gamma * np.eye(3))
    assert abs(a - b) <= 1e-10 * max(1.0, abs(b))


def test_helix_limit_energy(helix64):
    assert limit_energy(helix64, I3, I3) == pytest.approx(K**2 / 3 - K / 3, rel=0.01)


def test_zero_anisotropy_gives_pure_dmi(cube8):
    m = field_on(cube8, "skyrmion_bubble")
    assert limit_energy(m, np.zeros((3, 3)), I3) == dmi_energy(m, I3)


@pytest.mark.parametrize("name", sorted(FIELD_SPECS))
def test_dmi_cauchy_schwarz(cube8, name):
    m = field_on(cube8, name)
    bound = 3.0 * math.sqrt(l2_norm_sq(m) * h1_seminorm_sq(m))
    assert abs(dmi_energy(m, I3)) <= bound + 1e-14
    assert dmi_energy(m, I3) == pytest.approx(dmi_energy(-m, I3), rel=1e-12, abs=1e-15)


def test_matrix_types_validate():
    with pytest.raises(InputError):
        DzyaloshinskiiMatrix(np.eye(3) * 1.1)
    assert DzyaloshinskiiMatrix(np.eye(3)).column(1).tolist() == [0.0, 1.0, 0.0]
    with pytest.raises(InputError, match="symmetric"):
        AnisotropyMatrix(np.triu(np.ones((3, 3))) / 3)
    with pytest.raises(InputError, match="semidefinite"):
        AnisotropyMatrix(np.diag([1.5, 0.5, -1.0]))
    with pytest.raises(InputError, match="trace"):
        AnisotropyMatrix(np.eye(3) / 2)
    AnisotropyMatrix(I3)
    with pytest.raises(InputError, match="symmetric"):
        coefficient_matrix([[0, 1, 0], [0, 0, 0], [0, 0, 0]])
    with pytest.raises(InputError):
        dirichlet_energy(field_on(BoxDomain.cube(4), "helix"), np.eye(2))


def test_local_csv(tmp_path, cube8):
    m = field_on(cube8, "helix")
    path = tmp_path / "local.csv"
    write_local_csv([("dirichlet", dirichlet_energy(m, I3), {"A": I3.tolist()}),
                     ("bulk_dmi", bulk_dmi_energy(m, 1.0), {"gamma": 1.0})], path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["energy", "value", "parameters"]
    assert json.loads(rows[2][2]) == {"gamma": 1.0}
    float(rows[1][1])
