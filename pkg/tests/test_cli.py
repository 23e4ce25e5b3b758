import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nlexchange.cli import RunConfig, main
from nlexchange.errors import ConfigError

KID = "ball_abs-ball_linear"
SMALL = {"lower": [0, 0, 0], "sides": [1, 1, 1], "shape": [16, 16, 16]}


def write_config(tmp_path, **entries):
    cfg = {"kernel": {"rho": "ball_abs", "nu": "ball_linear"}, "domain": SMALL,
           "output_dir": str(tmp_path / "out")}
    cfg.update(entries)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def even_nu_table(tmp_path):
    u = np.linspace(-1.0, 1.0, 9)
    pts = np.array(np.meshgrid(u, u, u, indexing="ij")).reshape(3, -1).T
    inside = (np.linalg.norm(pts, axis=1) <= 1.0)[:, None]
    vals = np.where(inside, np.abs(pts) / math.pi, 0.0)
    path = tmp_path / "even_nu.txt"
    np.savetxt(path, np.column_stack([pts, vals]))
    return path


def test_check_prototype_passes(tmp_path):
    cfg = write_config(tmp_path, eps=[0.2, 0.1])
    assert main(["check", "--config", str(cfg)]) == 0
    report = json.loads((tmp_path / "out" / f"hypotheses__kernel__{KID}.json").read_text())
    assert report["all_passed"] is True
    assert "tolerances" in report


def test_check_even_nu_fails_naming_oddness(tmp_path, capsys):
    table = even_nu_table(tmp_path)
    cfg = write_config(tmp_path, eps=[0.2, 0.1], kernel={
        "rho": "ball_abs", "nu": {"profile": "custom", "table": table.name, "antisymmetrize": False},
        "name": "even"})
    assert main(["check", "--config", str(cfg)]) == 1
    assert "H1" in capsys.readouterr().err
    report = json.loads((tmp_path / "out" / "hypotheses__kernel__even.json").read_text())
    assert report["hypotheses"]["H1"]["passed"] is False


def test_malformed_json_and_unknown_keys(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["check", "--config", str(bad)]) == 2
    assert main(["check", "--config", str(write_config(tmp_path, colour="blue"))]) == 2
    assert main(["sweep", "--config", str(write_config(tmp_path, relax={"speed": 1}))]) == 2
    assert main(["check", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["nope", "--config", str(bad)]) == 2


def test_sweep_empty_eps(tmp_path):
    assert main(["sweep", "--config", str(write_config(tmp_path, eps=[]))]) == 2


def test_sweep_below_floor(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["sweep", "--config", str(cfg), "--eps", "0.2,0.05"]) == 3
    assert "0.125" in capsys.readouterr().err


def test_sweep_skyrmion_passes(tmp_path):
    cfg = write_config(tmp_path, eps=[0.25, 0.18, 0.125])
    assert main(["sweep", "--config", str(cfg), "--preset", "skyrmion"]) == 0
    summary = json.loads((tmp_path / "out" / f"sweep__skyrmion_bubble__{KID}.json").read_text())
    assert all(summary["audits"].values())
    assert summary["tolerances"]["recovery"] == 0.07


def test_sweep_coarse_helix_fails_recovery(tmp_path):
    cfg = write_config(tmp_path, eps=[0.25, 0.18, 0.125])
    assert main(["sweep", "--config", str(cfg), "--preset", "helix"]) == 1


def test_sweep_is_byte_identical(tmp_path):
    outs = []
    for run in ("a", "b"):
        cfg = write_config(tmp_path, eps=[0.25, 0.18, 0.125], output_dir=str(tmp_path / run))
        main(["sweep", "--config", str(cfg), "--preset", "skyrmion", "--threads", "1"])
        outs.append((tmp_path / run / f"sweep__skyrmion_bubble__{KID}.csv").read_bytes())
    assert outs[0] == outs[1]
    header = outs[0].decode().splitlines()[0]
    assert header == "eps,f_eps,h_eps,e_eps,cross_term,pairs,seconds"


def test_threads_validation(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["check", "--config", str(cfg), "--threads", "1000000"]) == 2
    assert main(["check", "--config", str(cfg), "--threads", "0"]) == 2


def test_relax_exit_codes(tmp_path):
    cfg = write_config(tmp_path, domain={"lower": [0, 0, 0], "sides": [1, 1, 1], "shape": [6, 6, 6]},
                       relax={"selector": "local"})
    assert main(["relax", "--config", str(cfg), "--preset", "constant"]) == 0
    assert (tmp_path / "out" / "relax__constant__local.csv").exists()
    assert (tmp_path / "out" / "relax__constant__local.field.txt").exists()
    cfg = write_config(tmp_path, domain={"lower": [0, 0, 0], "sides": [1, 1, 1], "shape": [6, 6, 6]},
                       relax={"selector": "local", "D": 0.3333, "max_iter": 0})
    assert main(["relax", "--config", str(cfg), "--preset", "helix"]) == 4
    cfg = write_config(tmp_path, relax={"selector": "nonlocal", "eps": 0.05})
    assert main(["relax", "--config", str(cfg)]) == 3


def test_single_operation_commands(tmp_path, capsys):
    cfg = write_config(tmp_path, eps=[0.25, 0.125])
    assert main(["dzyalo", "--config", str(cfg)]) == 0
    d = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    np.testing.assert_allclose(d, np.eye(3) / 3, atol=1e-12)
    assert main(["anisotropy", "--config", str(cfg)]) == 0
    assert main(["energy", "--config", str(cfg), "--preset", "helix"]) == 0
    lines = (tmp_path / "out" / f"local__helix__{KID}.csv").read_text().splitlines()
    assert lines[0] == "energy,value,parameters"


def test_run_config_roundtrip():
    data = {"kernel": {"rho": "ball_abs"}, "domain": SMALL, "eps": [0.2, 0.1], "threads": 1,
            "tolerances": {"recovery": 0.1}}
    cfg = RunConfig.from_dict(data)
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"tolerances": {"bogus": 1}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict([1, 2])


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, eps=[0.2, 0.1])
    res = subprocess.run([sys.executable, "-m", "nlexchange", "dzyalo", "--config", str(cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
