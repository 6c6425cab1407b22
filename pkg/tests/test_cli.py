import json
import shutil
from pathlib import Path

import pytest

from warpdecay.cli import ENV_OUT, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", str(CONFIGS / cfg), "--out", str(out), *extra])


def test_construct_prop12(tmp_path):
    assert run("construct", "prop12_construct.toml", tmp_path) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["a0"] == 1.5
    assert (tmp_path / "profile.toml").read_text().startswith('kind = "rotsym"')


def test_construct_prop13(tmp_path):
    assert run("construct", "prop13_construct.toml", tmp_path) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["R1"] == pytest.approx(1.8138, abs=1e-4)
    assert m["exponents"] == {"growing": pytest.approx(0.5), "decaying": pytest.approx(1.5)}


def test_construct_remark61_and_reload(tmp_path):
    assert run("construct", "remark61_construct.toml", tmp_path) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["mean_curvature_max_err"] < 1e-12
    cfg = tmp_path / "from_file.toml"
    cfg.write_text('[profile]\npath = "profile.toml"\n[rayleigh]\nR = 50.0\nc = 2.0\nk_start = 4.0\nk_max = 64.0\n')
    # the sweep stops before turning negative: numerical failure status
    assert main(["rayleigh", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 3


def test_verify_prop12_case_i(tmp_path):
    assert run("verify", "verify_prop12_i.toml", tmp_path) == 0
    rows = (tmp_path / "report.csv").read_text().splitlines()
    assert rows[2] == "r,u,bound,ratio"
    ratios = [float(x.split(",")[3]) for x in rows[3:]]
    assert max(ratios) <= 1 + 1e-9
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["verdict"] == "pass"
    assert rep["fit"]["gamma"] == pytest.approx(1.5, abs=1e-6)


def test_verify_lower_bound(tmp_path):
    assert run("verify", "verify_prop12_thm12.toml", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["direction"] == "lower"


def test_verify_growing_end(tmp_path):
    assert run("verify", "verify_prop13_thm13.toml", tmp_path, "--rmax", "60", "--tol", "1e-10") == 4
    # span larger than rmax is a configuration error; the stored config itself passes
    assert run("verify", "verify_prop13_thm13.toml", tmp_path) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["fit"]["gamma"] == pytest.approx(-0.5, abs=1e-6)


def test_verify_hypothesis_violation(tmp_path):
    text = (CONFIGS / "verify_prop12_i.toml").read_text()
    bad = tmp_path / "bad.toml"
    bad.write_text(text.replace('variant = "i"', 'variant = "x"').replace("beta1 = 1.2", "theta = 0.5\neps = 0.1"))
    assert main(["verify", "--config", str(bad), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("body", [
    "[run]\nbogus = 1\n",
    "[nonsense]\n",
    "[run]\ntol = -1.0\n[profile]\nconstructor = \"prop12\"\n",
    "[profile]\nconstructor = \"prop12\"\nlambda0 = 2.0\n",
    "[profile]\nconstructor = \"prop12\"\ncolor = 2\n",
    "not toml at all [",
])
def test_config_errors(tmp_path, body):
    cfg = tmp_path / "c.toml"
    cfg.write_text(body)
    assert main(["construct", "--config", str(cfg), "--out", str(tmp_path)]) == 4


def test_spectrum_prop12(tmp_path):
    assert run("spectrum", "spectrum_prop12.toml", tmp_path) == 0
    s = json.loads((tmp_path / "spectrum.json").read_text())
    assert s["ess_bottom"] == 1.0
    assert s["discrete"] == [pytest.approx(0.75, abs=1e-8)]
    assert (tmp_path / "ground_state.csv").exists()


def test_spectrum_counts(tmp_path):
    assert run("spectrum", "spectrum_remark61.toml", tmp_path) == 0
    s = json.loads((tmp_path / "spectrum.json").read_text())
    assert s["counts"]["increasing"]


def test_rayleigh_sweep(tmp_path):
    assert run("rayleigh", "rayleigh_remark61.toml", tmp_path) == 0
    s = json.loads((tmp_path / "rayleigh.json").read_text())
    assert s["k_star"] == 2.0 ** 18
    lines = (tmp_path / "rayleigh.csv").read_text().splitlines()
    assert lines[2] == "k,value,majorant"


def test_decay_fit(tmp_path):
    assert run("decay-fit", "decayfit_prop12.toml", tmp_path) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["gamma"] == pytest.approx(1.5, abs=1e-8)


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("verify", "verify_prop12_i.toml", a) == 0
    assert run("verify", "verify_prop12_i.toml", b) == 0
    for name in ("report.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_environment_overrides_output_dir(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    shutil.copy(CONFIGS / "prop12_construct.toml", cfg)
    monkeypatch.setenv(ENV_OUT, str(tmp_path / "env"))
    assert main(["construct", "--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()
    assert main(["construct", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "manifest.json").exists()


def test_missing_command_exits_with_usage():
    with pytest.raises(SystemExit):
        main([])
