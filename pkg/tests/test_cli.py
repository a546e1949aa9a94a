import csv
import json
import textwrap
from pathlib import Path

import pytest

from vanhove import cli, suites

SMALL = """
name = "{name}"
variant = "{variant}"
output = "runs"
seed = 3

[spectral]
n_points = 256

[reservoir]
beta = 1.0
bumps = [[0.3, 1.5, 0.3]]
xi = {{ center = 1.2, width = 0.3, amplitude = 0.3 }}

[system]
alpha = [0.5, 0.2]
n0 = 1.0

[probes]
bumps = [[1.0, 0.4]]

[time]
t_max = 10.0
dt = 0.025

[run]
{run}
"""


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.mark.parametrize("variant", ["RWA", "CR"])
def test_single_run(workdir, variant, capsys):
    cfg = _write(workdir, SMALL.format(name="one", variant=variant,
                                       run='mode = "single"\nlambda = 0.2\ntimes = [0.0, 5.0, 10.0]\nrandom_probes = 4'))
    assert cli.main(["run", cfg]) == 0
    out = workdir / "runs" / "one"
    assert capsys.readouterr().out.strip() == str(Path("runs") / "one")
    with open(out / "occupation.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "occupation", "re_coherence", "im_coherence"]
    assert float(rows[1][1]) == pytest.approx(1 + 0.29)
    man = json.loads((out / "manifest.json").read_text())
    assert man["mode"] == "single" and "occupation.csv" in man["files"]
    for f in man["files"]:
        assert (out / f).exists()


def test_free_and_prototype_runs(workdir):
    free = _write(workdir, SMALL.format(name="free", variant="RWA", run='mode = "free"'), "free.toml")
    assert cli.main(["run", free]) == 0
    summary = json.loads((workdir / "runs" / "free" / "summary.json").read_text())
    assert summary
    proto = _write(workdir, SMALL.format(name="proto", variant="RWA",
                                         run='mode = "prototypes"\nlambdas = [0.4]\nkinds = ["i", "ii"]\nn_tau = 4\ntau_max = 2.0'),
                   "proto.toml")
    assert cli.main(["run", proto]) == 0


def test_vanhove_run(workdir):
    cfg = _write(workdir, SMALL.format(name="vh", variant="RWA",
                                       run='mode = "vanhove"\nlambdas = [0.4, 0.3]\nn_tau = 4\ntau_max = 2.0\nquantities = ["A_aa", "h_a"]'))
    assert cli.main(["run", cfg]) == 0
    with open(workdir / "runs" / "vh" / "convergence.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["quantity", "lambda", "tau", "error"]
    assert len(rows) == 1 + 2 * 2 * 4


def test_parse_errors(workdir, capsys):
    assert cli.main(["run", _write(workdir, 'name = "x"\n[spectral\n')]) == cli.EXIT_PARSE
    assert cli.main(["run", str(workdir / "missing.toml")]) == cli.EXIT_PARSE
    bad = SMALL.format(name="b", variant="RWA", run='mode = "single"\nlambda = 0.2').replace("n0 = 1.0", 'n0 = "one"')
    assert cli.main(["run", _write(workdir, bad)]) == cli.EXIT_PARSE
    err = capsys.readouterr().err
    assert "system.n0" in err and "line" in err
    extra = SMALL.format(name="b", variant="RWA", run='mode = "single"\nlambda = 0.2\nbogus = 1')
    assert cli.main(["run", _write(workdir, extra)]) == cli.EXIT_PARSE


@pytest.mark.parametrize("change", [
    ("beta = 1.0", "W = -1.0"),
    ('variant = "RWA"', 'variant = "XY"'),
    ("amplitude = 0.3", "amplitude = 3.0"),  # correlated state not positive
    ('mode = "single"', 'mode = "nope"'),
])
def test_validation_errors(workdir, change, capsys):
    text = SMALL.format(name="v", variant="RWA", run='mode = "single"\nlambda = 0.2').replace(*change)
    assert cli.main(["run", _write(workdir, text)]) == cli.EXIT_INVALID
    assert "validation error" in capsys.readouterr().err


def test_resource_error(workdir, capsys):
    cfg = _write(workdir, SMALL.format(name="r", variant="RWA",
                                       run='mode = "vanhove"\nlambdas = [0.4, 0.01]\nmax_steps = 1000'))
    assert cli.main(["run", cfg]) == cli.EXIT_RESOURCE
    assert "resource error" in capsys.readouterr().err


def test_verify_and_list(monkeypatch, capsys):
    fake = {
        "good": lambda: suites.CriterionResult("x", "always", True, "ok", {}),
        "bad": lambda: suites.CriterionResult("y", "never", False, "no", {}),
    }
    monkeypatch.setattr(suites, "SUITES", fake)
    assert cli.main(["verify", "good"]) == 0
    assert "[PASS] x always: ok" in capsys.readouterr().out
    assert cli.main(["verify", "all"]) == cli.EXIT_FAIL
    assert cli.main(["verify", "missing"]) == cli.EXIT_PARSE
    assert cli.main(["list-suites"]) == 0
    assert "good" in capsys.readouterr().out


def test_shipped_configs_parse():
    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.toml")):
        cfg = cli.load_config(str(p))
        assert cfg["run"]["mode"] in cli.MODES
