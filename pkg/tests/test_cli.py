import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from nsaudit import runfile
from nsaudit.cli import main
from nsaudit.config import ConfigError, expand, parse
from nsaudit.errors import MalformedRunError

GAUSSIAN = """\
# healthy reference run
problem.kind = gaussian
problem.d = 2
sampler.kind = rejection
ns.nlive = 60
ns.seed = 1
"""


@pytest.fixture
def gaussian_cfg(tmp_path):
    path = tmp_path / "gaussian.cfg"
    path.write_text(GAUSSIAN)
    return path


def _read_report(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "# version=1"
    return list(csv.DictReader(lines[1:]))


def test_config_parse_and_expand():
    entries = parse("problem.kind = shells, mixture\nproblem.d = 2,4\nsampler.kind=slice\n"
                    "sampler.nr = 1, 2d\n")
    configs = expand(entries)
    assert len(configs) == 8
    repeats = {(c.problem.kind, c.problem.dimension, c.settings.sampler.n_r) for c in configs}
    assert ("mixture", 4, 8) in repeats and ("shells", 2, 1) in repeats
    slice_cfg = [c for c in configs if c.settings.sampler.n_r == 1][0]
    assert slice_cfg.efr_or_nr() == slice_cfg.problem.dimension


@pytest.mark.parametrize("text, line, key", [
    ("problem.kind = gaussian\nproblem.d = two\n", 2, "problem.d"),
    ("problem.kind = gaussian\nproblem.d = 2\nns.nlive = 1\n", None, None),
    ("problem.kind = gaussian\nbogus = 1\n", 2, "bogus"),
    ("problem.kind = gaussian\nno equals sign\n", 2, None),
    ("problem.d = 2\n", None, "problem.kind"),
])
def test_config_errors_name_line_and_field(text, line, key):
    with pytest.raises(ConfigError) as info:
        expand(parse(text))
    assert info.value.line == line
    assert info.value.key == key


def test_runfile_round_trip_byte_identical(tmp_path, gaussian_cfg, capsys):
    out = tmp_path / "a.run"
    assert main(["run", str(gaussian_cfg), "--out", str(out)]) == 0
    text = out.read_text()
    assert runfile.dumps(runfile.loads(text)) == text
    parsed = runfile.read(out)
    assert parsed.n_live == 60
    assert len(parsed.death) == parsed.n_iter + 60
    assert parsed.header["problem.kind"] == "gaussian"


def test_runfile_malformed_rows():
    with pytest.raises(MalformedRunError, match="line 3"):
        runfile.loads("# n_live=2\n1 -inf\n2\n")
    with pytest.raises(MalformedRunError, match="line 2"):
        runfile.loads("# n_live=2\n1 abc\n")


def test_run_is_deterministic(tmp_path, gaussian_cfg, capsys):
    a, b = tmp_path / "a.run", tmp_path / "b.run"
    assert main(["run", str(gaussian_cfg), "--seed", "1", "--out", str(a)]) == 0
    assert main(["run", str(gaussian_cfg), "--seed", "1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["run", str(gaussian_cfg), "--seed", "2", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def _fields(line):
    return dict(tok.split("=", 1) for tok in line.split() if "=" in tok)


def test_check_agrees_with_run_and_reconstruction(tmp_path, gaussian_cfg, capsys):
    out = tmp_path / "a.run"
    main(["run", str(gaussian_cfg), "--out", str(out)])
    summary = _fields(capsys.readouterr().out)

    assert main(["check", str(out)]) == 0
    stored = capsys.readouterr().out
    report = dict(line.split("=", 1) for line in stored.splitlines())
    assert report["p"] == summary["p"]
    assert report["rolling_p"] == summary["rolling_p"]
    assert report["n_iter"] == summary["n_iter"]

    # strip the index column and the iteration count, forcing reconstruction
    stripped = tmp_path / "stripped.run"
    lines = []
    for line in out.read_text().splitlines():
        if line.startswith("#"):
            if not line.startswith("# n_iter="):
                lines.append(line)
        else:
            lines.append(" ".join(line.split()[:2]))
    stripped.write_text("\n".join(lines) + "\n")
    assert main(["check", str(stripped)]) == 0
    assert capsys.readouterr().out == stored


def test_check_malformed_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.run"
    bad.write_text("# n_live=2\n1 -inf\n2 -inf\n3 1\n4 7\n")
    assert main(["check", str(bad)]) == 2
    assert "record 3" in capsys.readouterr().err
    assert main(["check", str(tmp_path / "missing.run")]) == 2


def test_check_plateau_warns(tmp_path, capsys):
    cfg = tmp_path / "plateau.cfg"
    cfg.write_text("problem.kind = plateau\nns.nlive = 300\n")
    out = tmp_path / "p.run"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    p = float(_fields(capsys.readouterr().out)["p"])
    assert p < 1e-6
    stripped = tmp_path / "s.run"
    stripped.write_text("# n_live=300\n" + "\n".join(
        " ".join(line.split()[:2]) for line in out.read_text().splitlines()
        if not line.startswith("#")) + "\n")
    assert main(["check", str(stripped)]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    assert float(dict(line.split("=", 1) for line in captured.out.splitlines())["p"]) < 1e-6


def test_run_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem.kind = gaussian\nproblem.d = 2\nsampler.efr = -1\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "x.run")]) == 2
    assert "efr must be positive" in capsys.readouterr().err
    cfg.write_text("problem.kind = gaussian\nproblem.d = x\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "x.run")]) == 2
    assert "line 2, field 'problem.d'" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "x.run")]) == 2
    assert main(["frobnicate"]) == 2


def test_run_stall_writes_partial_file(tmp_path, capsys):
    cfg = tmp_path / "stall.cfg"
    cfg.write_text("problem.kind = rosenbrock\nsampler.max_proposals = 1\nns.nlive = 30\n")
    out = tmp_path / "stall.run"
    assert main(["run", str(cfg), "--out", str(out)]) == 3
    partial = runfile.read(out)
    assert partial.header["terminated_by"] == "sampler_stall"
    assert len(partial.death) == partial.n_iter + 30


def test_batch_two_reps(tmp_path, gaussian_cfg, capsys, monkeypatch):
    monkeypatch.delenv("NSAUDIT_JOBS", raising=False)
    out = tmp_path / "report.csv"
    assert main(["batch", str(gaussian_cfg), "--reps", "2", "--out", str(out),
                 "--jobs", "1"]) == 0
    (row,) = _read_report(out)
    assert row["problem"] == "gaussian" and row["n_runs"] == "2"
    assert float(row["sem_log_z"]) == pytest.approx(float(row["sigma_log_z"]) / math.sqrt(2),
                                                    rel=1e-4)
    assert main(["batch", str(gaussian_cfg), "--reps", "1", "--out", str(out)]) == 2


def test_batch_records_failures_and_continues(tmp_path, capsys):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("problem.kind = rosenbrock\nsampler.max_proposals = 1\nns.nlive = 20\n")
    out = tmp_path / "report.csv"
    assert main(["batch", str(cfg), "--reps", "2", "--out", str(out), "--jobs", "1"]) == 0
    (row,) = _read_report(out)
    assert row["n_failed"] == "2"
    assert "SamplerStall" in row["errors"]


def test_batch_jobs_do_not_change_results(tmp_path, gaussian_cfg, capsys, monkeypatch):
    monkeypatch.delenv("NSAUDIT_JOBS", raising=False)
    serial, parallel = tmp_path / "s.csv", tmp_path / "p.csv"
    main(["batch", str(gaussian_cfg), "--reps", "3", "--out", str(serial), "--jobs", "1"])
    main(["batch", str(gaussian_cfg), "--reps", "3", "--out", str(parallel), "--jobs", "2"])
    assert serial.read_text() == parallel.read_text()


def test_simulate_perfect_single_run(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["simulate-perfect", "--n-live", "20", "--n-iter", "200", "--runs", "1",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "run,perfect_p,discrete_p,continuous_p"
    assert len(lines) == 2
    hist = (tmp_path / "p_hist.csv").read_text().splitlines()
    assert hist[0] == "bin_left,perfect,discrete,continuous"
    assert len(hist) == 21
    assert sum(int(r.split(",")[1]) for r in hist[1:]) == 1


def test_simulate_perfect_reports_comparisons(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["simulate-perfect", "--n-live", "20", "--n-iter", "200", "--runs", "50",
                 "--bins", "5", "--out", str(out), "--jobs", "1"]) == 0
    printed = capsys.readouterr().out
    assert "perfect_vs_discrete" in printed and "continuous_uniformity" in printed
    rows = list(csv.DictReader(out.read_text().splitlines()))
    p = np.array([float(r["perfect_p"]) for r in rows])
    assert np.all((p >= 0) & (p <= 1))


def test_module_entry_point(tmp_path, gaussian_cfg):
    out = tmp_path / "m.run"
    proc = subprocess.run([sys.executable, "-m", "nsaudit", "run", str(gaussian_cfg),
                           "--out", str(out)], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("logZ=")
