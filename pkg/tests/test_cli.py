import json
import math

import pytest

from branchkit.cli import main
from branchkit.results import ResultRow, read_rows, write_rows

CERT_CONFIG = """\
seed: 777
experiment:
  kind: certify
  name: det_pair
  coupling:
    mode: wbp
    kind: quantile
    left:  {q: {point: 1.0}, n: {point: 2}, weights: {point: 0.3}}
    right: {q: {point: 1.0}, n: {point: 2}, weights: {point: 0.4}}
  j_max: 6
  replications: 4
"""

SIZEBIAS_CONFIG = """\
seed: 11
experiment:
  kind: sizebias
  name: const_deg
  degree_law: {point: 3}
  eps_moment: 1.0
  grid: [50, 100]
  delta_star: 0.4
  delta: 0.3
  reps: 3
"""

MULTI_CONFIG = """\
seed: 5
threads: 2
experiments:
  - kind: simulate
    name: sim
    sampler: {mode: wbp, q: {point: 1.0}, n: {poisson: 1.2}, weights: {uniform: [0.0, 0.5]}}
    depth: 3
    replications: 500
    eps: 0.01
  - kind: converge
    name: fixed
    experiment: fixed_level
    family:
      type: perturbed
      base: {mode: wbp, q: {point: 1.0}, n: {point: 2}, weights: {point: 0.3}}
      target: weights
      magnitude: 0.1
    grid: [1, 2, 4]
    level: 1
    samples: 32
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestRun:
    def test_certify_run_and_manifest(self, tmp_path):
        cfg = _write(tmp_path, "cert.yaml", CERT_CONFIG)
        out = str(tmp_path / "res.tsv")
        assert main(["run", "--config", cfg, "--out", out]) == 0
        rows = read_rows(out)
        passes = [r for r in rows if r.statistic == "pass"]
        assert len(passes) == 7 and all(r.value == 1.0 for r in passes)
        manifest = json.loads((tmp_path / "res.tsv.manifest.json").read_text())
        assert manifest["seed"] == 777
        assert manifest["rows"] == len(rows)
        assert len(manifest["config_sha256"]) == 64

    def test_byte_identical_reruns(self, tmp_path):
        cfg = _write(tmp_path, "cert.yaml", CERT_CONFIG)
        out1 = str(tmp_path / "a.tsv")
        out2 = str(tmp_path / "b.tsv")
        main(["run", "--config", cfg, "--out", out1])
        main(["run", "--config", cfg, "--out", out2])
        assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()

    def test_seed_override_changes_manifest(self, tmp_path):
        cfg = _write(tmp_path, "cert.yaml", CERT_CONFIG)
        out = str(tmp_path / "res.tsv")
        main(["run", "--config", cfg, "--out", out, "--seed", "31337"])
        manifest = json.loads((tmp_path / "res.tsv.manifest.json").read_text())
        assert manifest["seed"] == 31337

    def test_sizebias_constant_degrees_all_zero(self, tmp_path):
        cfg = _write(tmp_path, "sb.yaml", SIZEBIAS_CONFIG)
        out = str(tmp_path / "sb.tsv")
        assert main(["run", "--config", cfg, "--out", out]) == 0
        rows = [r for r in read_rows(out) if r.statistic.startswith("scaled_d1")]
        assert rows and all(r.value == 0.0 for r in rows)

    def test_multi_experiment_threads(self, tmp_path):
        cfg = _write(tmp_path, "multi.yaml", MULTI_CONFIG)
        out = str(tmp_path / "multi.tsv")
        assert main(["run", "--config", cfg, "--out", out]) == 0
        rows = read_rows(out)
        experiments = {r.experiment for r in rows}
        assert experiments == {"sim", "fixed"}
        # serial rerun produces identical bytes despite the thread pool
        out2 = str(tmp_path / "multi2.tsv")
        assert main(["run", "--config", cfg, "--out", out2, "--threads", "1"]) == 0
        assert (tmp_path / "multi.tsv").read_bytes() == (tmp_path / "multi2.tsv").read_bytes()


class TestManifest:
    def test_hash_tracks_config_content(self, tmp_path):
        cfg1 = _write(tmp_path, "a.yaml", CERT_CONFIG)
        cfg2 = _write(tmp_path, "b.yaml", CERT_CONFIG.replace("j_max: 6", "j_max: 5"))
        out1, out2, out3 = (str(tmp_path / f"{k}.tsv") for k in "xyz")
        main(["run", "--config", cfg1, "--out", out1])
        main(["run", "--config", cfg2, "--out", out2])
        main(["run", "--config", cfg1, "--out", out3])
        h = lambda p: json.loads((tmp_path / (p + ".manifest.json")).read_text())["config_sha256"]
        assert h("x.tsv") != h("y.tsv")
        assert h("x.tsv") == h("z.tsv")


class TestDegreeLawFile:
    def test_sizebias_reads_measure_file(self, tmp_path):
        law = tmp_path / "law.txt"
        law.write_text("1.0 0.5\n2.0 0.5\n")
        text = SIZEBIAS_CONFIG.replace(
            "degree_law: {point: 3}", "degree_law: {file: %s}" % law
        )
        cfg = _write(tmp_path, "sb.yaml", text)
        out = str(tmp_path / "sb.tsv")
        assert main(["run", "--config", cfg, "--out", out]) == 0
        assert any(r.statistic == "scaled_d1_nu_median" for r in read_rows(out))


class TestValidate:
    def test_ok(self, tmp_path):
        cfg = _write(tmp_path, "cert.yaml", CERT_CONFIG)
        assert main(["validate", "--config", cfg]) == 0

    def test_missing_seed(self, tmp_path):
        cfg = _write(tmp_path, "bad.yaml", "experiment: {kind: certify}\n")
        assert main(["validate", "--config", cfg]) == 2

    def test_contraction_violation_named(self, tmp_path, capsys):
        text = """\
seed: 1
experiment:
  kind: converge
  experiment: r_limit
  family:
    type: perturbed
    base: {mode: wbp, q: {point: 1.0}, n: {point: 2}, weights: {point: 0.6}}
    magnitude: 0.1
  grid: [10]
  samples: 16
"""
        cfg = _write(tmp_path, "rho.yaml", text)
        assert main(["validate", "--config", cfg]) == 2
        assert "rho" in capsys.readouterr().err

    def test_premise_warning(self, tmp_path, capsys):
        text = """\
seed: 1
experiment:
  kind: converge
  experiment: scaled_martingale
  family:
    type: perturbed
    base: {mode: wbp, q: {point: 1.0}, n: {point: 2}, weights: {point: 0.5}}
    target: weights
    change: scale
    magnitude: 0.5
  schedule: {kind: linear}
  grid: [10, 100]
  samples: 16
"""
        cfg = _write(tmp_path, "warn.yaml", text)
        assert main(["validate", "--config", cfg]) == 0
        assert "premise" in capsys.readouterr().out

    def test_unknown_field_rejected(self, tmp_path):
        text = CERT_CONFIG.replace("weights:", "weightz:")
        cfg = _write(tmp_path, "typo.yaml", text)
        assert main(["validate", "--config", cfg]) == 2


class TestSummarize:
    def test_summary_and_series(self, tmp_path, capsys):
        cfg = _write(tmp_path, "sb.yaml", SIZEBIAS_CONFIG)
        out = str(tmp_path / "sb.tsv")
        main(["run", "--config", cfg, "--out", out])
        series = tmp_path / "series"
        assert main(["summarize", "--results", out, "--series-dir", str(series)]) == 0
        printed = capsys.readouterr().out
        assert "const_deg" in printed
        files = sorted(p.name for p in series.iterdir())
        assert any("scaled_d1_nu" in f for f in files)

    def test_empty_file(self, tmp_path, capsys):
        path = tmp_path / "empty.tsv"
        write_rows(path, [])
        assert main(["summarize", "--results", str(path)]) == 0
        assert "no rows" in capsys.readouterr().out

    def test_malformed_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("experiment\tstatistic\tn\trep\tlevel\tvalue\tse\tnote\nonly\ttwo\n")
        with pytest.raises(ValueError, match="malformed"):
            read_rows(str(path))


class TestResultRows:
    def test_round_trip(self, tmp_path):
        rows = [
            ResultRow("e", "stat", 1.5, n=10, rep=None, level=2, se=0.25, note="x"),
            ResultRow("e", "stat", math.pi, n=None),
        ]
        path = tmp_path / "r.tsv"
        write_rows(path, rows)
        again = read_rows(str(path))
        assert sorted(again, key=lambda r: (r.statistic, r.value)) == sorted(
            rows, key=lambda r: (r.statistic, r.value)
        )
