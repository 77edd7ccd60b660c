import csv
import filecmp
import json
from pathlib import Path

import pytest

from pilotwave_sg import cli
from pilotwave_sg.ensemble import compare_to_born as real_compare

CONFIGS = Path(__file__).parent.parent / "configs"


def run(*args):
    return cli.main([str(a) for a in args])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fig2_trajectories(tmp_path):
    assert run("run", CONFIGS / "fig2.toml", "--out", tmp_path) == 0
    table = rows(tmp_path / "trajectories.csv")
    assert table[0] == ["traj_id", "t", "y", "z", "region", "branch"]
    branches = {r[0]: r[5] for r in table[1:]}
    assert len(branches) == 9
    assert sorted(branches.values()).count("upper") == 6
    assert (tmp_path / "trajectories.svg").read_text().count("<polyline") == 10
    # floats are written with 17 significant digits
    assert all(format(float(r[i]), ".17g") == r[i] for r in table[1:] for i in (1, 2, 3))


def test_fig4_summary(tmp_path):
    assert run("run", CONFIGS / "fig4.toml", "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"seed", "n_total", "n_discarded", "outcomes"}
    assert summary["n_total"] == 100_000
    for row in summary["outcomes"]:
        assert set(row) == {"labels", "count", "freq", "predicted", "z"}
        assert row["labels"][:2] == ["+z", "+x"] and abs(row["z"]) <= 4


def test_epr_alice_flip(tmp_path):
    present, absent = tmp_path / "present", tmp_path / "absent"
    assert run("run", CONFIGS / "epr.toml", "--out", present, "--alice=present") == 0
    assert run("run", CONFIGS / "epr.toml", "--out", absent, "--alice=absent") == 0
    a = json.loads((present / "summary.json").read_text())["scenario"]
    b = json.loads((absent / "summary.json").read_text())["scenario"]
    assert (a["outcome1"], a["outcome2"]) == ("+z", "-z")
    assert (b["outcome1"], b["outcome2"]) == (None, "+z")


def test_sweep_command(tmp_path):
    assert run("sweep", CONFIGS / "sweep.toml", "--out", tmp_path, "--n", 2000) == 0
    table = rows(tmp_path / "sweep.csv")
    assert table[0] == ["theta1", "theta2", "n", "E", "stderr"]
    assert len(table) == 1 + 2 * 6


def test_per_particle_csv(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'kind = "single"\nper_particle = true\nn = 50\nout = "{tmp_path / "o"}"\n[input]\nspinor = "+x"\n')
    assert run("run", cfg) == 0
    table = rows(tmp_path / "o" / "particles.csv")
    assert table[0] == ["particle_id", "z0", "stage0", "discarded_at"] and len(table) == 51


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_byte_determinism(tmp_path, name):
    args = ["--n", 3000] if name != "fig2.toml" else []
    assert run("run", CONFIGS / name, "--out", tmp_path / "a", *args) == 0
    assert run("run", CONFIGS / name, "--out", tmp_path / "b", *args) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files, shallow=False)
    assert mismatch == [] and errors == []


def test_seed_override_changes_output(tmp_path):
    run("run", CONFIGS / "born.toml", "--out", tmp_path / "a", "--n", 1000)
    run("run", CONFIGS / "born.toml", "--out", tmp_path / "b", "--n", 1000, "--seed", 7)
    assert (tmp_path / "a" / "summary.json").read_bytes() != (tmp_path / "b" / "summary.json").read_bytes()


def test_validate(capsys):
    assert run("validate", CONFIGS / "fig4.toml") == 0
    assert "ok" in capsys.readouterr().out


class TestExitCodes:
    def test_missing_file(self, tmp_path):
        assert run("run", tmp_path / "nope.toml") == 1

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("kind = \n")
        assert run("validate", bad) == 1
        assert "line 1" in capsys.readouterr().err

    def test_validation_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text('kind = "single"\n[input]\nspinor = "+z"\n[device]\nkappa = 200.0\n')
        assert run("run", bad) == 1
        assert "kappa must be < k" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [[], ["launch", "x"], ["run"], ["run", "fig4.toml", "--n", "zero"], ["run", "fig4.toml", "--alice", "maybe"]],
    )
    def test_usage_errors(self, argv):
        assert cli.main(argv) == 1

    def test_bad_override_values(self, tmp_path):
        assert run("run", CONFIGS / "born.toml", "--out", tmp_path, "--n", 0) == 1
        assert run("run", CONFIGS / "born.toml", "--out", tmp_path, "--alice", "absent") == 1

    def test_sweep_without_grid(self, tmp_path):
        assert run("sweep", CONFIGS / "fig4.toml", "--out", tmp_path) == 1

    def test_born_failure(self, tmp_path, monkeypatch):
        from pilotwave_sg.apparatus import OutcomeLabel
        from pilotwave_sg.spinor import Z_AXIS

        wrong = {(OutcomeLabel(Z_AXIS, 1),): 0.5, (OutcomeLabel(Z_AXIS, -1),): 0.5}
        monkeypatch.setattr(cli, "compare_to_born", lambda stats, chain: real_compare(stats, chain, wrong))
        assert run("run", CONFIGS / "born.toml", "--out", tmp_path) == 2
        assert (tmp_path / "summary.json").exists()

    def test_sweep_failure(self, tmp_path, monkeypatch):
        monkeypatch.setattr(cli, "quantum_correlation", lambda *args: 0.9)
        assert run("sweep", CONFIGS / "sweep.toml", "--out", tmp_path, "--n", 2000) == 2
