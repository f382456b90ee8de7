import hashlib
import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from bhlab.cli import ConfigError, load_config, validate_config
from bhlab.cli.artifacts import OutputDir, OutputError, csv_text
from bhlab.cli.config import config_hash
from bhlab.cli.main import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SOLVE = (CONFIGS / "solve_heat.toml").read_text()
BARRIER_FAIL = (CONFIGS / "barrier_exp.toml").read_text().replace('parameter = "calibrate"', "parameter = 2")


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _manifest(d):
    return json.loads((Path(d) / "manifest.json").read_text())


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    assert isinstance(load_config(path), dict)


def test_solve_manifest_covers_every_file(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--config", _write(tmp_path, SOLVE), "--out", str(out)]) == 0
    man = _manifest(out)
    listed = {f["name"]: f for f in man["files"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(listed) == on_disk
    for name, f in listed.items():
        data = (out / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"] and len(data) == f["bytes"]
    assert man["status"] == "pass" and man["exit_code"] == 0 and "timings" not in man
    assert (out / "solve.csv").read_text().startswith("# bhlab-csv v1 ")


def test_rerun_is_byte_identical_and_thread_cap_free(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SOLVE)
    monkeypatch.delenv("BHLAB_THREADS", raising=False)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert os.environ["OMP_NUM_THREADS"] == "1"
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_timings_are_opt_in(tmp_path):
    out = tmp_path / "t"
    assert main(["solve", "--config", _write(tmp_path, SOLVE), "--out", str(out), "--timings"]) == 0
    assert set(_manifest(out)["timings"]) == {"compute", "total"}


def test_seed_override_changes_hash(tmp_path):
    cfg = _write(tmp_path, SOLVE)
    main(["solve", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["solve", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "9"])
    a, b = _manifest(tmp_path / "a"), _manifest(tmp_path / "b")
    assert b["seed"] == 9 and a["config_sha256"] != b["config_sha256"]


@pytest.mark.parametrize("edit, key", [(("n_saves = 4", "n_saves = 4\ncfll = 0.5"), "grid.cfll"),
                                       (("seed = 0", "seed = 0\nlabl = 'x'"), "labl"),
                                       (("T = 0.1", ""), "grid"),
                                       (('kind = "heat"', 'kind = "wave"'), "operator.kind"),
                                       (("n_saves = 4", "n_saves = -4"), "grid.n_saves")])
def test_schema_errors_exit_2_naming_the_key(tmp_path, capsys, edit, key):
    text = SOLVE.replace(*edit)
    assert text != SOLVE
    out = tmp_path / "o"
    assert main(["solve", "--config", _write(tmp_path, text), "--out", str(out)]) == 2
    assert f"'{key}'" in capsys.readouterr().err
    assert not out.exists()


def test_unreadable_configs_exit_2(tmp_path, capsys):
    assert main(["solve", "--config", _write(tmp_path, "[grid\n"), "--out", str(tmp_path / "o")]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path / "o")]) == 2
    assert "cannot" in capsys.readouterr().err


def test_command_mismatch(tmp_path):
    cfg = _write(tmp_path, 'command = "estimate"\n' + SOLVE)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(ConfigError):
        validate_config({"command": "solve"}, "sweep")


def test_missing_section_is_a_config_error(tmp_path):
    out = tmp_path / "o"
    assert main(["estimate", "--config", _write(tmp_path, SOLVE), "--out", str(out)]) == 2
    assert _manifest(out)["status"] == "config_error"


def test_failing_barrier_exits_1_with_report(tmp_path):
    out = tmp_path / "b"
    assert main(["barrier-verify", "--config", _write(tmp_path, BARRIER_FAIL), "--out", str(out)]) == 1
    man = _manifest(out)
    assert man["status"] == "fail" and {f["name"] for f in man["files"]} == {"margins.csv", "margins.json"}
    rows = (out / "margins.csv").read_text().splitlines()
    assert rows[0] == "# bhlab-csv v1 margins" and "false" in rows[2]


def test_output_dir_policy(tmp_path):
    cfg = _write(tmp_path, SOLVE)
    out = tmp_path / "o"
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 0
    # a directory with a previous manifest is reused; its old artifacts go away
    assert main(["barrier-verify", "--config", _write(tmp_path, BARRIER_FAIL, "b.toml"), "--out", str(out)]) == 1
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "margins.csv", "margins.json"]
    # stray files are never deleted
    (out / "notes.txt").write_text("keep me")
    assert main(["solve", "--config", cfg, "--out", str(out)]) == 2
    assert (out / "notes.txt").read_text() == "keep me"
    other = tmp_path / "other"
    other.mkdir()
    (other / "x").write_text("")
    assert main(["solve", "--config", cfg, "--out", str(other)]) == 2


def test_output_dir_rejects_bad_names(tmp_path):
    d = OutputDir(tmp_path / "o")
    d.prepare()
    for bad in ("manifest.json", "../x", ".hidden"):
        with pytest.raises(OutputError):
            d.write(bad, "x")


def test_bad_thread_cap(tmp_path):
    assert main(["solve", "--config", _write(tmp_path, SOLVE), "--out", str(tmp_path / "o"), "--threads", "0"]) == 2


def test_sweep_p2_matches_heat_row(tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(CONFIGS / "sweep_p.toml"), "--out", str(out)]) == 0
    rows = [r.split(",") for r in (out / "sweep.csv").read_text().splitlines()[2:]]
    est = {r[1]: r[7] for r in rows}
    assert set(est) == {"1.5", "2.0", "3.0", "heat"}
    assert est["2.0"] == est["heat"] and est["1.5"] != est["heat"]


def test_empty_sweep_is_rejected(tmp_path):
    text = (CONFIGS / "sweep_p.toml").read_text().replace("values = [1.5, 2, 3]", "values = []")
    assert main(["sweep", "--config", _write(tmp_path, text), "--out", str(tmp_path / "o")]) == 2


def test_estimate_and_report(tmp_path):
    shutil.copy(CONFIGS / "estimate_backward_harnack.toml", tmp_path / "e.toml")
    assert main(["estimate", "--config", str(tmp_path / "e.toml"), "--out", str(tmp_path / "est")]) == 0
    assert main(["solve", "--config", _write(tmp_path, SOLVE), "--out", str(tmp_path / "sol")]) == 0
    rep = _write(tmp_path, '[report]\ninputs = ["est", "sol"]\n', "rep.toml")
    assert main(["report", "--config", rep, "--out", str(tmp_path / "r")]) == 0
    lines = (tmp_path / "r" / "report.csv").read_text().splitlines()
    assert lines[0] == "# bhlab-csv v1 report"
    assert {ln.split(",")[0] for ln in lines[2:]} == {"est", "sol"}
    bad = _write(tmp_path, '[report]\ninputs = ["nowhere"]\n', "bad.toml")
    assert main(["report", "--config", bad, "--out", str(tmp_path / "r2")]) == 2


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, SOLVE.replace("cfll", "x").replace("n_saves = 4", "n_saves = 4\nbogus = 1"))
    proc = subprocess.run([sys.executable, "-m", "bhlab.cli.main", "solve", "--config", cfg, "--out",
                           str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 2 and "grid.bogus" in proc.stderr


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})


def test_csv_text_header():
    assert csv_text("demo", ["a", "b"], [{"a": 1, "b": 2}]) == "# bhlab-csv v1 demo\na,b\n1,2\n"
