import csv
import hashlib
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackrate.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main
from crackrate.config import (ConfigError, ScenarioConfig, dump_config, load_config, schema,
                              validate)

ROOT = Path(__file__).resolve().parents[1]


def errors(cfg):
    return [d for d in validate(cfg) if d.severity == "error"]


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


# configuration ---------------------------------------------------------------


def test_defaults_are_valid():
    assert errors(ScenarioConfig()) == []
    assert errors(load_config(ROOT / "configs" / "acceptance.toml")) == []


def test_empty_file_is_the_default(tmp_path):
    cfg = load_config(write(tmp_path, "c.toml", ""))
    assert cfg == ScenarioConfig()


finite = st.floats(0.1, 10.0, allow_nan=False)


@given(finite, finite, st.floats(0.005, 0.2), st.sampled_from(["zero", "rigid", "singular"]),
       st.integers(0, 2 ** 31), st.booleans())
@settings(max_examples=30, deadline=None)
def test_round_trip(lam, mu, h, kind, seed, as_json):
    cfg = ScenarioConfig.from_dict({"material": {"lam": lam, "mu": mu}, "mesh": {"h": h},
                                    "boundary": {"kind": kind}, "seed": seed})
    with tempfile.TemporaryDirectory() as d:
        p = Path(d) / ("c.json" if as_json else "c.toml")
        dump_config(cfg, p)
        back = load_config(p)
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_digest_changes_with_content():
    a = ScenarioConfig()
    b = ScenarioConfig.from_dict({"mesh": {"h": 0.03}})
    assert a.digest() != b.digest()
    assert a.digest() == ScenarioConfig().digest()


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, "c.toml", "[mesh]\nsize = 0.1\n"))
    assert exc.value.field == "mesh.size"
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "d.toml", "colour = 'red'\n"))
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "e.toml", "[mesh\n"))


def test_annulus_outside_unit_ball():
    errs = errors(ScenarioConfig.from_dict({"blowup": {"annulus": [0.5, 1.5]}}))
    assert len(errs) == 1 and errs[0].field == "blowup.annulus"


def test_increment_outside_forcing_ball():
    errs = errors(ScenarioConfig.from_dict({"limit": {"increment": [[[0.0, 0.0], [3.0, 0.0]]]}}))
    assert len(errs) == 1 and errs[0].field == "limit.increment"


@pytest.mark.parametrize("data,field", [
    ({"material": {"mu": 0.0}}, "material.mu"),
    ({"mesh": {"h": -0.1}}, "mesh.h"),
    ({"mesh": {"grading": 1.5}}, "mesh.grading"),
    ({"boundary": {"kind": "pressure"}}, "boundary.kind"),
    ({"boundary": {"convention": "degrees"}}, "boundary.convention"),
    ({"airy": {"radii": [0.1, 0.15]}}, "airy.radii"),
    ({"blowup": {"eps": [0.1, 0.2]}}, "blowup.eps"),
    ({"err": {"eps": [0.6]}}, "err.eps"),
    ({"limit": {"R_out": 4.0}}, "limit.R_out"),
    ({"spectrum": {"interval": [2.0, 1.0]}}, "spectrum.interval"),
])
def test_validation_names_the_field(data, field):
    errs = errors(ScenarioConfig.from_dict(data))
    assert [d.field for d in errs] == [field]


def test_clipped_crack_is_a_warning():
    diags = validate(ScenarioConfig.from_dict({"crack": {"chains": [[[0.0, 0.0], [-2.0, 0.0]]]}}))
    assert [d.severity for d in diags] == ["warning"]


def test_schema_matches_committed_file():
    committed = json.loads((ROOT / "configs" / "schema.json").read_text())
    assert committed == json.loads(json.dumps(schema()))


# command line ----------------------------------------------------------------


def run_cli(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_command(tmp_path, capsys):
    good = write(tmp_path, "g.toml", "")
    code, out, _ = run_cli(["validate", "--config", str(good)], capsys)
    assert code == EXIT_OK and json.loads(out)["valid"] is True
    bad = write(tmp_path, "b.toml", "[blowup]\nannulus = [0.5, 1.5]\n")
    code, out, _ = run_cli(["validate", "--config", str(bad)], capsys)
    report = json.loads(out)
    assert code == EXIT_CONFIG and report["valid"] is False
    assert [d["field"] for d in report["diagnostics"]] == ["blowup.annulus"]


def test_config_error_exit(tmp_path, capsys):
    bad = write(tmp_path, "b.toml", "[mesh]\nh = -1.0\n")
    code, _, err = run_cli(["run", "solve", "--config", str(bad), "--out", str(tmp_path / "o")],
                           capsys)
    assert code == EXIT_CONFIG == 2
    msg = json.loads(err)
    assert msg["kind"] == "config" and msg["diagnostics"][0]["field"] == "mesh.h"
    code, _, _ = run_cli(["solve", "--config", str(write(tmp_path, "u.toml", "x = 1\n"))], capsys)
    assert code == EXIT_CONFIG


def test_numerical_error_exit(tmp_path, capsys):
    cfg = {"boundary": {"kind": "table", "angles": [0.0, 3.0],
                        "values": [[float("inf"), 0.0], [0.0, 0.0]]}, "mesh": {"h": 0.2}}
    p = tmp_path / "inf.json"
    p.write_text(json.dumps(cfg))
    code, _, err = run_cli(["solve", "--config", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code == EXIT_NUMERICAL == 3
    assert json.loads(err)["kind"] == "numerical"


def test_io_error_exit(tmp_path, capsys):
    code, _, err = run_cli(["solve", "--config", str(tmp_path / "missing.toml")], capsys)
    assert code == EXIT_IO == 4
    blocker = write(tmp_path, "blocker", "")
    good = write(tmp_path, "g.toml", "[mesh]\nh = 0.2\n")
    code, _, _ = run_cli(["spectrum", "--config", str(good), "--out", str(blocker / "sub")], capsys)
    assert code == EXIT_IO


def test_zero_data_solve(tmp_path, capsys):
    cfg = write(tmp_path, "z.toml", "[boundary]\nkind = 'zero'\n[mesh]\nh = 0.1\n")
    out = tmp_path / "o"
    code, stdout, _ = run_cli(["run", "solve", "--config", str(cfg), "--out", str(out)], capsys)
    assert code == EXIT_OK and json.loads(stdout)["status"] == "ok"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["results"]["solve"]["energy"] == 0.0
    assert manifest["config_sha256"] == load_config(cfg).digest()
    for entry in manifest["files"]:
        data = (out / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
        assert len(data) == entry["bytes"]
    assert {e["path"] for e in manifest["files"]} == {"solve.json", "solution.vtk"}
    assert {"crackrate", "numpy", "scipy"} <= set(manifest["versions"])


def test_spectrum_command(tmp_path, capsys):
    cfg = write(tmp_path, "s.toml", "")
    out = tmp_path / "o"
    code, _, _ = run_cli(["spectrum", "--config", str(cfg), "--out", str(out)], capsys)
    assert code == EXIT_OK
    with open(out / "spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    lams = [float(r["lambda"]) for r in rows]
    np.testing.assert_allclose(lams, [0.5, 1.5, 2.0, 2.5, 3.0, 3.5], atol=1e-8)
    assert [int(r["multiplicity"]) for r in rows] == [2, 2, 1, 2, 2, 2]
    golden = Path(__file__).parent / "golden"
    assert (out / "audit.txt").read_text() == (golden / "mode_audit.txt").read_text()
    assert (out / "audit.json").read_text() == (golden / "mode_audit.json").read_text()


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "g.toml", "")
    res = subprocess.run([sys.executable, "-m", "crackrate", "validate", "--config", str(cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["valid"] is True
