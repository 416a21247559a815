import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from focklat.cli import SUBCOMMANDS, RunConfig, UsageError, parse_photons, run

GOLDEN = Path(__file__).parent / "golden"

CASES = {
    "bands_stub.csv": ["bands", "--lattice", "stub"],
    "state_stub_2.csv": ["state", "--lattice", "stub", "--photons", "2"],
    "verify_kagome_4.csv": ["verify", "--lattice", "kagome", "--photons", "4"],
    "evolve_rhomboidal_2.csv": ["evolve", "--lattice", "rhomboidal", "--photons", "2", "--zsteps", "11"],
    "prepare_stub_5.csv": ["prepare", "--lattice", "stub", "--photons", "5"],
    "entangle_rhomboidal.csv": ["entangle", "--lattice", "rhomboidal", "--photons", "1..12"],
    "monogamy.csv": ["monogamy", "--photons", "1..6"],
    "loss_encode.json": ["loss", "--photons", "3", "--gamma", "0.2", "--encode", "N=1,M=1", "--format", "json"],
    "mcf_four.csv": ["mcf", "--photons", "2", "--zsteps", "21"],
}


def _numbers_close(a: str, b: str) -> bool:
    try:
        x, y = float(a), float(b)
    except ValueError:
        return a == b
    return abs(x - y) <= 1e-12 + 1e-9 * abs(y)


def _json_close(a, b) -> bool:
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(_json_close(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(_json_close(x, y) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return abs(a - b) <= 1e-12 + 1e-9 * abs(b)
    return a == b


def _run_to(tmp_path, name, argv):
    out = tmp_path / name
    assert run(argv + ["--out", str(out)]) == 0
    return out.read_text()


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden(tmp_path, name):
    got = _run_to(tmp_path, name, CASES[name])
    want = (GOLDEN / name).read_text()
    if name.endswith(".json"):
        assert _json_close(json.loads(got), json.loads(want))
        return
    got_rows = list(csv.reader(io.StringIO(got)))
    want_rows = list(csv.reader(io.StringIO(want)))
    assert got_rows[0] == want_rows[0]
    assert len(got_rows) == len(want_rows)
    for g, w in zip(got_rows[1:], want_rows[1:]):
        assert len(g) == len(w)
        assert all(_numbers_close(a, b) for a, b in zip(g, w)), (g, w)


@pytest.mark.parametrize("name", ["entangle_rhomboidal.csv", "monogamy.csv", "prepare_stub_5.csv"])
def test_repeat_runs_are_byte_identical(tmp_path, name):
    assert _run_to(tmp_path, "a", CASES[name]) == _run_to(tmp_path, "b", CASES[name])


def test_thread_cap_does_not_change_output(tmp_path, monkeypatch):
    argv = CASES["entangle_rhomboidal.csv"]
    serial = _run_to(tmp_path, "a", argv)
    monkeypatch.setenv("FOCKLAT_THREADS", "4")
    assert _run_to(tmp_path, "b", argv) == serial


def test_seeded_sampler_output_is_reproducible(tmp_path):
    argv = ["monogamy", "--photons", "1..2", "--samples", "10", "--seed", "3"]
    a, b = _run_to(tmp_path, "a", argv), _run_to(tmp_path, "b", argv)
    assert a == b
    assert a.splitlines()[0].endswith("sampled_min,sampled_max")


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help(sub, capsys):
    assert run([sub, "--help"]) == 0
    text = capsys.readouterr().out
    assert "usage:" in text and "--photons" in text


def test_entangle_rows():
    rows = list(csv.reader(io.StringIO((GOLDEN / "entangle_rhomboidal.csv").read_text())))
    assert rows[0] == ["N", "negativity", "concurrence", "ph_min_eig"]
    assert len(rows) == 13


def test_prepare_peak_position(tmp_path):
    text = _run_to(tmp_path, "p.json", ["prepare", "--lattice", "stub", "--photons", "5", "--format", "json"])
    data = json.loads(text)
    assert data["coupling_length"] == pytest.approx(0.906899682, abs=1e-6)


def test_verify_failure_names_invariant(capsys, tmp_path):
    code = run(["verify", "--lattice", "stub", "--photons", "2", "--sign-free", "--out", str(tmp_path / "v.csv")])
    assert code == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "verification"
    assert record["invariant"] == "connector_annihilation"


@pytest.mark.parametrize(
    "argv",
    [
        ["entangle", "--photons", "x"],
        ["entangle", "--photons", "5..2"],
        ["bands", "--kappa", "-1"],
        ["loss", "--gamma", "1.5"],
        ["evolve", "--zsteps", "1"],
        ["loss", "--encode", "N=1"],
        ["bands", "--lattice", "square"],
        ["frobnicate"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert run(argv) == 2


def test_usage_error_record_is_json(capsys):
    run(["entangle", "--photons", "x"])
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"] == "usage"


def test_config_file_with_override(tmp_path):
    cfg = RunConfig("entangle", photons=[1, 2, 3])
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    out = _run_to(tmp_path, "o.csv", ["entangle", "--config", str(path), "--photons", "1..2"])
    assert len(out.splitlines()) == 3


def test_config_roundtrip():
    cfg = RunConfig("loss", lattice="stub", photons=[1, 2], gamma=0.3, encode="N=1,M=2", seed=7)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(UsageError):
        RunConfig.from_json('{"subcommand": "bands", "colour": 3}')


def test_parse_photons():
    assert parse_photons("3") == [3]
    assert parse_photons("1..4") == [1, 2, 3, 4]
    assert parse_photons("1,5") == [1, 5]


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "focklat", "entangle", "--photons", "1..2"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert proc.stdout.splitlines()[1].startswith("1,1,1,")


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for name, argv in CASES.items():
        run(argv + ["--out", str(GOLDEN / name)])
