import csv
import io
import json
import subprocess
import sys
from contextlib import redirect_stdout

import pytest

from isingqec.cli import EXIT_CAPACITY, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, OUTPUT_DIR_ENV, UsageError, load_config, main
from isingqec.hamiltonian import parse_qubo
from isingqec.harness import effective_distance
from isingqec.lattice import build_layout
from isingqec.noise import NoiseSpec, extract_syndrome, format_syndrome, history_from_events, sample

SMALL = """\
[experiment]
model = code_capacity
distances = 3
ps = 0.1
trials = 4
decoder = da
master_seed = 11

[annealer]
num_replicas = 8
sweeps = 500
stale_sweeps = 100
"""


def run(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main([str(a) for a in argv])
    return code, buf.getvalue()


def test_derive_coeffs():
    code, out = run("derive-coeffs", 6, 1)
    assert code == EXIT_OK
    assert out.splitlines()[0] == "16, -8, 4, 2, 8, -1"
    assert "512" in out


def test_derive_coeffs_bad_degree():
    assert run("derive-coeffs", 9, 1)[0] == EXIT_USAGE


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == EXIT_USAGE


def test_zero_trials_rejected_with_line_number():
    text = SMALL.replace("trials = 4", "trials = 0")
    with pytest.raises(UsageError, match=r"cfg.ini:5: \[experiment\] trials"):
        load_config(text, "cfg.ini")


@pytest.mark.parametrize("bad", ["model = nope", "bogus = 1", "ps = abc"])
def test_bad_config_values(bad):
    text = SMALL.replace("decoder = da", bad)
    with pytest.raises(UsageError):
        load_config(text)


def test_preset_with_override():
    cfg = load_config("[experiment]\npreset = y_detection\ntrials = 3\n")
    assert cfg.trials == 3 and cfg.J == 10240 and cfg.h == 10
    assert (9, 5) in cfg.couplings


def test_simulate_and_replay(tmp_path, monkeypatch):
    cfg = tmp_path / "run.ini"
    cfg.write_text(SMALL)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "out"))
    code, out = run("simulate", cfg)
    assert code == EXIT_OK
    outdir = tmp_path / "out"
    for name in ("trials.csv", "summary.csv", "summary.json", "manifest.json"):
        assert (outdir / name).exists()
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["master_seed"] == 11
    rows = [ln for ln in (outdir / "trials.csv").read_text().splitlines() if not ln.startswith("#")]
    code, out = run("replay", outdir / "manifest.json", "--d", 3, "--p", 0.1, "--trial", 2)
    assert code == EXIT_OK
    replayed = out.splitlines()
    assert replayed[0] == rows[0] and replayed[1] == rows[3]


def test_simulate_without_config_is_usage_error(tmp_path):
    assert run("simulate", "--output-dir", tmp_path)[0] == EXIT_USAGE
    assert run("simulate", tmp_path / "missing.ini")[0] == EXIT_USAGE


def _write_syndrome(tmp_path, syndrome):
    path = tmp_path / "syn.txt"
    path.write_text(format_syndrome(syndrome))
    return path


@pytest.mark.parametrize("decoder", ["da", "mwpm", "da_y_coupled"])
def test_decode_trivial_syndrome(tmp_path, decoder):
    layout = build_layout(3)
    path = _write_syndrome(tmp_path, extract_syndrome(layout, history_from_events(layout, "phenomenological", 2)))
    out_path = tmp_path / "det.txt"
    code, out = run("decode", path, "--decoder", decoder, "--output", out_path, "--num-replicas", 4, "--sweeps", 50)
    assert code == EXIT_OK
    assert "events: 0" in out
    body = [ln for ln in out_path.read_text().splitlines() if ln.startswith(("data", "meas"))]
    assert body == []


def test_decode_single_error(tmp_path):
    layout = build_layout(3)
    q = layout.data_index(2, 2)
    path = _write_syndrome(tmp_path, extract_syndrome(layout, history_from_events(layout, "code_capacity", 1, [(0, q, "Z")])))
    code, out = run("decode", path, "--decoder", "mwpm")
    assert code == EXIT_OK
    assert f"data z 0 {q}" in out


def test_decode_malformed_syndrome(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# isingqec syndrome v1\nd 3\nlayers 1\nz ++?\n")
    assert run("decode", path)[0] == EXIT_USAGE


def test_decode_capacity_exit_code(tmp_path):
    layout = build_layout(5)
    syn = extract_syndrome(layout, sample(layout, NoiseSpec("code_capacity", 0.2), 3))
    path = _write_syndrome(tmp_path, syn)
    assert run("decode", path, "--decoder", "mwpm", "--max-component", 1)[0] == EXIT_CAPACITY


@pytest.mark.parametrize("coupled", [False, True])
def test_export_qubo(tmp_path, coupled):
    layout = build_layout(3)
    syn = extract_syndrome(layout, sample(layout, NoiseSpec("phenomenological", 0.05, rounds=2), 1))
    path = _write_syndrome(tmp_path, syn)
    target = tmp_path / "q.txt"
    args = ["export-qubo", path, "--output", target] + (["--y-coupling", "--Ja", 1, "--Jb", 1] if coupled else [])
    assert run(*args)[0] == EXIT_OK
    q = parse_qubo(target.read_text())
    assert q.num_vars > 0


def _summary(tmp_path, rows, columns):
    path = tmp_path / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)
    return path


def test_fit_threshold_command(tmp_path):
    rows = []
    for d in (3, 5, 7):
        for p in (0.01, 0.02, 0.03):
            pl = 0.05 * (p / 0.025) ** (1.1 * effective_distance(d))
            rows.append([d, p, pl, pl / 10])
    code, out = run("fit-threshold", _summary(tmp_path, rows, ["d", "p", "P_L", "SE"]))
    assert code == EXIT_OK
    values = dict(line.split() for line in out.splitlines())
    assert float(values["p_th"]) == pytest.approx(0.025, rel=1e-4)


def test_fit_threshold_failure_is_runtime(tmp_path):
    path = _summary(tmp_path, [[3, 0.01, 0.1, 0.01]], ["d", "p", "P_L", "SE"])
    assert run("fit-threshold", path)[0] == EXIT_RUNTIME
    assert run("fit-threshold", path, "--column", "nope")[0] == EXIT_USAGE


def test_fit_scaling_command(tmp_path):
    rows = [[d, 0.1, 2.0 * (d * d + (d - 1) ** 2) ** 1.5] for d in (3, 5, 7, 9)]
    code, out = run("fit-scaling", _summary(tmp_path, rows, ["d", "p", "mean_iterations"]))
    assert code == EXIT_OK
    assert out.splitlines()[0] == "exponent 1.5"
    assert "polynomial fits better" in out


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "isingqec.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "kernels" in res.stdout


def test_decode_large_components_blossom(tmp_path):
    layout = build_layout(5)
    syn = extract_syndrome(layout, sample(layout, NoiseSpec("code_capacity", 0.2), 3))
    path = _write_syndrome(tmp_path, syn)
    code, out = run("decode", path, "--decoder", "mwpm", "--max-component", 1, "--large-components", "blossom")
    assert code == EXIT_OK and "feasible: True" in out
