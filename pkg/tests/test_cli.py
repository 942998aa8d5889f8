import json

import numpy as np

from kashin.builder import read_sgnm
from kashin.cli import main
from kashin.linalg import read_basis


def run(args):
    return main(args)


# ---------------------------------------------------------
# generate
# ---------------------------------------------------------

def test_generate_outputs_and_determinism(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run(["generate", "--n-dim", "128", "--eta", "0.5", "--seed", "00ff",
                "--out", str(out1)]) == 0
    assert run(["generate", "--n-dim", "128", "--eta", "0.5", "--seed", "00ff",
                "--out", str(out2)]) == 0
    for name in ("A.sgnm", "kernel_basis.json", "build_report.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    mat = read_sgnm(out1 / "A.sgnm")
    assert (mat.n, mat.N) == (64, 128)
    basis = read_basis(out1 / "kernel_basis.json")
    assert basis.dim == 64
    resid = np.abs(mat.entries.astype(float) @ basis.vectors.T)
    assert resid.max() <= 1e-8 * np.sqrt(128)


def test_generate_reference_bit_budget(tmp_path):
    out = tmp_path / "big"
    assert run(["generate", "--n-dim", "1024", "--eta", "0.5", "--out", str(out)]) == 0
    rep = json.loads((out / "build_report.json").read_text())
    assert rep["k"] == 20
    assert rep["bits_total"] == 1977


def test_generate_degenerate_eta_is_usage_error(tmp_path, capsys):
    assert run(["generate", "--n-dim", "8", "--eta", "0.99",
                "--out", str(tmp_path)]) == 1
    assert "rounds to 0" in capsys.readouterr().err


def test_generate_csv_basis(tmp_path):
    out = tmp_path / "csv"
    assert run(["generate", "--n-dim", "32", "--eta", "0.5", "--seed", "aa",
                "--out", str(out), "--format", "csv"]) == 0
    basis = read_basis(out / "kernel_basis.csv")
    # this particular 16x32 draw is rank-deficient (rank 15), which just
    # enlarges the kernel
    assert basis.dim == 17
    mat = read_sgnm(out / "A.sgnm")
    assert np.abs(mat.entries.astype(float) @ basis.vectors.T).max() <= 1e-8 * np.sqrt(32)


def test_bad_flags_are_usage_errors(tmp_path):
    assert run(["generate", "--n-dim", "2", "--eta", "0.5"]) == 1
    assert run(["generate", "--n-dim", "16", "--eta", "1.5"]) == 1
    assert run(["generate", "--n-dim", "16", "--eta", "0.5", "--seed", "zz"]) == 1
    assert run(["bogus-command"]) == 1


# ---------------------------------------------------------
# verify
# ---------------------------------------------------------

def test_verify_desk_config_passes(tmp_path):
    out = tmp_path / "v"
    assert run(["verify", "--n-dim", "64", "--eta", "0.5", "--seed", "00ff",
                "--trials", "20", "--out", str(out)]) == 0
    doc = json.loads((out / "verify_report.json").read_text())
    assert doc["certified"] is True
    assert doc["failures"] == []
    for name in ("kwise_exact", "spectral_gap", "hitting_domination", "opnorm_tail",
                 "paley_zygmund", "single_vector", "kernel", "distortion",
                 "ratio_upper_bound"):
        assert doc["suites"][name]["passed"] is True, name


def test_verify_zero_trials_skips(tmp_path):
    out = tmp_path / "v0"
    assert run(["verify", "--n-dim", "64", "--eta", "0.5", "--trials", "0",
                "--out", str(out)]) == 0
    doc = json.loads((out / "verify_report.json").read_text())
    assert all(s.get("skipped") for s in doc["suites"].values())


def test_verify_reports_are_reproducible(tmp_path):
    outs = []
    for name in ("va", "vb"):
        out = tmp_path / name
        assert run(["verify", "--n-dim", "64", "--eta", "0.5", "--seed", "beef",
                    "--trials", "15", "--out", str(out)]) == 0
        outs.append((out / "verify_report.json").read_bytes())
    assert outs[0] == outs[1]


def test_verify_artifact_tamper_detection(tmp_path):
    gen = tmp_path / "gen"
    assert run(["generate", "--n-dim", "64", "--eta", "0.5", "--seed", "0102",
                "--out", str(gen)]) == 0
    # untouched artifact certifies
    out_ok = tmp_path / "ok"
    assert run(["verify", "--n-dim", "64", "--eta", "0.5", "--seed", "0102",
                "--trials", "5", "--matrix", str(gen / "A.sgnm"),
                "--basis", str(gen / "kernel_basis.json"), "--out", str(out_ok)]) == 0
    # flip one sign: kernel residual must blow past tolerance -> exit 2
    data = bytearray((gen / "A.sgnm").read_bytes())
    idx = data.index(ord("\n")) + 4
    data[idx] = ord("+") if data[idx] == ord("-") else ord("-")
    tampered = tmp_path / "tampered.sgnm"
    tampered.write_bytes(bytes(data))
    out_bad = tmp_path / "bad"
    assert run(["verify", "--n-dim", "64", "--eta", "0.5", "--seed", "0102",
                "--trials", "5", "--matrix", str(tampered),
                "--basis", str(gen / "kernel_basis.json"), "--out", str(out_bad)]) == 2
    doc = json.loads((out_bad / "verify_report.json").read_text())
    assert doc["suites"]["artifact"]["passed"] is False


def test_verify_csv_export(tmp_path):
    out = tmp_path / "vc"
    assert run(["verify", "--n-dim", "64", "--eta", "0.5", "--seed", "aa",
                "--trials", "10", "--format", "csv", "--out", str(out)]) == 0
    lines = (out / "opnorm_tail.csv").read_text().splitlines()
    assert lines[0] == "t,exceedance,bound,std_err"
    assert len(lines) == 11
    dist = (out / "distortion.csv").read_text().splitlines()
    assert dist[0].startswith("n_dim,dim,delta_hat")
    assert len(dist) == 2


# ---------------------------------------------------------
# spectrum
# ---------------------------------------------------------

def test_spectrum_meets_threshold(tmp_path):
    out = tmp_path / "s"
    assert run(["spectrum", "--m", "16", "--out", str(out)]) == 0
    doc = json.loads((out / "spectrum_report.json").read_text())
    assert doc["lambda_hat"] < 0.95
    assert doc["agreement"] <= 1e-6
    assert doc["num_vertices"] == 256


# ---------------------------------------------------------
# config file and environment seed
# ---------------------------------------------------------

def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cfg.write_text(
        f"n-dim = 64\neta = 0.5\nseed = 00ff\nout = {out_a}\n# comment line\n")
    assert run(["generate", "--config", str(cfg)]) == 0
    assert (out_a / "A.sgnm").exists()
    # flags override the file
    assert run(["generate", "--config", str(cfg), "--out", str(out_b),
                "--eta", "0.25"]) == 0
    assert read_sgnm(out_b / "A.sgnm").n == 48


def test_config_file_syntax_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n-dim 64\n")
    assert run(["generate", "--config", str(cfg)]) == 1


def test_env_seed_fallback(tmp_path, monkeypatch):
    out_env, out_flag = tmp_path / "e", tmp_path / "f"
    monkeypatch.setenv("KASHIN_SEED", "c0ffee")
    assert run(["generate", "--n-dim", "32", "--eta", "0.5", "--out", str(out_env)]) == 0
    monkeypatch.delenv("KASHIN_SEED")
    assert run(["generate", "--n-dim", "32", "--eta", "0.5", "--seed", "c0ffee",
                "--out", str(out_flag)]) == 0
    assert (out_env / "A.sgnm").read_bytes() == (out_flag / "A.sgnm").read_bytes()
