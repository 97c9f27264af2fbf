import csv

import pytest

from ubos.cli import NOT_REACHED, compare_report, format_report, main, read_config


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_rank_prints_226(capsys):
    assert main(["rank", "--family", "generic"]) == 0
    assert capsys.readouterr().out.strip() == "226"


def test_vqe_csv_and_manifest(tmp_path):
    out = tmp_path / "a"
    assert main(["vqe", "--sites", "4", "--layers", "2", "--max-sweeps", "2", "--seed", "7", "--output", str(out)]) == 0
    rows = _rows(out / "vqe_seed7.csv")
    assert rows[0] == ["update", "evs", "energy_error", "fidelity"]
    assert len(rows) == 1 + 1 + 2 * 3
    manifest = (out / "manifest.txt").read_text()
    assert "command = vqe" in manifest and "seeds = 7" in manifest and "version = " in manifest


def test_rerun_byte_identical_and_manifest_round_trip(tmp_path):
    args = ["vqe", "--sites", "4", "--layers", "2", "--max-sweeps", "2", "--seeds", "1,2", "--noise", "gaussian:0.01"]
    main(args + ["--output", str(tmp_path / "a"), "--jobs", "2"])
    main(args + ["--output", str(tmp_path / "b")])
    main(["vqe", "--config", str(tmp_path / "a" / "manifest.txt"), "--output", str(tmp_path / "c")])
    for seed in (1, 2):
        ref = (tmp_path / "a" / f"vqe_seed{seed}.csv").read_bytes()
        assert (tmp_path / "b" / f"vqe_seed{seed}.csv").read_bytes() == ref
        assert (tmp_path / "c" / f"vqe_seed{seed}.csv").read_bytes() == ref


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("UBOS_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["sgd", "--sites", "4", "--layers", "2", "--max-steps", "3"]) == 0
    assert len(_rows(tmp_path / "env" / "sgd_seed0.csv")) == 5


def test_noise_scan_one_file_per_sigma(tmp_path):
    main(["noise-scan", "--sites", "4", "--layers", "2", "--max-sweeps", "1", "--sigmas", "1e-3,1e-2,1e-1",
          "--output", str(tmp_path)])
    for s in ("0.001", "0.01", "0.1"):
        assert _rows(tmp_path / f"noise_sigma{s}_seed0.csv")[0] == ["update", "evs", "energy_error", "fidelity"]


def test_tubos_barren_single_gate(tmp_path):
    assert main(["tubos", "--sites", "4", "--layers", "2", "--steps", "2", "--r", "1", "--output", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "tubos_seed0.csv")) == 4
    assert main(["barren", "--site-list", "4", "--layers", "2", "--ansatze", "3", "--sigmas", "0.1",
                 "--output", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "barren_variance.csv")) == 16
    assert main(["single-gate", "--sites", "4", "--layers", "2", "--warm-sweeps", "0", "--output", str(tmp_path)]) == 0
    methods = [r[2] for r in _rows(tmp_path / "single_gate.csv")[1:]]
    assert methods == ["nelder_mead", "gradient_on_h_tilde", "powell", "sgd_step"]


def test_config_errors_are_line_numbered(tmp_path, capsys):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("# comment\nsites = 4\nlayers = many\n")
    assert main(["vqe", "--config", str(cfg), "--output", str(tmp_path)]) != 0
    assert "bad.txt:3" in capsys.readouterr().err
    cfg.write_text("sites = 4\ncolour = blue\n")
    with pytest.raises(ValueError, match=":2: unknown key"):
        read_config(cfg)
    cfg.write_text("sites 4\n")
    with pytest.raises(ValueError, match=":1:"):
        read_config(cfg)
    cfg.write_text("layers = 0\n")
    with pytest.raises(ValueError, match="out of range"):
        read_config(cfg)


def test_invalid_flags(tmp_path):
    assert main(["vqe", "--sites", "1", "--output", str(tmp_path)]) != 0
    assert main(["vqe", "--noise", "loud", "--output", str(tmp_path)]) != 0
    assert main(["vqe", "--family", "u3", "--sites", "4", "--output", str(tmp_path)]) != 0
    assert main(["vqe", "--config", str(tmp_path / "missing.txt"), "--output", str(tmp_path)]) != 0
    with pytest.raises(SystemExit):
        main(["teleport"])


def test_compare_report(tmp_path):
    a = tmp_path / "a.csv"
    a.write_text("update,evs,energy_error,fidelity\n0,0,1.0,\n1,10,0.5,\n2,20,0.05,\n")
    b = tmp_path / "b.csv"
    b.write_text("update,evs,energy_error,fidelity\n0,0,1.0,\n1,100,0.9,\n")
    same = compare_report(a, a, 0.01, 8)
    assert same["ratio"] == 1
    rep = compare_report(a, b, 0.01, 8)
    assert rep["evs_a"] == 20 and rep["evs_b"] is None and rep["ratio"] is None
    assert NOT_REACHED in format_report(rep)


def test_compare_command(tmp_path, capsys):
    a = tmp_path / "a.csv"
    a.write_text("update,evs,energy_error,fidelity\n0,0,1.0,\n1,10,0.01,\n")
    assert main(["compare", str(a), str(a), "--sites", "2", "--target", "0.01"]) == 0
    assert "ratio: 1" in capsys.readouterr().out
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n")
    assert main(["compare", str(bad), str(a), "--sites", "2"]) != 0
