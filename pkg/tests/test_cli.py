import csv

import numpy as np
import pytest

from llhomotopy.cli import ConfigError, main, parse_config


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_config_sections_and_comments():
    cfg = parse_config("n = 20  # rows\n\n[schedule]\ninner_iters=5\n")
    assert cfg == {"n": ("20", 1), "schedule.inner_iters": ("5", 4)}


@pytest.mark.parametrize("text,line", [
    ("n = 20\nthis is not a pair\n", 2),
    ("n = 1\nn = 2\n", 2),
    ("[schedule\n", 1),
    ("= 3\n", 1),
])
def test_parse_config_errors_report_line(text, line):
    with pytest.raises(ConfigError, match=f":{line}:"):
        parse_config(text, "f.cfg")


def test_malformed_config_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, "n = 20\np = forty\n")
    assert main(["decode", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "'p'" in err


def test_unknown_key_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, "trials = 1\ncolour = red\n")
    assert main(["decode", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_decode_single_trial(tmp_path):
    cfg = _write(tmp_path, "n = 20\np = 40\nrho = 0.0\nsnr_db = 30\ntrials = 1\n")
    assert main(["decode", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "decode_trials.csv")
    assert [r["method"] for r in rows] == ["LS", "AR", "AN", "LL"]
    assert {r["trial"] for r in rows} == {"0"}


def test_decode_full_row(tmp_path):
    cfg = _write(tmp_path, "n = 20\np = 40\nrho = 0.0\nsnr_db = 30\ntrials = 50\n")
    assert main(["decode", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "decode_trials.csv")) == 200
    agg = _rows(tmp_path / "decode_aggregate.csv")
    assert [r["method"] for r in agg] == ["LS", "AR", "AN", "LL"]
    assert all(r["N"] == "20" and r["P"] == "40" for r in agg)


def test_decode_rejects_rho_one(tmp_path, capsys):
    cfg = _write(tmp_path, "rho = 1.0\ntrials = 1\n")
    assert main(["decode", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "rho" in capsys.readouterr().err


def test_decode_schedule_section(tmp_path):
    cfg = _write(tmp_path, "trials = 1\n[schedule]\ninner_iters = 3\nstep_rule = lipschitz\n"
                 "[admm]\nmax_iters = 10\n")
    assert main(["decode", "--config", cfg, "--out", str(tmp_path)]) == 0
    bad = _write(tmp_path, "[schedule]\nwarp = 9\n", "bad.cfg")
    assert main(["decode", "--config", bad, "--out", str(tmp_path)]) == 2


def test_unmix_rejects_large_sparsity(tmp_path, capsys):
    cfg = _write(tmp_path, "n = 10\np = 10\nsparsity = 11\n")
    assert main(["unmix", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "sparsity" in capsys.readouterr().err


def test_unmix_single_lambda(tmp_path):
    cfg = _write(tmp_path, "n = 30\np = 30\ntrials = 2\nlambda1 = 1e3\n")
    assert main(["unmix", "--config", cfg, "--out", str(tmp_path)]) == 0
    sweep = _rows(tmp_path / "unmix_sweep.csv")
    assert len(sweep) == 1 and float(sweep[0]["lambda1"]) == 1e3
    assert list(sweep[0]) == ["lambda1", "rmse", "sensitivity", "specificity", "cost"]
    trials = _rows(tmp_path / "unmix_trials.csv")
    assert len(trials) == 4 and trials[0]["lambda1"] == "1000"


def test_unmix_sweep_rows(tmp_path):
    cfg = _write(tmp_path, "n = 20\np = 20\ntrials = 1\n")
    assert main(["unmix", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert len(_rows(tmp_path / "unmix_sweep.csv")) == 7
    assert len(_rows(tmp_path / "unmix_aggregate.csv")) == 14


def _envelope(tmp_path, *extra):
    assert main(["envelope", "--out", str(tmp_path), *extra]) == 0
    rows = _rows(tmp_path / "envelope.csv")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_envelope_binary_sandwich(tmp_path):
    cols = _envelope(tmp_path, "--function", "binary", "--lam", "1", "--mu", "0.5",
                     "--range", "-1", "2", "--step", "0.01")
    assert cols["x"].size == 301
    assert np.all(cols["moreau_lambda"] <= cols["ll"] + 1e-12)
    assert np.all(cols["ll"] <= cols["moreau_lambda_minus_mu"] + 1e-12)
    np.testing.assert_allclose(cols["ll"], cols["oracle_ll"], atol=1e-4)


def test_envelope_l0_even(tmp_path):
    cols = _envelope(tmp_path, "--function", "l0:beta=1", "--range", "-2", "2")
    np.testing.assert_allclose(cols["ll"], cols["ll"][::-1], atol=1e-12)
    np.testing.assert_allclose(cols["ll_grad"], -cols["ll_grad"][::-1], atol=1e-12)


def test_envelope_zero_function(tmp_path):
    cols = _envelope(tmp_path, "--function", "zero", "--lam", "3", "--mu", "1")
    for k in ("h", "moreau_lambda", "moreau_lambda_minus_mu", "ll", "ll_grad", "oracle_ll"):
        assert np.all(cols[k] == 0.0), k


def test_envelope_bad_descriptor(tmp_path, capsys):
    assert main(["envelope", "--function", "cubic", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "binary" in err and "l0:beta=<v>" in err


def test_envelope_bad_params(tmp_path):
    assert main(["envelope", "--function", "binary", "--lam", "1", "--mu", "1",
                 "--out", str(tmp_path)]) == 2


def test_unwritable_output(capsys):
    assert main(["validate", "--suite", "gradients", "--out", "/dev/null/x"]) == 2
    assert "I/O error" in capsys.readouterr().err


def test_validate_pass_and_injected_fault(tmp_path, capsys):
    assert main(["validate", "--suite", "gradients", "--out", str(tmp_path)]) == 0
    assert main(["validate", "--suite", "envelope", "--inject-fault", "binary",
                 "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "chain/closed[binary]" in err
    rows = _rows(tmp_path / "validate_deviations.csv")
    assert any(r["check"] == "chain/closed[binary]" and r["passed"] == "0" for r in rows)


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write(tmp_path, "n = 10\np = 20\ntrials = 3\n")
    outs = []
    for i, threads in enumerate(("1", "2")):
        d = tmp_path / f"run{i}"
        assert main(["decode", "--config", cfg, "--out", str(d), "--threads", threads]) == 0
        outs.append((d / "decode_trials.csv").read_bytes()
                    + (d / "decode_aggregate.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path, "n = 10\np = 20\ntrials = 2\nseed = 1\n")
    main(["decode", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["decode", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = (tmp_path / "a" / "decode_trials.csv").read_text()
    b = (tmp_path / "b" / "decode_trials.csv").read_text()
    assert a != b
