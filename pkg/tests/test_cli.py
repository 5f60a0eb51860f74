import json

import pytest

from risae.baseline.cli import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main
from risae.baseline.config import ConfigError, DESK_SCALE, dump_config, load_config
from risae.baseline.runner import run_experiment

TINY_AE = """
version = 1
kind = ae_perfect
N = 4
train_symbols = 4000
test_symbols = 4000
max_epochs = 2
phase_selector = closed_form
eb_n0_db = -10, 0
"""


def _write(tmp_path, text, name="cfg.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults_and_desk_preset():
    assert load_config().train_symbols == 1_280_000
    desk = load_config(desk_scale=True)
    for k, v in DESK_SCALE.items():
        assert getattr(desk, k) == v


def test_file_values_override_preset(tmp_path):
    cfg = load_config(_write(tmp_path, "max_epochs = 5\n"), desk_scale=True)
    assert cfg.max_epochs == 5 and cfg.train_symbols == 100_000


@pytest.mark.parametrize("text", [
    "val_fraction = 1.5\n",
    "bogus_key = 1\n",
    "version = 2\n",
    "N = sixteen\n",
    "[section]\nN = 4\n",
    "eb_n0_db =\n",
    "kind = other\n",
    "this line has no delimiter\n",
    "N = 4\nN = 5\n",
    "train_with_estimates = maybe\n",
])
def test_invalid_configs_rejected(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_dump_round_trip(tmp_path):
    cfg = load_config(_write(tmp_path, TINY_AE))
    again = load_config(_write(tmp_path, dump_config(cfg), "dump.cfg"))
    assert again.to_dict() == cfg.to_dict()
    assert cfg.eb_n0_db == [-10.0, 0.0] and cfg.kind == "ae_perfect"


def test_ae_run_emits_artifacts_and_is_byte_reproducible(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = load_config(_write(tmp_path, TINY_AE), out=str(tmp_path / name), seed=3)
        manifest = run_experiment(cfg)
        assert manifest["status"] == "complete"
        outs.append(tmp_path / name)
    arts = set(manifest["artifacts"])
    assert {"ae.json", "ae.bin", "history.csv", "ber_ae_perfect.csv", "ber_ae_perfect.meta.json"} <= arts
    for csv_name in ("history.csv", "ber_ae_perfect.csv"):
        assert (outs[0] / csv_name).read_bytes() == (outs[1] / csv_name).read_bytes()
    m = json.loads((outs[0] / "manifest.json").read_text())
    assert m["config"]["seed"] == 3 and "library_version" in m and "wall_time_s" in m


def test_cli_exit_codes(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_AE)
    assert main(["baseline", "--config", str(cfg), "--out", str(tmp_path / "bl"), "--seed", "1"]) == EXIT_OK
    bad = _write(tmp_path, "val_fraction = 1.5\n", "bad.cfg")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_INVALID
    assert not (tmp_path / "x").exists()
    missing_ris = _write(tmp_path, TINY_AE.replace("closed_form", "learned") + "ris_checkpoint = /nonexistent/ris\n", "m.cfg")
    assert main(["train", "--config", str(missing_ris), "--out", str(tmp_path / "y")]) == EXIT_FAILED
    m = json.loads((tmp_path / "y" / "manifest.json").read_text())
    assert m["status"] == "failed" and m["partial"] is True


def test_cli_train_eval_compare(tmp_path, capsys):
    cfg = _write(tmp_path, TINY_AE)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out), "--estimated"]) == EXIT_OK
    assert (out / "ber_ae_estimated.csv").exists() and (out / "compare.txt").exists()
    ev = tmp_path / "ev"
    assert main(["eval", "--config", str(cfg), "--out", str(ev), "--checkpoint", str(out / "ae")]) == EXIT_OK
    assert (ev / "ber_ae_perfect.csv").read_bytes() == (out / "ber_ae_perfect.csv").read_bytes()
    capsys.readouterr()
    cmp_out = tmp_path / "cmp"
    code = main(["compare", str(out / "ber_ae_perfect.csv"), str(out / "ber_ae_estimated.csv"), "--out", str(cmp_out)])
    assert code == EXIT_OK
    assert "ber_ae_estimated vs ber_ae_perfect" in capsys.readouterr().out
    other = tmp_path / "bl"
    assert main(["baseline", "--config", str(_write(tmp_path, "eb_n0_db = 1.0\nN = 2\n", "o.cfg")), "--out", str(other)]) == EXIT_OK
    assert main(["compare", str(out / "ber_ae_perfect.csv"), str(other / "ber_bpsk_closed_form.csv")]) == EXIT_INVALID


def test_cli_pretrain_ris(tmp_path):
    cfg = _write(tmp_path, "N = 2\nris_dataset_size = 500\nris_max_epochs = 2\nris_test_size = 100\n")
    out = tmp_path / "ris"
    assert main(["pretrain-ris", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    m = json.loads((out / "manifest.json").read_text())
    assert m["ris_epochs"] == 2 and (out / "ris.json").exists() and (out / "ris_history.csv").exists()
