import csv

import pytest

from phi3d import cli
from phi3d.gff import load_path_fields


def run(tmp_path, *argv):
    return cli.main([*argv, "--output-dir", str(tmp_path), "--no-plot"])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_list_forms():
    assert cli.parse_list("64..256") == [64, 128, 256]
    assert cli.parse_list("8, 16,64..128") == [8, 16, 64, 128]
    assert cli.parse_list("1/3,0.5", float) == pytest.approx([1 / 3, 0.5])
    for bad in ("", "8..4", "0..4"):
        with pytest.raises(ValueError):
            cli.parse_list(bad)


def test_config_file_and_precedence(tmp_path, monkeypatch):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\nalpha = 1/2\nN = 16..64\nseed = 5\nn-samples = 300  # trailing\n")
    cfg = cli.make_config(["sigma-scaling", "--config", str(conf)])
    assert cfg.alpha == 0.5 and cfg.N_list == [16, 32, 64] and cfg.seed == 5 and cfg.n_samples == 300
    monkeypatch.setenv("PHI3D_SEED", "11")
    assert cli.make_config(["sigma-scaling", "--config", str(conf)]).seed == 11
    assert cli.make_config(["sigma-scaling", "--config", str(conf), "--seed", "12"]).seed == 12


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.conf"
    bad.write_text("colour = blue\n")
    with pytest.raises(ValueError):
        cli.read_config(str(bad))
    bad.write_text("alpha 0.5\n")
    with pytest.raises(ValueError):
        cli.read_config(str(bad))


def test_preset_sets_regime():
    cfg = cli.make_config(["zscan", "--preset", "regular"])
    assert (cfg.d, cfg.alpha) == (1, 1.0)


def test_exit_code_success_and_outputs(tmp_path):
    assert run(tmp_path, "sigma-scaling", "--alpha", "1/3") == cli.EXIT_OK
    rows = read_rows(tmp_path / "sigma-scaling.csv")
    assert list(rows[0]) == ["check", "N", "estimate", "stderr", "bound", "status", "note"]
    manifest = (tmp_path / "sigma-scaling.manifest.txt").read_text()
    for key in ("experiment = sigma-scaling", "code_version", "numpy_version", "scipy_version", "master_seed",
                "config.alpha", "wall_time_s", "failed_rows = 0"):
        assert key in manifest


def test_exit_code_failed_check(tmp_path):
    # a = b = 0.9: the first consecutive ratio of the maxima exceeds 1.1
    assert run(tmp_path, "discrconv") == cli.EXIT_FAILED
    assert "failed_rows = 1" in (tmp_path / "discrconv.manifest.txt").read_text()


def test_exit_code_invalid(tmp_path, capsys):
    assert run(tmp_path, "singularity", "--alpha", "1") == cli.EXIT_INVALID
    assert run(tmp_path, "sigma-scaling", "--d", "4") == cli.EXIT_INVALID
    assert run(tmp_path, "zscan", "--n-samples", "10") == cli.EXIT_INVALID
    assert "invalid configuration" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        cli.main(["no-such-experiment"])
    assert exc.value.code == 2


def test_unwritable_output(tmp_path):
    target = tmp_path / "file"
    target.write_text("")
    assert cli.main(["sigma-scaling", "--output-dir", str(target / "sub"), "--no-plot"]) == cli.EXIT_INVALID


def test_scan_csv_units_and_seeds(tmp_path):
    assert run(tmp_path, "zscan", "--preset", "gaussian", "--N", "16,32", "--n-samples", "200") == cli.EXIT_OK
    rows = read_rows(tmp_path / "zscan.csv")
    assert "log_Z[nat]" in rows[0] and "stderr_log_Z[nat]" in rows[0]
    assert "derived_seed.zscan" in (tmp_path / "zscan.manifest.txt").read_text()


def test_save_sample_checkpoint(tmp_path):
    ck = tmp_path / "path.bin"
    assert run(tmp_path, "sigma-scaling", "--N", "1024,2048,4096", "--save-sample", str(ck)) == cli.EXIT_OK
    times, fields = load_path_fields(ck.read_bytes())
    assert times.tolist() == [0.5, 1.0] and fields[-1].N == 4096


def test_plot_written(tmp_path):
    assert cli.main(["sigma-scaling", "--output-dir", str(tmp_path)]) == cli.EXIT_OK
    assert (tmp_path / "sigma-scaling.svg").read_text().lstrip().startswith("<?xml")
