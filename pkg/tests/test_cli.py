import csv
import io

import pytest

from fagim.cli import ABEP_COLUMNS, SIMULATE_COLUMNS, main, parse_snr_grid


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.yaml"
    p.write_text("N_r: 4\ndetectors: [ml, mmse]\nsnr_db: [0, 6]\nmin_bit_errors: 50\nmax_frames: 5000\n"
                 "block_size: 1000\nseed: 3\n")
    return p


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_snr_grid():
    assert parse_snr_grid("0:10:5") == [0, 5, 10]
    assert parse_snr_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]
    assert parse_snr_grid("3,1.5") == [3, 1.5]
    assert parse_snr_grid("") == []


def test_simulate_csv(tmp_path, cfg):
    out = tmp_path / "ber.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == SIMULATE_COLUMNS
    assert [(r["snr_db"], r["detector"]) for r in rows] == [("0.0", "ml"), ("0.0", "mmse"), ("6.0", "ml"), ("6.0", "mmse")]
    for r in rows:
        assert int(r["bits_sent"]) == 6 * int(r["frames"])
        assert float(r["ber"]) == pytest.approx(int(r["bit_errors"]) / int(r["bits_sent"]))
        assert r["snr_convention"] == "total_tx_energy"


def test_simulate_is_reproducible(tmp_path, cfg):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--config", str(cfg), "--out", str(a)])
    main(["simulate", "--config", str(cfg), "--out", str(b), "--workers", "2"])
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]
    assert strip(read_csv(a)) == strip(read_csv(b))


def test_set_override_and_empty_grid(tmp_path, cfg):
    out = tmp_path / "ber.csv"
    assert main(["simulate", "--config", str(cfg), "--set", "snr_db=[]", "--out", str(out)]) == 0
    assert out.read_text().strip() == ",".join(SIMULATE_COLUMNS)


def test_abep_csv(tmp_path, cfg):
    out = tmp_path / "abep.csv"
    assert main(["abep", "--config", str(cfg), "--snr", "0:10:5", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ABEP_COLUMNS
    assert [float(r["snr_db"]) for r in rows] == [0, 5, 10]
    assert all(r["mode"] == "exact" and r["pairs_evaluated"] == "4096" for r in rows)
    vals = [float(r["abep"]) for r in rows]
    assert vals[0] > vals[1] > vals[2]


def test_abep_sampled(tmp_path, cfg):
    out = tmp_path / "abep.csv"
    assert main(["abep", "--config", str(cfg), "--snr", "5", "--mode", "sampled",
                 "--samples", "20000", "--out", str(out)]) == 0
    (row,) = read_csv(out)
    assert row["mode"] == "sampled" and float(row["stderr_estimate"]) > 0


def test_inspect(tmp_path, cfg, capsys):
    assert main(["inspect", "--config", str(cfg), "--csv-dir", str(tmp_path / "insp")]) == 0
    text = capsys.readouterr().out
    assert "group 1: [1, 2, 3, 4]" in text and "group 2: [5, 6, 7, 8]" in text
    assert "eigen-spectrum" in text
    ports = read_csv(tmp_path / "insp" / "ports.csv")
    assert len(ports) == 8 and ports[0]["x"] == "0" and ports[0]["y"] == "0"
    eig = read_csv(tmp_path / "insp" / "eigenvalues.csv")
    assert sum(float(r["eigenvalue"]) for r in eig) == pytest.approx(8)


def test_inspect_faim(cfg, capsys):
    assert main(["inspect", "--config", str(cfg), "--set", "mode=faim"]) == 0
    assert "column-major" in capsys.readouterr().out


def test_exit_codes(tmp_path, cfg, capsys):
    assert main(["simulate", "--config", str(cfg), "--set", "G1=3"]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["abep", "--config", str(cfg), "--snr", "1:2"]) == 2
    big = tmp_path / "big.yaml"
    big.write_text("N1: 4\nN2: 4\nG1: 2\nG2: 2\nconstellation: qam16\n")
    assert main(["abep", "--config", str(big), "--snr", "10"]) == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_error_exit_code(cfg, monkeypatch):
    import fagim.cli as cli
    from fagim.errors import NumericalError

    def boom(*a, **k):
        raise NumericalError("synthetic")

    monkeypatch.setattr(cli, "run_sweep", boom)
    assert main(["simulate", "--config", str(cfg)]) == 3
