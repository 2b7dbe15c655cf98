import json
from pathlib import Path

import numpy as np
import pytest

from revstego import brute, cli, imaging
from revstego.model import AbsErrorHistogram, ProblemSpec

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_histogram_golden_and_rerun(capsys, tmp_path):
    code, out, _ = run(capsys, "histogram", "--image", GOLDEN / "cover16.pgm")
    assert code == 0 and out == (GOLDEN / "hist16.csv").read_text()
    assert AbsErrorHistogram.from_csv(out).total == (14 * 14) // 2
    assert run(capsys, "histogram", "--image", GOLDEN / "cover16.pgm")[1] == out


def test_histogram_constant_and_full_size(capsys, tmp_path):
    imaging.save_pgm(imaging.ImageGrid(np.full((8, 8), 9, dtype=np.uint8)), tmp_path / "c.pgm")
    assert run(capsys, "histogram", "--image", tmp_path / "c.pgm")[1] == "magnitude,count\n0,18\n"
    imaging.save_pgm(imaging.synthetic_image(256, 256, seed=3), tmp_path / "big.pgm")
    _, out, _ = run(capsys, "histogram", "--image", tmp_path / "big.pgm")
    assert AbsErrorHistogram.from_csv(out).total == 32258


def test_brute_golden(capsys):
    code, out, _ = run(capsys, "brute", "--histogram", GOLDEN / "worked.csv", "--n", 2, "--theta", 1, "--payload", 1)
    assert code == 0 and out == (GOLDEN / "brute_worked.json").read_text()
    js = json.loads(out)
    assert js["x"] == [0, 0, 1] and js["distortion"] == 1.5 and js["evaluated_count"] == 4


def test_optimize_golden(capsys):
    code, out, _ = run(capsys, "optimize", "--histogram", GOLDEN / "worked.csv", "--n", 2, "--theta", 1, "--payload", 1)
    assert code == 0 and out == (GOLDEN / "optimize_worked.json").read_text()
    assert json.loads(out)["x"] == [0, 0, 1]


def test_zero_payload_and_infeasible(capsys):
    code, out, _ = run(capsys, "optimize", "--histogram", GOLDEN / "worked.csv", "--n", 2, "--theta", 1, "--payload", 0)
    assert code == 0 and json.loads(out)["x"] == [0, 0, 0]
    code, out, err = run(capsys, "brute", "--histogram", GOLDEN / "worked.csv", "--n", 2, "--theta", 1, "--payload", 9)
    assert code == cli.EXIT_INFEASIBLE and out == "" and "infeasible" in err


def test_io_errors(capsys, tmp_path):
    assert run(capsys, "histogram", "--image", tmp_path / "missing.pgm")[0] == cli.EXIT_IO
    (tmp_path / "bad.csv").write_text("magnitude,count\n0,x\n")
    code, _, err = run(capsys, "brute", "--histogram", tmp_path / "bad.csv", "--theta", 1, "--payload", 0)
    assert code == cli.EXIT_IO and err


def test_curve_golden_and_oracles(capsys):
    args = ["curve", "--histogram", GOLDEN / "small.csv", "--n", 5, "--theta", 2, "--grid", "0:40:10"]
    code, out, _ = run(capsys, *args, "--method", "brute")
    assert code == 0 and out == (GOLDEN / "curve_small_brute.csv").read_text()
    rows = [line.split(",") for line in out.splitlines()[1:]]
    d = [float(r[1]) for r in rows]
    assert [float(r[0]) for r in rows] == [0, 10, 20, 30, 40]
    assert all(a <= b for a, b in zip(d, d[1:]))
    assert all(float(r[2]) == pytest.approx(float(r[1]) / 82) for r in rows)
    code, out_milp, _ = run(capsys, *args, "--method", "milp", "--jobs", 3)
    assert [r.split(",")[1] for r in out_milp.splitlines()[1:]] == [r[1] for r in rows]


def test_curve_records_failures_per_row(capsys):
    code, out, _ = run(capsys, "curve", "--histogram", GOLDEN / "worked.csv", "--n", 2, "--theta", 1, "--grid", "0:6:2", "--method", "brute")
    assert code == 0
    status = [line.split(",")[-1] for line in out.splitlines()[1:]]
    assert status == ["ok", "ok", "ok", "infeasible"]


def test_parse_grid():
    assert cli.parse_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]
    assert cli.parse_grid("10%:30%:10%", 200) == pytest.approx([20, 40, 60])
    for bad in ("1:2", "0:1:0"):
        with pytest.raises(ValueError):
            cli.parse_grid(bad)


def test_embed_extract_round_trip(capsys, tmp_path):
    cover = tmp_path / "cover.pgm"
    imaging.save_pgm(imaging.synthetic_image(64, 64, seed=2), cover)
    (tmp_path / "msg.bin").write_bytes(b"reversible!")
    code, out, _ = run(
        capsys, "embed", "--image", cover, "--out", tmp_path / "stego.pgm", "--x", "auto", "--theta", 2,
        "--message", tmp_path / "msg.bin", "--coding-out", tmp_path / "coding.json",
    )
    assert code == 0
    report = json.loads(out)
    assert report["bits_embedded"] == 88
    code, out, _ = run(
        capsys, "extract", "--image", tmp_path / "stego.pgm", "--coding", tmp_path / "coding.json",
        "--out", tmp_path / "back.pgm", "--message-out", tmp_path / "back.bin",
    )
    assert code == 0
    assert (tmp_path / "back.pgm").read_bytes() == cover.read_bytes()
    assert (tmp_path / "back.bin").read_bytes() == b"reversible!"
    # reported PSNR matches the metric on the two files
    mse, psnr = imaging.mse_psnr(imaging.load_pgm(cover), imaging.load_pgm(tmp_path / "stego.pgm"))
    assert report["mse"] == mse and report["psnr_db"] == psnr
    _, out, _ = run(capsys, "metrics", cover, tmp_path / "stego.pgm")
    assert json.loads(out)["psnr_db"] == psnr

    # auto mode picks what optimize returns on the image's own histogram
    _, hist_csv, _ = run(capsys, "histogram", "--image", cover)
    (tmp_path / "h.csv").write_text(hist_csv)
    hist = AbsErrorHistogram.from_csv(hist_csv)
    n = imaging.select_n(hist, 2)
    _, out, _ = run(capsys, "optimize", "--histogram", tmp_path / "h.csv", "--theta", 2, "--n", n, "--payload", 32 + 88)
    assert json.loads(out)["x"] == report["x"]


def test_embed_random_bits_deterministic_and_overflow(capsys, tmp_path):
    cover = tmp_path / "cover.pgm"
    imaging.save_pgm(imaging.synthetic_image(32, 32, seed=4), cover)
    outs = []
    for k in range(2):
        code, out, _ = run(capsys, "embed", "--image", cover, "--out", tmp_path / f"s{k}.pgm", "--x", "auto",
                           "--random-bits", 40, "--seed", 5)
        assert code == 0
        outs.append((tmp_path / f"s{k}.pgm").read_bytes())
    assert outs[0] == outs[1]
    code, _, err = run(capsys, "embed", "--image", cover, "--out", tmp_path / "x.pgm", "--x", "0,1", "--random-bits", 100000)
    assert code == cli.EXIT_CAPACITY and err


def test_extract_needs_links(capsys, tmp_path):
    cover = tmp_path / "cover.pgm"
    imaging.save_pgm(imaging.synthetic_image(16, 16), cover)
    assert run(capsys, "extract", "--image", cover)[0] == cli.EXIT_IO


def test_compute_curve_matches_library():
    hist = AbsErrorHistogram([30, 22, 15, 9, 4, 2])
    pts = cli.compute_curve(hist, 5, 2, [25.0, 5.0, 15.0], "brute", jobs=3)
    assert [p.payload for p in pts] == [5.0, 15.0, 25.0]
    for p in pts:
        assert p.x == brute.brute_force_optimize(ProblemSpec(hist, 5, 2, p.payload)).x
