import numpy as np
import pytest

from auxpose import pipeline as pl
from auxpose.bundle import bundle_checksum
from auxpose.cli import build_parser, main
from auxpose.core import load_dataset

from conftest import SMALL_CONFIG


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text("".join(f"{k} = {v}\n" for k, v in SMALL_CONFIG.items()) + "synth.occlusion_prob = 0.0\n")
    assert main(["synth", "--out", str(root / "data"), "--n-train", "16", "--n-test", "4", "--seed", "11",
                 "--config", str(cfg)]) == 0
    assert main(["train", "--manifest", str(root / "data" / "manifest.txt"), "--out", str(root / "model"),
                 "--config", str(cfg)]) == 0
    return root


def test_global_flags_before_subcommand_survive():
    args = build_parser().parse_args(["--seed", "5", "--threads", "3", "train", "--manifest", "m"])
    assert args.seed == 5 and args.threads == 3
    args = build_parser().parse_args(["train", "--manifest", "m", "--seed", "6"])
    assert args.seed == 6 and args.threads == 1


def test_synth_honours_config_prefix(workdir):
    manifest = load_dataset(workdir / "data" / "manifest.txt")
    assert len(manifest.train) == 16 and len(manifest.test) == 4
    assert not any(any(r.landmarks.occluded) for r in manifest.entries)


def test_train_writes_bundle_and_config(workdir, capsys):
    bundle = workdir / "model" / "model.mpsb"
    assert bundle.exists()
    assert "dictionary_k = 40" in (workdir / "model" / "train_config.txt").read_text()
    assert main(["inspect-bundle", "--bundle", str(bundle)]) == 0
    out = capsys.readouterr().out
    assert f"checksum\t{bundle_checksum(bundle)}" in out
    assert "config.dictionary_k\t40" in out


def test_infer_and_eval(workdir, capsys):
    out = workdir / "pred"
    rc = main(["--threads", "2", "infer", "--bundle", str(workdir / "model" / "model.mpsb"),
               "--manifest", str(workdir / "data" / "manifest.txt"), "--out", str(out),
               "--mode", "baseline,proposed", "--export-votes"])
    assert rc == 0
    for mode in ("baseline", "proposed"):
        assert len(pl.read_predictions(out / f"predictions_{mode}.tsv")) == 4
    assert len(list((out / "votes").glob("*.npy"))) == 4
    rc = main(["eval", "--predictions", str(out / "predictions_proposed.tsv"),
               "--manifest", str(workdir / "data" / "manifest.txt"), "--out", str(workdir / "eval")])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()[-4:]
    assert [ln.split("\t")[0] for ln in lines] == list(pl.PARTS)
    assert pl.read_metrics(workdir / "eval" / "metrics.tsv").n == 4


def test_lambda_zero_override_matches_baseline(workdir):
    out = workdir / "lam0"
    assert main(["infer", "--bundle", str(workdir / "model" / "model.mpsb"), "--lam", "0",
                 "--manifest", str(workdir / "data" / "manifest.txt"), "--out", str(out),
                 "--mode", "baseline,proposed"]) == 0
    a = pl.read_predictions(out / "predictions_baseline.tsv")
    b = pl.read_predictions(out / "predictions_proposed.tsv")
    assert all(np.array_equal(x[1].locations, y[1].locations) for x, y in zip(a, b))


def test_missing_bundle_exit_code(workdir, capsys):
    rc = main(["infer", "--bundle", str(workdir / "nope.mpsb"), "--manifest", str(workdir / "data" / "manifest.txt"),
               "--out", str(workdir / "x")])
    assert rc == 2 and "error [load-bundle]" in capsys.readouterr().err


def test_corrupt_bundle_exit_code(workdir, capsys):
    bad = workdir / "bad.mpsb"
    data = bytearray((workdir / "model" / "model.mpsb").read_bytes())
    data[100] ^= 0xFF
    bad.write_bytes(bytes(data))
    rc = main(["infer", "--bundle", str(bad), "--manifest", str(workdir / "data" / "manifest.txt"),
               "--out", str(workdir / "x")])
    assert rc == 2 and "checksum" in capsys.readouterr().err


def test_missing_manifest_and_bad_config(workdir, capsys):
    assert main(["train", "--manifest", str(workdir / "none.txt"), "--out", str(workdir / "y")]) != 0
    assert "error [" in capsys.readouterr().err
    cfg = workdir / "bad.cfg"
    cfg.write_text("no_such_key = 1\n")
    rc = main(["train", "--manifest", str(workdir / "data" / "manifest.txt"), "--config", str(cfg),
               "--out", str(workdir / "y")])
    assert rc != 0 and "no_such_key" in capsys.readouterr().err


def test_usage_error_exits():
    with pytest.raises(SystemExit) as exc:
        main(["infer"])
    assert exc.value.code == 2
