"""Command-line entry point: synth, train, infer, eval and inspect-bundle."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .bundle import BundleError, bundle_checksum
from .config import PipelineConfig, format_key_values, load_config_file
from .core import load_dataset
from .synth import SynthConfig, synth_generate

log = logging.getLogger("auxpose")

SYNTH_PREFIX = "synth."
SEG_FLAGS = {"bright_fraction": float, "gradient_threshold": float, "min_component": int, "max_component": int}


class CliError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def _split_config(args) -> tuple:
    values = load_config_file(args.config) if args.config else {}
    synth = {k[len(SYNTH_PREFIX):]: v for k, v in values.items() if k.startswith(SYNTH_PREFIX)}
    pipe = {k: v for k, v in values.items() if not k.startswith(SYNTH_PREFIX)}
    return pipe, synth


def pipeline_config(args) -> PipelineConfig:
    pipe, _ = _split_config(args)
    if args.seed is not None:
        pipe["seed"] = args.seed
    for name in SEG_FLAGS:
        value = getattr(args, name, None)
        if value is not None:
            pipe[name] = value
    if getattr(args, "lam", None) is not None:
        pipe["lam"] = args.lam
    return PipelineConfig.from_mapping(pipe)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> None:
    _, values = _split_config(args)
    if args.seed is not None:
        values["seed"] = args.seed
    for key in ("n_train", "n_test", "occlusion_prob"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    if args.no_unannotated:
        values["unannotated_structures"] = False
    cfg = SynthConfig.from_mapping(values)
    manifest = synth_generate(cfg, _out_dir(args))
    print(manifest)


def cmd_train(args) -> None:
    cfg = pipeline_config(args)
    out = _out_dir(args)
    manifest = load_dataset(args.manifest)
    model = pl.run_train(manifest, cfg)
    path = out / args.bundle_name
    checksum = pl.save_model(model, path)
    (out / "train_config.txt").write_text(format_key_values(cfg.as_dict()), encoding="utf-8")
    print(f"{path}\t{checksum}")


def cmd_infer(args) -> None:
    try:
        model = pl.load_model(args.bundle)
    except (OSError, BundleError) as exc:
        raise CliError("load-bundle", str(exc)) from exc
    if args.lam is not None:
        model = pl.TrainedModel(model.mps, model.aux_parts, model.sigmas,
                                model.config.replace(lam=args.lam), model.info)
    modes = [m.strip() for m in args.mode.split(",") if m.strip()]
    variants = [pl.Variant(m) for m in modes]
    manifest = load_dataset(args.manifest)
    images = pl.images_of(manifest, args.split)
    if not images:
        raise CliError("infer", f"split {args.split!r} is empty")
    out = _out_dir(args)
    results = pl.run_infer_variants(model, images, variants, args.threads, keep_votes=args.export_votes)
    for k, mode in enumerate(modes):
        pl.write_predictions(out / f"predictions_{mode}.tsv", [(r.image_id, r.estimates[k]) for r in results])
    if args.export_votes:
        vdir = out / "votes"
        vdir.mkdir(exist_ok=True)
        for r in results:
            name = r.image_id.replace("/", "_").rsplit(".", 1)[0]
            np.save(vdir / f"{name}.npy", r.votes)
    print(out)


def cmd_eval(args) -> None:
    manifest = load_dataset(args.manifest)
    gt = pl.ground_truth_of(manifest, args.split)
    preds = dict(pl.read_predictions(args.predictions))
    records, table = pl.evaluate(preds, gt)
    paths = pl.export_metrics(table, records, _out_dir(args))
    for k, part in enumerate(table.parts):
        print(f"{part}\tmu={table.mu[k]:.3f}\tsigma={table.sigma[k]:.3f}\tmse={table.mse[k]:.3f}")
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))


def cmd_inspect(args) -> None:
    model = pl.load_model(args.bundle)
    print(f"checksum\t{bundle_checksum(args.bundle)}")
    print(f"components\t{model.mps.m}")
    print(f"semantic_detectors\t{len(model.semantic_ids)}")
    print(f"auxiliary_parts\t{len(model.aux_parts)}")
    for k, part in enumerate(pl.PARTS):
        n = sum(a.predictive[k] for a in model.aux_parts)
        print(f"predictive_{part}\t{n}\tvote_sigma={float(model.sigmas[k])!r}")
    print(f"pool_size\t{model.info.get('pool_size')}")
    for key, value in model.config.as_dict().items():
        print(f"config.{key}\t{value!r}")


def _common(with_defaults: bool) -> argparse.ArgumentParser:
    # subcommand copies suppress their defaults so flags given before the subcommand survive
    def d(value):
        return value if with_defaults else argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=d(None), help="random seed")
    common.add_argument("--config", default=d(None), help="key=value configuration file")
    common.add_argument("--threads", type=int, default=d(1), help="worker threads for inference")
    common.add_argument("--out", default=d("."), help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=d(False), help="log progress to stderr")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(False)
    parser = argparse.ArgumentParser(prog="auxpose", parents=[_common(True)],
                                     description="Landmark localization with auxiliary parts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--occlusion-prob", dest="occlusion_prob", type=float)
    p.add_argument("--no-unannotated", action="store_true", help="omit antennae and abdomen bands")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a model bundle")
    p.add_argument("--manifest", required=True)
    p.add_argument("--bundle-name", default="model.mpsb")
    for name, kind in SEG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="localize landmarks with a trained bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--mode", default="proposed", help="baseline, proposed, or a comma list of both")
    p.add_argument("--lam", type=float, default=None, help="override the fusion weight")
    p.add_argument("--export-votes", action="store_true", help="save per-image vote grids (.npy)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", parents=[common], help="score predictions against the manifest")
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect-bundle", parents=[common], help="summarize a model bundle")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except pl.StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # every failure leaves with a stage tag and a nonzero code
        print(f"error [{args.command}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
