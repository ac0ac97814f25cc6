"""Command-line entry point wiring the pipeline stages together.

Subcommands follow the pipeline order: prepare (or synth) -> train-backbone
-> extract-features -> train-head, with evaluate running the whole chain per
activity subset and report re-rendering saved results.

Every output directory receives run_config.json (the fully resolved
configuration plus input checksums) and run.log (detailed structured log);
the console gets a short human summary.
"""

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
import torch
import yaml

from . import __version__
from .backbone import BackboneConfig, STGCNBackbone
from .checkpoint import load_checkpoint, save_checkpoint, state_checksum
from .dataset import (
    build_bundle,
    deserialize_bundle,
    filter_by_labels,
    serialize_bundle,
)
from .evaluation import (
    TABLE2_SUBSETS,
    ExperimentSpec,
    bundle_checksum,
    result_from_dict,
    run_experiment,
    run_table2,
    trend_summary,
)
from .graph import build_graph
from .head import HeadConfig
from .report import render_report
from .synthetic import SyntheticSpec, generate
from .taxonomy import KinesicCategory, kinesic_of
from .training import (
    FeatureSet,
    TrainConfig,
    extract_feature_set,
    train_backbone,
    train_head,
)

log = logging.getLogger("kinesics")


def _setup_logging(out_dir=None):
    logging.basicConfig(
        level=logging.INFO, format="%(message)s", stream=sys.stderr, force=True
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(out_dir / "run.log")
        fh.setLevel(logging.DEBUG)
        fh.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s")
        )
        logging.getLogger().addHandler(fh)
        logging.getLogger().setLevel(logging.DEBUG)


def _parse_labels(text):
    return sorted({int(v) for v in text.split(",")})


def _file_checksum(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_provenance(out_dir, command, resolved, inputs=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": __version__,
        "command": command,
        "resolved_config": resolved,
        "inputs": inputs or {},
    }
    with open(out_dir / "run_config.json", "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True, default=str)


def _load_config_file(path):
    if path is None:
        return {}
    with open(path) as f:
        return yaml.safe_load(f) or {}


def _build_dataclass(cls, file_section, overrides):
    """File values override defaults; non-None CLI flags override the file."""
    kwargs = dict(file_section or {})
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)


def cmd_prepare(args):
    _setup_logging(args.output)
    bundle = build_bundle(
        args.input, strict=args.strict, target_frames=args.target_frames
    )
    if args.labels:
        bundle = filter_by_labels(bundle, _parse_labels(args.labels))
    serialize_bundle(bundle, args.output)
    _write_provenance(
        args.output, "prepare",
        {"input": args.input, "labels": args.labels, "strict": args.strict,
         "target_frames": args.target_frames},
        {"bundle_checksum": bundle_checksum(bundle)},
    )
    print(
        f"prepared {len(bundle.records)} samples "
        f"({len(bundle.train_names)} train / {len(bundle.val_names)} test) "
        f"-> {args.output}"
    )
    return 0


def cmd_synth(args):
    _setup_logging(args.out)
    spec = SyntheticSpec(
        activities=_parse_labels(args.activities),
        samples_per_activity=args.per_class,
        num_frames=args.frames,
        noise=args.noise,
        seed=args.seed,
    )
    bundle = generate(spec)
    serialize_bundle(bundle, args.out)
    _write_provenance(
        args.out, "synth", dataclasses.asdict(spec),
        {"bundle_checksum": bundle_checksum(bundle)},
    )
    print(
        f"generated {len(bundle.records)} synthetic samples "
        f"({len(bundle.train_names)} train / {len(bundle.val_names)} test) "
        f"-> {args.out}"
    )
    return 0


def _backbone_config_from_args(args, num_classes, file_cfg):
    overrides = {
        "num_classes": num_classes,
        "num_frames": args.frames,
        "partition_strategy": args.partition,
    }
    if args.channels:
        overrides["channels"] = [int(c) for c in args.channels.split(",")]
    return _build_dataclass(BackboneConfig, file_cfg.get("backbone"), overrides)


def _train_config_from_args(args, file_cfg, section):
    overrides = {"seed": args.seed, "epochs": args.epochs, "lr": args.lr,
                 "batch_size": args.batch_size}
    return _build_dataclass(TrainConfig, file_cfg.get(section), overrides)


def cmd_train_backbone(args):
    _setup_logging(args.out)
    file_cfg = _load_config_file(args.config)
    bundle = deserialize_bundle(args.bundle)
    if args.labels:
        bundle = filter_by_labels(bundle, _parse_labels(args.labels))
    num_classes = len(bundle.labels())
    backbone_config = _backbone_config_from_args(args, num_classes, file_cfg)
    train_config = _train_config_from_args(args, file_cfg, "train_backbone")
    graph = build_graph(strategy=backbone_config.partition_strategy)
    model, report, label_index = train_backbone(
        bundle, graph, backbone_config, train_config
    )
    out = Path(args.out)
    ckpt = out / "backbone.pt"
    save_checkpoint(
        ckpt, "backbone", backbone_config, model.state_dict(),
        extra={"val_names": list(bundle.val_names),
               "label_index": {str(k): v for k, v in label_index.items()}},
    )
    with open(out / "report.json", "w") as f:
        json.dump(report.to_dict(), f, indent=1)
    _write_provenance(
        out, "train-backbone",
        {"backbone": dataclasses.asdict(backbone_config),
         "train": dataclasses.asdict(train_config)},
        {"bundle_checksum": bundle_checksum(bundle),
         "checkpoint_checksum": state_checksum(model.state_dict())},
    )
    print(
        f"backbone best val accuracy {report.best_val_accuracy:.2f}% "
        f"(epoch {report.best_epoch}) -> {ckpt}"
    )
    return 0


def cmd_extract_features(args):
    _setup_logging(Path(args.out).parent)
    bundle = deserialize_bundle(args.bundle)
    config, state, _ = load_checkpoint(args.checkpoint, "backbone")
    from .evaluation import _resampled

    model = STGCNBackbone(config)
    model.load_state_dict(state)
    model.eval()
    feature_set = extract_feature_set(_resampled(bundle, config.num_frames), model)
    torch.save(
        {
            "features": {
                name: {"map": fm.map, "pooled": fm.pooled}
                for name, fm in feature_set.features.items()
            },
            "backbone_checksum": feature_set.backbone_checksum,
            "feature_shape": list(model.feature_shape()),
        },
        args.out,
    )
    print(f"extracted {len(feature_set.features)} feature maps -> {args.out}")
    return 0


def _load_feature_set(path):
    from .backbone import FeatureMap

    payload = torch.load(path, weights_only=False)
    features = {
        name: FeatureMap(map=d["map"], pooled=d["pooled"])
        for name, d in payload["features"].items()
    }
    return FeatureSet(
        features=features, backbone_checksum=payload["backbone_checksum"]
    ), tuple(payload["feature_shape"])


def cmd_train_head(args):
    _setup_logging(args.out)
    file_cfg = _load_config_file(args.config)
    feature_set, feature_shape = _load_feature_set(args.features)
    bundle = deserialize_bundle(args.bundle)
    categories = {rec.frame_dir: kinesic_of(rec.label) for rec in bundle.records}
    if args.categories == "present":
        cat_list = sorted({kinesic_of(rec.label) for rec in bundle.records})
    else:
        cat_list = list(KinesicCategory)
    head_config = _build_dataclass(
        HeadConfig, file_cfg.get("head"),
        {"feature_shape": feature_shape, "categories": cat_list},
    )
    train_config = _train_config_from_args(args, file_cfg, "train_head")
    model, report, _ = train_head(
        feature_set, categories, head_config, train_config, args.checkpoint
    )
    out = Path(args.out)
    ckpt = out / "head.pt"
    save_checkpoint(
        ckpt, "head", head_config, model.state_dict(),
        extra={"category_index": [int(c) for c in cat_list],
               "backbone_checksum": feature_set.backbone_checksum},
    )
    with open(out / "report.json", "w") as f:
        json.dump(report.to_dict(), f, indent=1)
    _write_provenance(
        out, "train-head",
        {"head": {"feature_shape": list(feature_shape),
                  "categories": [int(c) for c in cat_list]},
         "train": dataclasses.asdict(train_config)},
        {"features_checksum": _file_checksum(args.features),
         "backbone_checkpoint": _file_checksum(args.checkpoint)},
    )
    print(
        f"head best val accuracy {report.best_val_accuracy:.2f}% "
        f"(epoch {report.best_epoch}) -> {ckpt}"
    )
    return 0


def _append_run_ledger(out_dir, results):
    """Append-only ledger keyed by provenance hash, one JSON line per run."""
    path = Path(out_dir) / "runs.jsonl"
    with open(path, "a") as f:
        for r in results:
            key = hashlib.sha256(
                json.dumps(r.provenance, sort_keys=True, default=str).encode()
            ).hexdigest()[:16]
            f.write(json.dumps({"run": key, **r.to_dict()}, default=str) + "\n")


def cmd_evaluate(args):
    _setup_logging(args.out)
    file_cfg = _load_config_file(args.config)
    bundle = deserialize_bundle(args.bundle)

    def make_spec(subset_id, seed):
        num_classes = len(TABLE2_SUBSETS[subset_id])
        backbone_config = _backbone_config_from_args(args, num_classes, file_cfg)
        return ExperimentSpec(
            subset_id=subset_id,
            seed=seed,
            backbone_config=backbone_config,
            backbone_train=_train_config_from_args(args, file_cfg, "train_backbone"),
            head_train=_train_config_from_args(args, file_cfg, "train_head"),
        )

    if args.subset == "all":
        results, summary = run_table2(
            bundle, seed=args.seed, make_spec=make_spec, out_dir=args.out
        )
    else:
        results = [run_experiment(make_spec(int(args.subset), args.seed), bundle,
                                  out_dir=args.out)]
        summary = None
    render_report(results, args.out, summary=summary)
    _append_run_ledger(args.out, results)
    _write_provenance(
        args.out, "evaluate",
        {"subset": args.subset, "seed": args.seed},
        {"bundle_checksum": bundle_checksum(bundle)},
    )
    for r in results:
        print(
            f"subset {r.subset_id}: backbone {r.stgcn_accuracy:.2f}%  "
            f"head {r.cnn_accuracy:.2f}%"
        )
    if summary:
        print(
            f"backbone non-increasing: {summary['stgcn_non_increasing']}  "
            f"spearman: {summary['spearman_stgcn_cnn']:.3f}"
        )
    return 0


def cmd_report(args):
    _setup_logging(args.out)
    results = []
    for path in sorted(Path(args.results).glob("subset*.json")):
        with open(path) as f:
            results.append(result_from_dict(json.load(f)))
    if not results:
        print(f"no subset*.json results under {args.results}", file=sys.stderr)
        return 1
    summary = trend_summary(results) if len(results) > 1 else None
    files = render_report(results, args.out, summary=summary)
    print(f"wrote {len(files)} report files -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kinesics",
        description="Skeleton-based kinesics recognition pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest raw skeleton CSVs into a bundle")
    p.add_argument("--input", required=True, help="directory of LLIISS_t1_t2.csv files")
    p.add_argument("--output", required=True, help="bundle output directory")
    p.add_argument("--labels", help="comma-separated activity labels to keep")
    p.add_argument("--strict", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--target-frames", type=int)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("synth", help="generate a synthetic bundle")
    p.add_argument("--activities", default="0,1,2,3,4,5,6,7,8,9,10,11")
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    def add_train_flags(p):
        p.add_argument("--config", help="YAML config file; flags override it")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", type=int)

    def add_backbone_flags(p):
        p.add_argument("--frames", type=int)
        p.add_argument("--channels", help="comma-separated stage widths")
        p.add_argument("--partition", choices=("uniform", "distance", "spatial"))

    p = sub.add_parser("train-backbone", help="train the activity backbone")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", help="restrict to these activity labels first")
    add_train_flags(p)
    add_backbone_flags(p)
    p.set_defaults(func=cmd_train_backbone)

    p = sub.add_parser("extract-features", help="extract frozen backbone features")
    p.add_argument("--bundle", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_features)

    p = sub.add_parser("train-head", help="train the kinesics head on features")
    p.add_argument("--features", required=True)
    p.add_argument("--checkpoint", required=True, help="frozen backbone checkpoint")
    p.add_argument("--bundle", required=True, help="bundle supplying the labels")
    p.add_argument("--out", required=True)
    p.add_argument("--categories", choices=("present", "all"), default="present")
    add_train_flags(p)
    p.set_defaults(func=cmd_train_head)

    p = sub.add_parser("evaluate", help="run subset experiments end to end")
    p.add_argument("--bundle", required=True)
    p.add_argument("--subset", required=True,
                   choices=[str(s) for s in sorted(TABLE2_SUBSETS)] + ["all"])
    p.add_argument("--out", required=True)
    add_train_flags(p)
    add_backbone_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-render reports from saved results")
    p.add_argument("--results", required=True, help="directory with subset*.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        log.error("%s failed: %s", args.command, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
