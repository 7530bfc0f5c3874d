"""Command line entry point: ``geninterval <train|probe|trace|bounds|full-run|correlate>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import typing
from dataclasses import fields
from pathlib import Path

from . import network as nw
from . import experiment as ex

log = logging.getLogger("geninterval")


def _parse_value(text, kind):
    if text.lower() in ("none", "null"):
        return None
    if kind is bool:
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise argparse.ArgumentTypeError(f"not a boolean: {text}")
    if kind in (int, float):
        return kind(text)
    if kind is object:  # init_scale: number or "auto"
        return text if text == "auto" else float(text)
    return text


def _field_kind(f):
    hints = typing.get_type_hints(ex.ExperimentConfig)
    t = hints[f.name]
    args = [a for a in typing.get_args(t) if a is not type(None)]
    return args[0] if args else t


def _add_config_flags(p):
    p.add_argument("--config", help="flat JSON config file; flags override its values")
    for f in fields(ex.ExperimentConfig):
        kind = _field_kind(f)
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                       type=lambda s, k=kind: _parse_value(s, k), metavar=f.name.upper())
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="geninterval", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("train", "train a network and write model.npz + epochs.csv"),
        ("probe", "compute generalization intervals for the configured probe families"),
        ("trace", "export network outputs along probes"),
        ("bounds", "norm distribution report and segment crossing audits"),
        ("full-run", "train, probe, trace and audit in one go"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_config_flags(p)
        if name in ("probe", "trace", "bounds"):
            p.add_argument("--checkpoint", help="model file (default: <out>/model.npz)")
    p = sub.add_parser("correlate", help="Pearson r between mean GI and accuracy")
    p.add_argument("--records", required=True, help="epochs.csv with a mean_gi column")
    p.add_argument("--against", choices=["train_acc", "val_acc"], default="val_acc")
    p.add_argument("--config", help=argparse.SUPPRESS)
    return parser


def load_config(args):
    base = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = json.load(fh)
    for f in fields(ex.ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            base[f.name] = v
    return ex.ExperimentConfig.from_dict(base)


def _load_params(cfg, args):
    path = Path(args.checkpoint) if args.checkpoint else Path(cfg.out) / "model.npz"
    params, _ = nw.load_checkpoint(path)
    return params, path


def _finish(out, manifest, t0):
    manifest.wall_clock = time.time() - t0
    manifest.write(out / "manifest.json")
    print(json.dumps({"ok": True, "manifest": str(out / "manifest.json"), **manifest.summary}))


def cmd_train(cfg, args):
    t0 = time.time()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    train, val = ex.prepare_data(cfg)
    params, records = ex.train_model(cfg, train, val)
    ckpt = nw.save_checkpoint(params, out / "model.npz", seed=cfg.seed)
    manifest = ex.RunManifest(cfg.to_dict(), str(ckpt), train_size=len(train))
    manifest.add(out / "epochs.csv", ex.write_records(out / "epochs.csv", records))
    if records:
        manifest.summary = {"epochs": records[-1].epoch, "train_acc": records[-1].train_acc,
                            "val_acc": records[-1].val_acc}
    _finish(out, manifest, t0)


def _stage(cfg, args, stage):
    t0 = time.time()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    train, _ = ex.prepare_data(cfg)
    params, path = _load_params(cfg, args)
    manifest = ex.RunManifest(cfg.to_dict(), str(path), train_size=len(train))
    if stage == "probe":
        _, summary = ex.probe_stage(cfg, params, train, out, manifest)
        manifest.summary = {"gi": summary}
    elif stage == "trace":
        ex.trace_stage(cfg, params, ex.build_probes(cfg, train), out, manifest)
    else:
        recs = ex.bounds_stage(cfg, params, train, out, manifest, checkpoint_id=str(path))
        audits = recs.get("audits", [])
        manifest.summary = {"audits": len(audits), "all_hold": all(a["holds"] for a in audits)}
        if "norm_report" in recs:
            manifest.summary["fraction_within_2x"] = recs["norm_report"]["fraction_within"]
    _finish(out, manifest, t0)


def cmd_full_run(cfg, args):
    m = ex.run_experiment(cfg)
    print(json.dumps({"ok": True, "manifest": str(Path(cfg.out) / "manifest.json"), **m.summary}))


def cmd_correlate(args):
    records = ex.read_records(args.records)
    r = ex.correlation_track(records, args.against)
    print(json.dumps({"ok": True, "r": r, "against": args.against, "checkpoints": len(records)}))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "correlate":
            cmd_correlate(args)
            return 0
        cfg = load_config(args)
        if args.command == "train":
            cmd_train(cfg, args)
        elif args.command == "full-run":
            cmd_full_run(cfg, args)
        else:
            _stage(cfg, args, args.command)
    except Exception as err:  # noqa: BLE001 - reported as a machine-readable line
        print(json.dumps({"ok": False, "error": type(err).__name__, "message": str(err)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
