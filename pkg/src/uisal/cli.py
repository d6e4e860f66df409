"""Command-line interface covering every pipeline stage.

Verbs: synth-data, calibrate, gaze-to-saliency, pretrain-ae, train,
predict, evaluate, crossval, gradcheck, serve. Exit codes: 0 success,
1 usage or configuration error, 2 data error, 3 numeric failure.
Logging verbosity comes from the UISAL_LOG environment variable
(error, info, or debug). Every verb that takes --seed is bitwise
reproducible: rerunning with the same inputs produces identical bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from uisal.checkpoint import (
    load_model,
    load_tensors,
    save_density_maps,
    save_model,
    save_tensors,
)
from uisal.errors import (
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    UisalError,
    UsageError,
)
from uisal.gaze import fit_calibration, screen_ground_truth
from uisal.manifest import (
    load_manifest,
    load_screens,
    manifest_from_screens,
    save_gray16_png,
    save_manifest,
)
from uisal.metrics import crossval, evaluate_dataset
from uisal.model import (
    Autoencoder,
    TrainConfig,
    collect_scale_crops,
    fit_predictor,
    predict_ui,
    pretrain_autoencoder,
)
from uisal.rng import SeededRng
from uisal.synth import SynthConfig, generate_dataset
from uisal.verify import TOLERANCE, run_gradient_battery

log = logging.getLogger("uisal")

_AE_FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4", "w5", "b5")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract wants 1."""

    def error(self, message):
        raise UsageError(message)


def _configure_logging() -> None:
    raw = os.environ.get("UISAL_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if raw not in levels:
        raise UsageError(
            f"UISAL_LOG must be one of error, info, debug; got {raw!r}"
        )
    logging.basicConfig(
        level=levels[raw], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _write_json(path, payload: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def _load_config_dict(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")


def _train_config(args) -> TrainConfig:
    cfg = TrainConfig.from_dict(_load_config_dict(args.config)) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _write_metrics_log(path, histories: dict) -> None:
    """One record per line: phase, epoch, train loss, validation loss."""
    lines = []
    for phase in sorted(histories):
        for line in histories[phase].log_lines():
            lines.append(f"{phase}\t{line}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------


def _cmd_synth_data(args) -> None:
    cfg = SynthConfig.from_dict(_load_config_dict(args.config)) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out = Path(args.out)
    screens, sessions = generate_dataset(cfg)
    doc = manifest_from_screens(screens, out, sessions=sessions)
    path = out / "manifest.json"
    save_manifest(path, doc)
    log.info("wrote %d screens to %s", len(screens), path)
    print(path)


def _cmd_calibrate(args) -> None:
    pairs = load_screens(args.manifest, with_sessions=True)
    if not any(sessions for _, sessions in pairs):
        raise DataError("manifest contains no gaze sessions to calibrate")
    report = {"screens": []}
    for screen, sessions in pairs:
        rows = []
        for sess in sessions:
            model = fit_calibration(sess.calibration_raw, sess.calibration_truth)
            rows.append(
                {
                    "coef": [[float(v) for v in row] for row in model.coef],
                    "covariance": [[float(v) for v in row] for row in model.covariance],
                    "rmse": float(model.rmse),
                    "rmse_uncalibrated": float(model.rmse_uncalibrated),
                    "n_train": model.n_train,
                    "n_test": model.n_test,
                }
            )
        report["screens"].append({"id": screen.screen_id, "sessions": rows})
    _write_json(args.out, report)
    log.info("calibration report written to %s", args.out)


def _cmd_gaze_to_saliency(args) -> None:
    manifest_path = Path(args.manifest)
    doc = load_manifest(manifest_path)
    pairs = load_screens(manifest_path, with_sessions=True)
    out = Path(args.out)
    rows = []
    densities = {}
    by_id = {}
    for screen, sessions in pairs:
        if not sessions:
            rows.append({"id": screen.screen_id, "skipped": "no gaze sessions"})
            continue
        vec, fallback, avg_map = screen_ground_truth(screen, sessions)
        rows.append(
            {
                "id": screen.screen_id,
                "element_saliency": [float(v) for v in vec],
                "uniform_fallback": bool(fallback),
            }
        )
        densities[screen.screen_id] = avg_map.density
        by_id[screen.screen_id] = vec
        save_gray16_png(out / "maps" / f"{screen.screen_id}.png", avg_map.density)
    if not densities:
        raise DataError("manifest contains no gaze sessions to process")
    save_density_maps(out / "densities.bin", densities, {"truncate_sigmas": 4.0})
    _write_json(out / "saliency.json", {"screens": rows})
    # Re-emit the manifest with derived ground truth so it can feed train.
    for entry in doc["screens"]:
        sid = str(entry["id"])
        if sid in by_id:
            entry["gt_element_saliency"] = [float(v) for v in by_id[sid]]
        src = (manifest_path.parent / entry["image"]).resolve()
        entry["image"] = os.path.relpath(src, out.resolve())
    save_manifest(out / "manifest.json", doc)
    log.info("gaze saliency for %d screens written under %s", len(densities), out)


def _cmd_pretrain_ae(args) -> None:
    cfg = _train_config(args)
    screens = load_screens(args.manifest)
    per_scale = collect_scale_crops(screens, cfg)
    tensors = {}
    histories = {}
    for s in range(3):
        ae, hist = pretrain_autoencoder(per_scale[s], cfg, stream=f"scale{s}")
        histories[f"ae{s}"] = hist
        for field, p in zip(_AE_FIELDS, ae.params()):
            tensors[f"enc{s}.{field}"] = p
        log.info(
            "scale %d: %d epochs, best val %.6g at epoch %d",
            s, len(hist.train_loss), min(hist.val_loss), hist.best_epoch,
        )
    metadata = {
        "config": cfg.to_dict(),
        "history": {
            name: {
                "train_loss": hist.train_loss,
                "val_loss": hist.val_loss,
                "best_epoch": hist.best_epoch,
            }
            for name, hist in histories.items()
        },
    }
    save_tensors(args.out, tensors, metadata)
    _write_metrics_log(str(args.out) + ".log", histories)
    log.info("autoencoder checkpoint written to %s", args.out)


def _load_pretrained_encoders(path) -> list[Autoencoder]:
    tensors, _ = load_tensors(path)
    encoders = []
    for s in range(3):
        fields = []
        for field in _AE_FIELDS:
            name = f"enc{s}.{field}"
            if name not in tensors:
                raise DataError(f"autoencoder checkpoint is missing tensor {name}")
            fields.append(tensors[name])
        encoders.append(Autoencoder(*fields))
    return encoders


def _cmd_train(args) -> None:
    cfg = _train_config(args)
    screens = load_screens(args.manifest)
    encoders = _load_pretrained_encoders(args.ae) if args.ae else None
    model, histories = fit_predictor(screens, cfg, encoders=encoders)
    save_model(args.out, model, config=cfg)
    _write_metrics_log(str(args.out) + ".log", histories)
    head = histories["head"]
    log.info(
        "trained on %d screens; best val %.6g at epoch %d; model at %s",
        len(screens), min(head.val_loss), head.best_epoch, args.out,
    )


def _cmd_predict(args) -> None:
    model, _ = load_model(args.checkpoint)
    screens = load_screens(args.manifest)
    payload = {"screens": []}
    for screen in screens:
        vec = predict_ui(model, screen)
        payload["screens"].append(
            {
                "id": screen.screen_id,
                "saliency": [
                    {"id": el.id, "value": float(v)}
                    for el, v in zip(screen.elements, vec)
                ],
            }
        )
    _write_json(args.out, payload)
    log.info("predictions for %d screens written to %s", len(screens), args.out)


def _cmd_evaluate(args) -> None:
    model, _ = load_model(args.checkpoint)
    screens = load_screens(args.manifest)
    report = evaluate_dataset(lambda s: predict_ui(model, s), screens)
    _write_json(args.out, report.to_dict())
    mean = report.mean
    log.info(
        "evaluated %d screens: auc %.4f cc %.4f kl %.4f",
        len(report.per_screen), mean["auc"], mean["cc"], mean["kl"],
    )


def _cmd_crossval(args) -> None:
    cfg = _train_config(args)
    screens = load_screens(args.manifest)

    def train_fn(train_screens, fold):
        fold_seed = int(SeededRng(cfg.seed).derive(f"fold:{fold}").next_u64(1)[0])
        fold_cfg = dataclasses.replace(cfg, seed=fold_seed)
        model, _ = fit_predictor(train_screens, fold_cfg)
        return lambda s: predict_ui(model, s)

    result = crossval(screens, train_fn, seed=cfg.seed, k=args.folds)
    _write_json(args.out, result)
    pooled = result["pooled_mean"]
    log.info(
        "%d-fold crossval on %d screens: auc %.4f cc %.4f kl %.4f",
        args.folds, len(screens), pooled["auc"], pooled["cc"], pooled["kl"],
    )


def _cmd_gradcheck(args) -> None:
    result = run_gradient_battery(n_seeds=args.seeds, base_seed=args.seed or 0)
    for name in sorted(result["components"]):
        print(f"{name}\t{result['components'][name]:.6e}")
    print(f"worst\t{result['worst']:.6e}")
    if args.out:
        _write_json(args.out, result)
    if result["worst"] >= TOLERANCE:
        raise NumericError(
            f"gradient check failed: worst rel err {result['worst']:.3e} "
            f">= {TOLERANCE:g}"
        )
    log.info("gradient battery passed (worst %.3e)", result["worst"])


def _cmd_serve(args) -> None:
    from uisal.service import run_server

    run_server(args.checkpoint, host=args.host, port=args.port)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="uisal", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def add(name, handler, help_text, *, manifest=False, checkpoint=False,
            seed=False, config=False, out=False):
        p = sub.add_parser(name, help=help_text)
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset manifest JSON")
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="model checkpoint file")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override config seed")
        if config:
            p.add_argument("--config", default=None, help="JSON config file")
        if out:
            p.add_argument("--out", required=True, help="output file or directory")
        p.set_defaults(handler=handler)
        return p

    add("synth-data", _cmd_synth_data, "generate a synthetic dataset",
        seed=True, config=True, out=True)
    add("calibrate", _cmd_calibrate, "fit per-session gaze calibrations",
        manifest=True, out=True)
    add("gaze-to-saliency", _cmd_gaze_to_saliency,
        "turn gaze sessions into saliency maps and element ground truth",
        manifest=True, out=True)
    add("pretrain-ae", _cmd_pretrain_ae, "pretrain the three autoencoders",
        manifest=True, seed=True, config=True, out=True)
    p_train = add("train", _cmd_train, "train the full saliency model",
                  manifest=True, seed=True, config=True, out=True)
    p_train.add_argument("--ae", default=None,
                         help="start from a pretrain-ae checkpoint instead of pretraining")
    add("predict", _cmd_predict, "predict element saliency for every screen",
        manifest=True, checkpoint=True, out=True)
    add("evaluate", _cmd_evaluate, "score predictions against ground truth",
        manifest=True, checkpoint=True, out=True)
    p_cv = add("crossval", _cmd_crossval, "k-fold cross-validation",
               manifest=True, seed=True, config=True, out=True)
    p_cv.add_argument("--folds", type=int, default=4, help="number of folds")
    p_gc = add("gradcheck", _cmd_gradcheck, "finite-difference gradient battery",
               seed=True)
    p_gc.add_argument("--seeds", type=int, default=20, help="number of seeds")
    p_gc.add_argument("--out", default=None, help="optional JSON result path")
    p_serve = add("serve", _cmd_serve, "run the prediction HTTP service",
                  checkpoint=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8750)
    return parser


def main(argv=None) -> int:
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        args.handler(args)
        return 0
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except UisalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
