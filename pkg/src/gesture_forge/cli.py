"""gesture-forge command line.

Exit status: 0 on success, 1 on usage errors, 2 on data or model errors.
GESTURE_FORGE_SEED supplies the seed of every randomized command unless
``--seed`` is given explicitly.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import weights
from .datagen import (
    M_DEFAULT,
    MODES,
    NoiseSpec,
    frames_from_csv,
    frames_to_csv,
    sampleset_from_csv,
    sampleset_to_csv,
    sequence_to_arrays,
    synth_dataset,
    validate_dataset,
)
from .depth import (
    Baseline,
    DepthMask,
    baseline_from,
    encode_frame,
    fit_skeleton,
    gravity_center,
    segment_prospects,
)
from .errors import GestureError, RefusedTooOccluded
from .experiments import (
    Pipeline,
    RunConfig,
    Trial,
    canonical_templates,
    fully_occluded,
    inject_occlusion,
    match_trial,
    run_accuracy,
    sweep_frames,
    sweep_occlusion,
    templates_from_samples,
    trial_frames,
    trial_seed,
)
from .gan import GanModel, gan_sample, gan_train
from .kinematics import GESTURE_NAMES, PALM_CENTER, REST_POSE
from .pgm import read_pgm
from .predictor import PredictorModel, TrainConfig, train_predictor

log = logging.getLogger("gesture_forge")

SEED_ENV = "GESTURE_FORGE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --- argument helpers ---------------------------------------------------------

def _int_range(text: str) -> list:
    """'21-35' or '0,3,5' or '7'."""
    try:
        if "-" in text.strip("-"):
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}")


def _gestures(text: str) -> list:
    names = [g.strip() for g in text.split(",") if g.strip()]
    if text.strip() == "all":
        return list(GESTURE_NAMES)
    bad = [g for g in names if g not in GESTURE_NAMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown gesture(s): {', '.join(bad) or text!r}")
    return names


def _pixel(text: str) -> tuple:
    try:
        r, c = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected ROW,COL")
    return r, c


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return parse


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")


@contextlib.contextmanager
def _out(path, binary=False):
    if path in (None, "-"):
        yield sys.stdout.buffer if binary else sys.stdout
    else:
        with open(path, "wb" if binary else "w", newline=None if binary else "") as fh:
            yield fh


def _read_samples(path, mode="vector"):
    with open(path, newline="") as fh:
        return sampleset_from_csv(fh, mode)


def _load(path, kind):
    model = weights.load(path)
    if not isinstance(model, kind):
        raise ValueError(f"{path} does not hold a {kind.__name__}")
    return model


def _templates(args, m):
    if getattr(args, "templates", None):
        data = _read_samples(args.templates)
        if data.m != m:
            raise ValueError(f"templates have {data.m} frames, expected M={m}")
        return templates_from_samples(data)
    return canonical_templates(m)


def _config(args, **extra) -> RunConfig:
    return RunConfig(m=args.m, trials=args.trials, vector_noise=args.vector_noise,
                     angle_noise=args.angle_noise, jitter=args.jitter,
                     rng_seed=_seed(args), **extra)


def _pipeline(args, m) -> Pipeline:
    model = _load(args.model, PredictorModel) if getattr(args, "model", None) else None
    return Pipeline(normalize=args.normalize, predictor=model, fusion=args.fusion,
                    templates=_templates(args, m))


def _check_plot(args):
    if args.plot and args.output in (None, "-"):
        raise UsageError("--plot needs --output so the figure can sit next to the CSV")


def _write_report(report, args, xlabel):
    with _out(args.output) as fh:
        fh.write(report.to_csv())
    if args.plot:
        from .plotting import plot_sweep

        png = os.path.splitext(args.output)[0] + ".png"
        plot_sweep(report, png, xlabel=xlabel)
        log.info("wrote %s", png)


# --- commands -------------------------------------------------------------------

def cmd_synth(args):
    data = synth_dataset(args.n, _seed(args), args.jitter, args.m, args.gesture)
    with _out(args.output) as fh:
        sampleset_to_csv(data, fh)


def cmd_stream(args):
    cfg = RunConfig(m=args.m, frames=args.frames, jitter=args.jitter, rng_seed=_seed(args))
    frames = trial_frames(args.gesture, args.trial, cfg)
    if args.occlusion:
        conf = np.array([f.confidence for f in frames])
        conf, _ = inject_occlusion(conf, args.occlusion,
                                   rng_seed=trial_seed(cfg.rng_seed, args.gesture, args.trial),
                                   window=min(args.m, len(conf)))
        frames = [replace(f, confidence=c) for f, c in zip(frames, conf)]
    with _out(args.output) as fh:
        frames_to_csv(frames, fh)


def cmd_gan_train(args):
    seeds = _read_samples(args.data, args.mode)
    amp = args.noise if args.noise is not None else NoiseSpec.default(args.mode).amplitude
    model = gan_train(seeds, NoiseSpec(amp, args.mode), args.epochs, args.lr, _seed(args),
                      args.batch, args.hidden,
                      log=lambda e, d, g: log.info("epoch %d  D %.6f  G %.6f", e, d, g))
    with _out(args.output) as fh:
        fh.write(weights.dumps(weights.gan_to_dict(model)))


def cmd_gan_gen(args):
    model = _load(args.model, GanModel)
    partner = _load(args.partner, GanModel) if args.partner else None
    if partner is not None and partner.mode == model.mode:
        raise ValueError("the partner model must cover the other channel block")
    seeds = _read_samples(args.data, model.mode)
    data = gan_sample(model, seeds, n=args.n, rng_seed=_seed(args), partner=partner)
    with _out(args.output) as fh:
        sampleset_to_csv(data, fh)


def cmd_validate(args):
    data = _read_samples(args.data, args.mode or "vector")
    out, report = validate_dataset(data, args.mode)
    with _out(args.output) as fh:
        sampleset_to_csv(out, fh)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)


def cmd_gru_train(args):
    data = _read_samples(args.data)
    cfg = TrainConfig(lr=args.lr, epochs=args.epochs, hidden=args.hidden, batch=args.batch,
                      rng_seed=_seed(args))
    model = train_predictor(data, cfg, log=lambda e, l: log.info("epoch %d  loss %.6f", e, l))
    with _out(args.output) as fh:
        fh.write(weights.dumps(weights.predictor_to_dict(model)))


def _skeleton(baseline: Baseline, elbow) -> np.ndarray:
    """Rest posture laid along the elbow -> palm-center axis, in pixels."""
    pose = REST_POSE - PALM_CENTER
    up = np.array([baseline.center[1] - elbow[1], elbow[0] - baseline.center[0]])
    theta = math.atan2(up[0], up[1])  # angle from image-up, clockwise positive
    c, s = math.cos(theta), math.sin(theta)
    xy = np.stack([c * pose[:, 0] + s * pose[:, 1], -s * pose[:, 0] + c * pose[:, 1]], axis=1)
    return fit_skeleton(xy, baseline)


def cmd_encode_depth(args):
    frames = []
    for t, path in enumerate(args.inputs):
        mask = DepthMask(read_pgm(path))
        center = gravity_center(mask)
        baseline = baseline_from(center, args.elbow)
        regions = segment_prospects(mask, args.threshold)
        frame, _ = encode_frame(regions, baseline, _skeleton(baseline, args.elbow), t)
        frames.append(frame)
    with _out(args.output) as fh:
        frames_to_csv(frames, fh)


def cmd_recognize(args):
    with open(args.stream, newline="") as fh:
        frames = frames_from_csv(fh)
    if not frames:
        raise ValueError("the stream holds no frames")
    values, conf = sequence_to_arrays(frames)
    trial = Trial("", values, conf, args.frames or args.m, fully_occluded(conf))
    try:
        result = match_trial(trial, _pipeline(args, args.m), args.m)
    except RefusedTooOccluded as exc:
        doc = {"gesture": None, "refused": True, "occluded_frames": exc.occluded, "limit": exc.limit}
        with _out(args.output) as fh:
            fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return 2
    doc = result.to_dict()
    doc["refused"] = False
    with _out(args.output) as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_accuracy(args):
    _check_plot(args)
    cfg = _config(args, frames=args.frames, occlusion=args.occlusion)
    report = run_accuracy(cfg, _pipeline(args, args.m), args.gestures, condition=args.frames)
    report.condition_name = "frames"
    _write_report(report, args, "actual frames")


def cmd_sweep_frames(args):
    _check_plot(args)
    cfg = _config(args)
    report = sweep_frames(cfg, _pipeline(args, args.m), args.gestures, args.lengths)
    _write_report(report, args, "actual frames")


def cmd_sweep_occlusion(args):
    _check_plot(args)
    cfg = _config(args)
    if max(args.counts) > min(cfg.m, 15) or min(args.counts) < 0:
        raise UsageError("occlusion counts must lie in 0..15")
    report = sweep_occlusion(cfg, _pipeline(args, args.m), args.gestures, args.counts)
    _write_report(report, args, "occluded frames")


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gesture-forge", description="Synthetic hand-gesture recognition toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(sp, seed=True, out=True):
        if seed:
            sp.add_argument("--seed", type=int, default=None, help=f"rng seed (default ${SEED_ENV} or 0)")
        if out:
            sp.add_argument("-o", "--output", default=None, help="output file (default stdout)")
        sp.add_argument("--m", type=_positive(int), default=M_DEFAULT, help="template length M")

    def recognition(sp):
        sp.add_argument("--model", help="predictor weights for infilling occluded keypoints")
        sp.add_argument("--templates", help="SampleSet CSV; per-gesture means become the templates")
        sp.add_argument("--normalize", action="store_true", help="length-normalize against each template")
        sp.add_argument("--fusion", choices=("min", "sum"), default="min")

    def trials(sp, gestures="all"):
        recognition(sp)
        sp.add_argument("--gestures", type=_gestures, default=_gestures(gestures))
        sp.add_argument("--trials", type=_positive(int), default=100)
        sp.add_argument("--vector-noise", type=float, default=1.0)
        sp.add_argument("--angle-noise", type=float, default=5.0)
        sp.add_argument("--jitter", type=float, default=1.0)
        sp.add_argument("--plot", action="store_true", help="also write a PNG next to the CSV")

    sp = sub.add_parser("synth", help="emit a synthetic SampleSet CSV")
    common(sp)
    sp.add_argument("--gesture", type=_gestures, default=list(GESTURE_NAMES))
    sp.add_argument("--n", type=_positive(int), default=50, help="samples per gesture")
    sp.add_argument("--jitter", type=float, default=1.0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("stream", help="emit one test stream (lead-in + gesture) as frame CSV")
    common(sp)
    sp.add_argument("--gesture", required=True, choices=GESTURE_NAMES)
    sp.add_argument("--trial", type=int, default=0)
    sp.add_argument("--frames", type=_positive(int), default=M_DEFAULT, help="actual gesture frames")
    sp.add_argument("--occlusion", type=int, default=0, help="fully occluded frames among the newest M")
    sp.add_argument("--jitter", type=float, default=1.0)
    sp.set_defaults(func=cmd_stream)

    sp = sub.add_parser("gan-train", help="train a generator/discriminator pair on seed samples")
    common(sp)
    sp.add_argument("--data", required=True, help="seed SampleSet CSV")
    sp.add_argument("--mode", choices=MODES, default="vector")
    sp.add_argument("--noise", type=float, default=None, help="amplitude (default 1 vector / 5 angle)")
    sp.add_argument("--epochs", type=_positive(int), default=5)
    sp.add_argument("--lr", type=_positive(float), default=1e-3)
    sp.add_argument("--batch", type=_positive(int), default=8)
    sp.add_argument("--hidden", type=_positive(int), default=32)
    sp.set_defaults(func=cmd_gan_train)

    sp = sub.add_parser("gan-gen", help="generate amplified samples")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--partner", help="model for the other channel block")
    sp.add_argument("--data", required=True, help="seed SampleSet CSV")
    sp.add_argument("--n", type=_positive(int), default=5000)
    sp.set_defaults(func=cmd_gan_gen)

    sp = sub.add_parser("validate", help="nearest-center relabeling of a SampleSet")
    common(sp, seed=False)
    sp.add_argument("--data", required=True)
    sp.add_argument("--mode", choices=MODES, default="vector", help="channel block compared when relabeling")
    sp.add_argument("--report", help="write the per-gesture change counts here (default stderr)")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("gru-train", help="train the keypoint predictor")
    common(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--epochs", type=_positive(int), default=30)
    sp.add_argument("--lr", type=_positive(float), default=0.01)
    sp.add_argument("--hidden", type=_positive(int), default=16)
    sp.add_argument("--batch", type=_positive(int), default=32)
    sp.set_defaults(func=cmd_gru_train)

    sp = sub.add_parser("encode-depth", help="PGM depth masks -> frame CSV")
    common(sp, seed=False)
    sp.add_argument("inputs", nargs="+", help="PGM files in time order")
    sp.add_argument("--elbow", type=_pixel, required=True, help="elbow pixel ROW,COL")
    sp.add_argument("--threshold", type=float, default=150.0, help="prospect depth threshold")
    sp.set_defaults(func=cmd_encode_depth)

    sp = sub.add_parser("recognize", help="frame CSV stream -> MatchResult JSON")
    common(sp, seed=False)
    recognition(sp)
    sp.add_argument("stream")
    sp.add_argument("--frames", type=_positive(int), default=None,
                    help="frames the gesture occupies at the end of the stream (default M)")
    sp.set_defaults(func=cmd_recognize)

    sp = sub.add_parser("accuracy", help="per-gesture accuracy under one condition")
    common(sp)
    trials(sp)
    sp.add_argument("--frames", type=_positive(int), default=M_DEFAULT)
    sp.add_argument("--occlusion", type=int, default=0)
    sp.set_defaults(func=cmd_accuracy)

    sp = sub.add_parser("sweep-frames", help="accuracy against actual gesture length")
    common(sp)
    trials(sp, "push,hold,rotate-left")
    sp.add_argument("--lengths", type=_int_range, default=list(range(21, 36)))
    sp.set_defaults(func=cmd_sweep_frames)

    sp = sub.add_parser("sweep-occlusion", help="accuracy against occluded frame count")
    common(sp)
    trials(sp, "push")
    sp.add_argument("--counts", type=_int_range, default=list(range(0, 16)))
    sp.set_defaults(func=cmd_sweep_occlusion)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args) or 0
    except UsageError as exc:
        sys.stderr.write(f"gesture-forge: error: {exc}\n")
        return 1
    except (GestureError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"gesture-forge: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
