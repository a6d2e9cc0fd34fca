"""Command-line pipeline: synth -> prepare -> train -> evaluate / reconstruct.

Option precedence, lowest to highest: built-in defaults, --config JSON
file, EBM_* environment variables, explicit flags. The effective options
are echoed into the metrics file header for provenance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import data_io, dsp, evaluation, models, training
from .mathcore import Rng

# name -> (type, default); shared across subcommands and the EBM_* env prefix
OPTIONS = {
    "model": (str, "gamma"),
    "hidden": (int, 100),
    "lr": (float, 0.01),
    "batch": (int, 100),
    "epochs": (int, 100),
    "cd_k": (int, 1),
    "eps": (float, 1e-4),
    "win": (int, 256),
    "hop": (int, 64),
    "silence_db": (float, dsp.DEFAULT_SILENCE_DB),
    "seed": (int, 0),
}


def _effective_options(args) -> dict:
    opts = {k: default for k, (_, default) in OPTIONS.items()}
    if getattr(args, "config", None):
        loaded = json.loads(Path(args.config).read_text())
        for k, v in loaded.items():
            if k not in OPTIONS:
                raise ValueError(f"unknown option '{k}' in config file")
            opts[k] = OPTIONS[k][0](v)
    for k, (typ, _) in OPTIONS.items():
        env = os.environ.get(f"EBM_{k.upper()}")
        if env is not None:
            opts[k] = typ(env)
    for k in OPTIONS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    # repeatable --hidden: keep full sweep list, expose first as scalar
    sweep = getattr(args, "hidden", None)
    opts["hidden_sweep"] = sweep if isinstance(sweep, list) and sweep else [opts["hidden"]]
    if isinstance(opts["hidden_sweep"][0], int):
        opts["hidden"] = opts["hidden_sweep"][0]
    return opts


def _norm_kind(model: str) -> str:
    return "gamma-scale" if model == "gamma" else "gaussian-standardize"


def _fit_stats(frames: np.ndarray, model: str) -> training.NormalizationStats:
    if model == "bern":
        # scale into [0, 1] by per-dimension peak so values act as probabilities
        peak = frames.max(axis=0)
        return training.NormalizationStats(
            kind="gamma-scale", per_dim_mean=np.where(peak > 0, peak, 1.0))
    return training.fit_normalization(frames, _norm_kind(model))


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    opts = _effective_options(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = Rng(opts["seed"])
    for i in range(args.clips):
        clip = data_io.synth_speechlike(rng.stream(100 + i), args.seconds, args.rate)
        data_io.write_wav(out_dir / f"clip{i:03d}.wav", clip.samples, args.rate)
    print(f"wrote {args.clips} clip(s) to {out_dir}")
    return 0


def cmd_prepare(args) -> int:
    opts = _effective_options(args)
    clips = []
    if args.wav_dir is not None:
        paths = sorted(Path(args.wav_dir).glob("*.wav"))
        if not paths:
            print(f"error: no .wav files in {args.wav_dir}", file=sys.stderr)
            return 1
        failed = 0
        for p in paths:
            try:
                clips.append(data_io.read_wav(p))
            except (data_io.MalformedHeaderError, data_io.UnsupportedEncodingError,
                    data_io.EmptyAudioError) as err:
                print(f"skipping {p}: {err}", file=sys.stderr)
                failed += 1
        if not clips:
            print(f"error: all {failed} file(s) failed to load", file=sys.stderr)
            return 1
    else:
        rng = Rng(opts["seed"])
        for i in range(args.synth_clips):
            clips.append(data_io.synth_speechlike(
                rng.stream(100 + i), args.synth_seconds, args.rate))

    frames, phases = [], []
    sample_rate = clips[0].sample_rate
    for clip in clips:
        spec = dsp.stft(clip.samples, opts["win"], opts["hop"], clip.sample_rate)
        spec = dsp.discard_silence(spec, opts["silence_db"])
        frames.append(spec.frames)
        phases.append(spec.phase)
    all_frames = dsp.floor_amplitude(np.concatenate(frames))
    cache = dsp.Spectrogram(
        frames=all_frames,
        phase=np.concatenate(phases),
        sample_rate=sample_rate,
        win_len=opts["win"],
        hop=opts["hop"],
    )
    data_io.save_spectrogram_cache(args.cache_out, cache)
    print(f"cached {cache.n_frames} frames x {cache.n_bins} bins -> {args.cache_out}")
    return 0


def _suffixed(path: str, tag: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + tag + p.suffix))


def cmd_train(args) -> int:
    opts = _effective_options(args)
    cache = data_io.load_spectrogram_cache(args.cache)
    sweep = opts["hidden_sweep"]
    for run_idx, hidden in enumerate(sweep):
        tag = "" if len(sweep) == 1 else f".h{hidden}"
        cfg = training.TrainConfig(
            batch_size=opts["batch"],
            learning_rate=opts["lr"],
            epochs=opts["epochs"],
            cd_k=opts["cd_k"],
            hidden_units=hidden,
            seed=opts["seed"] + run_idx,  # stream-separated independent runs
            epsilon=opts["eps"],
        )
        stats = _fit_stats(cache.frames, opts["model"])
        norm = training.apply_normalization(cache.frames, stats)
        params, log = training.train(norm, opts["model"], cfg, norm_stats=stats)
        ckpt = data_io.Checkpoint(
            model_kind=opts["model"], params=params, norm_stats=stats, train_config=cfg)
        ckpt_path = _suffixed(args.checkpoint_out, tag)
        metrics_path = _suffixed(args.metrics_out, tag)
        data_io.save_checkpoint(ckpt_path, ckpt)
        echoed = {k: v for k, v in opts.items() if k != "hidden_sweep"}
        echoed["hidden"] = hidden
        data_io.export_metrics(log, metrics_path, config=echoed)
        final = log[-1] if log else None
        summary = (f"mse_amp={final.mse_amp:.6g} mse_log={final.mse_log:.6g}"
                   if final else "no epochs run")
        print(f"trained {opts['model']} J={hidden}: {summary} -> {ckpt_path}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt = data_io.load_checkpoint(args.checkpoint)
    cache = data_io.load_spectrogram_cache(args.cache)
    if cache.n_bins != ckpt.params.n_visible:
        print(f"error: cache has {cache.n_bins} bins but checkpoint expects "
              f"{ckpt.params.n_visible} visible units", file=sys.stderr)
        return 1
    norm = training.apply_normalization(cache.frames, ckpt.norm_stats) \
        if ckpt.norm_stats is not None else cache.frames
    report = evaluation.evaluate_reconstruction(
        norm, ckpt.params, ckpt.model_kind, ckpt.norm_stats)
    print(f"model          {ckpt.model_kind}")
    print(f"frames         {report.frames}")
    print(f"mse_amp        {report.mse_amp:.10f}")
    print(f"mse_log        {report.mse_log:.10f}")
    print(f"negative_bins  {report.negative_bin_count}")
    if args.report:
        lines = ["frames,mse_amp,mse_log,negative_bins",
                 f"{report.frames},{report.mse_amp:.10f},"
                 f"{report.mse_log:.10f},{report.negative_bin_count}"]
        Path(args.report).write_text("\n".join(lines) + "\n")
    return 0


def cmd_reconstruct(args) -> int:
    ckpt = data_io.load_checkpoint(args.checkpoint)
    clip = data_io.read_wav(args.wav_in)
    opts = _effective_options(args)
    spec = dsp.stft(clip.samples, opts["win"], opts["hop"], clip.sample_rate)
    frames = dsp.floor_amplitude(spec.frames)
    if frames.shape[1] != ckpt.params.n_visible:
        print(f"error: STFT yields {frames.shape[1]} bins but checkpoint expects "
              f"{ckpt.params.n_visible}", file=sys.stderr)
        return 1
    norm = training.apply_normalization(frames, ckpt.norm_stats) \
        if ckpt.norm_stats is not None else frames
    recon = evaluation.reconstruct(norm, ckpt.params, ckpt.model_kind)
    if ckpt.norm_stats is not None:
        recon = training.invert_normalization(recon, ckpt.norm_stats)
    recon = np.maximum(recon, 0.0)  # amplitudes for resynthesis
    out_spec = dsp.Spectrogram(
        frames=recon, phase=spec.phase, sample_rate=clip.sample_rate,
        win_len=opts["win"], hop=opts["hop"])
    signal = dsp.istft(out_spec)
    if signal.size < clip.samples.size:
        signal = np.pad(signal, (0, clip.samples.size - signal.size))
    data_io.write_wav(args.wav_out, signal[: clip.samples.size], clip.sample_rate)
    print(f"reconstructed {args.wav_in} -> {args.wav_out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub):
    sub.add_argument("--config", help="JSON file with option defaults")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--win", type=int)
    sub.add_argument("--hop", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gammarbm",
        description="Gamma-Bernoulli RBM pipeline for amplitude spectrograms")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    s = subs.add_parser("synth", help="generate synthetic speech-like WAV clips")
    s.add_argument("out_dir")
    s.add_argument("--clips", type=int, default=2)
    s.add_argument("--seconds", type=float, default=1.0)
    s.add_argument("--rate", type=int, default=16000)
    _add_common(s)
    s.set_defaults(func=cmd_synth)

    s = subs.add_parser("prepare", help="STFT + silence removal -> spectrogram cache")
    s.add_argument("cache_out")
    s.add_argument("--wav-dir")
    s.add_argument("--synth-clips", type=int, default=2)
    s.add_argument("--synth-seconds", type=float, default=1.0)
    s.add_argument("--rate", type=int, default=16000)
    s.add_argument("--silence-db", dest="silence_db", type=float)
    _add_common(s)
    s.set_defaults(func=cmd_prepare)

    s = subs.add_parser("train", help="train a model on a spectrogram cache")
    s.add_argument("cache")
    s.add_argument("checkpoint_out")
    s.add_argument("metrics_out")
    s.add_argument("--model", choices=("gamma", "gauss", "bern"))
    s.add_argument("--hidden", type=int, action="append",
                   help="hidden units J; repeat for a sweep")
    s.add_argument("--lr", type=float)
    s.add_argument("--batch", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--cd-k", dest="cd_k", type=int)
    s.add_argument("--eps", type=float)
    _add_common(s)
    s.set_defaults(func=cmd_train)

    s = subs.add_parser("evaluate", help="score a checkpoint against a cache")
    s.add_argument("checkpoint")
    s.add_argument("cache")
    s.add_argument("--report", help="write a delimited report to this path")
    _add_common(s)
    s.set_defaults(func=cmd_evaluate)

    s = subs.add_parser("reconstruct", help="reconstruct a WAV through the model")
    s.add_argument("checkpoint")
    s.add_argument("wav_in")
    s.add_argument("wav_out")
    _add_common(s)
    s.set_defaults(func=cmd_reconstruct)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, training.TrainingError) as err:
        print(f"error [{args.subcommand}]: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
