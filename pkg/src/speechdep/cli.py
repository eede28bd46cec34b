"""Command-line pipeline: synth -> featurize -> train -> evaluate / curve.

Configuration is a flat, typed key=value file with section prefixes
(``train.epochs = 50``). Precedence: built-in defaults, then --config file,
then repeatable --set key=value flags, then --seed. Unknown keys are
rejected. Every command echoes its resolved configuration and a
machine-readable run summary into the output directory; reruns with the
same inputs and --jobs 1 reproduce every output byte for byte (nothing
written depends on wall-clock time).

Failures exit nonzero after printing one line to stderr of the form
``error:<category>: <message>`` with category in
{usage, config, io, data, train}.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import (
    CorpusManifest,
    WavError,
    load_manifest,
    load_wav,
    save_manifest,
    synth_corpus,
    trim_silence,
    write_wav,
)
from .ensemble import (
    EnsembleConfig,
    f1_vs_m_experiment,
    fuse,
    write_predictions_csv,
)
from .evaluation import (
    speaker_labels,
    confusion,
    metrics,
    prediction_set_for,
    write_metrics_csv,
)
from .features import StftConfig, featurize_raw, read_feature_cache, write_feature_cache
from .network import NetworkConfig, load_model, save_model
from .sampling import SampleCrop, crop, materialize_eval_set, materialize_training_set, plan_balanced
from .trainer import TrainConfig, TrainingDivergedError, train, write_history_csv

# key -> (type, default); defaults follow the best-performing configuration:
# 128 filters, pool kernel 5 / stride 4 / pad 4, 128 hidden units, 50 epochs,
# batch 80, 50 machines fused with method 1.
CONFIG_SCHEMA: dict[str, tuple[type, object]] = {
    "seed": (int, 0),
    "synth.speakers_per_class": (int, 31),
    "synth.test_speakers_per_class": (int, 10),
    "synth.duration_s": (float, 48.0),
    "synth.sample_rate": (int, 16000),
    "trim.frame_s": (float, 0.1),
    "trim.floor_db": (float, -60.0),
    "sampling.crop_s": (float, 4.0),
    "sampling.eval_cap": (int, 89),
    "stft.window_s": (float, 0.064),
    "stft.hop_s": (float, 0.032),
    "stft.n_fft": (int, 1024),
    "network.filters": (int, 128),
    "network.pool_kernel": (int, 5),
    "network.pool_stride": (int, 4),
    "network.pool_pad": (int, 4),
    "network.hidden": (int, 128),
    "train.epochs": (int, 50),
    "train.batch_size": (int, 80),
    "train.lr_start": (float, 1.0),
    "train.lr_end": (float, 0.01),
    "train.rho": (float, 0.95),
    "train.eps": (float, 1e-6),
    "ensemble.machines": (int, 50),
    "ensemble.method": (int, 1),
    "ensemble.threshold": (float, 0.5),
    "ensemble.tie_seed": (int, 0),
    "curve.m_values": (str, ""),  # comma-separated; empty means 1..pool size
    "curve.n_combinations": (int, 200),
}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


@dataclass
class RunConfig:
    values: dict[str, object]

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({k: default for k, (_, default) in CONFIG_SCHEMA.items()})

    def set(self, key: str, raw: str) -> None:
        if key not in CONFIG_SCHEMA:
            raise CliError("config", f"unknown configuration key {key!r}")
        kind = CONFIG_SCHEMA[key][0]
        try:
            self.values[key] = kind(raw) if kind is not str else raw.strip()
        except ValueError:
            raise CliError("config", f"{key} expects {kind.__name__}, got {raw!r}") from None

    def load_file(self, path: Path) -> None:
        if not path.is_file():
            raise CliError("io", f"config file not found: {path}")
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise CliError("config", f"{path}:{lineno}: expected key = value, got {line!r}")
            key, _, raw = stripped.partition("=")
            self.set(key.strip(), raw.strip())

    def __getitem__(self, key: str):
        return self.values[key]

    def echo_text(self) -> str:
        lines = [f"{key} = {self.values[key]}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"

    def stft_config(self) -> StftConfig:
        return self._build(
            StftConfig,
            window_s=self["stft.window_s"],
            hop_s=self["stft.hop_s"],
            n_fft=self["stft.n_fft"],
        )

    def network_config(self, freq_bins: int, time_steps: int) -> NetworkConfig:
        return self._build(
            NetworkConfig,
            freq_bins=freq_bins,
            time_steps=time_steps,
            filters=self["network.filters"],
            pool_kernel=self["network.pool_kernel"],
            pool_stride=self["network.pool_stride"],
            pool_pad=self["network.pool_pad"],
            hidden=self["network.hidden"],
        )

    def train_config(self) -> TrainConfig:
        return self._build(
            TrainConfig,
            epochs=self["train.epochs"],
            batch_size=self["train.batch_size"],
            lr_start=self["train.lr_start"],
            lr_end=self["train.lr_end"],
            rho=self["train.rho"],
            eps=self["train.eps"],
            seed=self["seed"],
        )

    def ensemble_config(self, machines: int | None = None) -> EnsembleConfig:
        return self._build(
            EnsembleConfig,
            machines=self["ensemble.machines"] if machines is None else machines,
            method=self["ensemble.method"],
            threshold=self["ensemble.threshold"],
            tie_seed=self["ensemble.tie_seed"],
        )

    @staticmethod
    def _build(factory, **kwargs):
        try:
            return factory(**kwargs)
        except ValueError as exc:
            raise CliError("config", str(exc)) from None


def _resolve_config(args) -> RunConfig:
    cfg = RunConfig.defaults()
    if args.config:
        cfg.load_file(Path(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise CliError("usage", f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        cfg.set(key.strip(), raw.strip())
    if args.seed is not None:
        cfg.values["seed"] = int(args.seed)
    return cfg


def _write_run_artifacts(out_dir: Path, command: str, cfg: RunConfig, summary: dict) -> None:
    (out_dir / "config_echo.cfg").write_text(cfg.echo_text())
    payload = {"command": command, "config": dict(sorted(cfg.values.items())), "summary": summary}
    (out_dir / "run_summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- synth

def cmd_synth(cfg: RunConfig, out_dir: Path, jobs: int) -> dict:
    del jobs  # one rng stream feeds all clips; synthesis is inherently sequential
    seed = cfg["seed"]
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    n_wav = 0
    for split, per_class, split_seed in (
        ("train", cfg["synth.speakers_per_class"], seed),
        ("test", cfg["synth.test_speakers_per_class"], seed + 1),
    ):
        manifest, clips = synth_corpus(
            per_class,
            cfg["synth.duration_s"],
            sample_rate=cfg["synth.sample_rate"],
            seed=split_seed,
            split=split,
        )
        for entry, clip in zip(manifest.entries, clips):
            entry.path = f"wav/{entry.speaker_id}.wav"
            write_wav(out_dir / entry.path, clip)
            entries.append(entry)
            n_wav += 1
    save_manifest(out_dir / "manifest.csv", CorpusManifest(entries))
    return {
        "manifest": "manifest.csv",
        "train_speakers": 2 * cfg["synth.speakers_per_class"],
        "test_speakers": 2 * cfg["synth.test_speakers_per_class"],
        "wav_files": n_wav,
    }


# ------------------------------------------------------------ featurize

def _crop_spans(entry_path: Path, cfg_values: dict) -> list[int]:
    """Crop indices available for one clip after silence trimming."""
    clip = trim_silence(
        load_wav(entry_path), cfg_values["trim.frame_s"], cfg_values["trim.floor_db"]
    )
    crop_len = int(round(cfg_values["sampling.crop_s"] * clip.sample_rate))
    return list(range(clip.samples.size // crop_len))


def _featurize_speaker(task) -> tuple[str, list]:
    """Worker: features for the wanted crop indices of one speaker's clip."""
    path, speaker_id, label, wanted, cfg_values = task
    clip = load_wav(path)
    clip.speaker_id, clip.label = speaker_id, label
    clip = trim_silence(clip, cfg_values["trim.frame_s"], cfg_values["trim.floor_db"])
    stft_cfg = StftConfig(
        window_s=cfg_values["stft.window_s"],
        hop_s=cfg_values["stft.hop_s"],
        n_fft=cfg_values["stft.n_fft"],
    )
    wanted = set(wanted)
    feats = [
        featurize_raw(c, clip.sample_rate, stft_cfg)  # the cache normalizes on read
        for c in crop(clip, cfg_values["sampling.crop_s"])
        if c.crop_index in wanted
    ]
    return speaker_id, feats


def _featurize_split(entries, manifest_dir: Path, ordered_keys, cfg: RunConfig, jobs: int):
    """Features for (speaker, crop_index) keys, returned in the given order."""
    wanted: dict[str, set[int]] = {}
    for speaker_id, crop_index in ordered_keys:
        wanted.setdefault(speaker_id, set()).add(crop_index)
    tasks = [
        (str(manifest_dir / e.path), e.speaker_id, e.label, sorted(wanted[e.speaker_id]), cfg.values)
        for e in entries
        if e.speaker_id in wanted
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_featurize_speaker, tasks))
    else:
        results = dict(map(_featurize_speaker, tasks))
    by_key = {(s, f.crop_index): f for s, feats in results.items() for f in feats}
    return [by_key[key] for key in ordered_keys]


def cmd_featurize(cfg: RunConfig, manifest_path: Path, out_dir: Path, jobs: int) -> dict:
    if not manifest_path.is_file():
        raise CliError("io", f"manifest not found: {manifest_path}")
    manifest = load_manifest(manifest_path)
    if not manifest.entries:
        raise CliError("data", f"manifest {manifest_path} lists no clips")
    manifest_dir = manifest_path.parent
    seed = cfg["seed"]

    train_entries = manifest.split_entries("train")
    test_entries = manifest.split_entries("test")
    if not train_entries:
        raise CliError("data", f"manifest {manifest_path} has no train split")

    counts = {}
    spans = {}
    for e in train_entries + test_entries:
        indices = _crop_spans(manifest_dir / e.path, cfg.values)
        counts[e.speaker_id] = len(indices)
        spans[e.speaker_id] = indices

    labels = {e.speaker_id: e.label for e in manifest.entries}
    plan = plan_balanced(
        {e.speaker_id: counts[e.speaker_id] for e in train_entries},
        labels,
        seed=seed,
    )
    # placeholder crops carry only identity; selection never looks at samples
    train_placeholders = [
        SampleCrop(e.speaker_id, i, np.empty(0), e.label)
        for e in train_entries
        for i in spans[e.speaker_id]
    ]
    train_order = [
        (c.speaker_id, c.crop_index)
        for c in materialize_training_set(plan, train_placeholders, seed=seed + 1)
    ]
    test_order = [
        (c.speaker_id, c.crop_index)
        for c in materialize_eval_set(
            [
                SampleCrop(e.speaker_id, i, np.empty(0), e.label)
                for e in test_entries
                for i in spans[e.speaker_id]
            ],
            cap=cfg["sampling.eval_cap"],
        )
    ]

    train_features = _featurize_split(train_entries, manifest_dir, train_order, cfg, jobs)
    write_feature_cache(out_dir / "train.lspg", train_features)
    summary = {
        "train_cache": "train.lspg",
        "train_crops": len(train_features),
        "feature_shape": list(train_features[0].shape),
        "plan": {
            "crops_per_speaker": plan.crops_per_speaker,
            "speakers_per_class": plan.speakers_per_class,
            "total": plan.total_samples,
        },
    }
    if test_entries:
        test_features = _featurize_split(test_entries, manifest_dir, test_order, cfg, jobs)
        write_feature_cache(out_dir / "test.lspg", test_features)
        summary["test_cache"] = "test.lspg"
        summary["test_crops"] = len(test_features)
    return summary


# ---------------------------------------------------------------- train

def _train_machine(task) -> tuple[int, str, float]:
    """Worker: train machine m from the cache and write its artifacts."""
    cache_path, out_dir, cfg_values, machine = task
    cfg = RunConfig(cfg_values)
    features = read_feature_cache(cache_path)
    net_cfg = cfg.network_config(*features[0].shape)
    train_cfg = cfg.train_config()
    params, history = train(features, net_cfg, train_cfg, init_seed=train_cfg.seed + machine)
    model_name = f"model_{machine:03d}.sdm"
    save_model(Path(out_dir) / model_name, net_cfg, params)
    write_history_csv(Path(out_dir) / f"history_{machine:03d}.csv", history)
    return machine, model_name, history.train_loss[-1]


def cmd_train(cfg: RunConfig, cache_path: Path, out_dir: Path, jobs: int) -> dict:
    if not cache_path.is_file():
        raise CliError("io", f"feature cache not found: {cache_path}")
    machines = cfg["ensemble.machines"]
    tasks = [(str(cache_path), str(out_dir), cfg.values, m) for m in range(machines)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_train_machine, tasks))
    else:
        features = read_feature_cache(cache_path)
        net_cfg = cfg.network_config(*features[0].shape)
        train_cfg = cfg.train_config()
        outcomes = []
        for m in range(machines):
            params, history = train(features, net_cfg, train_cfg, init_seed=train_cfg.seed + m)
            model_name = f"model_{m:03d}.sdm"
            save_model(out_dir / model_name, net_cfg, params)
            write_history_csv(out_dir / f"history_{m:03d}.csv", history)
            outcomes.append((m, model_name, history.train_loss[-1]))
    outcomes.sort()
    return {
        "machines": machines,
        "models": [name for _, name, _ in outcomes],
        "final_train_loss": [loss for _, _, loss in outcomes],
    }


# ------------------------------------------------------------- evaluate

def _load_pool(models_dir: Path, cache_path: Path):
    if not cache_path.is_file():
        raise CliError("io", f"feature cache not found: {cache_path}")
    model_paths = sorted(models_dir.glob("model_*.sdm")) if models_dir.is_dir() else []
    if not model_paths:
        raise CliError("io", f"no model files (model_*.sdm) under {models_dir}")
    features = read_feature_cache(cache_path)
    loaded = [load_model(p) for p in model_paths]
    net_cfg = loaded[0][0]
    shape = (net_cfg.freq_bins, net_cfg.time_steps)
    if features[0].shape != shape:
        raise CliError("data", f"cache features {features[0].shape} do not fit model {shape}")
    for path, (other_cfg, _) in zip(model_paths, loaded):
        if other_cfg != net_cfg:
            raise CliError("data", f"model {path} disagrees with the rest of the pool")
    return features, net_cfg, [params for _, params in loaded], model_paths


def cmd_evaluate(cfg: RunConfig, models_dir: Path, cache_path: Path, out_dir: Path, jobs: int) -> dict:
    del jobs  # a handful of batched forward passes; parallelism buys nothing
    features, net_cfg, pool, _ = _load_pool(models_dir, cache_path)
    truth = speaker_labels(features)
    threshold = cfg["ensemble.threshold"]
    sets = [prediction_set_for(m, params, net_cfg, features, threshold) for m, params in enumerate(pool)]
    ens_cfg = cfg.ensemble_config(machines=len(sets))
    fused = fuse(sets, ens_cfg)
    report = metrics(confusion(truth, fused))
    write_predictions_csv(out_dir / "predictions.csv", sets)
    write_metrics_csv(out_dir / "metrics.csv", [], report)
    return {
        "machines": len(sets),
        "method": ens_cfg.method,
        "accuracy": report.accuracy,
        "f1": {str(c): report.per_class[c].f1 for c in (0, 1)},
        "metrics": "metrics.csv",
        "predictions": "predictions.csv",
    }


# ---------------------------------------------------------------- curve

def _curve_task(task):
    sets, truth, m, n_combinations, method, threshold, seed = task
    [point] = f1_vs_m_experiment(sets, truth, [m], n_combinations, method, threshold, seed)
    return method, point


def _parse_m_values(raw: str, pool_size: int) -> list[int]:
    if not raw:
        return list(range(1, pool_size + 1))
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise CliError("config", f"curve.m_values must be comma-separated integers, got {raw!r}") from None
    if not values:
        raise CliError("config", "curve.m_values is empty")
    for m in values:
        if not 1 <= m <= pool_size:
            raise CliError("config", f"curve.m_values entry {m} outside pool of {pool_size}")
    return values


def cmd_curve(cfg: RunConfig, models_dir: Path, cache_path: Path, out_dir: Path, jobs: int) -> dict:
    features, net_cfg, pool, _ = _load_pool(models_dir, cache_path)
    truth = speaker_labels(features)
    threshold = cfg["ensemble.threshold"]
    sets = [prediction_set_for(m, params, net_cfg, features, threshold) for m, params in enumerate(pool)]
    m_values = _parse_m_values(cfg["curve.m_values"], len(sets))
    n_combinations = cfg["curve.n_combinations"]
    seed = cfg["seed"]

    tasks = [
        (sets, truth, m, n_combinations, method, threshold, seed)
        for method in (1, 2, 3)
        for m in m_values
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool_exec:
            outcomes = list(pool_exec.map(_curve_task, tasks))
    else:
        outcomes = [_curve_task(t) for t in tasks]

    points: dict[int, list] = {1: [], 2: [], 3: []}
    for method, point in outcomes:
        points[method].append(point)
    for method in points:
        points[method].sort(key=lambda pt: pt.m)

    rows = []
    for method in (1, 2, 3):
        for point in points[method]:
            for cls in (0, 1):
                rows.append(
                    (method, point.m, cls, point.f1_mean[cls], point.f1_std[cls])
                )
    with (out_dir / "curve.csv").open("w", newline="") as fh:
        fh.write("method,M,class,f1_mean,f1_std\n")
        for method, m, cls, mean, std in rows:
            fh.write(f"{method},{m},{cls},{format(mean, '.10g')},{format(std, '.10g')}\n")
    (out_dir / "curve.svg").write_text(_render_curve_svg(points, m_values))
    return {
        "pool": len(sets),
        "m_values": m_values,
        "n_combinations": n_combinations,
        "rows": len(rows),
        "csv": "curve.csv",
        "svg": "curve.svg",
    }


_METHOD_COLORS = {1: "#1f77b4", 2: "#d62728", 3: "#2ca02c"}


def _render_curve_svg(points: dict[int, list], m_values: list[int]) -> str:
    """Two fixed panels (one per class): F1 mean lines with +-1 std bands."""
    width, height = 800, 500
    panels = {0: (60.0, 370.0), 1: (460.0, 770.0)}
    top, bottom = 60.0, 440.0
    lo_m, hi_m = min(m_values), max(m_values)

    def sx(panel, m):
        x0, x1 = panels[panel]
        if hi_m == lo_m:
            return (x0 + x1) / 2.0
        return x0 + (x1 - x0) * (m - lo_m) / (hi_m - lo_m)

    def sy(f1):
        return bottom - (bottom - top) * min(max(f1, 0.0), 1.0)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for cls, (x0, x1) in panels.items():
        parts.append(
            f'<text x="{(x0 + x1) / 2:.1f}" y="40" text-anchor="middle" font-size="14">'
            f"class {cls} F1 vs ensemble size</text>"
        )
        parts.append(
            f'<line x1="{x0}" y1="{bottom}" x2="{x1}" y2="{bottom}" stroke="black"/>'
            f'<line x1="{x0}" y1="{top}" x2="{x0}" y2="{bottom}" stroke="black"/>'
        )
        for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
            y = sy(tick)
            parts.append(
                f'<line x1="{x0 - 4}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>'
                f'<text x="{x0 - 8}" y="{y + 4:.1f}" text-anchor="end">{tick:g}</text>'
            )
        ticks = m_values if len(m_values) <= 10 else [m_values[0], m_values[len(m_values) // 2], m_values[-1]]
        for m in ticks:
            x = sx(cls, m)
            parts.append(
                f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 4}" stroke="black"/>'
                f'<text x="{x:.1f}" y="{bottom + 18}" text-anchor="middle">{m}</text>'
            )
        for method in (1, 2, 3):
            color = _METHOD_COLORS[method]
            series = [(pt.m, pt.f1_mean[cls], pt.f1_std[cls]) for pt in points[method]]
            upper = [f"{sx(cls, m):.1f},{sy(mean + std):.1f}" for m, mean, std in series]
            lower = [f"{sx(cls, m):.1f},{sy(mean - std):.1f}" for m, mean, std in reversed(series)]
            parts.append(
                f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.15" stroke="none"/>'
            )
            line = " ".join(f"{sx(cls, m):.1f},{sy(mean):.1f}" for m, mean, _ in series)
            parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    for i, method in enumerate((1, 2, 3)):
        x = 60 + i * 120
        parts.append(
            f'<line x1="{x}" y1="475" x2="{x + 24}" y2="475" stroke="{_METHOD_COLORS[method]}" stroke-width="1.5"/>'
            f'<text x="{x + 30}" y="479">method {method}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ----------------------------------------------------------------- main

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="speechdep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--seed", type=int, help="override the top-level seed")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (1 = sequential)")

    common(sub.add_parser("synth", help="generate a synthetic labeled corpus"))
    p = sub.add_parser("featurize", help="build the log-spectrogram feature caches")
    p.add_argument("--manifest", required=True, help="corpus manifest CSV")
    common(p)
    p = sub.add_parser("train", help="train an ensemble of networks")
    p.add_argument("--cache", required=True, help="training feature cache")
    common(p)
    for name, helptext in (
        ("evaluate", "fuse model predictions and score speakers"),
        ("curve", "F1 versus ensemble size experiment"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--models", required=True, help="directory holding model_*.sdm files")
        p.add_argument("--cache", required=True, help="evaluation feature cache")
        common(p)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        cfg = _resolve_config(args)
        if args.jobs < 1:
            raise CliError("usage", "--jobs must be >= 1")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "synth":
            summary = cmd_synth(cfg, out_dir, args.jobs)
        elif args.command == "featurize":
            summary = cmd_featurize(cfg, Path(args.manifest), out_dir, args.jobs)
        elif args.command == "train":
            summary = cmd_train(cfg, Path(args.cache), out_dir, args.jobs)
        elif args.command == "evaluate":
            summary = cmd_evaluate(cfg, Path(args.models), Path(args.cache), out_dir, args.jobs)
        else:
            summary = cmd_curve(cfg, Path(args.models), Path(args.cache), out_dir, args.jobs)
        _write_run_artifacts(out_dir, args.command, cfg, summary)
        return 0
    except CliError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergedError as exc:
        print(f"error:train: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return 2
    except WavError as exc:
        print(f"error:data: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error:data: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
