"""Replicated estimation experiments and their serialisation.

Replication ``i`` draws from ``make_rng(child_seed(seed, i))`` and nothing
else, and replications are processed in fixed-size chunks whose results are
stored by index.  Thread count therefore changes wall time only.
"""

from __future__ import annotations

import configparser
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats
from threadpoolctl import threadpool_limits

from .asymptotics import fisher_info, spectral_radius
from .errors import InsufficientExcitation, ValidationError
from .estimation import lse_batch, mle_batch
from .innovations import system_for
from .noise import NoiseModel, parse_noise, validate_model
from .simulate import child_seed, make_rng, simulate_ar_path, simulate_fgn_circulant, simulate_noise_innovation
from .state_space import ArModel

log = logging.getLogger(__name__)

ESTIMATORS = ("mle", "lse")
GENERATORS = ("innovation", "circulant")
MAX_FAILURE_FRACTION = 1e-3
DEFAULT_BINS = 60
DEFAULT_CHUNK = 64


@dataclass(frozen=True)
class ExperimentConfig:
    theta: tuple[float, ...]
    noise: NoiseModel
    N: int
    M: int
    seed: int
    estimators: tuple[str, ...] = ("mle",)
    bins: int = DEFAULT_BINS
    generator: str = "innovation"
    chunk: int = DEFAULT_CHUNK
    csv_path: str | None = None
    json_path: str | None = None
    hist_path: str | None = None

    @property
    def p(self) -> int:
        return len(self.theta)

    @property
    def model(self) -> ArModel:
        return ArModel(np.array(self.theta))

    def validate(self) -> None:
        if self.p < 1:
            raise ValidationError("theta must be non-empty", field="theta")
        if self.N < 10 * self.p:
            raise ValidationError(f"N must be >= 10p = {10 * self.p}, got {self.N}", field="N")
        if self.M < 2:
            raise ValidationError(f"M must be >= 2, got {self.M}", field="M")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer", field="seed")
        if not self.estimators or any(e not in ESTIMATORS for e in self.estimators):
            raise ValidationError(f"estimators must be a subset of {ESTIMATORS}", field="estimators")
        if self.generator not in GENERATORS:
            raise ValidationError(f"generator must be one of {GENERATORS}", field="generator")
        if self.generator == "circulant" and self.noise.kind != "fgn":
            raise ValidationError("circulant generator is only defined for fgn noise", field="generator")
        if self.bins < 1:
            raise ValidationError("bins must be >= 1", field="bins")
        if self.chunk < 1:
            raise ValidationError("chunk must be >= 1", field="chunk")
        report = validate_model(self.noise)
        if not report.ok:
            bad = report.failures()[0]
            raise ValidationError(bad.message, field=bad.field)
        if spectral_radius(self.theta) >= 1.0:
            raise ValidationError("theta outside the stability region r(theta) < 1", field="theta")

    def echo(self) -> dict:
        """Resolved settings that determine the numbers (outputs and threads excluded)."""
        return {
            "theta": list(self.theta),
            "noise": self.noise.label(),
            "N": self.N,
            "M": self.M,
            "seed": self.seed,
            "estimators": list(self.estimators),
            "bins": self.bins,
            "generator": self.generator,
            "chunk": self.chunk,
        }


@dataclass(frozen=True, eq=False)
class EstimatorSummary:
    name: str
    theta_hat: np.ndarray  # (M, p), NaN rows for excluded replications
    samples: np.ndarray  # (M_ok, p) sqrt(N)(theta_hat - theta)
    ok: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    ks: np.ndarray

    @property
    def excluded(self) -> int:
        return int(np.sum(~self.ok))


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: ExperimentConfig
    seeds: np.ndarray
    target_cov: np.ndarray
    results: dict[str, EstimatorSummary]
    runtime: float

    @property
    def primary(self) -> EstimatorSummary:
        return self.results[self.config.estimators[0]]

    @property
    def samples(self) -> np.ndarray:
        return self.primary.samples

    @property
    def mean(self) -> np.ndarray:
        return self.primary.mean

    @property
    def cov(self) -> np.ndarray:
        return self.primary.cov

    @property
    def ks(self) -> np.ndarray:
        return self.primary.ks


def normality_stats(samples, target_cov) -> dict:
    """KS distance of each column against N(0, target_cov[i, i]), plus mean and covariance."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    target_cov = np.atleast_2d(np.asarray(target_cov, dtype=float))
    ks = np.array([
        stats.kstest(samples[:, i], "norm", args=(0.0, math.sqrt(target_cov[i, i]))).statistic
        for i in range(samples.shape[1])
    ])
    cov = np.cov(samples, rowvar=False, ddof=1).reshape(samples.shape[1], samples.shape[1])
    return {"ks": ks, "mean": samples.mean(axis=0), "cov": 0.5 * (cov + cov.T)}


def histogram(samples, bins: int = DEFAULT_BINS) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over [min, max]; a zero-width range puts everything in one bin."""
    samples = np.asarray(samples, dtype=float).ravel()
    if bins < 1:
        raise ValidationError("bins must be >= 1", field="bins")
    counts, edges = np.histogram(samples, bins=bins)
    return edges, counts


def _chunk_estimates(config: ExperimentConfig, system, start: int, stop: int) -> dict[str, tuple]:
    N = config.N
    cols = []
    for i in range(start, stop):
        rng = make_rng(child_seed(config.seed, i))
        if config.generator == "circulant":
            cols.append(simulate_fgn_circulant(config.noise.param, N, rng))
        else:
            cols.append(rng.standard_normal(N))
    draws = np.stack(cols, axis=1)
    xi = draws if config.generator == "circulant" else simulate_noise_innovation(system, draws)
    x = simulate_ar_path(config.model, xi)
    out = {}
    for name in config.estimators:
        if name == "mle":
            est = mle_batch(x, config.p, system)
            out[name] = (est.theta_hat, est.ok)
        else:
            th = lse_batch(x, config.p)
            out[name] = (th, np.all(np.isfinite(th), axis=1))
    return out


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Simulate M paths, estimate, and aggregate sqrt(N)(theta_hat - theta)."""
    config.validate()
    if threads < 1:
        raise ValidationError("threads must be >= 1", field="threads")
    t0 = time.perf_counter()
    theta = np.array(config.theta)
    target = fisher_info(theta).inverse
    system = system_for(config.noise, config.N)
    bounds = [(s, min(s + config.chunk, config.M)) for s in range(0, config.M, config.chunk)]

    with threadpool_limits(limits=1):
        if threads == 1:
            parts = [_chunk_estimates(config, system, a, b) for a, b in bounds]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda ab: _chunk_estimates(config, system, *ab), bounds))

    seeds = np.array([child_seed(config.seed, i) for i in range(config.M)], dtype=np.uint64)
    results = {}
    for name in config.estimators:
        theta_hat = np.concatenate([part[name][0] for part in parts])
        ok = np.concatenate([part[name][1] for part in parts])
        n_bad = int(np.sum(~ok))
        if n_bad:
            log.warning("%s: %d replication(s) excluded, seeds %s", name, n_bad, seeds[~ok].tolist())
        if n_bad > MAX_FAILURE_FRACTION * config.M:
            raise InsufficientExcitation(
                f"{name}: {n_bad} of {config.M} replications failed (limit {MAX_FAILURE_FRACTION:.1%})")
        samples = math.sqrt(config.N) * (theta_hat[ok] - theta)
        st = normality_stats(samples, target)
        results[name] = EstimatorSummary(name, theta_hat, samples, ok, st["mean"], st["cov"], st["ks"])
    return ExperimentReport(config, seeds, target, results, time.perf_counter() - t0)


# serialisation -----------------------------------------------------------

def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return format(x, ".17g")


def dumps17(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits (non-finite -> null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_jstr(str(k))}: {dumps17(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps17(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps17(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g") if math.isfinite(obj) else "null"
    return _jstr(str(obj))


def _jstr(s: str) -> str:
    return json.dumps(s)


def report_dict(report: ExperimentReport, include_timing: bool = False) -> dict:
    def section(s: EstimatorSummary) -> dict:
        return {"mean": s.mean, "cov": s.cov, "ks": s.ks, "excluded_count": s.excluded}

    prim = report.primary
    out = {"config": report.config.echo(), "estimator": prim.name}
    out.update(section(prim))
    out["target_cov"] = report.target_cov
    out["runtime_seconds"] = report.runtime if include_timing else None
    others = {k: section(v) for k, v in report.results.items() if k != prim.name}
    if others:
        out["other_estimators"] = others
    return out


def csv_text(report: ExperimentReport, estimator: str | None = None) -> str:
    s = report.results[estimator or report.config.estimators[0]]
    p = report.config.p
    theta = np.array(report.config.theta)
    scale = math.sqrt(report.config.N)
    head = ["replication_index", "seed"] + [f"theta_hat_{i + 1}" for i in range(p)] + \
        [f"scaled_err_{i + 1}" for i in range(p)]
    lines = [",".join(head)]
    for i in range(report.config.M):
        th = s.theta_hat[i]
        err = scale * (th - theta)
        lines.append(",".join([str(i), str(int(report.seeds[i]))] + [fmt_float(v) for v in th] +
                              [fmt_float(v) for v in err]))
    return "\n".join(lines) + "\n"


def histogram_csv_text(report: ExperimentReport) -> str:
    lines = ["estimator,coordinate,left,right,count"]
    for name, s in report.results.items():
        for j in range(report.config.p):
            edges, counts = histogram(s.samples[:, j], report.config.bins)
            for k, c in enumerate(counts):
                lines.append(f"{name},{j + 1},{fmt_float(edges[k])},{fmt_float(edges[k + 1])},{int(c)}")
    return "\n".join(lines) + "\n"


def _extra_csv_path(path: Path, name: str) -> Path:
    return path.with_name(f"{path.stem}_{name}{path.suffix}")


def write_outputs(report: ExperimentReport, include_timing: bool = False) -> list[Path]:
    """Write the configured CSV / JSON / histogram files; returns the paths written."""
    cfg = report.config
    written = []
    if cfg.csv_path:
        path = Path(cfg.csv_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(csv_text(report))
        written.append(path)
        for name in cfg.estimators[1:]:
            extra = _extra_csv_path(path, name)
            extra.write_text(csv_text(report, name))
            written.append(extra)
    if cfg.json_path:
        path = Path(cfg.json_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps17(report_dict(report, include_timing)) + "\n")
        written.append(path)
    if cfg.hist_path:
        path = Path(cfg.hist_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(histogram_csv_text(report))
        written.append(path)
    return written


# config files ------------------------------------------------------------

CONFIG_KEYS = ("theta", "noise", "n", "m", "seed", "estimators", "bins", "generator", "chunk",
               "csv", "json", "hist")


def read_config_file(path) -> dict[str, str]:
    """``key = value`` lines (``#`` comments allowed) -> raw string mapping."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse config file {path}: {exc}", field="config") from exc
    raw = dict(parser["experiment"])
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ValidationError(f"unknown config key(s): {', '.join(unknown)}", field="config")
    return raw


def _floats(text: str, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError as exc:
        raise ValidationError(f"{name}: expected comma-separated numbers, got {text!r}", field=name) from exc


def _int(text, name: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError as exc:
        raise ValidationError(f"{name}: expected an integer, got {text!r}", field=name) from exc


def config_from_mapping(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Build a config from string values; relative output paths resolve against ``base_dir``."""
    missing = [k for k in ("theta", "noise", "n", "m", "seed") if raw.get(k) in (None, "")]
    if missing:
        raise ValidationError(f"missing required setting(s): {', '.join(missing)}", field=missing[0])

    def out(key):
        val = raw.get(key)
        if not val:
            return None
        path = Path(val)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return str(path)

    estimators = tuple(e.strip() for e in str(raw.get("estimators", "mle")).split(",") if e.strip())
    cfg = ExperimentConfig(
        theta=_floats(raw["theta"], "theta"),
        noise=raw["noise"] if isinstance(raw["noise"], NoiseModel) else parse_noise(str(raw["noise"])),
        N=_int(raw["n"], "n"),
        M=_int(raw["m"], "m"),
        seed=_int(raw["seed"], "seed"),
        estimators=estimators,
        bins=_int(raw.get("bins", DEFAULT_BINS), "bins"),
        generator=str(raw.get("generator", "innovation")).strip(),
        chunk=_int(raw.get("chunk", DEFAULT_CHUNK), "chunk"),
        csv_path=out("csv"),
        json_path=out("json"),
        hist_path=out("hist"),
    )
    cfg.validate()
    return cfg


def moment_probe(samples, order: int = 4) -> float:
    """Empirical E|x|^order of the first coordinate."""
    samples = np.asarray(samples, dtype=float)
    col = samples[:, 0] if samples.ndim == 2 else samples
    return float(np.mean(np.abs(col) ** order))
