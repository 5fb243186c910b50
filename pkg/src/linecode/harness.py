"""Batches of trials, failure estimates against bounds, and CSV/JSON output.

Config files are TOML with dotted sections::

    [experiment]
    trials = 2000
    master_seed = 7
    epsilon = 0.05
    confidence = 0.95
    regimes = ["dense-delay", "dense-avg"]

    [network]
    k = 256
    q = 1
    traffic = "regular"      # or "poisson" with lam = [...]
    p = [0.8, 0.8]
    engine = "rank"          # "gev" carries real encoding vectors

    [precode]                # optional; turns the chunked code into a CCP
    gamma_a = 0.25
    gamma_b = 0.08
    margin = 10

    [bounds]
    gamma_c = 0.2
    f_k = "log2"

    [output]
    path = "results.csv"
    format = "csv"

    [sweep]                  # only used by the sweep verb
    k = [256, 1024]
    L = [2, 3]
    q = [1]
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import bounds
from .codec import CodeConfig, PrecodeConfig
from .simnet import NetworkConfig, TrialResult, run_trial, trial_seed
from .stats import wilson
from .traffic import TrafficSpec

WORKERS_ENV = "LINECODE_WORKERS"
FORMATS = ("csv", "json")
COLUMNS = (
    "regime", "k", "L", "q", "alpha", "epsilon", "bound", "mean_delay", "p50", "p95",
    "fail_frac", "fail_ci_lo", "fail_ci_hi", "censored", "trials", "seed",
)


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig
    regimes: tuple[str, ...] = ()
    trials: int = 100
    master_seed: int = 0
    epsilon: float = 0.05
    confidence: float = 0.95
    gamma_c: float | None = None
    f_k: str = "log2"
    multiplier: float = 1.0
    output_path: str | None = None
    output_format: str = "csv"
    sweep: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError("experiment.trials: must be at least 1")
        if not 0 < self.epsilon < 1:
            raise ConfigError("experiment.epsilon: must lie in (0, 1)")
        if not 0 < self.confidence < 1:
            raise ConfigError("experiment.confidence: must lie in (0, 1)")
        for r in self.regimes:
            if r not in bounds.REGIMES:
                raise ConfigError(f"experiment.regimes: unknown regime {r!r}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"output.format: must be one of {FORMATS}")


# config loading ----------------------------------------------------------------

_SECTIONS = {
    "experiment": {"trials", "master_seed", "epsilon", "confidence", "regimes"},
    "network": {"k", "q", "payload_dim", "traffic", "p", "lam", "engine",
                "horizon_cap", "upstream_first", "payload_mode"},
    "precode": {"gamma_a", "gamma_b", "margin", "epsilon"},
    "bounds": {"gamma_c", "f_k", "multiplier"},
    "output": {"path", "format"},
    "sweep": {"k", "L", "q"},
}


def _get(d: dict, section: str, key: str, kind, default=None):
    body = d.get(section, {})
    if key not in body:
        return default
    v = body[key]
    if kind is None:
        return v
    try:
        if kind is tuple:
            if not isinstance(v, list):
                raise TypeError("expected a list")
            return tuple(v)
        if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
            raise TypeError("expected an integer")
        if kind is bool and not isinstance(v, bool):
            raise TypeError("expected true or false")
        return kind(v)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{section}.{key}: {e}") from None


def config_from_dict(d: dict[str, Any]) -> ExperimentConfig:
    for section, body in d.items():
        if section not in _SECTIONS:
            raise ConfigError(f"{section}: unknown section")
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: expected a table")
        for key in body:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
    if "k" not in d.get("network", {}):
        raise ConfigError("network.k: required")
    if "p" not in d.get("network", {}):
        raise ConfigError("network.p: required")

    precode = None
    if "precode" in d:
        try:
            precode = PrecodeConfig(
                gamma_a=_get(d, "precode", "gamma_a", float, 0.0),
                gamma_b=_get(d, "precode", "gamma_b", float, 0.0),
                margin=_get(d, "precode", "margin", int),
                epsilon=_get(d, "precode", "epsilon", float, 1e-3),
            )
        except ValueError as e:
            raise ConfigError(f"precode: {e}") from None
    try:
        code = CodeConfig(
            k=_get(d, "network", "k", int),
            q=_get(d, "network", "q", int, 1),
            payload_dim=_get(d, "network", "payload_dim", int),
            precode=precode,
        )
    except ValueError as e:
        raise ConfigError(f"network: {e}") from None
    try:
        traffic = TrafficSpec(
            _get(d, "network", "traffic", str, "regular"),
            _get(d, "network", "p", tuple),
            _get(d, "network", "lam", tuple),
        )
    except ValueError as e:
        raise ConfigError(f"network.traffic: {e}") from None
    try:
        net = NetworkConfig(
            code=code,
            traffic=traffic,
            horizon_cap=_get(d, "network", "horizon_cap", float),
            payload_mode=_get(d, "network", "payload_mode", bool, False),
            engine=_get(d, "network", "engine", str, "gev"),
            upstream_first=_get(d, "network", "upstream_first", bool, True),
        )
    except ValueError as e:
        raise ConfigError(f"network: {e}") from None
    sweep = {k: tuple(int(x) for x in _get(d, "sweep", k, tuple)) for k in d.get("sweep", {})}
    return ExperimentConfig(
        network=net,
        regimes=_get(d, "experiment", "regimes", tuple, ()),
        trials=_get(d, "experiment", "trials", int, 100),
        master_seed=_get(d, "experiment", "master_seed", int, 0),
        epsilon=_get(d, "experiment", "epsilon", float, 0.05),
        confidence=_get(d, "experiment", "confidence", float, 0.95),
        gamma_c=_get(d, "bounds", "gamma_c", float),
        f_k=_get(d, "bounds", "f_k", str, "log2"),
        multiplier=_get(d, "bounds", "multiplier", float, 1.0),
        output_path=_get(d, "output", "path", str),
        output_format=_get(d, "output", "format", str, "csv"),
        sweep=sweep,
    )


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None
    return config_from_dict(raw)


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(asdict(replace(cfg, output_path=None)), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# trials and statistics ---------------------------------------------------------


@dataclass(frozen=True)
class FailureEstimate:
    fraction: float
    lo: float
    hi: float
    failures: int
    trials: int


def failure_fraction(
    samples: Sequence[float], threshold: float, confidence: float = 0.95
) -> FailureEstimate:
    """Share of samples strictly above ``threshold`` with a Wilson interval."""
    if len(samples) == 0:
        raise ValueError("no samples")
    arr = np.asarray(samples, dtype=float)
    fails = int(np.count_nonzero(arr > threshold))
    lo, hi = wilson(fails, arr.size, confidence)
    return FailureEstimate(fails / arr.size, lo, hi, fails, int(arr.size))


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _one(args: tuple[NetworkConfig, int]) -> TrialResult:
    return run_trial(*args)


def run_trials(
    net: NetworkConfig, trials: int, master_seed: int, workers: int | None = None
) -> list[TrialResult]:
    """Trials ``0..trials-1`` with seeds ``mix(master_seed, index)``, in index order.

    The worker count only changes speed; results are identical.
    """
    seeds = [trial_seed(master_seed, i) for i in range(trials)]
    workers = _worker_count() if workers is None else workers
    if workers <= 1 or trials < 2:
        return [run_trial(net, s) for s in seeds]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(_one, [(net, s) for s in seeds], chunksize=max(1, trials // (4 * workers))))


@dataclass(frozen=True)
class SummaryRow:
    regime: str
    k: int
    L: int
    q: int
    alpha: int
    epsilon: float
    bound: float
    mean_delay: float
    p50: float
    p95: float
    fail_frac: float
    fail_ci_lo: float
    fail_ci_hi: float
    censored: int
    trials: int
    seed: int


@dataclass(frozen=True)
class ExperimentSummary:
    rows: tuple[SummaryRow, ...]
    config_hash: str
    seed: int
    violations: tuple[str, ...] = ()

    @property
    def has_warnings(self) -> bool:
        return bool(self.violations)


def _quantile(delays: np.ndarray, q: float) -> float:
    # no interpolation, so censored (infinite) samples stay well defined
    return float(np.quantile(delays, q, method="inverted_cdf"))


def bound_query(cfg: ExperimentConfig, regime: str, net: NetworkConfig | None = None) -> bounds.BoundQuery:
    net = net or cfg.network
    code = net.code
    kw: dict[str, Any] = dict(q=code.q, f_k=cfg.f_k, multiplier=cfg.multiplier)
    if regime in bounds.CCP_REGIMES:
        pc = code.precode
        if pc is None:
            raise ConfigError(f"experiment.regimes: {regime} needs a [precode] section")
        if cfg.gamma_c is None:
            raise ConfigError(f"bounds.gamma_c: required by {regime}")
        kw.update(gamma_a=pc.gamma_a, gamma_b=pc.gamma_b, gamma_c=cfg.gamma_c)
    try:
        return bounds.BoundQuery.from_traffic(regime, code.k, net.traffic, cfg.epsilon, **kw)
    except ValueError as e:
        raise ConfigError(f"experiment.regimes: {regime}: {e}") from None


def summarize(
    cfg: ExperimentConfig, net: NetworkConfig, results: Sequence[TrialResult]
) -> tuple[list[SummaryRow], list[str]]:
    delays = np.array([r.coding_delay for r in results], dtype=float)
    finite = delays[np.isfinite(delays)]
    censored = int(delays.size - finite.size)
    mean = float(finite.mean()) if finite.size else math.inf
    p50, p95 = _quantile(delays, 0.5), _quantile(delays, 0.95)
    rows, warnings = [], []
    for regime in cfg.regimes:
        bv = bounds.evaluate(bound_query(cfg, regime, net))
        warnings.extend(f"{regime} k={net.code.k} L={net.L} q={net.code.q}: {v}" for v in bv.violations)
        fe = failure_fraction(delays, bv.value, cfg.confidence)
        rows.append(SummaryRow(
            regime=regime, k=net.code.k, L=net.L, q=net.code.q, alpha=net.code.alpha,
            epsilon=cfg.epsilon, bound=bv.value, mean_delay=mean, p50=p50, p95=p95,
            fail_frac=fe.fraction, fail_ci_lo=fe.lo, fail_ci_hi=fe.hi,
            censored=censored, trials=len(results), seed=cfg.master_seed,
        ))
    return rows, warnings


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentSummary:
    results = run_trials(cfg.network, cfg.trials, cfg.master_seed, workers)
    rows, warnings = summarize(cfg, cfg.network, results)
    return ExperimentSummary(tuple(rows), config_hash(cfg), cfg.master_seed, tuple(warnings))


def sweep_networks(cfg: ExperimentConfig) -> list[NetworkConfig]:
    """Grid over ``k``, ``L`` and ``q`` in that nesting order.

    A swept ``L`` needs single-valued ``p`` (and ``lam``), which are repeated
    along the line.
    """
    base = cfg.network
    ks = cfg.sweep.get("k", (base.code.k,))
    Ls = cfg.sweep.get("L", (base.L,))
    qs = cfg.sweep.get("q", (base.code.q,))
    tr = base.traffic
    if "L" in cfg.sweep and (len(tr.p) != 1 or (tr.lam is not None and len(tr.lam) != 1)):
        raise ConfigError("sweep.L: network.p (and lam) must hold a single value")
    out = []
    for k, L, q in itertools.product(ks, Ls, qs):
        if "L" in cfg.sweep:
            lam = None if tr.lam is None else tr.lam * L
            traffic = TrafficSpec(tr.kind, tr.p * L, lam)
        else:
            traffic = tr
        try:
            code = replace(base.code, k=k, q=q)
        except ValueError as e:
            raise ConfigError(f"sweep: k={k}, q={q}: {e}") from None
        out.append(replace(base, code=code, traffic=traffic))
    return out


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentSummary:
    rows, warnings = [], []
    for net in sweep_networks(cfg):
        results = run_trials(net, cfg.trials, cfg.master_seed, workers)
        r, w = summarize(cfg, net, results)
        rows.extend(r)
        warnings.extend(w)
    return ExperimentSummary(tuple(rows), config_hash(cfg), cfg.master_seed, tuple(warnings))


# output ------------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(summary: ExperimentSummary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in summary.rows:
        w.writerow([_fmt(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def to_json(summary: ExperimentSummary) -> str:
    doc = {
        "config_hash": summary.config_hash,
        "seed": summary.seed,
        "violations": list(summary.violations),
        "rows": [{c: getattr(r, c) for c in COLUMNS} for r in summary.rows],
    }
    return json.dumps(doc, indent=2) + "\n"


def summary_from_json(text: str) -> ExperimentSummary:
    doc = json.loads(text)
    rows = tuple(SummaryRow(**{f.name: r[f.name] for f in fields(SummaryRow)}) for r in doc["rows"])
    return ExperimentSummary(rows, doc["config_hash"], doc["seed"], tuple(doc["violations"]))


def render(summary: ExperimentSummary, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(summary)
    if fmt == "json":
        return to_json(summary)
    raise ValueError(f"format must be one of {FORMATS}")


def emit(summary: ExperimentSummary, fmt: str, path: str | os.PathLike | None) -> str:
    """Write the summary to ``path`` (stdout when None) and return the text."""
    text = render(summary, fmt)
    if path is None:
        sys.stdout.write(text)
        return text
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}") from None
    return text
