"""Monte Carlo experiment harness with seeded, order-stable replication.

Each experiment draws R independent replications per sample size, with
replication r seeded by ``replication_seed(base_seed, r)``; the same
seeds are shared across the n-grid (common random numbers), so grid
trends compare like against like.  Results are reduced in replication
order, which makes reports byte-identical (runtime aside) for any worker
count.

Experiments
-----------
CLT_T0       law of k * (U_k - theta) / jack_scale at k = [n t0] vs N(0, t0)
FCLT_SUP     law of the signed supremum of the Studentized path vs the
             reflection formula 2 Phi(x) - 1
RAIKOV       sum h1(X_i)^2 / (n ell^2(n)) vs 1 (mean +- SE)
JACK_RAIKOV  (n-1) sum (U^i - U_n)^2 / (m^2 ell^2(n)) vs 1
ARVESEN      (n-1)/m^2 sum (U^i - U_n)^2 vs the analytic E h1^2
             (finite-variance configurations only)
NEGLIGIBILITY  delegates to decomposition.negligibility_trend

Replications whose normalizer degenerates are dropped and counted; a
drop rate above 1% fails the report.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .decomposition import TREND_STATISTICS, negligibility_trend
from .distributions import (
    Distribution,
    derive_seed,
    dist_from_name,
    estimate_ell,
    sample,
)
from .errors import (
    ConfigError,
    DegenerateNormalizerError,
    InvalidArgumentError,
    UnsupportedOperationError,
)
from .jackknife import jackknife_closed_form
from .kernels import Kernel, kernel_from_name, theta_under
from .engine import u_statistic
from .processes import studentized_path, sup_functional

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "PerNRecord",
    "ConvergenceReport",
    "normal_cdf",
    "wiener_sup_cdf",
    "ks_distance",
    "replication_seed",
    "run_experiment",
    "report_to_json",
    "report_from_json",
]

EXPERIMENTS = ("CLT_T0", "FCLT_SUP", "RAIKOV", "JACK_RAIKOV", "ARVESEN",
               "NEGLIGIBILITY")

MAX_DROP_RATE = 0.01


def replication_seed(base_seed: int, replication_index: int) -> int:
    """base_seed XOR (index * 0x9E3779B97F4A7C15) mod 2^64; injective in
    the index, matching the samplers' derivation rule."""
    return derive_seed(base_seed, replication_index)


def normal_cdf(x: float) -> float:
    """Standard normal Phi(x) through the C-library erf (|err| < 1e-9)."""
    return 0.5 * (1.0 + math.erf(float(x) / math.sqrt(2.0)))


def wiener_sup_cdf(x: float) -> float:
    """P(sup over [0,1] of a standard Wiener path <= x) = 2 Phi(x) - 1 for
    x >= 0 (reflection principle), 0 below."""
    if x < 0:
        return 0.0
    return 2.0 * normal_cdf(x) - 1.0


def ks_distance(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a fully specified CDF."""
    v = np.sort(np.asarray(samples, dtype=np.float64))
    if v.size == 0:
        raise InvalidArgumentError("ks_distance needs a nonempty sample")
    f = np.array([cdf(t) for t in v])
    i = np.arange(1, v.size + 1, dtype=np.float64)
    return float(max(np.max(np.abs(i / v.size - f)),
                     np.max(np.abs(f - (i - 1) / v.size))))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "version", "experiment", "kernel", "dist", "theta", "t0", "n_grid",
    "replications", "base_seed", "ks_threshold", "rel_mean_threshold",
    "ell_method", "statistic",
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    kernel: str
    dist: str
    n_grid: tuple
    replications: int
    base_seed: int
    theta: Optional[float] = None
    t0: float = 1.0
    ks_threshold: Optional[float] = None
    rel_mean_threshold: Optional[float] = None
    ell_method: Optional[str] = None
    statistic: Optional[str] = None
    version: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.version != 1:
            raise ConfigError(f"unsupported config version {self.version}")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; one of {EXPERIMENTS}"
            )
        if not self.n_grid or list(self.n_grid) != sorted(self.n_grid):
            raise ConfigError("n_grid must be nonempty and ascending")
        if self.replications < 50:
            raise ConfigError("replications must be >= 50")
        if not (0.0 < self.t0 <= 1.0):
            raise ConfigError(f"t0 must lie in (0, 1], got {self.t0}")
        if self.ell_method not in (None, "analytic-finite-var",
                                   "example-asymptotic", "truncated-fixed-point"):
            raise ConfigError(f"unknown ell_method {self.ell_method!r}")
        if self.experiment == "NEGLIGIBILITY":
            if self.statistic not in TREND_STATISTICS:
                raise ConfigError(
                    f"NEGLIGIBILITY needs statistic from {TREND_STATISTICS}"
                )
        elif self.statistic is not None:
            raise ConfigError("statistic only applies to NEGLIGIBILITY")
        if self.experiment in ("CLT_T0", "FCLT_SUP") and self.ks_threshold is None:
            raise ConfigError(f"{self.experiment} needs ks_threshold")
        if self.experiment in ("RAIKOV", "JACK_RAIKOV", "ARVESEN") \
                and self.rel_mean_threshold is None:
            raise ConfigError(f"{self.experiment} needs rel_mean_threshold")
        return self

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)} (fail-closed)")
        missing = {"version", "experiment", "kernel", "dist", "n_grid",
                   "replications", "base_seed"} - set(raw)
        if missing:
            raise ConfigError(f"missing config keys {sorted(missing)}")
        raw = dict(raw)
        raw["n_grid"] = tuple(int(n) for n in raw["n_grid"])
        try:
            cfg = cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        return cfg.validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        return d


@dataclass(frozen=True)
class PerNRecord:
    n: int
    statistic: str
    mean: Optional[float]
    se: Optional[float]
    ks: Optional[float]
    dropped: int
    passed: bool


@dataclass(frozen=True)
class ConvergenceReport:
    config: dict
    per_n: list
    overall_pass: bool
    dropped_total: int
    notes: list = field(default_factory=list)
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "per_n": [asdict(r) for r in self.per_n],
            "overall_pass": self.overall_pass,
            "dropped_total": self.dropped_total,
            "notes": list(self.notes),
            "runtime_seconds": self.runtime_seconds,
        }


def report_to_json(report: ConvergenceReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)


def report_from_json(text: str) -> ConvergenceReport:
    d = json.loads(text)
    return ConvergenceReport(
        config=d["config"],
        per_n=[PerNRecord(**r) for r in d["per_n"]],
        overall_pass=d["overall_pass"],
        dropped_total=d["dropped_total"],
        notes=list(d["notes"]),
        runtime_seconds=d["runtime_seconds"],
    )


# ---------------------------------------------------------------------------
# per-replication statistics
# ---------------------------------------------------------------------------

def _resolve(config: ExperimentConfig):
    try:
        kernel = kernel_from_name(config.kernel)
        dist = dist_from_name(config.dist)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    theta = config.theta
    if theta is None:
        theta = theta_under(kernel, dist)
    if theta is None and config.experiment in ("CLT_T0", "FCLT_SUP"):
        raise ConfigError(
            f"theta unresolved for kernel '{config.kernel}' under "
            f"'{config.dist}'; pass it explicitly"
        )
    return kernel, dist, theta


def _projection_values(kernel: Kernel, dist: Distribution, x: np.ndarray) -> np.ndarray:
    if kernel.affine_projection is not None:
        slope, icpt = kernel.affine_projection(dist)
        return slope * x + icpt
    from .kernels import project_h1

    return np.array([project_h1(kernel, float(v), dist) for v in x])


def _studentized_scalar(kernel, data, theta, k):
    """k * (U_k - theta) / sqrt(n * (n-1) sum (U^i - U_n)^2), one grid point."""
    summary = jackknife_closed_form(kernel, data)
    if not summary.sum_sq > 0:
        raise DegenerateNormalizerError("zero jackknife scale")
    u_k = u_statistic(kernel, data[:k])
    return k * (u_k - theta) / math.sqrt(summary.n * summary.sum_sq)


def _rep_value(config: ExperimentConfig, kernel, dist, theta, ell_sq, n: int,
               rep: int) -> Optional[float]:
    data = sample(dist, n, replication_seed(config.base_seed, rep))
    try:
        if config.experiment == "CLT_T0":
            k = int(n * config.t0)
            if k < max(kernel.order, 1):
                raise ConfigError(f"t0={config.t0} gives k={k} < m at n={n}")
            return _studentized_scalar(kernel, data, theta, k)
        if config.experiment == "FCLT_SUP":
            return sup_functional(studentized_path(kernel, data, theta))
        if config.experiment == "RAIKOV":
            proj = _projection_values(kernel, dist, data)
            v_sq = float(np.dot(proj, proj))
            if not v_sq > 0:
                raise DegenerateNormalizerError("V_n = 0")
            return v_sq / (n * ell_sq)
        if config.experiment == "JACK_RAIKOV":
            summary = jackknife_closed_form(kernel, data)
            return summary.sum_sq / (kernel.order ** 2 * ell_sq)
        if config.experiment == "ARVESEN":
            summary = jackknife_closed_form(kernel, data)
            return summary.sum_sq / kernel.order ** 2
    except DegenerateNormalizerError:
        return None
    raise ConfigError(f"unhandled experiment {config.experiment}")


def _run_chunk(payload) -> list:
    config_dict, n, start, stop = payload
    config = ExperimentConfig.from_dict(config_dict)
    kernel, dist, theta = _resolve(config)
    ell_sq = _ell_for(config, kernel, dist, n)
    return [_rep_value(config, kernel, dist, theta, ell_sq, n, rep)
            for rep in range(start, stop)]


def _ell_for(config: ExperimentConfig, kernel, dist, n: int) -> Optional[float]:
    if config.experiment not in ("RAIKOV", "JACK_RAIKOV"):
        return None
    est = estimate_ell(dist, kernel, n, method=config.ell_method)
    return est.ell_sq


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run_experiment(config: ExperimentConfig, workers: int = 1) -> ConvergenceReport:
    config.validate()
    started = time.monotonic()
    kernel, dist, theta = _resolve(config)
    notes: list = []
    if config.experiment == "NEGLIGIBILITY":
        report = _run_negligibility(config, kernel, dist, notes, started)
        return report
    # degenerate configuration guard: a zero normalizing variance makes
    # every replication a drop, which the report records rather than hides
    if config.experiment in ("RAIKOV", "JACK_RAIKOV", "ARVESEN"):
        try:
            probe = estimate_ell(dist, kernel, max(config.n_grid),
                                 method=config.ell_method)
            if config.experiment == "ARVESEN" and probe.method != \
                    "analytic-finite-var":
                raise ConfigError(
                    "ARVESEN needs an analytic finite-variance projection "
                    f"(got ell method {probe.method!r})"
                )
        except UnsupportedOperationError as exc:
            raise ConfigError(str(exc)) from exc
        except InvalidArgumentError:
            per_n = [PerNRecord(n=n, statistic=_statistic_name(config), mean=None,
                                se=None, ks=None, dropped=config.replications,
                                passed=False)
                     for n in config.n_grid]
            notes.append(
                "degenerate configuration: the projection variance vanishes, "
                "every replication dropped"
            )
            return ConvergenceReport(
                config=config.to_dict(), per_n=per_n, overall_pass=False,
                dropped_total=config.replications * len(config.n_grid),
                notes=notes, runtime_seconds=time.monotonic() - started,
            )
    per_n = []
    dropped_total = 0
    for n in config.n_grid:
        values = _collect(config, n, workers)
        kept = [v for v in values if v is not None]
        dropped = len(values) - len(kept)
        dropped_total += dropped
        record = _summarize(config, kernel, dist, n, kept, dropped)
        per_n.append(record)
    overall = bool(per_n and per_n[-1].passed
                   and all(r.dropped <= MAX_DROP_RATE * config.replications
                           for r in per_n))
    if any(r.dropped > 0 for r in per_n):
        notes.append(f"dropped {dropped_total} degenerate replications")
    return ConvergenceReport(
        config=config.to_dict(), per_n=per_n, overall_pass=overall,
        dropped_total=dropped_total, notes=notes,
        runtime_seconds=time.monotonic() - started,
    )


def _collect(config: ExperimentConfig, n: int, workers: int) -> list:
    R = config.replications
    if workers <= 1:
        return _run_chunk((config.to_dict(), n, 0, R))
    bounds = np.linspace(0, R, workers * 4 + 1).astype(int)
    payloads = [(config.to_dict(), n, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    values: list = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for chunk in pool.map(_run_chunk, payloads):
            values.extend(chunk)  # submission order == replication order
    return values


def _statistic_name(config: ExperimentConfig) -> str:
    return {
        "CLT_T0": "studentized-at-t0",
        "FCLT_SUP": "studentized-signed-sup",
        "RAIKOV": "selfnorm-ratio",
        "JACK_RAIKOV": "jackknife-ratio",
        "ARVESEN": "jackknife-variance",
        "NEGLIGIBILITY": config.statistic or "trend",
    }[config.experiment]


def _summarize(config: ExperimentConfig, kernel, dist, n: int, kept: list,
               dropped: int) -> PerNRecord:
    name = _statistic_name(config)
    drop_ok = dropped <= MAX_DROP_RATE * config.replications
    if not kept:
        return PerNRecord(n=n, statistic=name, mean=None, se=None, ks=None,
                          dropped=dropped, passed=False)
    arr = np.asarray(kept, dtype=np.float64)
    if config.experiment == "CLT_T0":
        root = math.sqrt(config.t0)
        ks = ks_distance(arr, lambda x: normal_cdf(x / root))
        return PerNRecord(n=n, statistic=name, mean=float(arr.mean()),
                          se=_se(arr), ks=ks, dropped=dropped,
                          passed=bool(drop_ok and ks <= config.ks_threshold))
    if config.experiment == "FCLT_SUP":
        ks = ks_distance(arr, wiener_sup_cdf)
        return PerNRecord(n=n, statistic=name, mean=float(arr.mean()),
                          se=_se(arr), ks=ks, dropped=dropped,
                          passed=bool(drop_ok and ks <= config.ks_threshold))
    # mean-based experiments
    target = 1.0
    if config.experiment == "ARVESEN":
        target = estimate_ell(dist, kernel, n, method="analytic-finite-var").ell_sq
    mean = float(arr.mean())
    rel_gap = abs(mean - target) / abs(target)
    return PerNRecord(n=n, statistic=name, mean=mean, se=_se(arr), ks=None,
                      dropped=dropped,
                      passed=bool(drop_ok and rel_gap <= config.rel_mean_threshold))


def _se(arr: np.ndarray) -> float:
    if arr.size < 2:
        return 0.0
    return float(arr.std(ddof=1) / math.sqrt(arr.size))


def _run_negligibility(config, kernel, dist, notes, started) -> ConvergenceReport:
    trend = negligibility_trend(config.statistic, kernel, dist,
                                list(config.n_grid), config.replications,
                                config.base_seed)
    per_n = [PerNRecord(n=row.n, statistic=config.statistic, mean=row.mean_abs,
                        se=row.se, ks=None, dropped=0, passed=trend.decreasing)
             for row in trend.rows]
    if not trend.decreasing:
        notes.append("trend flag: last mean not below half the first mean")
    return ConvergenceReport(
        config=config.to_dict(), per_n=per_n, overall_pass=trend.decreasing,
        dropped_total=0, notes=notes,
        runtime_seconds=time.monotonic() - started,
    )
