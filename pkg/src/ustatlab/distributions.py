"""Seeded variate generation, finite-support exact distributions, and
normalizing-sequence diagnostics.

All sampling uses numpy's PCG64 generator (version-pinned bit stream)
seeded explicitly; samplers are stateless, so identical seeds give
identical samples regardless of thread or process count.  Replication
seeds derive from a base seed via ``derive_seed``:
``seed_r = base ^ (r * 0x9E3779B97F4A7C15) mod 2^64``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    InvalidArgumentError,
    UnsupportedOperationError,
)
from .kernels import Kernel, eval_kernel_rows, project_h1

__all__ = [
    "Distribution",
    "EllEstimate",
    "MomentDiagnostic",
    "example_density",
    "normal",
    "pareto",
    "finite",
    "sample",
    "pdf",
    "derive_seed",
    "estimate_ell",
    "moment_diagnostic",
    "dist_from_name",
    "DIST_REGISTRY_HELP",
    "ANALYTIC_FINITE_VAR",
    "EXAMPLE_ASYMPTOTIC",
    "TRUNCATED_FIXED_POINT",
]

_SEED_MASK = (1 << 64) - 1
_SEED_MULT = 0x9E3779B97F4A7C15

ANALYTIC_FINITE_VAR = "analytic-finite-var"
EXAMPLE_ASYMPTOTIC = "example-asymptotic"
TRUNCATED_FIXED_POINT = "truncated-fixed-point"


def derive_seed(base_seed: int, index: int) -> int:
    """base_seed XOR (index * 0x9E3779B97F4A7C15) mod 2^64."""
    return (int(base_seed) ^ ((int(index) * _SEED_MULT) & _SEED_MASK)) & _SEED_MASK


@dataclass(frozen=True)
class Distribution:
    """A registered sampling distribution with analytic moment metadata.

    ``mean`` / ``variance`` are None when the moment does not exist (the
    heavy-tailed example density has a mean but infinite variance).
    """

    name: str
    kind: str  # "example" | "normal" | "pareto" | "finite"
    params: tuple
    mean: Optional[float]
    variance: Optional[float]
    points: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None


def example_density(a: float) -> Distribution:
    """Density |x - a|^-3 on |x - a| >= 1: symmetric about a with exact
    tail P(|X - a| > u) = u^-2 for u >= 1; mean a, infinite variance."""
    a = float(a)
    if a == 0:
        raise InvalidArgumentError("example density requires a != 0")
    return Distribution(name=f"example:a={a:g}", kind="example", params=(a,),
                        mean=a, variance=None)


def normal(mu: float, sigma: float) -> Distribution:
    if not sigma > 0:
        raise InvalidArgumentError(f"normal needs sigma > 0, got {sigma}")
    return Distribution(name=f"normal:{mu:g},{sigma:g}", kind="normal",
                        params=(float(mu), float(sigma)),
                        mean=float(mu), variance=float(sigma) ** 2)


def pareto(alpha: float, xm: float = 1.0) -> Distribution:
    if not alpha > 0 or not xm > 0:
        raise InvalidArgumentError(f"pareto needs alpha > 0 and xm > 0, got {alpha}, {xm}")
    mean = alpha * xm / (alpha - 1.0) if alpha > 1 else None
    var = (xm ** 2 * alpha / ((alpha - 1.0) ** 2 * (alpha - 2.0))) if alpha > 2 else None
    return Distribution(name=f"pareto:{alpha:g},{xm:g}", kind="pareto",
                        params=(float(alpha), float(xm)), mean=mean, variance=var)


def finite(points, probs) -> Distribution:
    pts = np.asarray(points, dtype=np.float64)
    pr = np.asarray(probs, dtype=np.float64)
    if pts.ndim != 1 or pts.shape != pr.shape or pts.size == 0:
        raise InvalidArgumentError("finite distribution needs matching 1-d points/probs")
    if np.any(pr < 0):
        raise InvalidArgumentError("finite probabilities must be nonnegative")
    if abs(pr.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError(f"finite probabilities sum to {pr.sum()!r}, not 1")
    mean = float(np.dot(pts, pr))
    var = float(np.dot((pts - mean) ** 2, pr))
    name = "finite:[" + ",".join(f"{p:g}" for p in pts) + "];[" + \
        ",".join(f"{p:g}" for p in pr) + "]"
    return Distribution(name=name, kind="finite", params=(), mean=mean, variance=var,
                        points=pts, probs=pr)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _SEED_MASK))


def sample(dist: Distribution, n: int, seed: int) -> np.ndarray:
    """Draw n variates, deterministically in ``seed``.

    The example density uses the inverse CDF X = a + S * U^(-1/2) with
    U uniform on (0, 1] and S a uniform sign; U is drawn before S.
    """
    if n < 1:
        raise InvalidArgumentError(f"sample size must be >= 1, got {n}")
    rng = _rng(seed)
    if dist.kind == "example":
        a = dist.params[0]
        u = 1.0 - rng.random(n)
        s = 2.0 * rng.integers(0, 2, n) - 1.0
        return a + s * u ** -0.5
    if dist.kind == "normal":
        mu, sigma = dist.params
        return rng.normal(mu, sigma, n)
    if dist.kind == "pareto":
        alpha, xm = dist.params
        u = 1.0 - rng.random(n)
        return xm * u ** (-1.0 / alpha)
    if dist.kind == "finite":
        idx = rng.choice(len(dist.points), size=n, p=dist.probs)
        return dist.points[idx]
    raise InvalidArgumentError(f"unknown distribution kind {dist.kind!r}")


def pdf(dist: Distribution, x: float) -> float:
    if dist.kind == "example":
        a = dist.params[0]
        return abs(x - a) ** -3 if abs(x - a) >= 1 else 0.0
    if dist.kind == "normal":
        mu, sigma = dist.params
        z = (x - mu) / sigma
        return math.exp(-0.5 * z * z) / (sigma * math.sqrt(2 * math.pi))
    if dist.kind == "pareto":
        alpha, xm = dist.params
        return alpha * xm ** alpha / x ** (alpha + 1) if x >= xm else 0.0
    raise UnsupportedOperationError(f"no density for distribution kind {dist.kind!r}")


# ---------------------------------------------------------------------------
# normalizing sequence ell(n)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EllEstimate:
    """ell^2(n) for the norming B_n = sqrt(n) * ell(n) of sums of h1(X_i)."""

    n: float
    ell_sq: float
    method: str


def _projection_variance(dist: Distribution, kernel: Kernel) -> Optional[float]:
    """Exact Var h1(X) when available analytically, else None."""
    if dist.kind == "finite":
        vals = np.array([project_h1(kernel, float(x), dist) for x in dist.points])
        mu = float(np.dot(vals, dist.probs))
        return float(np.dot((vals - mu) ** 2, dist.probs))
    if kernel.affine_projection is not None and dist.variance is not None:
        try:
            slope, _ = kernel.affine_projection(dist)
        except UnsupportedOperationError:
            return None
        return slope ** 2 * dist.variance
    base = kernel.name.split(":", 1)[0]
    if base == "variance" and dist.kind == "normal":
        sigma = dist.params[1]
        return sigma ** 4 / 2.0  # Var((X-mu)^2 - sigma^2)/4 under a normal
    return None


def _truncated_second_moment(dist, kernel, bound: float) -> float:
    """E[h1^2 1(|h1| <= bound)] for affine projections h1 = slope*x + icpt."""
    if dist.kind == "finite":
        vals = np.array([project_h1(kernel, float(x), dist) for x in dist.points])
        keep = np.abs(vals) <= bound
        return float(np.dot(np.where(keep, vals ** 2, 0.0), dist.probs))
    if kernel.affine_projection is None:
        raise UnsupportedOperationError(
            f"no truncated-moment route for kernel '{kernel.name}'"
        )
    slope, icpt = kernel.affine_projection(dist)
    if slope == 0:
        return 0.0
    if dist.kind == "example":
        # |h1| = |slope| * |X - a| on |X - a| >= 1, with the exact identity
        # E[(X-a)^2 1(|X-a| <= u)] = 2 ln u; icpt is -slope*a by construction.
        s = abs(slope)
        u = bound / s
        return 0.0 if u < 1.0 else s * s * 2.0 * math.log(u)
    from scipy.integrate import quad

    lo = (-bound - icpt) / slope
    hi = (bound - icpt) / slope
    if lo > hi:
        lo, hi = hi, lo
    val, _ = quad(lambda t: (slope * t + icpt) ** 2 * pdf(dist, t), lo, hi, limit=200)
    return float(val)


def estimate_ell(dist: Distribution, kernel: Kernel, n, method: Optional[str] = None,
                 ) -> EllEstimate:
    """ell^2(n) via, in order: analytic Var h1 when finite; the example
    family's leading asymptotic a^(2(m-1)) * ln n; a truncated-moment
    fixed point B^2 <- n * E[h1^2 1(|h1| <= B)] iterated to 1e-6 relative."""
    if method not in (None, ANALYTIC_FINITE_VAR, EXAMPLE_ASYMPTOTIC,
                      TRUNCATED_FIXED_POINT):
        raise InvalidArgumentError(f"unknown ell method {method!r}")
    if method in (None, ANALYTIC_FINITE_VAR):
        var = _projection_variance(dist, kernel)
        if var is not None:
            if var <= 0:
                raise InvalidArgumentError(
                    f"degenerate projection: Var h1 = {var} under '{dist.name}'"
                )
            return EllEstimate(n=n, ell_sq=var, method=ANALYTIC_FINITE_VAR)
        if method == ANALYTIC_FINITE_VAR:
            raise UnsupportedOperationError(
                f"Var h1 not analytically available for kernel '{kernel.name}' "
                f"under '{dist.name}'"
            )
    if method in (None, EXAMPLE_ASYMPTOTIC):
        if dist.kind == "example" and kernel.affine_projection is not None:
            slope, _ = kernel.affine_projection(dist)
            if slope != 0 and n > 1:
                return EllEstimate(n=n, ell_sq=slope ** 2 * math.log(n),
                                   method=EXAMPLE_ASYMPTOTIC)
        if method == EXAMPLE_ASYMPTOTIC:
            raise UnsupportedOperationError(
                "example-asymptotic ell needs the example family, an affine "
                "projection, and n > 1"
            )
    # fixed point
    try:
        b_sq = float(n) * max(_truncated_second_moment(dist, kernel, math.sqrt(n)), 1.0)
        for _ in range(10_000):
            t = _truncated_second_moment(dist, kernel, math.sqrt(b_sq))
            new = float(n) * t
            if new <= 0:
                raise UnsupportedOperationError(
                    "truncated-moment fixed point collapsed to zero"
                )
            if abs(new - b_sq) <= 1e-6 * b_sq:
                b_sq = new
                break
            b_sq = new
        ell_sq = b_sq / float(n)
        if not ell_sq > 0:
            raise UnsupportedOperationError("fixed point produced ell^2 <= 0")
        return EllEstimate(n=n, ell_sq=ell_sq, method=TRUNCATED_FIXED_POINT)
    except UnsupportedOperationError:
        raise
    except Exception as exc:  # quadrature failure etc.
        raise UnsupportedOperationError(
            f"no ell(n) route for kernel '{kernel.name}' under '{dist.name}': {exc}"
        ) from exc


# ---------------------------------------------------------------------------
# moment diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentDiagnostic:
    """Monte Carlo estimate of E|h|^p with a budget-growth divergence flag.

    ``checkpoints`` are median-of-means estimates at budgets budget/32,
    /16, .., /1 (robust against the heavy tails that make plain running
    means jump at record values).  A log-divergent moment grows linearly
    in ln(budget), i.e. with relative slope about 1/ln(budget) per
    e-fold at the final budget, while a finite moment flattens out;
    ``suspected_infinite`` flags a fitted relative slope at or above
    1/ln(budget).  Heuristic: divergence is reported as budget growth,
    never inferred exactly.
    """

    value: float
    se: float
    suspected_infinite: bool
    checkpoints: tuple


def moment_diagnostic(dist: Distribution, kernel: Kernel, p: float, budget: int,
                      seed: int = 0) -> MomentDiagnostic:
    if not p > 0:
        raise InvalidArgumentError(f"moment order p must be > 0, got {p}")
    if budget < 64:
        raise InvalidArgumentError("budget must be at least 64")
    m = kernel.order
    draws = sample(dist, budget * m, seed).reshape(budget, m)
    vals = np.abs(eval_kernel_rows(kernel, draws)) ** p
    value = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(budget))
    blocks = 64
    checkpoints = []
    log_budgets = []
    for frac in (32, 16, 8, 4, 2, 1):
        n = budget // frac
        k = min(blocks, n)
        trimmed = vals[: n - n % k].reshape(k, -1)
        checkpoints.append(float(np.median(trimmed.mean(axis=1))))
        log_budgets.append(math.log(n))
    suspected = False
    if checkpoints[-1] > 0 and len(set(log_budgets)) > 1:
        slope = float(np.polyfit(log_budgets, checkpoints, 1)[0])
        suspected = slope / checkpoints[-1] >= 1.0 / math.log(budget)
    return MomentDiagnostic(value=value, se=se, suspected_infinite=suspected,
                            checkpoints=tuple(checkpoints))


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

DIST_REGISTRY_HELP = (
    "example:a=<real> | normal:<mu>,<sigma> | pareto:<alpha>[,<xm>] | "
    "finite:[x1,..];[p1,..]"
)


def dist_from_name(spec: str) -> Distribution:
    """Resolve a registry name like 'example:a=2' or 'finite:[-1,1];[0.5,0.5]'."""
    spec = spec.strip()
    base, _, argstr = spec.partition(":")
    try:
        if base == "example":
            kv = dict(part.split("=") for part in argstr.split(",") if part)
            return example_density(float(kv["a"]))
        if base == "normal":
            mu, sigma = (float(v) for v in argstr.split(","))
            return normal(mu, sigma)
        if base == "pareto":
            parts = [float(v) for v in argstr.split(",")]
            return pareto(*parts)
        if base == "finite":
            pts_s, _, pr_s = argstr.partition(";")
            pts = [float(v) for v in pts_s.strip().strip("[]").split(",")]
            pr = [float(v) for v in pr_s.strip().strip("[]").split(",")]
            return finite(pts, pr)
    except InvalidArgumentError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidArgumentError(
            f"bad distribution spec {spec!r}: {exc}; registry: {DIST_REGISTRY_HELP}"
        ) from exc
    raise InvalidArgumentError(
        f"unknown distribution {spec!r}; registry: {DIST_REGISTRY_HELP}"
    )
