"""Measure a network family across sizes and classify how the measure grows."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import BadConfig, InsufficientGrid, MeasureMismatch, NetrobustError
from .topologies import SEED_MASK, TopologySpec, generate

__all__ = [
    "MEASURES",
    "FitThresholds",
    "ScalingFit",
    "ScalingStudy",
    "run_study",
    "evaluate_measure",
    "fit_scaling",
    "fit_values",
    "compare",
    "study_from_values",
    "parse_grid",
]

MEASURES = (
    "max_norm",
    "avg_norm",
    "h2",
    "scaled_h2",
    "gramian_l1",
    "macro_diagnostic",
    "centrality_ratio",
    "rho",
)


@dataclass(frozen=True)
class FitThresholds:
    """Classification knobs.

    ``min_span`` is the smallest allowed ``n_max / n_min``.
    """

    constant_band: float = 0.15
    r2_margin: float = 0.02
    min_semilog_slope: float = 0.05
    min_points: int = 4
    min_span: float = 4.0
    compare_deadband: float = 0.15


@dataclass(frozen=True)
class ScalingFit:
    cls: str
    slope: float
    r_squared: float
    loglog_slope: float
    loglog_r2: float
    semilog_slope: float
    semilog_r2: float

    @property
    def robust_verdict(self) -> bool:
        return self.cls != "exponential"

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "slope": self.slope,
            "r_squared": self.r_squared,
            "robust_verdict": self.robust_verdict,
            "loglog_slope": self.loglog_slope,
            "loglog_r2": self.loglog_r2,
            "semilog_slope": self.semilog_slope,
            "semilog_r2": self.semilog_r2,
        }


@dataclass
class ScalingStudy:
    spec: Optional[TopologySpec]
    n_grid: Tuple[int, ...]
    measure: str
    values: Tuple[float, ...]
    values_min: Tuple[float, ...] = ()
    values_max: Tuple[float, ...] = ()
    seeds: Tuple[int, ...] = ()
    failed: Dict[int, str] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.failed)

    def fit(self, thresholds: FitThresholds = FitThresholds()) -> ScalingFit:
        return fit_scaling(self, thresholds)


def _line(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-300:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return float(slope), r2


def fit_values(n_grid: Sequence[int], values: Sequence[float], thresholds: FitThresholds = FitThresholds()) -> ScalingFit:
    """Fit ``log v`` against ``log n`` and against ``n``, then classify.

    Constant when the log-log slope lies inside ``+-constant_band``;
    exponential when the semilog fit beats the log-log fit by at least
    ``r2_margin`` in r-squared and the semilog slope exceeds
    ``min_semilog_slope``; polynomial with the log-log slope otherwise.
    """
    n = np.asarray(n_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if n.shape != v.shape:
        raise InsufficientGrid("n_grid and values differ in length")
    if n.size < thresholds.min_points:
        raise InsufficientGrid(f"need at least {thresholds.min_points} grid points, got {n.size}")
    if n.min() <= 0 or n.max() / n.min() < thresholds.min_span:
        raise InsufficientGrid(f"grid must span a factor of {thresholds.min_span} in n")
    if not np.all(np.isfinite(v)) or np.any(v <= 0):
        raise InsufficientGrid("values must be finite and positive")
    logv = np.log(v)
    ll_slope, ll_r2 = _line(np.log(n), logv)
    sl_slope, sl_r2 = _line(n, logv)
    if abs(ll_slope) < thresholds.constant_band:
        cls, slope, r2 = "constant", ll_slope, ll_r2
    elif sl_r2 >= ll_r2 + thresholds.r2_margin and sl_slope > thresholds.min_semilog_slope:
        cls, slope, r2 = "exponential", sl_slope, sl_r2
    else:
        cls, slope, r2 = "polynomial", ll_slope, ll_r2
    return ScalingFit(cls, slope, r2, ll_slope, ll_r2, sl_slope, sl_r2)


def fit_scaling(study: ScalingStudy, thresholds: FitThresholds = FitThresholds()) -> ScalingFit:
    return fit_values(study.n_grid, study.values, thresholds)


def compare(first, second, thresholds: FitThresholds = FitThresholds()) -> str:
    """``better`` when ``first`` grows more slowly than ``second``.

    Accepts studies or fits.  Exponential growth loses to anything
    polynomial or constant; otherwise slopes are compared, with differences
    inside ``compare_deadband`` reported as ``equal``.
    """
    if isinstance(first, ScalingStudy) and isinstance(second, ScalingStudy):
        if first.measure != second.measure:
            raise MeasureMismatch(f"cannot compare {first.measure} with {second.measure}")
    f1 = first if isinstance(first, ScalingFit) else fit_scaling(first, thresholds)
    f2 = second if isinstance(second, ScalingFit) else fit_scaling(second, thresholds)
    exp1, exp2 = f1.cls == "exponential", f2.cls == "exponential"
    if exp1 != exp2:
        return "worse" if exp1 else "better"
    s1 = f1.slope if exp1 else f1.loglog_slope
    s2 = f2.slope if exp2 else f2.loglog_slope
    if abs(s1 - s2) <= thresholds.compare_deadband:
        return "equal"
    return "better" if s1 < s2 else "worse"


def evaluate_measure(A, measure: str) -> float:
    if measure not in MEASURES:
        raise BadConfig(f"unknown measure {measure!r}")
    if measure in ("gramian_l1", "macro_diagnostic", "centrality_ratio"):
        from . import tailrisk

        if measure == "gramian_l1":
            return tailrisk.gramian_l1_criterion(A)
        if measure == "macro_diagnostic":
            return tailrisk.macro_diagnostic(A)
        return tailrisk.centrality_report(A).ratio
    from .energy import energy_report

    rep = energy_report(A)
    return float(getattr(rep, measure))


def run_study(
    spec: TopologySpec,
    n_grid: Sequence[int],
    measure: str,
    seeds: Optional[Sequence[int]] = None,
    threads: int = 1,
) -> ScalingStudy:
    """Evaluate ``measure`` on every grid size.

    Random families are averaged over ``seeds`` (each seed ``s`` builds the
    size-``n`` network from ``s XOR n``) with the min and max kept.  Sizes
    where the evaluation fails are dropped and recorded in ``failed``.
    """
    if measure not in MEASURES:
        raise BadConfig(f"unknown measure {measure!r}")
    grid = [int(n) for n in n_grid]
    if spec.is_random:
        seeds = tuple(int(s) for s in (seeds if seeds else ([spec.seed] if spec.seed is not None else [])))
        if not seeds:
            raise BadConfig("random topologies need seeds")
    else:
        seeds = ()

    def one(n):
        if not seeds:
            return [evaluate_measure(generate(spec, n), measure)]
        return [evaluate_measure(generate(replace(spec, seed=(s ^ n) & SEED_MASK), n), measure) for s in seeds]

    def guarded(n):
        try:
            return one(n), None
        except NetrobustError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(guarded, grid))
    else:
        results = [guarded(n) for n in grid]
    ns, vals, lo, hi, failed = [], [], [], [], {}
    for n, (vs, err) in zip(grid, results):
        if err is not None:
            failed[n] = err
            continue
        ns.append(n)
        vals.append(float(np.mean(vs)))
        lo.append(float(np.min(vs)))
        hi.append(float(np.max(vs)))
    return ScalingStudy(spec, tuple(ns), measure, tuple(vals), tuple(lo), tuple(hi), tuple(seeds), failed)


def study_from_values(n_grid: Sequence[int], values: Sequence[float], measure: str = "h2") -> ScalingStudy:
    """Wrap externally computed values (controller sweeps, say) as a study."""
    v = tuple(float(x) for x in values)
    return ScalingStudy(None, tuple(int(n) for n in n_grid), measure, v, v, v)


def parse_grid(text: str) -> Tuple[int, ...]:
    """Parse ``lo:hi:xF`` (geometric), ``lo:hi:step`` (linear) or ``a,b,c`` lists."""
    text = text.strip()
    try:
        if ":" in text:
            lo_s, hi_s, step_s = text.split(":")
            lo, hi = int(lo_s), int(hi_s)
            out = []
            if step_s.startswith("x"):
                factor = float(step_s[1:])
                if factor <= 1:
                    raise BadConfig("geometric factor must exceed 1")
                v = float(lo)
                while v <= hi * (1 + 1e-12):
                    out.append(int(round(v)))
                    v *= factor
            else:
                step = int(step_s)
                if step <= 0:
                    raise BadConfig("grid step must be positive")
                out = list(range(lo, hi + 1, step))
        else:
            out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise BadConfig(f"cannot parse grid {text!r}") from None
    if not out or any(n < 1 for n in out):
        raise BadConfig(f"grid {text!r} is empty or has nonpositive sizes")
    return tuple(sorted(set(out)))
