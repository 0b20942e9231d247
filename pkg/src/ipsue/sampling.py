"""Training and test sets over the frequency band and the parameter box."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .system import AffineParametricSystem, ParameterPoint

__all__ = ["METHODS", "frequencies", "is_wide", "sample_points", "grid_points", "random_points"]

METHODS = ("linear", "log", "decade-tenths", "grid", "random")
WIDE_DECADES = 2.0


def is_wide(low: float, high: float) -> bool:
    """True when a positive range spans at least two decades (sampled in log)."""
    return low > 0 and high >= low * 10.0**WIDE_DECADES


def frequencies(count: int, f_range, method: str = "log", base: float | None = None) -> np.ndarray:
    """Frequencies in Hz.

    ``decade-tenths`` gives ``base * 10**(i / 10)`` for ``i = 1..count``; ``base``
    defaults to the lower band edge. The other methods fill ``f_range``
    inclusively.
    """
    if count < 1:
        raise ValueError("count must be positive")
    lo, hi = (float(f) for f in f_range)
    if method == "linear":
        return np.linspace(lo, hi, count)
    if method == "log":
        if lo <= 0:
            raise ValueError("log sampling needs a positive band")
        return np.logspace(np.log10(lo), np.log10(hi), count)
    if method == "decade-tenths":
        b = lo if base is None else float(base)
        return b * 10.0 ** (np.arange(1, count + 1) / 10.0)
    raise ValueError(f"unknown frequency sampling {method!r}")


def _axes(system: AffineParametricSystem, f_range):
    f_range = f_range if f_range is not None else system.freq_range_hz
    if f_range is None:
        raise ValueError("no frequency range given and the system declares none")
    return [tuple(f_range)] + list(system.param_ranges)


def _axis_values(lo, hi, count, log):
    if count == 1:
        return np.array([np.sqrt(lo * hi) if log else 0.5 * (lo + hi)])
    if log:
        return np.logspace(np.log10(lo), np.log10(hi), count)
    return np.linspace(lo, hi, count)


def _to_points(rows) -> list[ParameterPoint]:
    return [ParameterPoint.from_frequency(r[0], r[1:]) for r in rows]


def grid_points(system: AffineParametricSystem, per_axis: int, f_range=None, log: bool | None = None):
    """Tensor grid with ``per_axis`` values per coordinate, frequency first.

    Each axis is logarithmic when it spans at least two decades, unless
    ``log`` forces one choice for all axes.
    """
    axes = _axes(system, f_range)
    values = [
        _axis_values(lo, hi, per_axis, is_wide(lo, hi) if log is None else log) for lo, hi in axes
    ]
    return _to_points(itertools.product(*values))


def random_points(system: AffineParametricSystem, count: int, seed: int = 0, f_range=None):
    """Independent uniform draws per coordinate (log-uniform on wide axes)."""
    rng = np.random.default_rng(seed)
    axes = _axes(system, f_range)
    cols = []
    for lo, hi in axes:
        u = rng.uniform(size=count)
        if is_wide(lo, hi):
            cols.append(10.0 ** (np.log10(lo) + u * (np.log10(hi) - np.log10(lo))))
        else:
            cols.append(lo + u * (hi - lo))
    return _to_points(np.column_stack(cols))


def sample_points(
    system: AffineParametricSystem,
    method: str,
    count: int,
    seed: int = 0,
    f_range=None,
    mu: Sequence[float] | None = None,
    subset: int | None = None,
    base: float | None = None,
) -> list[ParameterPoint]:
    """Build a point set.

    ``linear``, ``log`` and ``decade-tenths`` sweep frequency only; parametric
    systems then need fixed values ``mu``. ``grid`` uses ``count`` values per
    axis, and ``subset`` optionally keeps a seeded random selection of that
    many grid points. ``random`` draws ``count`` points.
    """
    if method not in METHODS:
        raise ValueError(f"unknown sampling {method!r}, expected one of {METHODS}")
    if method == "grid":
        pts = grid_points(system, count, f_range)
    elif method == "random":
        pts = random_points(system, count, seed, f_range)
    else:
        if mu is None:
            if system.d:
                raise ValueError(f"{method!r} sweeps frequency only; give mu for a parametric system")
            mu = ()
        if len(mu) != system.d:
            raise ValueError(f"expected {system.d} parameter values, got {len(mu)}")
        fr = f_range if f_range is not None else system.freq_range_hz
        if fr is None and method != "decade-tenths":
            raise ValueError("no frequency range given and the system declares none")
        if fr is None:
            fr = (1.0, 1.0)
        pts = [ParameterPoint.from_frequency(f, mu) for f in frequencies(count, fr, method, base)]
    if subset is not None and subset < len(pts):
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(pts), size=subset, replace=False))
        pts = [pts[k] for k in keep]
    return pts
