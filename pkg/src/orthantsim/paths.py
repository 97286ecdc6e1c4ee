"""Path carriers and constructions for driving functions.

Two representations are used throughout the package:

* ``SampledPath`` -- values on a finite increasing time grid starting at 0,
  read between grid points by linear interpolation;
* ``RegularPath`` -- piecewise-linear with every piece parallel to one
  coordinate axis, the input format of the exact solvers.

Axis indices are 1-based everywhere in the public API.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    AlignmentError,
    CovarianceError,
    DimensionError,
    DominationError,
    InvalidEntryError,
    OrderingError,
    ParameterError,
    RangeError,
)

COVARIANCE_EIG_FLOOR = -1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SampledPath:
    """Continuous path represented by values on a time grid.

    ``times`` is strictly increasing with ``times[0] == 0``; ``values`` has
    one row per grid time.  Evaluation between grid points interpolates
    linearly, so the object represents a piecewise-linear continuous path.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if t.ndim != 1 or len(t) < 2:
            raise DimensionError("need at least two grid times")
        if v.shape[0] != len(t):
            raise DimensionError(
                f"values rows ({v.shape[0]}) must match times ({len(t)})"
            )
        if v.shape[1] < 1:
            raise DimensionError("path dimension must be >= 1")
        if t[0] != 0.0:
            raise ParameterError("time grid must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("time grid must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise InvalidEntryError("path contains NaN or infinite entries")
        object.__setattr__(self, "times", _freeze(t))
        object.__setattr__(self, "values", _freeze(v))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def evaluate(self, t: float) -> np.ndarray:
        if t < 0.0 or t > self.horizon:
            raise RangeError(f"t={t} outside [0, {self.horizon}]")
        return self.values_at(np.asarray([t]))[0]

    def values_at(self, ts) -> np.ndarray:
        """Vectorized linear interpolation; exact at grid times."""
        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < 0.0 or ts.max() > self.horizon):
            raise RangeError("evaluation times outside [0, horizon]")
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1,
                      0, len(self.times) - 2)
        t0 = self.times[idx]
        t1 = self.times[idx + 1]
        w = ((ts - t0) / (t1 - t0))[:, None]
        return (1.0 - w) * self.values[idx] + w * self.values[idx + 1]

    def component_slice(self, lo: int, hi: int) -> "SampledPath":
        """Sub-path of components lo..hi (1-based, inclusive)."""
        if not (1 <= lo <= hi <= self.dim):
            raise RangeError(f"component range {lo}..{hi} invalid for dim {self.dim}")
        return SampledPath(self.times, self.values[:, lo - 1:hi])

    def to_csv(self, fileobj) -> None:
        write_path_csv(fileobj, self.times, self.values, "x")

    @classmethod
    def from_csv(cls, fileobj) -> "SampledPath":
        times, values = read_path_csv(fileobj)
        return cls(times, values)

    def to_jsonable(self) -> dict:
        return {"times": self.times.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_jsonable(cls, obj) -> "SampledPath":
        return cls(np.asarray(obj["times"]), np.asarray(obj["values"]))


@dataclass(frozen=True)
class RegularPath:
    """Piecewise-linear path with axis-parallel pieces.

    Segment k runs over [breakpoints[k], breakpoints[k+1]] and moves only
    component ``axes[k]`` (1-based) at rate ``slopes[k]``.  Two regular paths
    are coupled when they share breakpoints and axis indices.
    """

    start: np.ndarray
    breakpoints: np.ndarray
    axes: tuple[int, ...]
    slopes: np.ndarray

    def __post_init__(self):
        x0 = np.asarray(self.start, dtype=float).ravel()
        bp = np.asarray(self.breakpoints, dtype=float)
        sl = np.asarray(self.slopes, dtype=float)
        axes = tuple(int(a) for a in self.axes)
        if x0.size < 1:
            raise DimensionError("start vector must be nonempty")
        if bp.ndim != 1 or len(bp) < 2:
            raise DimensionError("need at least one segment")
        if bp[0] != 0.0:
            raise ParameterError("breakpoints must start at 0")
        if np.any(np.diff(bp) <= 0):
            raise ParameterError("breakpoints must be strictly increasing")
        if len(axes) != len(bp) - 1 or len(sl) != len(bp) - 1:
            raise DimensionError("need one axis and slope per segment")
        if any(a < 1 or a > x0.size for a in axes):
            raise ParameterError(f"axis indices must lie in 1..{x0.size}")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(bp))
                and np.all(np.isfinite(sl))):
            raise InvalidEntryError("path contains NaN or infinite entries")
        object.__setattr__(self, "start", _freeze(x0))
        object.__setattr__(self, "breakpoints", _freeze(bp))
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "slopes", _freeze(sl))

    @property
    def dim(self) -> int:
        return self.start.size

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @cached_property
    def vertices(self) -> np.ndarray:
        """Path values at the breakpoints, shape (segments + 1, dim)."""
        out = np.tile(self.start, (len(self.breakpoints), 1))
        deltas = self.slopes * np.diff(self.breakpoints)
        for k, (axis, d) in enumerate(zip(self.axes, deltas)):
            out[k + 1:, axis - 1] += d
        out.setflags(write=False)
        return out

    def evaluate(self, t: float) -> np.ndarray:
        if t < 0.0 or t > self.horizon:
            raise RangeError(f"t={t} outside [0, {self.horizon}]")
        return self.values_at(np.asarray([t]))[0]

    def values_at(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if ts.size and (ts.min() < 0.0 or ts.max() > self.horizon):
            raise RangeError("evaluation times outside [0, horizon]")
        idx = np.clip(np.searchsorted(self.breakpoints, ts, side="right") - 1,
                      0, len(self.axes) - 1)
        out = self.vertices[idx].copy()
        ax = np.asarray(self.axes, dtype=int)[idx] - 1
        out[np.arange(len(ts)), ax] += self.slopes[idx] * (ts - self.breakpoints[idx])
        return out

    def as_sampled(self) -> SampledPath:
        """Exact conversion: breakpoints carry the full path."""
        return SampledPath(self.breakpoints, self.vertices)

    def restrict_members(self, members: tuple[int, ...]) -> "RegularPath":
        """Keep the listed components; segments moving dropped axes go idle.

        The breakpoint grid is preserved, so the restriction stays coupled
        (in the shared-breakpoints sense) with the original path.
        """
        members = tuple(int(m) for m in members)
        if not members or any(a >= b for a, b in zip(members, members[1:])):
            raise RangeError("members must be nonempty and strictly increasing")
        if members[0] < 1 or members[-1] > self.dim:
            raise RangeError(f"members {members} out of 1..{self.dim}")
        where = {m: k + 1 for k, m in enumerate(members)}
        axes, slopes = [], []
        for a, s in zip(self.axes, self.slopes):
            if a in where:
                axes.append(where[a])
                slopes.append(s)
            else:
                axes.append(1)
                slopes.append(0.0)
        idx = np.asarray(members, dtype=int) - 1
        return RegularPath(self.start[idx], self.breakpoints,
                           tuple(axes), np.asarray(slopes))

    def restrict_components(self, lo: int, hi: int) -> "RegularPath":
        """Keep the contiguous component range lo..hi (1-based, inclusive)."""
        if not (1 <= lo <= hi <= self.dim):
            raise RangeError(f"component range {lo}..{hi} invalid for dim {self.dim}")
        return self.restrict_members(tuple(range(lo, hi + 1)))

    def to_jsonable(self) -> dict:
        return {
            "start": self.start.tolist(),
            "breakpoints": self.breakpoints.tolist(),
            "axes": list(self.axes),
            "slopes": self.slopes.tolist(),
        }

    @classmethod
    def from_jsonable(cls, obj) -> "RegularPath":
        return cls(np.asarray(obj["start"]), np.asarray(obj["breakpoints"]),
                   tuple(obj["axes"]), np.asarray(obj["slopes"]))


@dataclass(frozen=True)
class BrownianSpec:
    """Parameters of a Brownian driving path on a uniform grid."""

    dim: int
    drift: np.ndarray
    covariance: np.ndarray
    horizon: float
    steps: int
    seed: int

    def __post_init__(self):
        mu = np.asarray(self.drift, dtype=float).ravel()
        A = np.asarray(self.covariance, dtype=float)
        if mu.size != self.dim or A.shape != (self.dim, self.dim):
            raise DimensionError("drift/covariance sizes must match dim")
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")
        if self.horizon <= 0:
            raise ParameterError("horizon must be positive")
        scale = max(1.0, float(np.abs(A).max()))
        if np.abs(A - A.T).max() > 1e-12 * scale:
            raise CovarianceError("covariance must be symmetric")
        object.__setattr__(self, "drift", _freeze(mu))
        object.__setattr__(self, "covariance", _freeze(A))

    def to_jsonable(self) -> dict:
        return {
            "dim": self.dim,
            "drift": self.drift.tolist(),
            "covariance": self.covariance.tolist(),
            "horizon": self.horizon,
            "steps": self.steps,
            "seed": self.seed,
        }

    @classmethod
    def from_jsonable(cls, obj) -> "BrownianSpec":
        return cls(int(obj["dim"]), np.asarray(obj["drift"]),
                   np.asarray(obj["covariance"]), float(obj["horizon"]),
                   int(obj["steps"]), int(obj["seed"]))


def evaluate(path, t: float) -> np.ndarray:
    """Value of a sampled or regular path at time t."""
    return path.evaluate(t)


def symmetric_sqrt(A: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues above the floor are clipped to 0."""
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.abs(A).max()))
    w, U = np.linalg.eigh(0.5 * (A + A.T))
    if w.min() < COVARIANCE_EIG_FLOOR * scale:
        raise CovarianceError(
            f"covariance has eigenvalue {w.min():.3g} below the PSD floor"
        )
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def _component_stream(seed: int, key: int) -> np.random.Generator:
    # Stream splitting: one SeedSequence child per component, so subsystems
    # that share (seed, key) reproduce the same noise bitwise.
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(key)]))


def brownian_components(dim: int, horizon: float, steps: int, seed: int,
                        stream_offset: int = 0) -> SampledPath:
    """Independent standard Brownian components on a uniform grid.

    Component k (1-based) draws from the stream keyed by
    ``stream_offset + k``; restricting to a component range and bumping the
    offset reproduces exactly the same columns.
    """
    if steps < 1:
        raise ParameterError("steps must be >= 1")
    dt = horizon / steps
    incs = np.empty((steps, dim))
    for j in range(dim):
        incs[:, j] = _component_stream(seed, stream_offset + j + 1).standard_normal(steps)
    values = np.vstack([np.zeros(dim), np.cumsum(incs * np.sqrt(dt), axis=0)])
    times = np.linspace(0.0, horizon, steps + 1)
    return SampledPath(times, values)


def sample_brownian(spec: BrownianSpec) -> SampledPath:
    """Brownian path with the spec's drift and covariance (starts at 0).

    Increments are mu*dt + F xi sqrt(dt) with F the symmetric square root of
    the covariance and xi i.i.d. standard normal vectors; deterministic for a
    fixed seed.
    """
    F = symmetric_sqrt(spec.covariance)
    dt = spec.horizon / spec.steps
    xi = np.empty((spec.steps, spec.dim))
    for j in range(spec.dim):
        xi[:, j] = _component_stream(spec.seed, j + 1).standard_normal(spec.steps)
    incs = spec.drift * dt + (xi @ F.T) * np.sqrt(dt)
    values = np.vstack([np.zeros(spec.dim), np.cumsum(incs, axis=0)])
    times = np.linspace(0.0, spec.horizon, spec.steps + 1)
    return SampledPath(times, values)


def cbp_driving_path(y0, g, sigma, B: SampledPath) -> SampledPath:
    """Rank-k driver y_k + g_k t + sigma_k B_k(t) on B's grid."""
    y0 = np.asarray(y0, dtype=float).ravel()
    g = np.asarray(g, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float).ravel()
    if not (y0.size == g.size == sigma.size == B.dim):
        raise DimensionError("y0, g, sigma and B must share the dimension")
    if np.any(np.diff(y0) < 0):
        raise OrderingError("y0 must be weakly increasing")
    if np.any(sigma <= 0):
        raise ParameterError("sigma must be strictly positive")
    values = y0 + g * B.times[:, None] + sigma * B.values
    return SampledPath(B.times, values)


def difference_path(X: SampledPath) -> SampledPath:
    """Adjacent-component differences (X_2 - X_1, ..., X_N - X_{N-1})."""
    if X.dim < 2:
        raise DimensionError("difference path needs dim >= 2")
    return SampledPath(X.times, X.values[:, 1:] - X.values[:, :-1])


def standard_regular_approximation(X: SampledPath, n: int) -> RegularPath:
    """Axis-sweep approximation of a sampled path at level n.

    [0, T] is split into n equal subintervals; within each, the d components
    are swept one at a time in axis order 1..d, each moving linearly to its
    value at the subinterval's right endpoint.  The output interpolates X at
    all the anchor times kT/n and has n*d segments.
    """
    if n < 1:
        raise ParameterError("approximation level n must be >= 1")
    d = X.dim
    T = X.horizon
    anchors = np.linspace(0.0, T, n + 1)
    V = X.values_at(anchors)
    sweep_dt = T / (n * d)
    breakpoints = np.linspace(0.0, T, n * d + 1)
    slopes = (np.diff(V, axis=0) / sweep_dt).ravel()
    axes = tuple(range(1, d + 1)) * n
    return RegularPath(V[0], breakpoints, axes, slopes)


def coupled_regular_approximation(X: SampledPath, Xbar: SampledPath,
                                  n: int) -> tuple[RegularPath, RegularPath]:
    """Level-n approximations of a dominated pair, sharing breakpoints and axes.

    Requires the inputs on the same grid with X(0) <= Xbar(0) and
    increment domination on the grid; the outputs then satisfy the same
    relations exactly at every time.
    """
    check = increments_dominated(X, Xbar)
    if not check.ok:
        s, t, i = check.first_violation
        raise DominationError(
            f"increment domination fails on [{s}, {t}] component {i}",
            where=check.first_violation,
        )
    return (standard_regular_approximation(X, n),
            standard_regular_approximation(Xbar, n))


@dataclass(frozen=True)
class DominationCheck:
    """Result of an increment-domination test."""

    ok: bool
    first_violation: tuple[float, float, int] | None = None

    def __bool__(self) -> bool:
        return self.ok


def increments_dominated(X: SampledPath, Xbar: SampledPath,
                         atol: float | None = None) -> DominationCheck:
    """Whether X(0) <= Xbar(0) and all grid increments of X are <= Xbar's.

    Checked per adjacent step, which for piecewise-linear paths on a common
    grid is equivalent to domination over every pair s <= t (telescoping).
    ``atol`` absorbs representation noise; the default scales with the data
    so that pairs built by independent float arithmetic still register.
    """
    if X.dim != Xbar.dim:
        raise AlignmentError("paths must share the dimension")
    if not np.array_equal(X.times, Xbar.times):
        raise AlignmentError("paths must share the time grid")
    if atol is None:
        scale = max(float(np.abs(X.values).max()),
                    float(np.abs(Xbar.values).max()), 1.0)
        atol = 1e-12 * scale
    start_gap = X.values[0] - Xbar.values[0]
    if start_gap.max() > atol:
        i = int(np.argmax(start_gap))
        return DominationCheck(False, (0.0, 0.0, i + 1))
    gaps = np.diff(X.values, axis=0) - np.diff(Xbar.values, axis=0)
    bad = np.argwhere(gaps > atol)
    if len(bad):
        k, i = bad[0]
        return DominationCheck(
            False, (float(X.times[k]), float(X.times[k + 1]), int(i) + 1)
        )
    return DominationCheck(True)


def write_path_csv(fileobj, times: np.ndarray, values: np.ndarray,
                   prefix: str = "x", header: list[str] | None = None) -> None:
    """CSV with header t,<prefix>1..<prefix>d (or an explicit header)."""
    writer = csv.writer(fileobj, lineterminator="\n")
    if header is None:
        header = [f"{prefix}{k + 1}" for k in range(values.shape[1])]
    writer.writerow(["t"] + header)
    for t, row in zip(times, values):
        writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def read_path_csv(fileobj) -> tuple[np.ndarray, np.ndarray]:
    reader = csv.reader(fileobj)
    header = next(reader)
    if not header or header[0] != "t":
        raise ParameterError("path CSV must start with a 't' column")
    rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float)
    return data[:, 0], data[:, 1:]


def path_to_json(path) -> str:
    return json.dumps(path.to_jsonable(), sort_keys=True)
