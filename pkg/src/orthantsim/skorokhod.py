"""Solvers for the Skorohod problem in the positive orthant.

Given a driving path X with X(0) in the orthant and a reflection nonsingular
M-matrix R, the Skorohod problem asks for Z = X + R L >= 0 with each L_i
nondecreasing from 0 and growing only while Z_i = 0.  This module provides:

* an exact event-driven solver for regular (axis-parallel piecewise-linear)
  driving paths, built from the closed-form single-segment solution;
* an independent fixed-point oracle on a time grid;
* the continuous-path route (regular approximation + exact solve);
* memoryless restart, and Monte Carlo SRBM simulation.

Solutions are piecewise linear and carried exactly by ``SampledPath`` objects
whose grids are the solver's event/breakpoint times.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    ParameterError,
    RangeError,
)
from .mmatrix import ReflectionMatrix
from .paths import RegularPath, SampledPath, sample_brownian, BrownianSpec
from .paths import standard_regular_approximation, write_path_csv

HIT_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class PhaseEvent:
    """A jump time of the active boundary set, with the set before/after."""

    tau: float
    active_before: tuple[int, ...]
    active_after: tuple[int, ...]

    def to_jsonable(self) -> dict:
        return {
            "tau": self.tau,
            "active_before": list(self.active_before),
            "active_after": list(self.active_after),
        }


@dataclass(frozen=True)
class SkorokhodSolution:
    """Paired orthant path Z and boundary terms L, plus active-set events."""

    Z: SampledPath
    L: SampledPath
    events: tuple[PhaseEvent, ...]
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.Z.dim

    @property
    def final_boundary_terms(self) -> np.ndarray:
        return self.L.values[-1]

    def to_csv(self, fileobj) -> None:
        d = self.dim
        header = [f"z{k + 1}" for k in range(d)] + [f"l{k + 1}" for k in range(d)]
        write_path_csv(fileobj, self.Z.times,
                       np.hstack([self.Z.values, self.L.values]), header=header)

    def events_to_jsonable(self) -> list[dict]:
        return [e.to_jsonable() for e in self.events]


def _check_start(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size != d:
        raise DimensionError(f"start point has size {x.size}, expected {d}")
    if not np.all(np.isfinite(x)):
        raise DomainError("start point contains NaN or infinite entries")
    if x.min() < 0:
        raise DomainError(f"start point {x} is outside the orthant")
    return x


def _segment_arrays(Rm: np.ndarray, x: np.ndarray, i0: int, alpha: float,
                    T: float):
    """Exact single-segment solve; returns vertex arrays, events, idle flags.

    Driving path is x + alpha*e_i*t on [0, T].  For alpha >= 0 the path never
    leaves the orthant and (Z, L) = (X, 0).  For alpha < 0 the active set J
    of components pinned at the boundary only grows; within a phase the
    boundary terms grow linearly at rate |alpha| [R]_J^{-1} [e_i]_J and the
    free components decrease linearly, until the first of them hits zero.
    """
    d = Rm.shape[0]
    if alpha >= 0.0:
        z_end = x.copy()
        z_end[i0] += alpha * T
        times = [0.0, T]
        Zr = [x.copy(), z_end]
        Lr = [np.zeros(d), np.zeros(d)]
        return times, Zr, Lr, [], []

    a = -alpha
    times = [0.0]
    Zr = [x.copy()]
    Lr = [np.zeros(d)]
    events: list[PhaseEvent] = []
    idle: list[int] = []
    z = x.copy()
    l = np.zeros(d)
    t = 0.0

    def members(mask: np.ndarray) -> tuple[int, ...]:
        return tuple(int(j) + 1 for j in np.flatnonzero(mask))

    if z[i0] > 0.0:
        t_hit = z[i0] / a
        if t_hit >= T:
            z_end = z.copy()
            z_end[i0] += alpha * T
            times.append(T)
            Zr.append(z_end)
            Lr.append(l.copy())
            return times, Zr, Lr, events, idle
        before = members(z == 0.0)
        z = z.copy()
        z[i0] = 0.0
        t = t_hit
        times.append(t)
        Zr.append(z.copy())
        Lr.append(l.copy())
        events.append(PhaseEvent(t, before, members(z == 0.0)))

    guard = 0
    while t < T:
        guard += 1
        if guard > d + 2:
            raise ConvergenceError("phase loop exceeded the d+1 bound",
                                   details={"t": t, "z": z.tolist()})
        on = z == 0.0
        J = np.flatnonzero(on)
        Jc = np.flatnonzero(~on)
        ei = np.zeros(len(J))
        ei[np.searchsorted(J, i0)] = 1.0
        u = np.linalg.solve(Rm[np.ix_(J, J)], ei)
        # [R]_J^{-1}[e_i]_J >= 0 in exact arithmetic; clip roundoff dust
        if u.min() < -1e-9:
            raise ConvergenceError("negative boundary rate from M-matrix solve",
                                   details={"u": u.tolist()})
        u = np.maximum(u, 0.0)
        lam = a * u
        idle.extend(int(j) + 1 for j, r in zip(J, lam) if r == 0.0 and j != i0)
        if len(Jc):
            zslope = a * (Rm[np.ix_(Jc, J)] @ u)  # <= 0
            falling = zslope < 0.0
            if falling.any():
                dts = z[Jc[falling]] / (-zslope[falling])
                dt_min = float(dts.min())
            else:
                dt_min = np.inf
        else:
            zslope = np.zeros(0)
            falling = np.zeros(0, dtype=bool)
            dt_min = np.inf
        t_next = min(t + dt_min, T)
        dt = t_next - t
        z = z.copy()
        if len(Jc):
            z[Jc] = np.maximum(z[Jc] + zslope * dt, 0.0)
        l = l.copy()
        l[J] += lam * dt
        if t_next < T:
            hitters = Jc[falling][dts <= dt_min * (1.0 + HIT_TIE_RTOL)]
            z[hitters] = 0.0
            events.append(PhaseEvent(t_next, members(on), members(z == 0.0)))
        times.append(t_next)
        Zr.append(z.copy())
        Lr.append(l.copy())
        t = t_next
    return times, Zr, Lr, events, idle


def solve_linear_segment(R: ReflectionMatrix, x, i: int, alpha: float,
                         T: float, active0=None) -> SkorokhodSolution:
    """Exact Skorohod solution for the driving path x + alpha*e_i*t on [0, T].

    ``i`` is 1-based.  ``active0``, when given, must agree with the boundary
    set read off from x (all components equal to zero); it is accepted for
    restart plumbing and validated, never trusted over x.
    """
    d = R.dim
    x = _check_start(x, d)
    if not 1 <= i <= d:
        raise ParameterError(f"axis index {i} out of 1..{d}")
    if T <= 0:
        raise ParameterError("horizon T must be positive")
    if active0 is not None:
        zero = {int(j) + 1 for j in np.flatnonzero(x == 0.0)}
        extra = set(int(j) for j in active0) - zero
        if extra:
            raise DomainError(
                f"active0 members {sorted(extra)} have nonzero coordinates"
            )
    times, Zr, Lr, events, idle = _segment_arrays(R.entries, x, i - 1, alpha, T)
    Z = SampledPath(np.asarray(times), np.asarray(Zr))
    L = SampledPath(np.asarray(times), np.asarray(Lr))
    diag = _solution_diagnostics(R, Z, L, lambda ts: _linear_driver(x, i - 1, alpha, ts))
    diag["idle_boundary_components"] = sorted(set(idle))
    diag["phases"] = len(events) + 1
    return SkorokhodSolution(Z, L, tuple(events), diag)


def _linear_driver(x: np.ndarray, i0: int, alpha: float, ts: np.ndarray) -> np.ndarray:
    out = np.tile(x, (len(ts), 1))
    out[:, i0] += alpha * np.asarray(ts)
    return out


def _solution_diagnostics(R: ReflectionMatrix, Z: SampledPath, L: SampledPath,
                          driver_at) -> dict:
    X = driver_at(Z.times)
    resid = np.abs(Z.values - X - L.values @ R.entries.T).max()
    return {
        "max_identity_residual": float(resid),
        "min_z": float(Z.values.min()),
    }


def solve_regular(R: ReflectionMatrix, X: RegularPath) -> SkorokhodSolution:
    """Exact solution for a regular driving path, one linear segment at a time.

    Uses the memoryless restart: after each segment the next one is solved
    from the current Z value with the segment's own slope, and boundary terms
    accumulate across segments.
    """
    if X.dim != R.dim:
        raise DimensionError("path dimension must match the matrix dimension")
    z = _check_start(X.start, R.dim)
    durations = np.diff(X.breakpoints)
    times = [np.asarray([0.0])]
    Zrows = [z[None, :].copy()]
    Lrows = [np.zeros((1, R.dim))]
    events: list[PhaseEvent] = []
    idle: set[int] = set()
    phase_counts = []
    l_offset = np.zeros(R.dim)
    for k, (axis, slope, dur) in enumerate(zip(X.axes, X.slopes, durations)):
        t_offset = float(X.breakpoints[k])
        seg_t, seg_Z, seg_L, seg_events, seg_idle = _segment_arrays(
            R.entries, z, axis - 1, float(slope), float(dur)
        )
        shifted = t_offset + np.asarray(seg_t)[1:]
        shifted[-1] = X.breakpoints[k + 1]  # kill accumulated rounding
        times.append(shifted)
        Zrows.append(np.asarray(seg_Z)[1:])
        Lrows.append(l_offset + np.asarray(seg_L)[1:])
        events.extend(
            PhaseEvent(t_offset + e.tau, e.active_before, e.active_after)
            for e in seg_events
        )
        idle.update(seg_idle)
        phase_counts.append(len(seg_events) + 1)
        z = np.asarray(seg_Z)[-1]
        l_offset = l_offset + np.asarray(seg_L)[-1]
    Z = SampledPath(np.concatenate(times), np.vstack(Zrows))
    L = SampledPath(np.concatenate(times), np.vstack(Lrows))
    diag = _solution_diagnostics(R, Z, L, X.values_at)
    diag["idle_boundary_components"] = sorted(idle)
    diag["phase_counts"] = phase_counts
    diag["method"] = "regular-exact"
    return SkorokhodSolution(Z, L, tuple(events), diag)


def solve_grid_oracle(R: ReflectionMatrix, X: SampledPath, tol: float = 1e-8,
                      max_iter: int = 10_000) -> SkorokhodSolution:
    """Fixed-point grid solution, independent of the event-driven solver.

    Iterates L_i(t_k) <- max_{s <= t_k} [ -X_i(s) + (Q L)_i(s) ]^+ with
    Q = I - R, starting from L = 0.  Iterates are monotone nondecreasing and
    converge geometrically; stops when the sup-change drops below tol.
    """
    if X.dim != R.dim:
        raise DimensionError("path dimension must match the matrix dimension")
    _check_start(X.values[0], R.dim)
    if tol <= 0:
        raise ParameterError("tol must be positive")
    Xv = X.values
    Qt = R.q_matrix().T
    L = np.zeros_like(Xv)
    scale = max(1.0, float(np.abs(Xv).max()))
    sup_changes = []
    monotone = True
    for m in range(1, max_iter + 1):
        G = L @ Qt - Xv
        np.maximum.accumulate(G, axis=0, out=G)
        np.maximum(G, 0.0, out=G)
        diff = G - L
        delta = float(np.abs(diff).max())
        if diff.min() < -1e-12 * scale:
            monotone = False
        L = G
        sup_changes.append(delta)
        if delta < tol:
            break
    else:
        raise ConvergenceError(
            f"grid fixed point not converged after {max_iter} iterations",
            details={"last_sup_change": sup_changes[-1]},
        )
    Z = Xv + L @ R.entries.T
    diag = {
        "iterations": m,
        "sup_changes": sup_changes,
        "monotone": monotone,
        "max_identity_residual": 0.0,  # Z is defined as X + RL here
        "min_z": float(Z.min()),
        "method": "grid-oracle",
    }
    return SkorokhodSolution(SampledPath(X.times, Z), SampledPath(X.times, L),
                             (), diag)


def solve_continuous(R: ReflectionMatrix, X: SampledPath, n: int) -> SkorokhodSolution:
    """Exact solve of the level-n regular approximation of X.

    By continuity of the Skorohod map the result converges uniformly to the
    solution for X as n grows.
    """
    sol = solve_regular(R, standard_regular_approximation(X, n))
    sol.diagnostics["level"] = n
    sol.diagnostics["method"] = "continuous"
    return sol


def restart_inputs(R: ReflectionMatrix, X, sol: SkorokhodSolution, T: float):
    """Driving path and start point that reproduce ``sol`` beyond time T.

    Returns (X_T, Z(T)) with X_T(t) = X(T + t) - X(T) + Z(T); solving the
    Skorohod problem for X_T continues the original solution, with boundary
    terms shifted by L(T).
    """
    horizon = X.horizon
    if T < 0 or T > sol.Z.horizon or T > horizon:
        raise RangeError(f"restart time {T} outside the solved horizon")
    if T == horizon:
        raise RangeError("nothing remains beyond the full horizon")
    zT = sol.Z.values_at(np.asarray([T]))[0]
    if isinstance(X, RegularPath):
        bp = X.breakpoints
        k = int(np.searchsorted(bp, T, side="right") - 1)
        k = min(k, len(X.axes) - 1)
        new_bp = np.concatenate([[T], bp[bp > T]]) - T
        axes = X.axes[k:]
        slopes = X.slopes[k:]
        return RegularPath(zT, new_bp, axes, slopes), zT
    ts = np.concatenate([[T], X.times[X.times > T]])
    vals = X.values_at(ts)
    return SampledPath(ts - T, vals - vals[0] + zT), zT


def simulate_srbm(R: ReflectionMatrix, mu, A, z0, horizon: float, steps: int,
                  seed: int, method: str = "exact", level: int | None = None,
                  tol: float = 1e-8, max_iter: int = 10_000,
                  noise: SampledPath | None = None) -> SkorokhodSolution:
    """Sample and reflect a Brownian driving path from z0.

    ``method="exact"`` solves via the regular approximation (level defaults
    to the step count, anchoring at every grid time); ``method="grid"`` uses
    the fixed-point oracle.  Passing ``noise`` (a zero-drift path on its own
    grid) replaces sampling: the driver becomes z0 + mu*t + noise(t), which
    supports coupled-noise experiments.  Deterministic per seed.
    """
    z0 = _check_start(z0, R.dim)
    mu = np.asarray(mu, dtype=float).ravel()
    if noise is None:
        B = sample_brownian(BrownianSpec(R.dim, mu, np.asarray(A, dtype=float),
                                         horizon, steps, seed))
        driving = SampledPath(B.times, z0 + B.values)
    else:
        if noise.dim != R.dim:
            raise DimensionError("noise dimension must match the matrix")
        driving = SampledPath(noise.times,
                              z0 + mu * noise.times[:, None] + noise.values)
    if method == "exact":
        sol = solve_continuous(R, driving, level or steps)
    elif method == "grid":
        sol = solve_grid_oracle(R, driving, tol=tol, max_iter=max_iter)
    else:
        raise ParameterError(f"unknown method {method!r}; use 'exact' or 'grid'")
    sol.diagnostics["seed"] = seed
    return sol


def write_solution(sol: SkorokhodSolution, csv_file, events_file=None) -> None:
    """CSV trajectory plus the JSON events sidecar."""
    sol.to_csv(csv_file)
    if events_file is not None:
        json.dump(sol.events_to_jsonable(), events_file, indent=2, sort_keys=True)
        events_file.write("\n")
