"""Executable comparison theorems for reflected paths and particle systems.

Each checker couples two runs, asserts the claimed domination relations at
every recorded time, and reports the worst signed margin with its location.
A positive margin is the amount by which the worst inequality fails; checks
pass when the margin stays at or below the tolerance.  Hypothesis violations
raise ``PreconditionError`` -- there are no silent passes.

Boundary/collision-term relations are checked per adjacent recorded step,
which implies the all-pairs increment relation by telescoping.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError, PreconditionError
from .mmatrix import ReflectionMatrix, spectral_radius_nonneg
from .paths import (
    RegularPath,
    SampledPath,
    difference_path,
    increments_dominated,
    standard_regular_approximation,
)
from .particles import (
    CbpSpec,
    CollisionParams,
    ParticleSystemSolution,
    driving_path_for,
    gap_drift_and_covariance,
    reflection_matrix_from_params,
    simulate_cbp,
    solve_competing,
)
from .skorokhod import (
    SkorokhodSolution,
    simulate_srbm,
    solve_grid_oracle,
    solve_regular,
)

EXACT_TOL = 1e-9
GRID_TOL_BASE = 1e-6


@dataclass(frozen=True)
class ViolationLocation:
    time: float
    component: int
    relation: str

    def to_jsonable(self) -> dict:
        return {"t": self.time, "component": self.component,
                "relation": self.relation}


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of one coupled comparison check."""

    passed: bool
    max_violation: float
    location: ViolationLocation
    tolerance: float
    seed: str | None = None
    details: dict = field(default_factory=dict, compare=False)

    def to_jsonable(self) -> dict:
        return {
            "passed": self.passed,
            "max_violation": self.max_violation,
            "location": self.location.to_jsonable(),
            "tol": self.tolerance,
            "seed": self.seed,
        }


class _Margins:
    """Accumulates signed violation margins and remembers the worst one."""

    def __init__(self):
        self.worst = -np.inf
        self.location = ViolationLocation(0.0, 1, "none")

    def add(self, margins: np.ndarray, times: np.ndarray, relation: str,
            component_offset: int = 0) -> None:
        margins = np.atleast_2d(margins)
        flat = int(np.argmax(margins))
        k, c = np.unravel_index(flat, margins.shape)
        value = float(margins[k, c])
        if value > self.worst:
            self.worst = value
            self.location = ViolationLocation(
                float(times[k]), int(c) + 1 + component_offset, relation
            )

    def report(self, tol: float, **details) -> ComparisonReport:
        return ComparisonReport(
            passed=self.worst <= tol,
            max_violation=self.worst,
            location=self.location,
            tolerance=tol,
            details=details,
        )


def _union_times(a: SampledPath, b: SampledPath) -> np.ndarray:
    return np.union1d(a.times, b.times)


def _grid_residual(sol: SkorokhodSolution) -> float:
    changes = sol.diagnostics.get("sup_changes") or [0.0]
    return changes[-1] + max(0.0, -sol.diagnostics.get("min_z", 0.0))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise PreconditionError(message)


def _regular_pair_dominated(X: RegularPath, Xbar: RegularPath) -> None:
    _require(X.dim == Xbar.dim, "paths must share the dimension")
    _require(np.array_equal(X.breakpoints, Xbar.breakpoints)
             and X.axes == Xbar.axes,
             "regular paths must be coupled (same breakpoints and axes)")
    _require(bool(np.all(X.start <= Xbar.start)), "X(0) <= Xbar(0) fails")
    _require(bool(np.all(X.slopes <= Xbar.slopes)),
             "segment increment domination fails")


def _sampled_pair_dominated(X: SampledPath, Xbar: SampledPath) -> None:
    check = increments_dominated(X, Xbar)
    if not check.ok:
        s, t, i = check.first_violation
        raise PreconditionError(
            f"increment domination fails on [{s}, {t}] component {i}"
        )


def check_skorokhod_comparison(R: ReflectionMatrix, Rbar: ReflectionMatrix,
                               X, Xbar, tol: float | None = None,
                               grid_tol: float = 1e-8) -> ComparisonReport:
    """Coupled monotonicity of the Skorohod solution and boundary terms.

    Hypotheses: R <= Rbar entrywise (both in the M-matrix class), starts in
    the orthant, and increment domination of the drivers.  Asserts
    Z <= Zbar at all recorded times and per-step boundary-term increment
    domination L(t)-L(s) >= Lbar(t)-Lbar(s).  Regular coupled inputs are
    solved exactly; sampled inputs on a common grid go through the
    fixed-point oracle.
    """
    _require(R.dim == Rbar.dim, "matrices must share the dimension")
    _require(not np.any(R.entries > Rbar.entries), "R <= Rbar entrywise fails")
    _require(X.dim == R.dim and Xbar.dim == R.dim,
             "paths must match the matrix dimension")
    _require(float(np.min(X.values_at([0.0]))) >= 0
             and float(np.min(Xbar.values_at([0.0]))) >= 0,
             "both drivers must start in the orthant")

    if isinstance(X, RegularPath) and isinstance(Xbar, RegularPath):
        _regular_pair_dominated(X, Xbar)
        sol = solve_regular(R, X)
        bar = solve_regular(Rbar, Xbar)
        effective_tol = EXACT_TOL if tol is None else tol
        route = "exact"
    elif isinstance(X, SampledPath) and isinstance(Xbar, SampledPath):
        _sampled_pair_dominated(X, Xbar)
        sol = solve_grid_oracle(R, X, tol=grid_tol)
        bar = solve_grid_oracle(Rbar, Xbar, tol=grid_tol)
        if tol is None:
            tol = GRID_TOL_BASE + 2.0 * (_grid_residual(sol) + _grid_residual(bar))
        effective_tol = tol
        route = "grid"
    else:
        raise PreconditionError(
            "need either two coupled regular paths or two sampled paths"
        )

    times = _union_times(sol.Z, bar.Z)
    m = _Margins()
    m.add(sol.Z.values_at(times) - bar.Z.values_at(times), times, "Z<=Zbar")
    dL = np.diff(sol.L.values_at(times), axis=0)
    dLbar = np.diff(bar.L.values_at(times), axis=0)
    m.add(dLbar - dL, times[1:], "dL>=dLbar")
    return m.report(effective_tol, route=route)


def check_particle_comparison(q: CollisionParams, qbar: CollisionParams,
                              X, Xbar, tol: float | None = None,
                              grid_tol: float = 1e-8) -> ComparisonReport:
    """Coupled monotonicity of ranked particle positions.

    Hypotheses: increment domination of the drivers, ordered starts, and
    q+_n <= qbar+_n for n = 2..N.  Asserts Y(t) <= Ybar(t) componentwise at
    all recorded times.
    """
    n = q.n_particles
    _require(qbar.n_particles == n, "parameter sets must share the size")
    _require(all(q.qplus[k] <= qbar.qplus[k] for k in range(1, n)),
             "q+_n <= qbar+_n (n = 2..N) fails")
    _require(X.dim == n and Xbar.dim == n,
             "drivers must match the particle count")
    start = X.values_at([0.0])[0]
    start_bar = Xbar.values_at([0.0])[0]
    _require(bool(np.all(np.diff(start) >= 0) and np.all(np.diff(start_bar) >= 0)),
             "both drivers must start in the ordered cone")

    if isinstance(X, RegularPath) and isinstance(Xbar, RegularPath):
        _regular_pair_dominated(X, Xbar)
        sol = solve_competing(q, X)
        bar = solve_competing(qbar, Xbar)
        effective_tol = EXACT_TOL if tol is None else tol
        route = "exact"
    elif isinstance(X, SampledPath) and isinstance(Xbar, SampledPath):
        _sampled_pair_dominated(X, Xbar)
        sol = solve_competing(q, X, method="grid", tol=grid_tol)
        bar = solve_competing(qbar, Xbar, method="grid", tol=grid_tol)
        if tol is None:
            tol = GRID_TOL_BASE + 2.0 * grid_tol
        effective_tol = tol
        route = "grid"
    else:
        raise PreconditionError(
            "need either two coupled regular paths or two sampled paths"
        )

    times = _union_times(sol.Y, bar.Y)
    m = _Margins()
    m.add(sol.Y.values_at(times) - bar.Y.values_at(times), times, "Y<=Ybar")
    return m.report(effective_tol, route=route)


def _solved_pair_margins(m: _Margins, sol: ParticleSystemSolution,
                         bar: ParticleSystemSolution, gap_cols: np.ndarray,
                         positions: str | None, pos_cols: np.ndarray,
                         gap_offset: int, pos_offset: int) -> None:
    """Gap / collision-term / optional position relations on the union grid."""
    times = _union_times(sol.Y, bar.Y)
    Zf = sol.Z.values_at(times)[:, gap_cols]
    Zs = bar.Z.values_at(times)
    m.add(Zf - Zs, times, "Z<=Zbar", component_offset=gap_offset)
    dLf = np.diff(sol.L.values_at(times)[:, gap_cols], axis=0)
    dLs = np.diff(bar.L.values_at(times), axis=0)
    m.add(dLs - dLf, times[1:], "dL>=dLbar", component_offset=gap_offset)
    if positions is not None:
        Yf = sol.Y.values_at(times)[:, pos_cols]
        Ys = bar.Y.values_at(times)
        if positions in ("le", "eq"):
            m.add(Yf - Ys, times, "Y<=Ybar", component_offset=pos_offset)
        if positions in ("ge", "eq"):
            m.add(Ys - Yf, times, "Y>=Ybar", component_offset=pos_offset)


def check_removal_corollaries(spec: CbpSpec, lo: int, hi: int,
                              tol: float = EXACT_TOL,
                              level: int | None = None) -> ComparisonReport:
    """Effect of removing particles outside ranks lo..hi, on coupled noise.

    The subsystem is driven by the component restriction of the full
    system's regular approximation, so the corollary relations hold exactly
    for the compared pair.  Right removal (lo = 1, hi < N) asserts position,
    gap, and collision-term relations; left removal flips the position
    relation; two-sided removal asserts gap/collision-term relations only.
    """
    n = spec.n_particles
    if not (1 <= lo < hi <= n):
        raise PreconditionError(f"need 1 <= lo < hi <= N, got {lo}..{hi} of {n}")
    X = driving_path_for(spec)
    Xn = standard_regular_approximation(X, level or spec.steps)
    full = solve_competing(spec.q, Xn)
    sub_q = CollisionParams(spec.q.qplus[lo - 1:hi], spec.q.qminus[lo - 1:hi])
    sub = solve_competing(sub_q, Xn.restrict_components(lo, hi))

    if lo == 1 and hi == n:
        positions = "eq"
    elif lo == 1:
        positions = "le"
    elif hi == n:
        positions = "ge"
    else:
        positions = None
    gap_cols = np.arange(lo - 1, hi - 1)
    pos_cols = np.arange(lo - 1, hi)
    m = _Margins()
    _solved_pair_margins(m, full, sub, gap_cols, positions, pos_cols,
                         gap_offset=lo - 1, pos_offset=lo - 1)
    return m.report(tol, lo=lo, hi=hi, positions=positions)


def check_skorokhod_removal(R: ReflectionMatrix, X, members,
                            tol: float = EXACT_TOL,
                            level: int | None = None) -> ComparisonReport:
    """Dropping driver components relaxes the remaining reflected ones.

    Solves the full problem and the restricted problem ([R]_I, [X]_I) and
    asserts [Z]_I <= Zbar with per-step increment domination of the retained
    boundary terms.
    """
    members = tuple(int(v) for v in members)
    _require(len(members) >= 1 and all(1 <= v <= R.dim for v in members),
             "members must be a nonempty subset of 1..d")
    if isinstance(X, SampledPath):
        X = standard_regular_approximation(X, level or len(X.times) - 1)
    idx = np.asarray(members, dtype=int) - 1
    Rsub = ReflectionMatrix(R.entries[np.ix_(idx, idx)])
    full = solve_regular(R, X)
    sub = solve_regular(Rsub, X.restrict_members(members))
    times = _union_times(full.Z, sub.Z)
    m = _Margins()
    m.add(full.Z.values_at(times)[:, idx] - sub.Z.values_at(times), times,
          "Z<=Zbar")
    dLf = np.diff(full.L.values_at(times)[:, idx], axis=0)
    dLs = np.diff(sub.L.values_at(times), axis=0)
    m.add(dLs - dLf, times[1:], "dL>=dLbar")
    return m.report(tol, members=members)


def _shifted_driver(X: SampledPath, offset: np.ndarray,
                    rate: np.ndarray | None = None) -> SampledPath:
    """X plus a constant componentwise offset and optional linear drift.

    Built additively on X's own values so that shared increments stay
    bitwise identical and domination preconditions hold exactly.
    """
    vals = X.values + offset
    if rate is not None:
        vals = vals + np.outer(X.times, rate)
    return SampledPath(X.times, vals)


def _gap_relation_margins(m: _Margins, q: CollisionParams, X: SampledPath,
                          offset: np.ndarray, rate: np.ndarray | None,
                          nlev: int) -> None:
    """Gap/collision-term comparison run directly in gap space.

    The gap corollaries reduce to the Skorohod comparison for the differenced
    drivers; coupling the approximations in gap space (one gap moves per
    sweep) keeps the increment-domination hypothesis exact, which coupling in
    particle space would not.
    """
    W = difference_path(X)
    Wbar = _shifted_driver(W, offset, rate)
    Wn = standard_regular_approximation(W, nlev)
    Wbarn = standard_regular_approximation(Wbar, nlev)
    R = reflection_matrix_from_params(q)
    sol = solve_regular(R, Wn)
    bar = solve_regular(R, Wbarn)
    times = _union_times(sol.Z, bar.Z)
    m.add(sol.Z.values_at(times) - bar.Z.values_at(times), times, "Z<=Zbar")
    dL = np.diff(sol.L.values_at(times), axis=0)
    dLbar = np.diff(bar.L.values_at(times), axis=0)
    m.add(dLbar - dL, times[1:], "dL>=dLbar")


def check_initial_shift(spec: CbpSpec, y0bar=None, z0bar=None,
                        tol: float = EXACT_TOL,
                        level: int | None = None) -> ComparisonReport:
    """Monotonicity in the starting configuration under shared noise.

    Part (i): y0 <= y0bar implies Y <= Ybar.  Part (ii): gap starts
    dominated implies gap domination and reversed collision-term increments.
    Runs whichever parts have arguments.
    """
    if y0bar is None and z0bar is None:
        raise PreconditionError("need y0bar (part i) and/or z0bar (part ii)")
    n = spec.n_particles
    X = driving_path_for(spec)
    nlev = level or spec.steps
    y0 = np.asarray(spec.y0)
    m = _Margins()
    details = {}

    if y0bar is not None:
        y0bar = np.asarray(y0bar, dtype=float)
        _require(y0bar.size == n and bool(np.all(np.diff(y0bar) >= 0)),
                 "y0bar must be an ordered vector of matching size")
        _require(bool(np.all(y0 <= y0bar)), "y0 <= y0bar fails")
        base = solve_competing(spec.q, standard_regular_approximation(X, nlev))
        Xbar = standard_regular_approximation(_shifted_driver(X, y0bar - y0), nlev)
        bar = solve_competing(spec.q, Xbar)
        times = _union_times(base.Y, bar.Y)
        m.add(base.Y.values_at(times) - bar.Y.values_at(times), times, "Y<=Ybar")
        details["part_i"] = True

    if z0bar is not None:
        z0bar = np.asarray(z0bar, dtype=float)
        z0 = np.diff(y0)
        _require(z0bar.size == n - 1 and bool(np.all(z0bar >= 0)),
                 "z0bar must be a nonnegative vector of size N-1")
        _require(bool(np.all(z0 <= z0bar)), "Z(0) <= z0bar fails")
        _gap_relation_margins(m, spec.q, X, z0bar - z0, None, nlev)
        details["part_ii"] = True

    return m.report(tol, **details)


def check_parameter_monotonicity(spec: CbpSpec, qbar: CollisionParams | None = None,
                                 gbar=None, tol: float = EXACT_TOL,
                                 level: int | None = None) -> ComparisonReport:
    """Monotonicity in collision shares and drift coefficients, shared noise.

    Raising q+ (ranks 2..N) or every drift raises all positions; raising
    only the drift gaps g_{k+1} - g_k widens the gaps and lowers the
    collision-term increments (checked only when the collision parameters
    are unchanged, as the gap corollary requires).
    """
    if qbar is None and gbar is None:
        raise PreconditionError("need qbar and/or gbar")
    n = spec.n_particles
    g = np.asarray(spec.g)
    X = driving_path_for(spec)
    nlev = level or spec.steps
    m = _Margins()
    details = {}

    qb = qbar if qbar is not None else spec.q
    if qbar is not None:
        _require(qbar.n_particles == n, "qbar must match the particle count")
        _require(all(spec.q.qplus[k] <= qbar.qplus[k] for k in range(1, n)),
                 "q+_n <= qbar+_n (n = 2..N) fails")

    if gbar is not None:
        gbar = np.asarray(gbar, dtype=float)
        _require(gbar.size == n, "gbar must match the particle count")
        drift_dom = bool(np.all(g <= gbar))
        gap_dom = bool(np.all(np.diff(g) <= np.diff(gbar)))
        _require(drift_dom or gap_dom,
                 "need g <= gbar or drift-gap domination")
        Xbar_raw = _shifted_driver(X, np.zeros(n), gbar - g)
    else:
        drift_dom, gap_dom = True, False
        Xbar_raw = X

    if drift_dom:
        base = solve_competing(spec.q, standard_regular_approximation(X, nlev))
        bar = solve_competing(qb, standard_regular_approximation(Xbar_raw, nlev))
        times = _union_times(base.Y, bar.Y)
        m.add(base.Y.values_at(times) - bar.Y.values_at(times), times, "Y<=Ybar")
        details["positions"] = True
    if gbar is not None and gap_dom and qbar is None:
        # the gap corollary fixes the collision parameters
        _gap_relation_margins(m, spec.q, X, np.zeros(n - 1), np.diff(gbar - g),
                              nlev)
        details["gaps"] = True

    return m.report(tol, **details)


@dataclass(frozen=True)
class CounterexampleResult:
    """Closed-form violation of the comparison when r21 > 0.

    With the driving pair X_1(t) = -t versus Xbar_1(t) = 1 - t (other
    components constant at 1) and a reflection matrix carrying a positive
    entry r21, the second components satisfy Z_2(t) = 1 + r21*t while
    Zbar_2(t) = 1 on [0, 1]: domination fails despite dominated drivers.
    """

    r21: float
    Z: SampledPath
    L: SampledPath
    Zbar: SampledPath
    Lbar: SampledPath
    max_violation: float
    location: ViolationLocation

    @property
    def certified(self) -> bool:
        return self.max_violation > 0.0

    def to_jsonable(self) -> dict:
        return {
            "r21": self.r21,
            "max_violation": self.max_violation,
            "location": self.location.to_jsonable(),
            "certified": self.certified,
        }


def counterexample_positive_offdiag(r21: float,
                                    num_points: int = 101) -> CounterexampleResult:
    """Emit the analytic trajectories showing the sign condition is necessary."""
    if r21 <= 0:
        raise ParameterError("r21 must be positive")
    if num_points < 2:
        raise ParameterError("need at least two output points")
    t = np.linspace(0.0, 1.0, num_points)
    Z = SampledPath(t, np.column_stack([np.zeros_like(t), 1.0 + r21 * t]))
    L = SampledPath(t, np.column_stack([t, np.zeros_like(t)]))
    Zbar = SampledPath(t, np.column_stack([1.0 - t, np.ones_like(t)]))
    Lbar = SampledPath(t, np.zeros((len(t), 2)))
    margin = float(r21)  # Z_2(1) - Zbar_2(1)
    return CounterexampleResult(
        r21=float(r21), Z=Z, L=L, Zbar=Zbar, Lbar=Lbar,
        max_violation=margin,
        location=ViolationLocation(1.0, 2, "Z<=Zbar violated (expected)"),
    )


# ---------------------------------------------------------------------------
# Randomized instance generation (seeded, reproducible)

def random_reflection_matrix(rng: np.random.Generator, d: int,
                             rho_range=(0.2, 0.85)) -> ReflectionMatrix:
    if d == 1:
        return ReflectionMatrix(np.eye(1))
    Q = rng.uniform(0.05, 1.0, (d, d))
    np.fill_diagonal(Q, 0.0)
    Q *= rng.uniform(*rho_range) / spectral_radius_nonneg(Q)
    return ReflectionMatrix(np.eye(d) - Q)


def random_dominated_matrix_pair(rng: np.random.Generator, d: int,
                                 rho_range=(0.2, 0.85)):
    """R <= Rbar entrywise, both valid: Qbar shrinks Q entrywise."""
    R = random_reflection_matrix(rng, d, rho_range)
    Q = R.q_matrix()
    Rbar = ReflectionMatrix(np.eye(d) - rng.uniform(0.0, 1.0, (d, d)) * Q)
    return R, Rbar


def random_dominated_sampled_pair(rng: np.random.Generator, d: int,
                                  grid: int = 32, T: float = 1.0,
                                  scale: float = 1.0):
    """Sampled pair with X(0) <= Xbar(0) and dominated grid increments."""
    times = np.linspace(0.0, T, grid + 1)
    dt = T / grid
    inc = rng.normal(0.0, scale * np.sqrt(dt), (grid, d))
    x0 = rng.uniform(0.0, 1.0, d)
    X = SampledPath(times, np.vstack([x0, x0 + np.cumsum(inc, axis=0)]))
    extra = rng.uniform(0.0, scale * dt, (grid, d))
    shift = rng.uniform(0.0, 0.5, d)
    bump = np.vstack([np.zeros(d), np.cumsum(extra, axis=0)]) + shift
    return X, SampledPath(times, X.values + bump)


def random_collision_params(rng: np.random.Generator, n: int,
                            lo: float = 0.15, hi: float = 0.85) -> CollisionParams:
    return CollisionParams.from_qminus(rng.uniform(lo, hi, n),
                                       qplus1=rng.uniform(lo, hi))


def random_dominated_params(rng: np.random.Generator, n: int):
    """(q, qbar) with qbar+_n >= q+_n for n = 2..N."""
    q = random_collision_params(rng, n)
    qm_bar = [rng.uniform(0.1, v) for v in q.qminus[:-1]] + [q.qminus[-1]]
    qbar = CollisionParams.from_qminus(
        qm_bar, qplus1=rng.uniform(q.qplus[0], 0.95))
    return q, qbar


def random_cbp_spec(rng: np.random.Generator, n: int, steps: int = 1000,
                    T: float = 1.0) -> CbpSpec:
    y0 = np.cumsum(rng.uniform(0.0, 0.6, n))
    return CbpSpec(
        g=tuple(rng.uniform(-1.5, 1.5, n)),
        sigma2=tuple(rng.uniform(0.3, 2.0, n)),
        q=random_collision_params(rng, n),
        y0=tuple(y0),
        horizon=T,
        steps=steps,
        seed=int(rng.integers(0, 2**32)),
    )


# ---------------------------------------------------------------------------
# Suites (used by the CLI `verify` command and the acceptance tests)

@dataclass(frozen=True)
class InstanceResult:
    index: int
    seed: str
    report: ComparisonReport | None
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.report is not None and self.report.passed

    def to_jsonable(self) -> dict:
        out = {"index": self.index, "seed": self.seed, "passed": self.passed}
        if self.report is not None:
            out["report"] = self.report.to_jsonable()
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class SuiteResult:
    name: str
    results: tuple[InstanceResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def worst_violation(self) -> float:
        vals = [r.report.max_violation for r in self.results if r.report]
        return max(vals) if vals else float("nan")

    def to_jsonable(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "instances": [r.to_jsonable() for r in self.results],
        }


def _instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _skorokhod_comparison_instance(rng, opts):
    d = int(rng.integers(1, opts.get("d_max", 5) + 1))
    R, Rbar = random_dominated_matrix_pair(rng, d)
    if opts.get("break_hypothesis"):
        R, Rbar = Rbar, R  # violates R <= Rbar unless equal
        if np.array_equal(R.entries, Rbar.entries):
            raise PreconditionError("degenerate broken instance")
    X, Xbar = random_dominated_sampled_pair(rng, d,
                                            grid=opts.get("grid", 24))
    n = int(opts.get("level", 6))
    Xr = standard_regular_approximation(X, n)
    Xbarr = standard_regular_approximation(Xbar, n)
    return check_skorokhod_comparison(R, Rbar, Xr, Xbarr,
                                      tol=opts.get("tol"))


def _particle_comparison_instance(rng, opts):
    n = int(rng.integers(2, opts.get("n_max", 6) + 1))
    q, qbar = random_dominated_params(rng, n)
    if opts.get("break_hypothesis"):
        q, qbar = qbar, q
    y0 = np.cumsum(rng.uniform(0.0, 0.4, n))
    ybar0 = y0 + np.cumsum(rng.uniform(0.0, 0.3, n))
    i = int(rng.integers(1, n + 1))
    alpha = float(rng.uniform(-2.0, 2.0))
    alpha_bar = alpha + float(rng.uniform(0.0, 1.5))
    T = float(rng.uniform(0.5, 2.0))
    X = RegularPath(y0, np.asarray([0.0, T]), (i,), np.asarray([alpha]))
    Xbar = RegularPath(ybar0, np.asarray([0.0, T]), (i,), np.asarray([alpha_bar]))
    return check_particle_comparison(q, qbar, X, Xbar, tol=opts.get("tol"))


def _removal_instance(rng, opts, two_sided: bool):
    n = int(rng.integers(3, opts.get("n_max", 6) + 1))
    spec = random_cbp_spec(rng, n, steps=opts.get("steps", 1000))
    if two_sided:
        lo = int(rng.integers(2, n))
        hi = int(rng.integers(lo + 1, n + 1))
        if lo == 1 and hi == n:
            hi = n - 1
    else:
        lo, hi = 1, int(rng.integers(2, n))
    return check_removal_corollaries(spec, lo, hi,
                                     tol=opts.get("tol", EXACT_TOL),
                                     level=opts.get("level", 200))


def _initial_shift_instance(rng, opts):
    n = int(rng.integers(2, opts.get("n_max", 6) + 1))
    spec = random_cbp_spec(rng, n, steps=opts.get("steps", 1000))
    y0 = np.asarray(spec.y0)
    y0bar = y0 + np.cumsum(rng.uniform(0.0, 0.5, n))
    z0bar = np.diff(y0) + rng.uniform(0.0, 0.5, n - 1)
    return check_initial_shift(spec, y0bar=y0bar, z0bar=z0bar,
                               tol=opts.get("tol", EXACT_TOL),
                               level=opts.get("level", 200))


def _increase_q_instance(rng, opts):
    n = int(rng.integers(2, opts.get("n_max", 6) + 1))
    spec = random_cbp_spec(rng, n, steps=opts.get("steps", 1000))
    q, qbar = random_dominated_params(rng, n)
    spec = replace(spec, q=q)
    return check_parameter_monotonicity(spec, qbar=qbar,
                                        tol=opts.get("tol", EXACT_TOL),
                                        level=opts.get("level", 200))


def _drift_instance(rng, opts):
    n = int(rng.integers(2, opts.get("n_max", 6) + 1))
    spec = random_cbp_spec(rng, n, steps=opts.get("steps", 1000))
    if rng.uniform() < 0.5:
        gbar = np.asarray(spec.g) + rng.uniform(0.0, 1.0, n)
    else:
        gbar = np.asarray(spec.g) + np.cumsum(rng.uniform(0.0, 0.8, n))
    return check_parameter_monotonicity(spec, gbar=gbar,
                                        tol=opts.get("tol", EXACT_TOL),
                                        level=opts.get("level", 200))


def _gap_srbm_instance(rng, opts):
    from .paths import brownian_components  # local import to avoid cycle noise
    n = int(rng.integers(2, opts.get("n_max", 5) + 1))
    spec = random_cbp_spec(rng, n, steps=opts.get("steps", 300))
    level = opts.get("level") or spec.steps
    cbp = simulate_cbp(spec, level=level)
    mu, A = gap_drift_and_covariance(spec.g, spec.sigma2)
    R = reflection_matrix_from_params(spec.q)
    B = brownian_components(n, spec.horizon, spec.steps, spec.seed,
                            spec.stream_offset)
    sig = np.sqrt(spec.sigma2)
    noise = SampledPath(B.times,
                        sig[1:] * B.values[:, 1:] - sig[:-1] * B.values[:, :-1])
    srbm = simulate_srbm(R, mu, A, np.diff(spec.y0), spec.horizon, spec.steps,
                         spec.seed, method="exact", level=level, noise=noise)
    times = _union_times(cbp.Z, srbm.Z)
    gap = np.abs(cbp.Z.values_at(times) - srbm.Z.values_at(times))
    m = _Margins()
    m.add(gap - 0.0, times, "|Z_cbp - Z_srbm| <= tol")
    return m.report(opts.get("tol", 1e-8))


def _counterexample_instance(rng, opts):
    r21 = float(opts.get("r21", rng.uniform(0.1, 1.0)))
    res = counterexample_positive_offdiag(r21)
    expected = abs(res.max_violation - r21) <= 1e-12 and res.certified
    m = _Margins()
    m.add(np.asarray([[0.0 if expected else 1.0]]), np.asarray([1.0]),
          "counterexample certified")
    return m.report(0.5, r21=r21)


SUITES = {
    "skorokhod_comparison": lambda rng, opts: _skorokhod_comparison_instance(rng, opts),
    "particle_comparison": lambda rng, opts: _particle_comparison_instance(rng, opts),
    "removal_right": lambda rng, opts: _removal_instance(rng, opts, False),
    "removal_two_sided": lambda rng, opts: _removal_instance(rng, opts, True),
    "initial_shift": lambda rng, opts: _initial_shift_instance(rng, opts),
    "increase_qplus": lambda rng, opts: _increase_q_instance(rng, opts),
    "drift": lambda rng, opts: _drift_instance(rng, opts),
    "gap_srbm": lambda rng, opts: _gap_srbm_instance(rng, opts),
    "counterexample": lambda rng, opts: _counterexample_instance(rng, opts),
}


def run_suite(name: str, instances: int, seed: int, **options) -> SuiteResult:
    """Run a named randomized suite with per-instance derived seeds."""
    if name not in SUITES:
        raise ParameterError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    runner = SUITES[name]
    results = []
    for idx in range(instances):
        rng = _instance_rng(seed, idx)
        tag = f"{seed}:{idx}"
        try:
            report = replace(runner(rng, options), seed=tag)
            results.append(InstanceResult(idx, tag, report))
        except PreconditionError as exc:
            results.append(InstanceResult(idx, tag, None,
                                          error=f"precondition: {exc}"))
    return SuiteResult(name, tuple(results))
