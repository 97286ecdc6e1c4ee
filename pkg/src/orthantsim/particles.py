"""Finite systems of competing particles with asymmetric collisions.

N ordered particles are driven componentwise by a path X; when adjacent
particles collide, a nondecreasing collision term splits the push between the
upper particle (share q+) and the lower one (share q-).  The gap process is a
Skorohod problem in the orthant with the tridiagonal reflection matrix built
from the collision parameters, which is how the general solver works; for
axis-parallel linear drivers the system also has a closed-form block solution
implemented directly.

Ranks, axis indices, and pair labels are 1-based: collision term k couples
ranks k and k+1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    OrderingError,
    ParameterError,
    RangeError,
)
from .mmatrix import ReflectionMatrix
from .paths import (
    RegularPath,
    SampledPath,
    brownian_components,
    cbp_driving_path,
    difference_path,
    write_path_csv,
)
from .skorokhod import PhaseEvent, solve_continuous, solve_grid_oracle

PARAM_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CollisionParams:
    """Collision shares q+_1..q+_N and q-_1..q-_N.

    Adjacent shares satisfy q+_{k+1} + q-_k = 1; all shares lie strictly in
    (0, 1).  q+_1 and q-_N never act (they multiply identically-zero terms)
    but are validated like the rest.
    """

    qplus: tuple[float, ...]
    qminus: tuple[float, ...]

    def __post_init__(self):
        qp = tuple(float(v) for v in self.qplus)
        qm = tuple(float(v) for v in self.qminus)
        object.__setattr__(self, "qplus", qp)
        object.__setattr__(self, "qminus", qm)
        if len(qp) != len(qm):
            raise ParameterError("qplus and qminus must have equal length")
        if len(qp) < 2:
            raise ParameterError("need at least two particles")
        for k, v in enumerate(qp + qm):
            if not 0.0 < v < 1.0:
                raise ParameterError(
                    f"collision parameter out of (0,1): entry {k + 1} = {v}"
                )
        for k in range(len(qp) - 1):
            if abs(qp[k + 1] + qm[k] - 1.0) > PARAM_SUM_TOL:
                raise ParameterError(
                    f"q+_{k + 2} + q-_{k + 1} = {qp[k + 1] + qm[k]} != 1"
                )

    @property
    def n_particles(self) -> int:
        return len(self.qplus)

    @classmethod
    def symmetric(cls, n: int) -> "CollisionParams":
        return cls((0.5,) * n, (0.5,) * n)

    @classmethod
    def from_qminus(cls, qminus, qplus1: float = 0.5) -> "CollisionParams":
        """Build from the lower shares q-_1..q-_N (q+_{k+1} = 1 - q-_k)."""
        qm = tuple(float(v) for v in qminus)
        qp = (float(qplus1),) + tuple(1.0 - v for v in qm[:-1])
        return cls(qp, qm)

    def to_jsonable(self) -> dict:
        return {"qplus": list(self.qplus), "qminus": list(self.qminus)}

    @classmethod
    def from_jsonable(cls, obj) -> "CollisionParams":
        if "symmetric" in obj:
            return cls.symmetric(int(obj["symmetric"]))
        return cls(tuple(obj["qplus"]), tuple(obj["qminus"]))


def invert_system(q: CollisionParams) -> CollisionParams:
    """Parameters of the rank-reversed, negated system; an involution."""
    qp = tuple(reversed(q.qminus))
    qm = tuple(reversed(q.qplus))
    return CollisionParams(qp, qm)


def reflection_matrix_from_params(q: CollisionParams) -> ReflectionMatrix:
    """Tridiagonal gap-process reflection matrix of size N-1."""
    n = q.n_particles
    R = np.eye(n - 1)
    for k in range(n - 2):
        R[k, k + 1] = -q.qminus[k + 1]
        R[k + 1, k] = -q.qplus[k + 1]
    return ReflectionMatrix(R)


def gap_drift_and_covariance(g, sigma2) -> tuple[np.ndarray, np.ndarray]:
    """Drift vector and tridiagonal covariance of the gap-process SRBM."""
    g = np.asarray(g, dtype=float).ravel()
    s2 = np.asarray(sigma2, dtype=float).ravel()
    if g.size != s2.size or g.size < 2:
        raise DimensionError("g and sigma2 must share a length >= 2")
    if np.any(s2 <= 0):
        raise ParameterError("sigma2 must be strictly positive")
    mu = np.diff(g)
    n = g.size - 1
    A = np.zeros((n, n))
    for k in range(n):
        A[k, k] = s2[k] + s2[k + 1]
        if k + 1 < n:
            A[k, k + 1] = A[k + 1, k] = -s2[k + 1]
    return mu, A


def alphas(q: CollisionParams) -> np.ndarray:
    """Positive weights whose combination of particles kills collision terms.

    alpha_1 = 1 and alpha_{k+1} = alpha_k q-_k / q+_{k+1}; then
    sum_k alpha_k Y_k(t) = sum_k alpha_k X_k(t) for every solution.
    """
    out = np.empty(q.n_particles)
    out[0] = 1.0
    for k in range(q.n_particles - 1):
        out[k + 1] = out[k] * q.qminus[k] / q.qplus[k + 1]
    return out


@dataclass(frozen=True)
class ParticleSystemSolution:
    """Ranked positions Y, collision terms L, gap process Z, and events."""

    Y: SampledPath
    L: SampledPath
    Z: SampledPath
    events: tuple[PhaseEvent, ...]
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def n_particles(self) -> int:
        return self.Y.dim

    @property
    def final_collision_terms(self) -> np.ndarray:
        return self.L.values[-1]

    def to_csv(self, fileobj) -> None:
        n = self.n_particles
        header = (
            [f"y{k + 1}" for k in range(n)]
            + [f"l{k + 1}{k + 2}" for k in range(n - 1)]
            + [f"z{k + 1}" for k in range(n - 1)]
        )
        write_path_csv(
            fileobj, self.Y.times,
            np.hstack([self.Y.values, self.L.values, self.Z.values]),
            header=header,
        )

    def events_to_jsonable(self) -> list[dict]:
        return [e.to_jsonable() for e in self.events]


def _check_w_point(y, n=None) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if n is not None and y.size != n:
        raise DimensionError(f"start point has size {y.size}, expected {n}")
    if np.any(np.diff(y) < 0):
        raise OrderingError(f"start point {y} is not weakly increasing")
    return y


def _block_phases(qp, qm, y, i0, a, T):
    """Exact phases for a positive-slope axis driver (a > 0).

    The moving block {i, ..., k} travels at the common speed a / S with
    S = 1 + q-_i/q+_{i+1} + ...; collision slopes inside the block come from
    the triangular system read off the defining equations.  Particles below
    rank i stay idle even when initially tied with it.
    """
    n = len(y)
    times = [0.0]
    Yr = [y.copy()]
    Lr = [np.zeros(n - 1)]
    events: list[PhaseEvent] = []
    y = y.copy()
    l = np.zeros(n - 1)
    t = 0.0
    k = i0
    while k + 1 < n and y[k + 1] == y[i0]:
        k += 1
    guard = 0
    consistency = 0.0
    while t < T:
        guard += 1
        if guard > n + 2:
            raise ConvergenceError("block phase loop exceeded the N+1 bound",
                                   details={"t": t, "y": y.tolist()})
        S = 1.0
        c = 1.0
        for m in range(i0 + 1, k + 1):
            c *= qm[m - 1] / qp[m]
            S += c
        beta = a / S
        lam = np.zeros(n - 1)
        if k > i0:
            lam[i0] = (a - beta) / qm[i0]
            for m in range(i0 + 1, k):
                lam[m] = (qp[m] * lam[m - 1] - beta) / qm[m]
            consistency = max(consistency,
                              abs(qp[k] * lam[k - 1] - beta) / max(a, 1.0))
        if k + 1 < n:
            dt_hit = (y[k + 1] - y[i0]) / beta
        else:
            dt_hit = np.inf
        t_next = min(t + dt_hit, T)
        dt = t_next - t
        y = y.copy()
        y[i0:k + 1] += beta * dt
        l = l + lam * dt
        if t_next < T:
            y[i0:k + 1] = y[k + 1]  # snap the collision exactly
            before = tuple(range(i0 + 1, k + 2))
            k += 1
            while k + 1 < n and y[k + 1] == y[i0]:
                k += 1
            events.append(PhaseEvent(t_next, before, tuple(range(i0 + 1, k + 2))))
        times.append(t_next)
        Yr.append(y.copy())
        Lr.append(l.copy())
        t = t_next
    return times, Yr, Lr, events, consistency


def _cp_segment(q: CollisionParams, y, i0, alpha, T):
    """One linear segment of competing-particle dynamics, any slope sign.

    Negative slopes reduce to positive ones through the negate-and-reverse
    map; the resulting phases are mapped back onto the original ranks.
    """
    n = q.n_particles
    if alpha == 0.0:
        return ([0.0, T], [y.copy(), y.copy()],
                [np.zeros(n - 1), np.zeros(n - 1)], [], 0.0)
    if alpha > 0.0:
        return _block_phases(np.asarray(q.qplus), np.asarray(q.qminus),
                             y, i0, alpha, T)
    qt = invert_system(q)
    y_rev = (-y)[::-1].copy()
    times, Yr, Lr, events, cons = _block_phases(
        np.asarray(qt.qplus), np.asarray(qt.qminus),
        y_rev, n - 1 - i0, -alpha, T,
    )
    Yr = [(-row)[::-1] for row in Yr]
    Lr = [row[::-1].copy() for row in Lr]
    events = [
        PhaseEvent(e.tau,
                   tuple(sorted(n - r + 1 for r in e.active_before)),
                   tuple(sorted(n - r + 1 for r in e.active_after)))
        for e in events
    ]
    return times, Yr, Lr, events, cons


def _position_identity_residual(q: CollisionParams, Y: np.ndarray,
                                L: np.ndarray, X: np.ndarray) -> float:
    n = q.n_particles
    pad = np.zeros((L.shape[0], 1))
    Lfull = np.hstack([pad, L, pad])
    recon = X + np.asarray(q.qplus) * Lfull[:, :n] - np.asarray(q.qminus) * Lfull[:, 1:]
    return float(np.abs(Y - recon).max())


def _cp_diagnostics(q: CollisionParams, times, Y, L, X_at) -> dict:
    X = X_at(times)
    w = alphas(q)
    return {
        "max_identity_residual": _position_identity_residual(q, Y, L, X),
        "alpha_weight_residual": float(np.abs((Y - X) @ w).max()),
        "min_ordering_margin": float(np.diff(Y, axis=1).min()) if Y.shape[1] > 1 else 0.0,
    }


def solve_regular_linear(q: CollisionParams, y0, i: int, alpha: float,
                         T: float) -> ParticleSystemSolution:
    """Exact solution when only ranked particle i is driven, at constant rate.

    Driver: X_i(t) = y_i + alpha*t, all other components constant.
    """
    n = q.n_particles
    y0 = _check_w_point(y0, n)
    if not 1 <= i <= n:
        raise ParameterError(f"rank index {i} out of 1..{n}")
    if T <= 0:
        raise ParameterError("horizon T must be positive")
    times, Yr, Lr, events, cons = _cp_segment(q, y0, i - 1, float(alpha), T)
    times = np.asarray(times)
    Y = SampledPath(times, np.asarray(Yr))
    L = SampledPath(times, np.asarray(Lr))
    Z = SampledPath(times, np.diff(np.asarray(Yr), axis=1))

    def driver(ts):
        out = np.tile(y0, (len(ts), 1))
        out[:, i - 1] += alpha * np.asarray(ts)
        return out

    diag = _cp_diagnostics(q, times, Y.values, L.values, driver)
    diag["block_consistency_residual"] = cons
    diag["phases"] = len(events) + 1
    diag["method"] = "regular-linear-exact"
    return ParticleSystemSolution(Y, L, Z, tuple(events), diag)


def solve_competing(q: CollisionParams, X, n: int | None = None,
                    method: str = "exact", tol: float = 1e-8) -> ParticleSystemSolution:
    """General solver through the gap-process Skorohod reduction.

    Regular drivers are solved exactly, one axis-parallel segment at a time
    with the memoryless restart; the gap process of that solution is the
    Skorohod solution for the differenced driver.  Sampled drivers go through
    the gap problem explicitly: the regular approximation at level ``n``
    (default: one subinterval per grid step) with ``method="exact"``, or the
    fixed-point grid oracle with ``method="grid"``; positions are then
    recovered from the boundary terms and cross-checked against the
    alpha-weight identity.
    """
    if isinstance(X, RegularPath):
        return _solve_competing_regular(q, X)
    nsys = q.n_particles
    if X.dim != nsys:
        raise DimensionError("driver dimension must match the particle count")
    _check_w_point(X.values[0])
    R = reflection_matrix_from_params(q)
    W = difference_path(X)
    if method == "exact":
        sk = solve_continuous(R, W, n or len(X.times) - 1)
    elif method == "grid":
        sk = solve_grid_oracle(R, W, tol=tol)
    else:
        raise ParameterError(f"unknown method {method!r}; use 'exact' or 'grid'")
    times = np.union1d(sk.Z.times, X.times)
    Xu = X.values_at(times)
    Lu = sk.L.values_at(times)
    Zu = sk.Z.values_at(times)
    pad = np.zeros((len(times), 1))
    Lfull = np.hstack([pad, Lu, pad])
    Yu = Xu + np.asarray(q.qplus) * Lfull[:, :nsys] - np.asarray(q.qminus) * Lfull[:, 1:]
    Y = SampledPath(times, Yu)
    diag = _cp_diagnostics(q, times, Yu, Lu, lambda ts: X.values_at(ts))
    diag["gap_residual"] = float(np.abs(np.diff(Yu, axis=1) - Zu).max())
    diag["method"] = f"gap-{method}"
    diag.update({k: sk.diagnostics[k] for k in ("iterations", "level")
                 if k in sk.diagnostics})
    return ParticleSystemSolution(Y, SampledPath(times, Lu),
                                  SampledPath(times, Zu), sk.events, diag)


def _solve_competing_regular(q: CollisionParams, X: RegularPath) -> ParticleSystemSolution:
    n = q.n_particles
    if X.dim != n:
        raise DimensionError("driver dimension must match the particle count")
    y = _check_w_point(X.start, n)
    times = [np.asarray([0.0])]
    Yrows = [y[None, :].copy()]
    Lrows = [np.zeros((1, n - 1))]
    events: list[PhaseEvent] = []
    consistency = 0.0
    l_offset = np.zeros(n - 1)
    for k, (axis, slope, dur) in enumerate(zip(X.axes, X.slopes,
                                               np.diff(X.breakpoints))):
        t_offset = float(X.breakpoints[k])
        seg_t, seg_Y, seg_L, seg_events, cons = _cp_segment(
            q, y, axis - 1, float(slope), float(dur)
        )
        shifted = t_offset + np.asarray(seg_t)[1:]
        shifted[-1] = X.breakpoints[k + 1]  # kill accumulated rounding
        times.append(shifted)
        Yrows.append(np.asarray(seg_Y)[1:])
        Lrows.append(l_offset + np.asarray(seg_L)[1:])
        events.extend(PhaseEvent(t_offset + e.tau, e.active_before, e.active_after)
                      for e in seg_events)
        consistency = max(consistency, cons)
        y = np.asarray(seg_Y)[-1]
        l_offset = l_offset + np.asarray(seg_L)[-1]
    tall = np.concatenate(times)
    Yall = np.vstack(Yrows)
    Lall = np.vstack(Lrows)
    Y = SampledPath(tall, Yall)
    L = SampledPath(tall, Lall)
    Z = SampledPath(tall, np.diff(Yall, axis=1))
    diag = _cp_diagnostics(q, tall, Yall, Lall, X.values_at)
    diag["block_consistency_residual"] = consistency
    diag["method"] = "regular-exact"
    return ParticleSystemSolution(Y, L, Z, tuple(events), diag)


@dataclass(frozen=True)
class CbpSpec:
    """Inputs of a competing-Brownian-particles run.

    ``stream_offset`` shifts the per-rank noise stream keys so that
    subsystems reproduce the retained components of the parent run bitwise.
    """

    g: tuple[float, ...]
    sigma2: tuple[float, ...]
    q: CollisionParams
    y0: tuple[float, ...]
    horizon: float
    steps: int
    seed: int
    stream_offset: int = 0

    def __post_init__(self):
        n = self.q.n_particles
        g = tuple(float(v) for v in self.g)
        s2 = tuple(float(v) for v in self.sigma2)
        y0 = tuple(float(v) for v in self.y0)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "y0", y0)
        if not (len(g) == len(s2) == len(y0) == n):
            raise DimensionError("g, sigma2, y0, q must agree on the particle count")
        if any(v <= 0 for v in s2):
            raise ParameterError("sigma2 must be strictly positive")
        _check_w_point(y0, n)
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")
        if self.horizon <= 0:
            raise ParameterError("horizon must be positive")

    @property
    def n_particles(self) -> int:
        return self.q.n_particles

    def to_jsonable(self) -> dict:
        return {
            "g": list(self.g),
            "sigma2": list(self.sigma2),
            "q": self.q.to_jsonable(),
            "y0": list(self.y0),
            "horizon": self.horizon,
            "steps": self.steps,
            "seed": self.seed,
            "stream_offset": self.stream_offset,
        }

    @classmethod
    def from_jsonable(cls, obj) -> "CbpSpec":
        return cls(
            tuple(obj["g"]), tuple(obj["sigma2"]),
            CollisionParams.from_jsonable(obj["q"]), tuple(obj["y0"]),
            float(obj["horizon"]), int(obj["steps"]), int(obj["seed"]),
            int(obj.get("stream_offset", 0)),
        )


def driving_path_for(spec: CbpSpec, zero_noise: bool = False) -> SampledPath:
    """The spec's rank drivers y_k + g_k t + sigma_k B_k on the sample grid."""
    n = spec.n_particles
    if zero_noise:
        times = np.linspace(0.0, spec.horizon, spec.steps + 1)
        B = SampledPath(times, np.zeros((spec.steps + 1, n)))
    else:
        B = brownian_components(n, spec.horizon, spec.steps, spec.seed,
                                spec.stream_offset)
    return cbp_driving_path(spec.y0, spec.g, np.sqrt(spec.sigma2), B)


def simulate_cbp(spec: CbpSpec, method: str = "exact", level: int | None = None,
                 zero_noise: bool = False) -> ParticleSystemSolution:
    """Simulate competing Brownian particles; deterministic per seed."""
    X = driving_path_for(spec, zero_noise=zero_noise)
    sol = solve_competing(spec.q, X, n=level, method=method)
    sol.diagnostics["seed"] = spec.seed
    return sol


def subsystem_spec(spec: CbpSpec, lo: int, hi: int) -> CbpSpec:
    """Spec for ranks lo..hi with the parent's noise streams retained.

    Retained components of the driving noise coincide bitwise with the
    parent's, enabling coupled removal comparisons.
    """
    n = spec.n_particles
    if not (1 <= lo < hi <= n):
        raise RangeError(f"rank range {lo}..{hi} invalid for N={n}")
    sub_q = CollisionParams(spec.q.qplus[lo - 1:hi], spec.q.qminus[lo - 1:hi])
    return replace(
        spec,
        g=spec.g[lo - 1:hi],
        sigma2=spec.sigma2[lo - 1:hi],
        q=sub_q,
        y0=spec.y0[lo - 1:hi],
        stream_offset=spec.stream_offset + lo - 1,
    )


def write_solution(sol: ParticleSystemSolution, csv_file, events_file=None) -> None:
    """CSV trajectory plus the JSON events sidecar."""
    sol.to_csv(csv_file)
    if events_file is not None:
        json.dump(sol.events_to_jsonable(), events_file, indent=2, sort_keys=True)
        events_file.write("\n")
