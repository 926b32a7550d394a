"""Escape-time partitions of the left and right half-planes.

The line g_X^{-k}(Sigma) bounds the sets of points that need exactly k
iterations of g_X to leave the closed half-plane Pi_X.  Slopes and
intercepts follow the recurrence

    n_k = -delta / n_{k-1} - tau,    d_k = -d_{k-1} / n_{k-1} - 1,

seeded by n_1 = -tau, d_1 = -1, with a vertical line when n_{k-1} = 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .bcnf import BcnfError, BcnfParams, _side, check_conditions

INF = math.inf
SLOPE_ZERO_TOL = 1e-12
DEFAULT_P_CAP = 64


class PartitionError(RuntimeError):
    pass


class NoEscapeError(RuntimeError):
    """Raised when an orbit stays in the half-plane beyond the horizon."""

    def __init__(self, point, cap):
        super().__init__(f"no escape within horizon {cap} from {tuple(point)}")
        self.point = tuple(point)
        self.cap = cap


@dataclass(frozen=True)
class BoundaryLine:
    index: int
    slope: float | None = None
    intercept: float | None = None
    vertical_x1: float | None = None

    @property
    def is_vertical(self) -> bool:
        return self.vertical_x1 is not None

    def to_dict(self) -> dict:
        if self.is_vertical:
            return {"index": self.index, "kind": "vertical", "x1": self.vertical_x1}
        return {"index": self.index, "kind": "finite", "slope": self.slope,
                "intercept": self.intercept}


@dataclass(frozen=True)
class PartitionProfile:
    p_star: float  # int, or INF
    p_star_status: str  # "found" | "infinite" | "finite, > cap"
    q_star: int
    q_star2: int
    lines_L: list = field(default_factory=list)
    lines_R: list = field(default_factory=list)

    def summary(self) -> dict:
        p = self.p_star
        return {
            "p_star": "inf" if p == INF else (None if p is None else int(p)),
            "p_star_status": self.p_star_status,
            "q_star": self.q_star,
            "q_star2": self.q_star2,
        }


def preimage_lines(params: BcnfParams, side: str, count: int) -> list[BoundaryLine]:
    """Lines g_side^{-k}(Sigma) for k = 1..count."""
    side = _side(side)
    tau, delta = params.trace_det(side)
    if delta <= 0:
        raise BcnfError("preimage lines need a positive determinant")
    lines = []
    n = d = 0.0
    vx = 0.0  # index 0 is Sigma itself, the vertical line x1 = 0
    for k in range(1, count + 1):
        if vx is not None:
            n, d, vx = -tau, vx - 1.0, None
        elif abs(n) <= SLOPE_ZERO_TOL:
            vx = -d / delta
        else:
            n, d = -delta / n - tau, -d / n - 1.0
        if vx is not None:
            lines.append(BoundaryLine(k, vertical_x1=vx))
        else:
            lines.append(BoundaryLine(k, n, d))
    return lines


def _p_star(params: BcnfParams, cap: int):
    tau, delta = params.tau_L, params.delta_L
    for line in preimage_lines(params, "L", cap):
        if line.is_vertical or line.slope >= 0:
            return line.index, "found"
    if tau > 0 and delta <= tau * tau / 4:
        # real positive eigenvalues: slopes increase monotonically to
        # minus the larger eigenvalue and never reach zero
        return INF, "infinite"
    return None, "finite, > cap"


def partition_profile(params: BcnfParams, cap: int = DEFAULT_P_CAP) -> PartitionProfile:
    p_star, status = _p_star(params, cap)
    lines_R = preimage_lines(params, "R", cap)
    q_star = next((ln.index for ln in lines_R if ln.is_vertical or ln.slope > 0), None)
    if q_star is None:
        raise PartitionError(f"q* not found within {cap} lines; conditions violated upstream?")
    q_star2 = next(
        (ln.index for ln in lines_R
         if ln.index > q_star and not ln.is_vertical and ln.intercept <= 0),
        None,
    )
    if q_star2 is None:
        raise PartitionError(f"q** not found within {cap} lines; conditions violated upstream?")
    return PartitionProfile(p_star, status, q_star, q_star2,
                            preimage_lines(params, "L", cap), lines_R)


def escape_time(params: BcnfParams, x, side: str, cap: int = 1000) -> int:
    """chi_L / chi_R: iterations of the single branch map until the orbit
    leaves the closed half-plane."""
    side = _side(side)
    tau, delta = params.trace_det(side)
    x1, x2 = float(x[0]), float(x[1])
    for k in range(1, cap + 1):
        x1, x2 = tau * x1 + x2 + 1.0, -delta * x1
        if (x1 > 0) if side == "L" else (x1 < 0):
            return k
    raise NoEscapeError((x[0], x[1]), cap)


def escape_times(params: BcnfParams, pts: np.ndarray, side: str, cap: int = 1000,
                 boundary_tol: float = 0.0):
    """Vectorised escape_time.  Returns (chi, near) where chi is -1 for
    points that do not escape within cap and ``near`` flags orbits that
    come within boundary_tol of Sigma before escaping."""
    side = _side(side)
    tau, delta = params.trace_det(side)
    pts = np.asarray(pts, dtype=float)
    x1, x2 = pts[:, 0].copy(), pts[:, 1].copy()
    chi = np.full(len(pts), -1, dtype=int)
    near = np.zeros(len(pts), dtype=bool)
    active = np.ones(len(pts), dtype=bool)
    for k in range(1, cap + 1):
        x1, x2 = tau * x1 + x2 + 1.0, -delta * x1
        near |= active & (np.abs(x1) <= boundary_tol)
        esc = active & ((x1 > 0) if side == "L" else (x1 < 0))
        chi[esc] = k
        active &= ~esc
        if not active.any():
            break
    return chi, near


@dataclass
class CoveringReport:
    side: str
    samples: int
    allowed: tuple
    observed_min: int
    observed_max: int
    counts: dict
    violations: list
    resampled: int

    @property
    def ok(self) -> bool:
        return not self.violations


DEFAULT_PATCH = {"L": ((-10.0, 0.0), (-10.0, 0.0)), "R": ((0.0, 10.0), (0.0, 10.0))}


def _quadrant_samples(side: str, n: int, seed: int, patch=None) -> np.ndarray:
    (a1, b1), (a2, b2) = patch or DEFAULT_PATCH[side]
    sobol = qmc.Sobol(d=2, scramble=True, seed=seed)
    u = sobol.random(n)
    pts = np.column_stack([a1 + (b1 - a1) * u[:, 0], a2 + (b2 - a2) * u[:, 1]])
    # Phi_L = {x1 < 0, x2 <= 0}, Phi_R = {x1 > 0, x2 >= 0}
    if side == "L":
        keep = pts[:, 0] < 0
    else:
        keep = pts[:, 0] > 0
    return pts[keep]


def covering_check(params: BcnfParams, side: str, samples: int = 10_000, seed: int = 0,
                   cap: int = 1000, patch=None, boundary_tol: float = 1e-12) -> CoveringReport:
    """Sample the quadrant Phi_side and check escape times lie in
    [1, p*+1] (left) or [q*, q**] (right)."""
    side = _side(side)
    prof = partition_profile(params)
    if side == "L":
        hi = INF if prof.p_star in (INF, None) else prof.p_star + 1
        allowed = (1, hi)
    else:
        allowed = (prof.q_star, prof.q_star2)

    pts = np.empty((0, 2))
    resampled = 0
    draw = 0
    while len(pts) < samples:
        cand = _quadrant_samples(side, _pow2_at_least(2 * (samples - len(pts))), seed + draw, patch)
        draw += 1
        _, near = escape_times(params, cand, side, cap, boundary_tol)
        resampled += int(near.sum())
        pts = np.vstack([pts, cand[~near]])
    pts = pts[:samples]
    chi, _ = escape_times(params, pts, side, cap)

    violations = []
    for x, c in zip(pts, chi):
        if c < 0 or c < allowed[0] or c > allowed[1]:
            violations.append({"point": [float(x[0]), float(x[1])], "chi": int(c)})
    vals, cnt = np.unique(chi[chi > 0], return_counts=True)
    return CoveringReport(
        side=side, samples=len(pts), allowed=allowed,
        observed_min=int(chi.min()), observed_max=int(chi.max()),
        counts={int(v): int(c) for v, c in zip(vals, cnt)},
        violations=violations, resampled=resampled,
    )


def _pow2_at_least(n: int) -> int:
    return 1 << max(1, (n - 1).bit_length())


@dataclass
class PlaneGrid:
    side: str
    tau: np.ndarray
    delta: np.ndarray
    payload: dict  # column name -> array of shape (n_delta, n_tau)

    def rows(self):
        """Row-major over (delta, tau): delta outer, tau inner."""
        names = list(self.payload)
        for i, d in enumerate(self.delta):
            for j, t in enumerate(self.tau):
                yield [float(t), float(d)] + [self.payload[nm][i, j] for nm in names]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "delta"] + list(self.payload))
            for row in self.rows():
                w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf"
        if math.isnan(v):
            return ""
        return repr(float(v))
    return str(v)


def classify_plane(tau_range, delta_range, resolution, side: str, cap: int = DEFAULT_P_CAP,
                   i_max: int = 1000) -> PlaneGrid:
    """Classify a (tau, delta) grid.

    Left side: p* per cell (inf, or -1 when the cap binds).  Right side:
    q*, q** (-1 where undefined), and whether the backward orbit of the
    origin stays below the x1-axis up to i_max.
    """
    side = _side(side)
    nt, nd = (resolution, resolution) if np.isscalar(resolution) else resolution
    if nt < 2 or nd < 2:
        raise ValueError("resolution must be at least 2 per axis")
    tau = np.linspace(tau_range[0], tau_range[1], int(nt))
    delta = np.linspace(delta_range[0], delta_range[1], int(nd))
    T, D = np.meshgrid(tau, delta)  # shape (nd, nt)

    if side == "L":
        return PlaneGrid(side, tau, delta, {"p_star": _p_star_grid(T, D, cap)})
    q1, q2, c3 = _q_grid(T, D, cap, i_max)
    return PlaneGrid(side, tau, delta, {"q_star": q1, "q_star2": q2, "cond3": c3})


def _line_recurrence(T, D, cap):
    """Yield (k, vertical, n_k, d_k) arrays for k = 1..cap over a grid."""
    n = np.full(T.shape, np.nan)
    d = np.full(T.shape, np.nan)
    vx = np.zeros(T.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(1, cap + 1):
            isv = ~np.isnan(vx)
            zero = ~isv & (np.abs(n) <= SLOPE_ZERO_TOL)
            gen = ~isv & ~zero
            new_n = np.where(isv, -T, np.where(gen, -D / n - T, np.nan))
            new_d = np.where(isv, vx - 1.0, np.where(gen, -d / n - 1.0, np.nan))
            vx = np.where(zero, -d / D, np.nan)
            n, d = new_n, new_d
            yield k, zero, n, d


def _p_star_grid(T, D, cap):
    out = np.full(T.shape, -1.0)
    valid = D > 0
    out[~valid] = np.nan
    undecided = valid.copy()
    for k, vert, n, _ in _line_recurrence(T, D, cap):
        with np.errstate(invalid="ignore"):
            hit = undecided & (vert | (n >= 0))
        out[hit] = k
        undecided &= ~hit
        if not undecided.any():
            break
    out[undecided & (T > 0) & (D <= T * T / 4)] = np.inf
    return out


def _q_grid(T, D, cap, i_max):
    feasible = D > T * T / 4
    # backward orbit of the origin along g_R^{-1}, valid while x2 < 0
    x1 = np.zeros(T.shape)
    x2 = np.zeros(T.shape)
    alive = feasible.copy()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(i_max):
            x1, x2 = -x2 / D, x1 + T * x2 / D - 1.0
            alive &= x2 < 0

    q1 = np.full(T.shape, -1)
    q2 = np.full(T.shape, -1)
    for k, vert, n, d in _line_recurrence(T, D, cap):
        with np.errstate(invalid="ignore"):
            first = feasible & (q1 < 0) & (vert | (n > 0))
            second = feasible & (q1 > 0) & (q2 < 0) & ~vert & (d <= 0)
        q2[second] = k
        q1[first] = k
    return q1, q2, alive


def left_anomaly_note(params: BcnfParams) -> str | None:
    """Explain p* = inf when A_L has real eigenvalues."""
    tau, delta = params.tau_L, params.delta_L
    if tau > 0 and 0 < delta <= tau * tau / 4:
        lam = (tau + math.sqrt(tau * tau - 4 * delta)) / 2
        return (f"p* = inf: A_L has real eigenvalues (delta_L = {delta:.6g} <= tau_L^2/4 = "
                f"{tau * tau / 4:.6g}); slopes m_p increase to -{lam:.6g} and never reach 0")
    return None


def conditions_hold(params: BcnfParams, i_max: int = 1000) -> bool:
    return check_conditions(params, i_max).overall
