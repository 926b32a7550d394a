"""A pulse-width-modulated DC/DC converter model and its reduction to the
border-collision normal form.

Time is scaled so the switching period is 1.  On each unit interval the
Heaviside input is on until the ramp eta(t) meets the sampled control
signal xi(floor t), so the stroboscopic map is available in closed form.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .bcnf import BcnfParams, PwlCoeffs, _exact_fields, reduce_to_bcnf

DIVERGENCE_NORM = 1e12
BOUNDARY_TOL = 1e-12


class ConverterError(ValueError):
    pass


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConverterParams:
    lambda1: float
    lambda2: float
    q: float
    theta: float
    alpha: float
    omega: float

    def __post_init__(self):
        for k, v in asdict(self).items():
            v = float(v)
            if not math.isfinite(v):
                raise ConverterError(f"{k} must be finite, got {v}")
            object.__setattr__(self, k, v)
        if self.alpha <= 0:
            raise ConverterError("alpha must be positive")
        if self.omega <= 0:
            raise ConverterError("omega must be positive")
        if self.theta == 1:
            raise ConverterError("theta = 1 is excluded")

    @classmethod
    def standard(cls, omega: float = 5.45) -> "ConverterParams":
        return cls(lambda1=-0.977, lambda2=-0.232, q=35.606, theta=4.2, alpha=70.0, omega=omega)

    def with_omega(self, omega: float) -> "ConverterParams":
        return replace(self, omega=omega)

    @property
    def ramp_top(self) -> float:
        """q/(alpha omega), the value of eta just before each integer."""
        return self.q / (self.alpha * self.omega)

    def phi(self, w) -> float:
        return w[0] - self.theta * w[1] + self.q / (2 * self.omega)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ConverterParams":
        return cls(**_exact_fields(cls, d))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ConverterParams":
        return cls.from_dict(json.loads(text))


def duty(cp: ConverterParams, phi: float) -> float:
    """Fraction z of the period with the input on."""
    return min(max(cp.alpha * cp.omega * phi / cp.q, 0.0), 1.0)


def strobo_map(cp: ConverterParams, w) -> np.ndarray:
    z = duty(cp, cp.phi(w))
    e1, e2 = math.exp(cp.lambda1), math.exp(cp.lambda2)
    return np.array([
        e1 * (w[0] - 1) + math.exp(cp.lambda1 * (1 - z)),
        e2 * (w[1] - 1) + math.exp(cp.lambda2 * (1 - z)),
    ])


def strobo_jacobian(cp: ConverterParams, w) -> np.ndarray:
    """Derivative of strobo_map; on the saturated pieces z is constant."""
    phi = cp.phi(w)
    e1, e2 = math.exp(cp.lambda1), math.exp(cp.lambda2)
    if phi <= 0 or phi >= cp.ramp_top:
        return np.diag([e1, e2])
    k = cp.alpha * cp.omega / cp.q
    z = k * phi
    a1 = cp.lambda1 * math.exp(cp.lambda1 * (1 - z)) * k
    a2 = cp.lambda2 * math.exp(cp.lambda2 * (1 - z)) * k
    return np.array([[e1 - a1, a1 * cp.theta], [-a2, e2 + a2 * cp.theta]])


def omega_bcb(cp: ConverterParams) -> float:
    """omega at which the fixed point (1, 1) of the always-on piece sits on
    the switching line phi = q/(alpha omega)."""
    if cp.theta == 1 or cp.alpha == 0:
        raise ConverterError("omega_BCB needs theta != 1 and alpha != 0")
    return cp.q / (1 - cp.theta) * (1 / cp.alpha - 0.5)


def _kappa(cp: ConverterParams) -> float:
    return (cp.alpha / 2 - 1) / (cp.theta - 1)


def converter_bcnf_params(cp: ConverterParams) -> BcnfParams:
    if cp.theta == 1:
        raise ConverterError("theta = 1 is excluded")
    l1, l2 = cp.lambda1, cp.lambda2
    e1, e2 = math.exp(l1), math.exp(l2)
    k = _kappa(cp)
    return BcnfParams(
        tau_L=e1 + e2,
        delta_L=math.exp(l1 + l2),
        tau_R=e1 + e2 - k * (l1 - cp.theta * l2),
        delta_R=math.exp(l1 + l2) - k * (l1 * e2 - cp.theta * l2 * e1),
    )


def converter_pwl_coeffs(cp: ConverterParams) -> PwlCoeffs:
    """Linearisation at the border collision in the coordinates y of
    change_of_coords, with mu = omega - omega_BCB.  y1 <= 0 is the
    always-on piece (z = 1), y1 >= 0 the ramp piece."""
    l1, l2, th = cp.lambda1, cp.lambda2, cp.theta
    e1, e2 = math.exp(l1), math.exp(l2)
    k = _kappa(cp)
    return PwlCoeffs(
        a11_L=e1,
        a11_R=e1 - k * (l1 - th * l2),
        a21_L=0.0,
        a21_R=-l2 * k,
        a12=th * (e1 - e2),
        a22=e2,
        b1=(1 - e1) * (th - 1) / omega_bcb(cp),
        b2=0.0,
    )


def change_of_coords(cp: ConverterParams, w) -> tuple[np.ndarray, float]:
    y = np.array([cp.ramp_top - cp.phi(w), 1.0 - w[1]])
    return y, cp.omega - omega_bcb(cp)


def inverse_change_of_coords(cp: ConverterParams, y) -> np.ndarray:
    w2 = 1.0 - y[1]
    phi = cp.ramp_top - y[0]
    return np.array([phi + cp.theta * w2 - cp.q / (2 * cp.omega), w2])


@dataclass
class TimeSeries:
    t: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    H: np.ndarray
    switch_times: list
    strobe: np.ndarray  # state at t = 0, 1, ..., n

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "X", "Y", "xi", "eta", "H"])
            for row in zip(self.t, self.X, self.Y, self.xi, self.eta, self.H):
                w.writerow([repr(float(v)) for v in row[:5]] + [int(row[5])])


def simulate_time_series(cp: ConverterParams, w0, n_intervals: int,
                         samples_per_interval: int = 50) -> TimeSeries:
    """Exact piecewise-exponential solution of the switched ODEs.

    On [n, n+1) the input is on for t - n < s, s = duty(xi(n)); each
    segment relaxes X towards H with rate lambda1 (Y likewise).
    """
    if n_intervals < 1 or samples_per_interval < 1:
        raise ConverterError("n_intervals and samples_per_interval must be positive")
    l1, l2 = cp.lambda1, cp.lambda2
    ramp = cp.ramp_top
    X0, Y0 = float(w0[0]), float(w0[1])
    ts, Xs, Ys, Hs, etas = [], [], [], [], []
    switches = []
    strobe = [(X0, Y0)]
    grid = np.arange(samples_per_interval) / samples_per_interval
    for n in range(n_intervals):
        s = duty(cp, X0 - cp.theta * Y0 + cp.q / (2 * cp.omega))
        # state at the switch
        Xs_, Ys_ = 1 + (X0 - 1) * math.exp(l1 * s), 1 + (Y0 - 1) * math.exp(l2 * s)
        taus = list(grid)
        if 0 < s < 1:
            switches.append(n + s)
            if s not in taus:
                taus.append(s)
                taus.sort()
        for u in taus:
            if u < s:
                x, y, h = 1 + (X0 - 1) * math.exp(l1 * u), 1 + (Y0 - 1) * math.exp(l2 * u), 1
            else:
                x, y, h = Xs_ * math.exp(l1 * (u - s)), Ys_ * math.exp(l2 * (u - s)), 0
            ts.append(n + u)
            Xs.append(x)
            Ys.append(y)
            Hs.append(h)
            etas.append(ramp * u)
        X0, Y0 = Xs_ * math.exp(l1 * (1 - s)), Ys_ * math.exp(l2 * (1 - s))
        strobe.append((X0, Y0))
    xi_end = X0 - cp.theta * Y0 + cp.q / (2 * cp.omega)
    ts.append(float(n_intervals))
    Xs.append(X0)
    Ys.append(Y0)
    Hs.append(1 if xi_end > 0 else 0)
    etas.append(0.0)
    X, Y = np.array(Xs), np.array(Ys)
    return TimeSeries(
        t=np.array(ts), X=X, Y=Y, xi=X - cp.theta * Y + cp.q / (2 * cp.omega),
        eta=np.array(etas), H=np.array(Hs, dtype=int), switch_times=switches,
        strobe=np.array(strobe),
    )


@dataclass(frozen=True)
class LyapunovResult:
    exponent: float
    iterations: int
    burn_in: int
    boundary_hits: int
    final_state: tuple


_V0 = (math.cos(1.0), math.sin(1.0))  # generic initial tangent vector


def _lyap_bcnf(params: BcnfParams, x0, n, burn_in, tol):
    tl, dl, tr, dr = params.astuple()
    x1, x2 = float(x0[0]), float(x0[1])
    v1, v2 = _V0
    s = 0.0
    hits = 0
    for i in range(n):
        if abs(x1) <= tol:
            hits += 1
        if x1 <= 0:
            t, d = tl, dl
        else:
            t, d = tr, dr
        x1, x2 = t * x1 + x2 + 1.0, -d * x1
        v1, v2 = t * v1 + v2, -d * v1
        nv = math.hypot(v1, v2)
        v1, v2 = v1 / nv, v2 / nv
        if i >= burn_in:
            s += math.log(nv)
        if abs(x1) > DIVERGENCE_NORM or abs(x2) > DIVERGENCE_NORM:
            raise DivergenceError(f"orbit diverged after {i + 1} iterates")
    return s / (n - burn_in), hits, (x1, x2), None


def _lyap_converter(cp: ConverterParams, w0, n, burn_in, tol, record=0):
    l1, l2, th = cp.lambda1, cp.lambda2, cp.theta
    e1, e2 = math.exp(l1), math.exp(l2)
    k = cp.alpha * cp.omega / cp.q
    top = 1.0 / k
    off = cp.q / (2 * cp.omega)
    w1, w2 = float(w0[0]), float(w0[1])
    v1, v2 = _V0
    s = 0.0
    hits = 0
    rec = []
    for i in range(n):
        phi = w1 - th * w2 + off
        if abs(phi) <= tol or abs(phi - top) <= tol:
            hits += 1
        if phi <= 0:
            v1, v2 = e1 * v1, e2 * v2
            w1, w2 = e1 * w1, e2 * w2
        elif phi >= top:
            v1, v2 = e1 * v1, e2 * v2
            w1, w2 = e1 * (w1 - 1) + 1.0, e2 * (w2 - 1) + 1.0
        else:
            z = k * phi
            a1 = math.exp(l1 * (1 - z))
            a2 = math.exp(l2 * (1 - z))
            c1, c2 = l1 * a1 * k, l2 * a2 * k
            v1, v2 = (e1 - c1) * v1 + c1 * th * v2, -c2 * v1 + (e2 + c2 * th) * v2
            w1, w2 = e1 * (w1 - 1) + a1, e2 * (w2 - 1) + a2
        nv = math.hypot(v1, v2)
        v1, v2 = v1 / nv, v2 / nv
        if i >= burn_in:
            s += math.log(nv)
            if i >= n - record:
                rec.append(w1)
        if abs(w1) > DIVERGENCE_NORM or abs(w2) > DIVERGENCE_NORM:
            raise DivergenceError(f"orbit diverged after {i + 1} iterates")
    return s / (n - burn_in), hits, (w1, w2), rec


def lyapunov_estimate(system, x0, n: int, burn_in: int = 1000,
                      boundary_tol: float = BOUNDARY_TOL) -> LyapunovResult:
    """Largest Lyapunov exponent along one orbit of a BCNF or of the
    converter's stroboscopic map.  n counts all iterates, the average runs
    over the n - burn_in after the transient."""
    if not n > burn_in >= 0:
        raise ConverterError("need n > burn_in >= 0")
    if isinstance(system, BcnfParams):
        lam, hits, final, _ = _lyap_bcnf(system, x0, n, burn_in, boundary_tol)
    elif isinstance(system, ConverterParams):
        lam, hits, final, _ = _lyap_converter(system, x0, n, burn_in, boundary_tol)
    else:
        raise TypeError("system must be BcnfParams or ConverterParams")
    return LyapunovResult(lam, n, burn_in, hits, final)


@dataclass
class BifurcationData:
    omega: np.ndarray
    lyapunov: np.ndarray
    w1: list  # per omega, sorted distinct w1 values

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega", "w1", "lyapunov"])
            for om, lam, vals in zip(self.omega, self.lyapunov, self.w1):
                for v in vals:
                    w.writerow([repr(float(om)), repr(float(v)), repr(float(lam))])


def _scan_one(args):
    cp, w0, iters, transient, record, decimals = args
    lam, _, _, rec = _lyap_converter(cp, w0, iters, transient, BOUNDARY_TOL, record)
    return lam, np.unique(np.round(rec, decimals)).tolist()


def bifurcation_scan(cp: ConverterParams, omegas, iters: int = 100_000, transient: int = 1000,
                     record: int = 200, w0=(0.5, 0.5), decimals: int = 8,
                     threads: int = 1) -> BifurcationData:
    """For each omega: one orbit from w0, the Lyapunov exponent over the
    post-transient iterates and the distinct values (to `decimals`) among
    the last `record` values of w1."""
    omegas = np.asarray(omegas, dtype=float)
    if omegas.ndim != 1 or len(omegas) == 0:
        raise ConverterError("omegas must be a non-empty 1-d sequence")
    if not iters > transient >= 0:
        raise ConverterError("need iters > transient >= 0")
    record = min(record, iters - transient)
    jobs = [(cp.with_omega(float(om)), w0, iters, transient, record, decimals) for om in omegas]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            res = list(ex.map(_scan_one, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        res = [_scan_one(j) for j in jobs]
    return BifurcationData(omegas, np.array([r[0] for r in res]), [r[1] for r in res])


def omega_grid(lo: float, hi: float, n: int) -> np.ndarray:
    if n < 1 or not hi >= lo:
        raise ConverterError("invalid omega range")
    return np.linspace(lo, hi, n)


@dataclass
class AttractorData:
    points: np.ndarray  # (n, 2) in (w1, w2)
    source: str
    phi_nonpositive: int = 0

    def bbox(self):
        return self.points.min(axis=0), self.points.max(axis=0)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["w1", "w2"])
            for a, b in self.points:
                w.writerow([repr(float(a)), repr(float(b))])


def attractor_export(source: str, cp: ConverterParams, n: int = 10_000, discard: int = 100,
                     w0=(0.5, 0.5), x0=(0.1, 0.1)) -> AttractorData:
    """n orbit points after `discard`, in stroboscopic coordinates.

    For source "bcnf" the orbit is computed for the normal form and mapped
    back: x -> y through the inverse normal-form change at
    mu = omega - omega_BCB, then y -> w.  Points with phi <= 0, where the
    local reduction does not apply, are counted.
    """
    if source == "strobo":
        pts = np.empty((n + discard, 2))
        w = np.asarray(w0, dtype=float)
        for i in range(n + discard):
            w = strobo_map(cp, w)
            pts[i] = w
        pts = pts[discard:]
    elif source in ("bcnf", "bcnf-converted"):
        params, change = reduce_to_bcnf(converter_pwl_coeffs(cp))
        mu = cp.omega - omega_bcb(cp)
        if change.mu_sign_flipped:
            mu = -mu
        if mu <= 0:
            raise ConverterError("the normal-form attractor needs omega > omega_BCB")
        from .region import attractor_orbit

        xs = attractor_orbit(params, n, transient=discard, x0=x0)
        ys = mu * np.linalg.solve(change.matrix, (xs - change.offset).T).T
        w2 = 1.0 - ys[:, 1]
        w1 = cp.ramp_top - ys[:, 0] + cp.theta * w2 - cp.q / (2 * cp.omega)
        pts = np.column_stack([w1, w2])
        source = "bcnf"
    else:
        raise ConverterError(f"unknown attractor source {source!r}")
    phi = pts[:, 0] - cp.theta * pts[:, 1] + cp.q / (2 * cp.omega)
    return AttractorData(pts, source, int((phi <= 0).sum()))


def bbox_jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of the axis-aligned bounding boxes."""
    alo, ahi = a.min(axis=0), a.max(axis=0)
    blo, bhi = b.min(axis=0), b.max(axis=0)
    inter = np.prod(np.clip(np.minimum(ahi, bhi) - np.maximum(alo, blo), 0, None))
    union = np.prod(ahi - alo) + np.prod(bhi - blo) - inter
    return float(inter / union)
