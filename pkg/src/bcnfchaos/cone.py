"""Invariant expanding cones for families of products A_R^q A_L^p.

A cone is an angular interval [theta0, theta1] of directions, taken mod pi
(so it is symmetric under v -> -v).  For det M > 0 the projective action
of M is orientation preserving, so the image of a cone is the interval
between the images of its two boundary rays.  ||M v(theta)||^2 is a
sinusoid in 2*theta, which gives the minimum gain in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bcnf import BcnfParams

PI = math.pi
DEFAULT_INCLUSION_MARGIN = 1e-10
DEFAULT_ENLARGEMENT = 1e-3


class ConeError(ValueError):
    pass


@dataclass(frozen=True)
class Cone:
    theta0: float
    theta1: float

    def __post_init__(self):
        w = self.theta1 - self.theta0
        if not (0 <= w < PI):
            raise ConeError(f"cone width must be in [0, pi), got {w}")

    @property
    def width(self) -> float:
        return self.theta1 - self.theta0

    def enlarged(self, margin: float) -> "Cone":
        return Cone(self.theta0 - margin, self.theta1 + margin)

    def contains(self, v, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=float)
        if not v.any():
            return True
        a = _unwrap(math.atan2(v[1], v[0]), self.theta0)
        return a <= self.theta1 + tol

    def sample(self, n: int, rng) -> np.ndarray:
        """n random nonzero vectors in the cone (both signs)."""
        th = rng.uniform(self.theta0, self.theta1, n)
        r = rng.uniform(0.1, 10.0, n) * rng.choice([-1.0, 1.0], n)
        return np.column_stack([r * np.cos(th), r * np.sin(th)])


@dataclass
class MatrixFamily:
    entries: list  # (p, q, M)
    bounds: tuple = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def matrices(self):
        return [M for _, _, M in self.entries]

    def scaled(self, s: float) -> "MatrixFamily":
        return MatrixFamily([(p, q, s * M) for p, q, M in self.entries], self.bounds)

    @classmethod
    def of(cls, *mats) -> "MatrixFamily":
        return cls([(None, None, np.asarray(M, dtype=float)) for M in mats])


@dataclass
class ConeCertificate:
    cone: Cone
    contracting_invariant: bool
    expanding: bool
    c: float
    margin: float
    per_matrix: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.contracting_invariant and self.expanding

    def to_dict(self) -> dict:
        return {
            "theta0": self.cone.theta0,
            "theta1": self.cone.theta1,
            "contracting_invariant": self.contracting_invariant,
            "expanding": self.expanding,
            "c": self.c,
            "inclusion_margin": self.margin,
            "per_matrix": self.per_matrix,
        }


def matrix_family(params: BcnfParams, p_min: int, p_max: int, q_min: int, q_max: int) -> MatrixFamily:
    if not (1 <= p_min <= p_max and 1 <= q_min <= q_max):
        raise ConeError(f"invalid bounds ({p_min}, {p_max}, {q_min}, {q_max})")
    AL, AR = params.A_L, params.A_R
    powL = {0: np.eye(2)}
    for k in range(1, p_max + 1):
        powL[k] = AL @ powL[k - 1]
    powR = {0: np.eye(2)}
    for k in range(1, q_max + 1):
        powR[k] = AR @ powR[k - 1]
    entries = [(p, q, powR[q] @ powL[p])
               for p in range(p_min, p_max + 1) for q in range(q_min, q_max + 1)]
    return MatrixFamily(entries, (p_min, p_max, q_min, q_max))


def _angle(v) -> float:
    return math.atan2(v[1], v[0]) % PI


def _unwrap(a: float, ref: float) -> float:
    """Representative of a (mod pi) in [ref, ref + pi)."""
    return ref + (a - ref) % PI


def _ray(t):
    return np.array([math.cos(t), math.sin(t)])


def image_interval(M: np.ndarray, cone: Cone) -> tuple[float, float]:
    """Image of the cone under M (det M > 0), as (start, end) with
    start in [theta0, theta0 + pi)."""
    a = _unwrap(_angle(M @ _ray(cone.theta0)), cone.theta0)
    b = _angle(M @ _ray(cone.theta1))
    return a, a + (b - a) % PI


def min_gain(M: np.ndarray, theta0: float, theta1: float) -> tuple[float, float]:
    """(gain, angle) minimising ||M v(theta)|| over [theta0, theta1]."""
    S = M.T @ M
    a, b, d = S[0, 0], S[0, 1], S[1, 1]
    mean, amp_c, amp_s = (a + d) / 2, (a - d) / 2, b
    psi = math.atan2(amp_s, amp_c)
    # |M v|^2 = mean + amp_c cos 2t + amp_s sin 2t, minimal at 2t = psi + pi
    cands = [theta0, theta1]
    t = (psi + PI) / 2
    t = theta0 + (t - theta0) % PI
    if t <= theta1:
        cands.append(t)

    # evaluate |M v| directly; the sinusoid loses digits to cancellation
    # when M is nearly singular
    gains = [float(np.hypot(*(M @ _ray(th)))) for th in cands]
    k = int(np.argmin(gains))
    return gains[k], cands[k]


def verify_cone(family: MatrixFamily, cone: Cone,
                margin: float = DEFAULT_INCLUSION_MARGIN) -> ConeCertificate:
    if len(family) == 0:
        raise ConeError("empty matrix family")
    invariant = True
    c = math.inf
    per = []
    for p, q, M in family:
        if np.linalg.det(M) <= 0:
            raise ConeError("verify_cone needs matrices with positive determinant")
        lo, hi = image_interval(M, cone)
        inside = lo > cone.theta0 + margin and hi < cone.theta1 - margin
        # a width-0 cone cannot contain its own image in its interior
        inside = inside and cone.width > 0
        invariant &= inside
        g, _ = min_gain(M, cone.theta0, cone.theta1)
        c = min(c, g)
        per.append({"p": p, "q": q, "worst_gain": g, "image_interval": [lo, hi],
                    "inside": inside})
    return ConeCertificate(cone, invariant, c > 1, c, margin, per)


def _dominant_direction(M: np.ndarray):
    w, V = np.linalg.eig(M)
    if np.iscomplexobj(w) and np.any(np.abs(w.imag) > 1e-12 * np.abs(w).max()):
        return None
    w = w.real
    m = np.abs(w)
    if abs(m[0] - m[1]) <= 1e-12 * m.max():
        return None
    k = int(np.argmax(m))
    return _angle(V[:, k].real)


def minimal_invariant_interval(family: MatrixFamily, max_iter: int = 10_000, tol: float = 1e-14):
    """Smallest interval containing the attracting eigendirections that is
    mapped into itself by every member, by repeated map-and-hull.
    Returns (lo, hi) or None."""
    dirs = []
    for M in family.matrices():
        t = _dominant_direction(M)
        if t is None:
            return None
        dirs.append(t)
    ref = dirs[0]
    # centre the seeds around ref so the hull does not wrap
    rel = [ref + ((t - ref + PI / 2) % PI - PI / 2) for t in dirs]
    lo, hi = min(rel), max(rel)
    for _ in range(max_iter):
        nlo, nhi = lo, hi
        mid = (lo + hi) / 2
        for M in family.matrices():
            a = _angle(M @ _ray(lo))
            a = mid + ((a - mid + PI / 2) % PI - PI / 2)
            b = a + (_angle(M @ _ray(hi)) - a) % PI
            nlo, nhi = min(nlo, a), max(nhi, b)
        if nhi - nlo >= PI:
            return None
        if nlo >= lo - tol and nhi <= hi + tol:
            return lo, hi
        lo, hi = nlo, nhi
    return None


def find_cone(family: MatrixFamily, angle_resolution: int = 64,
              margin: float = DEFAULT_ENLARGEMENT,
              inclusion_margin: float = DEFAULT_INCLUSION_MARGIN):
    """Search for a contracting-invariant expanding cone.

    The minimal invariant interval is enlarged by margin * k for
    k = 1..angle_resolution until verify_cone certifies it.  Returns
    (cone, certificate), or None.
    """
    if len(family) == 0:
        raise ConeError("empty matrix family")
    core = minimal_invariant_interval(family)
    if core is None:
        return None
    lo, hi = core
    for k in range(1, angle_resolution + 1):
        m = margin * k
        if hi - lo + 2 * m >= PI:
            break
        cone = Cone(lo - m, hi + m)
        cert = verify_cone(family, cone, inclusion_margin)
        if cert.certified:
            return cone, cert
    return None


@dataclass(frozen=True)
class LyapunovBound:
    bcnf: float
    robust: float


def lyapunov_lower_bound(c: float, p_max: int, q_max: int) -> LyapunovBound:
    """ln(c)/(p_max+q_max), and the bound with expansion (c+1)/2 that
    survives small perturbations of the matrices."""
    if not c > 1:
        raise ConeError(f"expansion factor must exceed 1, got {c}")
    n = p_max + q_max
    return LyapunovBound(math.log(c) / n, math.log((c + 1) / 2) / n)
