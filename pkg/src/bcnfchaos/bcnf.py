"""Two-dimensional border-collision normal form.

    g(x) = A_L x + e1   if x1 <= 0
           A_R x + e1   if x1 >= 0

with companion matrices A = [[tau, 1], [-delta, 0]].  Points are plain
length-2 numpy arrays; matrices are 2x2 arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

E1 = np.array([1.0, 0.0])

DEFAULT_TOL = 1e-9


class BcnfError(ValueError):
    pass


@dataclass(frozen=True)
class BcnfParams:
    tau_L: float
    delta_L: float
    tau_R: float
    delta_R: float

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise BcnfError(f"{f.name} must be finite, got {v}")
            object.__setattr__(self, f.name, v)

    @property
    def is_homeomorphism(self) -> bool:
        return self.delta_L > 0 and self.delta_R > 0

    @property
    def A_L(self) -> np.ndarray:
        return companion(self.tau_L, self.delta_L)

    @property
    def A_R(self) -> np.ndarray:
        return companion(self.tau_R, self.delta_R)

    def matrix(self, side: str) -> np.ndarray:
        return self.A_L if _side(side) == "L" else self.A_R

    def trace_det(self, side: str) -> tuple[float, float]:
        if _side(side) == "L":
            return self.tau_L, self.delta_L
        return self.tau_R, self.delta_R

    def astuple(self) -> tuple[float, float, float, float]:
        return (self.tau_L, self.delta_L, self.tau_R, self.delta_R)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BcnfParams":
        return cls(**_exact_fields(cls, d))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "BcnfParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PwlCoeffs:
    """Coefficients of a continuous piecewise-linear map

        h(y) = [[a11_X, a12], [a21_X, a22]] y + (b1, b2) mu,   X in {L, R}.

    The second column and the mu-vector are shared by both pieces.
    """

    a11_L: float
    a11_R: float
    a21_L: float
    a21_R: float
    a12: float
    a22: float
    b1: float
    b2: float

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise BcnfError(f"{f.name} must be finite, got {v}")
            object.__setattr__(self, f.name, v)

    def jacobian(self, side: str) -> np.ndarray:
        if _side(side) == "L":
            return np.array([[self.a11_L, self.a12], [self.a21_L, self.a22]])
        return np.array([[self.a11_R, self.a12], [self.a21_R, self.a22]])

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b1, self.b2])

    def evaluate(self, y, mu: float) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.jacobian("L" if y[0] <= 0 else "R") @ y + self.b * mu

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PwlCoeffs":
        return cls(**_exact_fields(cls, d))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "PwlCoeffs":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class AffineChange:
    """The change of variables x = matrix @ y / mu + offset.

    ``matrix`` already includes the 1/gamma factor.  When
    ``mu_sign_flipped`` is set the unfolding parameter is taken to be the
    negative of the original one, so callers pass ``-mu_original``.
    """

    matrix: np.ndarray
    offset: np.ndarray
    gamma: float
    mu_sign_flipped: bool = False

    def apply(self, y, mu: float) -> np.ndarray:
        if mu == 0:
            raise BcnfError("the change of variables needs mu != 0")
        return self.matrix @ np.asarray(y, dtype=float) / mu + self.offset

    def invert(self, x, mu: float) -> np.ndarray:
        if mu == 0:
            raise BcnfError("the change of variables needs mu != 0")
        return mu * np.linalg.solve(self.matrix, np.asarray(x, dtype=float) - self.offset)


@dataclass(frozen=True)
class ConditionReport:
    cond_delta_L_pos: bool
    cond_focus_R: bool
    cond_backorbit: bool
    backorbit_iterates: int
    backorbit_status: str  # "certified" | "heuristic"
    overall: bool

    def to_dict(self) -> dict:
        return asdict(self)


def companion(tau: float, delta: float) -> np.ndarray:
    return np.array([[tau, 1.0], [-delta, 0.0]])


def _side(side: str) -> str:
    s = str(side).upper()
    if s not in ("L", "R"):
        raise BcnfError(f"side must be 'L' or 'R', got {side!r}")
    return s


def _exact_fields(cls, d: dict) -> dict:
    names = {f.name for f in fields(cls)}
    if not isinstance(d, dict):
        raise BcnfError(f"expected a JSON object for {cls.__name__}")
    missing = names - d.keys()
    extra = d.keys() - names
    if missing or extra:
        raise BcnfError(
            f"{cls.__name__} fields mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
        )
    return {k: d[k] for k in names}


def eval_g(params: BcnfParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    A = params.A_L if x[0] <= 0 else params.A_R
    return A @ x + E1


def jacobian_g(params: BcnfParams, x) -> np.ndarray:
    """Jacobian of g at x; undefined on the switching line x1 = 0."""
    if x[0] == 0:
        raise BcnfError("g is not differentiable on the switching line")
    return params.A_L if x[0] < 0 else params.A_R


def eval_g_inverse(params: BcnfParams, x) -> np.ndarray:
    """Inverse of g.  The preimage's first coordinate is -x2/delta, so its
    sign (and hence the branch) is fixed by the sign of x2."""
    if not params.is_homeomorphism:
        raise BcnfError("g is invertible only when delta_L > 0 and delta_R > 0")
    x1, x2 = float(x[0]), float(x[1])
    tau, delta = (params.tau_R, params.delta_R) if x2 <= 0 else (params.tau_L, params.delta_L)
    return np.array([-x2 / delta, x1 + tau * x2 / delta - 1.0])


def fixed_point_right(params: BcnfParams) -> np.ndarray:
    den = params.delta_R - params.tau_R + 1.0
    if den == 0:
        raise BcnfError("no isolated fixed point: delta_R - tau_R + 1 = 0")
    return np.array([1.0, -params.delta_R]) / den


def _focus_frame(tau: float, delta: float) -> np.ndarray:
    """Real basis T with T^-1 A T = sqrt(delta) * rotation, for complex
    eigenvalues of the companion matrix."""
    A = companion(tau, delta)
    w, V = np.linalg.eig(A)
    k = int(np.argmax(w.imag))
    v = V[:, k]
    return np.column_stack([v.real, v.imag])


def check_conditions(params: BcnfParams, i_max: int = 1000) -> ConditionReport:
    """Check delta_L > 0, delta_R > tau_R^2/4 and that the backward orbit of
    the origin stays in the open lower half-plane.

    The backward orbit is followed along g_R^{-1} (correct while x2 < 0).  It
    is certified once it enters an ellipse about the fixed point of g_R that
    is invariant under g_R^{-1} (radius shrinks by 1/sqrt(delta_R) in the
    eigen-frame) and lies strictly below the x1-axis.
    """
    if i_max < 1:
        raise BcnfError("i_max must be positive")
    c1 = params.delta_L > 0
    c2 = params.delta_R > params.tau_R ** 2 / 4
    if not c2:
        return ConditionReport(c1, False, False, 0, "heuristic", False)

    can_certify = params.delta_R > 1
    if can_certify:
        xr = fixed_point_right(params)
        T = _focus_frame(params.tau_R, params.delta_R)
        Tinv = np.linalg.inv(T)
        # max of x2 over {xr + T u : |u| <= r} is xr2 + r * |T[1]|
        row2 = float(np.hypot(T[1, 0], T[1, 1]))

    td = params.tau_R / params.delta_R
    x1, x2 = 0.0, 0.0
    status = "heuristic"
    ok = True
    n = 0
    for n in range(1, i_max + 1):
        x1, x2 = -x2 / params.delta_R, x1 + td * x2 - 1.0
        if x2 >= 0:
            ok = False
            break
        if can_certify:
            r = float(np.hypot(*(Tinv @ np.array([x1, x2]) - Tinv @ xr)))
            if xr[1] + r * row2 < 0:
                status = "certified"
                break
    cond3 = ok
    if not ok:
        status = "heuristic"
    return ConditionReport(c1, c2, cond3, n, status, c1 and c2 and cond3)


def reduce_to_bcnf(coeffs: PwlCoeffs) -> tuple[BcnfParams, AffineChange]:
    """Traces/determinants of the two pieces plus the affine change that
    conjugates the piecewise-linear map to the normal form for mu > 0."""
    a12, a22 = coeffs.a12, coeffs.a22
    if a12 == 0:
        raise BcnfError("decoupled case, transform invalid (a12 = 0)")
    b1, b2 = coeffs.b1, coeffs.b2
    gamma = (1.0 - a22) * b1 + a12 * b2
    if gamma == 0:
        raise BcnfError("degenerate unfolding (gamma = 0)")
    flipped = gamma < 0
    if flipped:
        b1, b2, gamma = -b1, -b2, -gamma

    JL, JR = coeffs.jacobian("L"), coeffs.jacobian("R")
    params = BcnfParams(
        tau_L=float(np.trace(JL)),
        delta_L=float(JL[0, 0] * JL[1, 1] - JL[0, 1] * JL[1, 0]),
        tau_R=float(np.trace(JR)),
        delta_R=float(JR[0, 0] * JR[1, 1] - JR[0, 1] * JR[1, 0]),
    )
    K = np.array([[1.0, 0.0], [-a22, a12]]) / gamma
    offset = np.array([0.0, a22 * b1 - a12 * b2]) / gamma
    return params, AffineChange(K, offset, gamma, flipped)
