"""Polynomial modal bases and the calibrated tangent-angle field.

The backbone tangent angle is modeled as theta(s, q) = psi(s)^T A eta(q),
with monomial bases psi in arc length and eta in pressure.  Coefficients are
stored against the normalized arc coordinate s/L, which keeps the arc-length
Vandermonde well conditioned when L is hundreds of length units; evaluation
accepts unnormalized arc length.
"""

import json
from dataclasses import dataclass, field

import numpy as np

# mm per length unit when lengths are camera pixels
DEFAULT_UNIT_SCALE = 0.2959

_S_TOL = 1e-9  # relative slack on the [0, L] arc-length precondition


def psi(s, v: int) -> np.ndarray:
    """Arc-length monomial basis row [1, s, s^2, ..., s^(v-1)]."""
    if v < 1:
        raise ValueError("arc-length basis order v must be >= 1")
    return np.power(float(s), np.arange(v))


def eta(q, w: int) -> np.ndarray:
    """Pressure monomial basis row [1, q, q^2, ..., q^(w-1)]."""
    if w < 1:
        raise ValueError("pressure basis order w must be >= 1")
    return np.power(float(q), np.arange(w))


def deta_dq(q, w: int) -> np.ndarray:
    """Elementwise pressure derivative of eta: [0, 1, 2q, ..., (w-1)q^(w-2)]."""
    if w < 1:
        raise ValueError("pressure basis order w must be >= 1")
    out = np.zeros(w)
    if w > 1:
        k = np.arange(1, w)
        out[1:] = k * np.power(float(q), k - 1)
    return out


def _psi_rows(s_hat: np.ndarray, v: int) -> np.ndarray:
    """Vandermonde rows of psi at normalized arc samples; shape (n, v)."""
    s_hat = np.atleast_1d(np.asarray(s_hat, dtype=float))
    return np.power(s_hat[:, None], np.arange(v)[None, :])


def _dpsi_rows(s_hat: np.ndarray, v: int) -> np.ndarray:
    """Rows of d psi / d s_hat; shape (n, v)."""
    s_hat = np.atleast_1d(np.asarray(s_hat, dtype=float))
    out = np.zeros((s_hat.size, v))
    if v > 1:
        k = np.arange(1, v)
        out[:, 1:] = k[None, :] * np.power(s_hat[:, None], (k - 1)[None, :])
    return out


@dataclass
class ModalModel:
    """Calibrated map from (arc length, pressure) to tangent angle.

    A is v-by-w in radians per basis product, stored against s/L.  q_range,
    when present, records the calibrated pressure interval; evaluation outside
    it is extrapolation and is flagged by in_calibrated_range().
    """

    A: np.ndarray
    L: float
    unit_scale: float = DEFAULT_UNIT_SCALE
    q_range: tuple | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            raise ValueError("A must be a v-by-w matrix")
        if self.A.shape[0] < 1 or self.A.shape[1] < 1:
            raise ValueError("basis orders v, w must be >= 1")
        if not (self.L > 0):
            raise ValueError("arc length L must be positive")

    @property
    def v(self) -> int:
        return self.A.shape[0]

    @property
    def w(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_raw(cls, A_raw, L, unit_scale=DEFAULT_UNIT_SCALE, q_range=None):
        """Build from coefficients expressed against unnormalized arc powers."""
        A_raw = np.asarray(A_raw, dtype=float)
        scale = np.power(float(L), np.arange(A_raw.shape[0]))
        return cls(A=A_raw * scale[:, None], L=float(L),
                   unit_scale=unit_scale, q_range=q_range)

    def _check_s(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        tol = _S_TOL * self.L
        if np.any(s < -tol) or np.any(s > self.L + tol):
            raise ValueError(f"arc length outside [0, {self.L}]")
        return np.clip(s, 0.0, self.L)

    def to_json(self) -> str:
        doc = {
            "v": self.v,
            "w": self.w,
            "L": self.L,
            "unit_scale": self.unit_scale,
            "A": [float(a) for a in self.A.ravel()],  # row-major
            "normalized": True,
        }
        if self.q_range is not None:
            doc["q_range"] = [float(self.q_range[0]), float(self.q_range[1])]
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModalModel":
        doc = json.loads(text)
        v, w = int(doc["v"]), int(doc["w"])
        A = np.asarray(doc["A"], dtype=float).reshape(v, w)
        L = float(doc["L"])
        q_range = tuple(doc["q_range"]) if doc.get("q_range") is not None else None
        if not doc.get("normalized", True):
            return cls.from_raw(A, L, unit_scale=float(doc["unit_scale"]),
                                q_range=q_range)
        return cls(A=A, L=L, unit_scale=float(doc["unit_scale"]), q_range=q_range)


def theta(model: ModalModel, s, q) -> float:
    """Tangent angle psi(s)^T A eta(q), radians.  s may be an array."""
    s = model._check_s(s)
    vals = _psi_rows(s / model.L, model.v) @ model.A @ eta(q, model.w)
    return float(vals[0]) if np.isscalar(s) or np.ndim(s) == 0 else vals


def dtheta_dq(model: ModalModel, s, q) -> float:
    """Pressure sensitivity psi(s)^T A deta_dq(q).  s may be an array."""
    s = model._check_s(s)
    vals = _psi_rows(s / model.L, model.v) @ model.A @ deta_dq(q, model.w)
    return float(vals[0]) if np.isscalar(s) or np.ndim(s) == 0 else vals


def dtheta_ds(model: ModalModel, s, q) -> float:
    """Arc-length derivative of the tangent field (the curvature)."""
    s = model._check_s(s)
    vals = _dpsi_rows(s / model.L, model.v) @ model.A @ eta(q, model.w) / model.L
    return float(vals[0]) if np.isscalar(s) or np.ndim(s) == 0 else vals


def d2theta_dsdq(model: ModalModel, s, q) -> float:
    """Mixed arc/pressure derivative of the tangent field."""
    s = model._check_s(s)
    vals = _dpsi_rows(s / model.L, model.v) @ model.A @ deta_dq(q, model.w) / model.L
    return float(vals[0]) if np.isscalar(s) or np.ndim(s) == 0 else vals


def theta_grid(model: ModalModel, s, q) -> np.ndarray:
    """Tangent angles on the outer grid of arc samples x pressure samples.

    Returns shape (len(s), len(q)); used by the batched simulation paths.
    """
    s = model._check_s(np.atleast_1d(s))
    Q = np.power(np.asarray(q, dtype=float)[None, :], np.arange(model.w)[:, None])
    return _psi_rows(s / model.L, model.v) @ model.A @ Q


def dtheta_dq_grid(model: ModalModel, s, q) -> np.ndarray:
    """Pressure sensitivities on the outer grid; shape (len(s), len(q))."""
    s = model._check_s(np.atleast_1d(s))
    q = np.asarray(q, dtype=float)
    D = np.zeros((model.w, q.size))
    if model.w > 1:
        k = np.arange(1, model.w)
        D[1:, :] = k[:, None] * np.power(q[None, :], (k - 1)[:, None])
    return _psi_rows(s / model.L, model.v) @ model.A @ D


def in_calibrated_range(model: ModalModel, q) -> bool:
    """False when q falls outside the pressure interval seen at calibration."""
    if model.q_range is None:
        return True
    lo, hi = model.q_range
    return bool(np.all(np.asarray(q) >= lo) and np.all(np.asarray(q) <= hi))
