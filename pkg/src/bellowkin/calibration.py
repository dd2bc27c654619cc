"""Calibration of the modal tangent field from annotated backbone points.

Annotated data arrives as ordered (x, z) points per pressure, one row of
material markers shared across all pressures.  Tangent angles come from
local quadratic fits; the coefficient matrix solves a vectorized linear
least-squares problem built from the Kronecker product of the two basis
Vandermonde factors.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .modal import DEFAULT_UNIT_SCALE, ModalModel, eta, psi, theta
from .quadrature import cumulative_stations

BASE_ANGLE_TOL = 0.01  # rad; calibrated base tangent beyond this gets flagged


class RankDeficientError(ValueError):
    """Design matrices do not resolve every basis direction."""


def _quadratic_tangent(s3, x3, z3, t):
    # derivative of the Lagrange quadratic through three samples, at t
    s0, s1, s2 = s3
    c0 = (2 * t - s1 - s2) / ((s0 - s1) * (s0 - s2))
    c1 = (2 * t - s0 - s2) / ((s1 - s0) * (s1 - s2))
    c2 = (2 * t - s0 - s1) / ((s2 - s0) * (s2 - s1))
    dx = c0 * x3[0] + c1 * x3[1] + c2 * x3[2]
    dz = c0 * z3[0] + c1 * z3[1] + c2 * z3[2]
    return np.arctan2(dz, dx)


def tangents_from_points(points):
    """Arc-length samples and tangent angles along one annotated backbone.

    Arc length is cumulative chord length from the base point.  The tangent
    angle at each station comes from a local quadratic through the station
    and its neighbors (one-sided at the endpoints); the base angle is
    reported as measured, not forced to zero.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    n = pts.shape[0]
    if n < 3:
        raise ValueError("need at least 3 backbone points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg == 0.0):
        raise ValueError("duplicate consecutive backbone points")
    s = np.concatenate([[0.0], np.cumsum(seg)])

    th = np.empty(n)
    for i in range(n):
        j = min(max(i - 1, 0), n - 3)  # window start; one-sided at the ends
        idx = (j, j + 1, j + 2)
        th[i] = _quadratic_tangent(s[list(idx)], pts[list(idx), 0], pts[list(idx), 1], s[i])
    return s, th


def build_design_matrices(s_samples, q_samples, v: int, w: int):
    """Vandermonde factors: Omega rows are psi(s_i), Gamma columns are eta(q_j)."""
    s_samples = np.asarray(s_samples, dtype=float)
    q_samples = np.asarray(q_samples, dtype=float)
    if s_samples.size == 0 or q_samples.size == 0:
        raise ValueError("samples must be nonempty")
    omega = np.vstack([psi(s, v) for s in s_samples])
    gamma = np.column_stack([eta(q, w) for q in q_samples])
    return omega, gamma


@dataclass
class CalibrationDataset:
    """Annotated backbone points plus the derived (s, theta) sample table.

    The arc grid s_samples is shared across pressures: markers sit at fixed
    material stations, and the grid is measured on the first (straightest)
    pressure, where chord length tracks arc length best.  theta is g-by-z
    with one column per pressure.
    """

    pressures: np.ndarray
    points: list  # one (g, 2) array per pressure
    s_samples: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.pressures = np.asarray(self.pressures, dtype=float)
        self.s_samples = np.asarray(self.s_samples, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        z, g = self.pressures.size, self.s_samples.size
        if z < 2:
            raise ValueError("need at least 2 pressures")
        if g < 2:
            raise ValueError("need at least 2 arc stations")
        if np.any(np.diff(self.pressures) <= 0):
            raise ValueError("pressures must be strictly ascending")
        if self.s_samples[0] != 0.0 or np.any(np.diff(self.s_samples) <= 0):
            raise ValueError("arc samples must strictly increase from 0")
        if self.theta.shape != (g, z):
            raise ValueError(f"theta must be {g}x{z}")
        if len(self.points) != z:
            raise ValueError("one point list per pressure required")

    @property
    def L(self) -> float:
        return float(self.s_samples[-1])

    @classmethod
    def from_points(cls, pressures, points_per_pressure) -> "CalibrationDataset":
        """Derive the sample table from ordered backbone points per pressure."""
        pressures = np.asarray(pressures, dtype=float)
        counts = {len(p) for p in points_per_pressure}
        if len(counts) != 1:
            raise ValueError(f"inconsistent point counts across pressures: {sorted(counts)}")
        s_grid = None
        cols = []
        pts_list = []
        for pts in points_per_pressure:
            s, th = tangents_from_points(pts)
            if s_grid is None:
                s_grid = s
            cols.append(th)
            pts_list.append(np.asarray(pts, dtype=float))
        return cls(pressures=pressures, points=pts_list,
                   s_samples=s_grid, theta=np.column_stack(cols))


def load_calibration_csv(path) -> CalibrationDataset:
    """Read a `pressure_psi,point_index,x,z` CSV into a dataset."""
    groups = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ValueError("empty calibration CSV")
        expected = ["pressure_psi", "point_index", "x", "z"]
        if [h.strip() for h in header] != expected:
            raise ValueError(f"calibration CSV header must be {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                q = float(row[0])
                idx = int(row[1])
                x = float(row[2])
                z = float(row[3])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"calibration CSV row {lineno}: {exc}") from None
            groups.setdefault(q, []).append((idx, x, z))
    if not groups:
        raise ValueError("calibration CSV has no data rows")
    pressures = sorted(groups)
    points = []
    for q in pressures:
        rows = sorted(groups[q])
        points.append(np.array([[x, z] for _, x, z in rows]))
    return CalibrationDataset.from_points(pressures, points)


@dataclass
class FitReport:
    """Per-pressure residuals of a calibration fit.

    max_tip_err_mm is the error at the last station after forward
    integration; max_point_err_mm the worst error over all stations.
    """

    per_pressure: list  # dicts {q, max_theta_err_rad, max_tip_err_mm, max_point_err_mm}
    conditioning: float
    base_angle_warnings: list = field(default_factory=list)

    @property
    def max_theta_err_rad(self) -> float:
        return max(r["max_theta_err_rad"] for r in self.per_pressure)

    @property
    def max_tip_err_mm(self) -> float:
        return max(r["max_tip_err_mm"] for r in self.per_pressure)

    @property
    def max_point_err_mm(self) -> float:
        return max(r["max_point_err_mm"] for r in self.per_pressure)

    def to_json(self) -> str:
        return json.dumps({
            "per_pressure": self.per_pressure,
            "conditioning": self.conditioning,
            "base_angle_warnings": self.base_angle_warnings,
        }, indent=2)


def _check_factor_rank(mat, order, names, what):
    rank = np.linalg.matrix_rank(mat)
    if rank < order:
        missing = ", ".join(names[k] for k in range(rank, order))
        raise RankDeficientError(
            f"{what} basis rank {rank} < {order}; unresolved directions: {missing}")


def fit_modal(dataset: CalibrationDataset, v: int = 3, w: int = 3,
              unit_scale: float | None = None):
    """Solve the vectorized least-squares problem for the coefficient matrix.

    Stacks theta samples column-by-column and solves
    (Gamma^T kron Omega) vec(A) = vec(theta) with a column-pivoted orthogonal
    decomposition, with arc length normalized to s/L for conditioning.
    Returns the fitted model and a residual report.
    """
    g, z = dataset.theta.shape
    if g * z < v * w:
        raise ValueError(f"{g}x{z} samples cannot determine {v}x{w} coefficients")
    L = dataset.L
    s_hat = dataset.s_samples / L
    omega, gamma = build_design_matrices(s_hat, dataset.pressures, v, w)
    _check_factor_rank(omega, v, [f"s^{k}" for k in range(v)], "arc-length")
    _check_factor_rank(gamma.T, w, [f"q^{k}" for k in range(w)], "pressure")

    design = np.kron(gamma.T, omega)
    rhs = dataset.theta.ravel(order="F")
    sol, _, rank, _ = scipy.linalg.lstsq(design, rhs, lapack_driver="gelsy")
    if rank < v * w:
        raise RankDeficientError(f"design rank {rank} < {v * w}")
    A = sol.reshape(v, w, order="F")

    scale = unit_scale if unit_scale is not None else DEFAULT_UNIT_SCALE
    model = ModalModel(A=A, L=L, unit_scale=scale,
                       q_range=(float(dataset.pressures[0]), float(dataset.pressures[-1])))

    conditioning = float(np.linalg.cond(omega) * np.linalg.cond(gamma))
    theta_hat = omega @ A @ gamma
    per_pressure = []
    warnings_q = []
    for j, q in enumerate(dataset.pressures):
        max_theta = float(np.max(np.abs(theta_hat[:, j] - dataset.theta[:, j])))
        pos = cumulative_stations(lambda s: theta(model, s, q), dataset.s_samples)
        ref = dataset.points[j] - dataset.points[j][0]  # both curves start at the base
        err = np.linalg.norm(pos - ref, axis=1)
        per_pressure.append({
            "q": float(q),
            "max_theta_err_rad": max_theta,
            "max_tip_err_mm": float(err[-1] * model.unit_scale),
            "max_point_err_mm": float(np.max(err) * model.unit_scale),
        })
        if abs(theta(model, 0.0, q)) > BASE_ANGLE_TOL:
            warnings_q.append(float(q))
    report = FitReport(per_pressure=per_pressure, conditioning=conditioning,
                       base_angle_warnings=warnings_q)
    return model, report
