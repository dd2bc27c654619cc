"""Piecewise kinematics after a pinning contact.

A contact at arc length s_c splits the backbone in two.  The proximal
portion [0, s_c] keeps the shape it had at the onset pressure q_c; the
distal portion keeps bending as a shorter bellow of length L - s_c mounted
at the frozen station.  The shorter-bellow tangent is re-based so the
combined field stays continuous at s_c: evaluated raw, the distal field
restarts at theta(0, q), kinking the backbone whenever the frozen tangent
differs (pass literal=True to evaluate that raw form).

Pressure is assumed non-decreasing after onset; dropping below q_c would
un-pin the contact, so those queries are rejected.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import modal
from .kinematics import DEFAULT_PANELS, PlanarPose, PlanarTwist
from .quadrature import cumulative_stations, panel_nodes

_Q_TOL = 1e-12


@dataclass(frozen=True)
class ContactState:
    """Frozen proximal record: where, at what pressure, and in what shape.

    theta_c is a dense (n, 2) station table [s, theta(s, q_c)] over [0, s_c];
    base_pose_c is the integrated pose of the station s = s_c at onset.
    """

    s_c: float
    q_c: float
    theta_c: np.ndarray
    base_pose_c: PlanarPose

    def __post_init__(self):
        object.__setattr__(self, "theta_c", np.asarray(self.theta_c, dtype=float))
        if not (self.s_c > 0.0 and np.isfinite(self.s_c)):
            raise ValueError("s_c must be positive and finite")
        if self.theta_c.ndim != 2 or self.theta_c.shape[1] != 2 or len(self.theta_c) < 2:
            raise ValueError("theta_c must be an (n, 2) table with n >= 2")
        s = self.theta_c[:, 0]
        if s[0] != 0.0 or abs(s[-1] - self.s_c) > 1e-9 * self.s_c:
            raise ValueError("theta_c stations must cover [0, s_c]")

    def to_json(self) -> str:
        doc = {
            "s_c": self.s_c,
            "q_c": self.q_c,
            "theta_c": [[float(s), float(th)] for s, th in self.theta_c],
            "base_pose_c": {"x": self.base_pose_c.x, "z": self.base_pose_c.z,
                            "theta": self.base_pose_c.theta},
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ContactState":
        doc = json.loads(text)
        bp = doc["base_pose_c"]
        return cls(s_c=float(doc["s_c"]), q_c=float(doc["q_c"]),
                   theta_c=np.asarray(doc["theta_c"], dtype=float),
                   base_pose_c=PlanarPose(x=float(bp["x"]), z=float(bp["z"]),
                                          theta=float(bp["theta"])))


def freeze(model: modal.ModalModel, q_c: float, s_c: float,
           n_stations: int = 65) -> ContactState:
    """Record the proximal shape at contact onset.

    Samples theta(s, q_c) on [0, s_c] and integrates it to the pose of the
    contact station.
    """
    if not (0.0 < s_c < model.L):
        raise ValueError(f"s_c must lie strictly inside (0, {model.L})")
    stations = np.linspace(0.0, float(s_c), n_stations)
    pos = cumulative_stations(lambda s: modal.theta(model, s, q_c), stations)
    table = np.column_stack([stations, modal.theta(model, stations, q_c)])
    base = PlanarPose(x=pos[-1, 0], z=pos[-1, 1],
                      theta=modal.theta(model, float(s_c), q_c))
    return ContactState(s_c=float(s_c), q_c=float(q_c), theta_c=table,
                        base_pose_c=base)


def _check_q(contact: ContactState, q: float):
    # un-pinning (pressure release below onset) invalidates the frozen state
    if q < contact.q_c - _Q_TOL:
        raise ValueError(f"pressure {q} below contact onset {contact.q_c}")


def contact_theta(model: modal.ModalModel, contact: ContactState, s, q: float,
                  literal: bool = False):
    """Tangent angle of the contacted backbone at arc length s, pressure q.

    Proximal of s_c: the frozen field theta(s, q_c).  Distal: the shorter
    bellow's field shifted to start at the frozen tangent, which keeps the
    angle continuous across s_c for every q >= q_c.
    """
    _check_q(contact, q)
    s = model._check_s(s)
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.empty_like(s)
    prox = s <= contact.s_c
    if np.any(prox):
        out[prox] = modal.theta(model, s[prox], contact.q_c)
    if np.any(~prox):
        u = s[~prox] - contact.s_c
        if literal:
            out[~prox] = modal.theta(model, u, q)
        else:
            th_off = modal.theta(model, contact.s_c, contact.q_c)
            out[~prox] = th_off + modal.theta(model, u, q) - modal.theta(model, 0.0, q)
    return float(out[0]) if scalar else out


def _distal_field(model, contact, q, literal):
    """World tangent over the distal local coordinate u in [0, L - s_c]."""
    if literal:
        return lambda u: modal.theta(model, u, q)
    th_off = modal.theta(model, contact.s_c, contact.q_c)
    base0 = modal.theta(model, 0.0, q)
    return lambda u: th_off + modal.theta(model, u, q) - base0


def contact_tip_pose(model: modal.ModalModel, contact: ContactState, q: float,
                     n_panels: int = DEFAULT_PANELS,
                     literal: bool = False) -> PlanarPose:
    """Tip pose of the contacted backbone; the frozen part contributes
    base_pose_c, the distal part a quadrature over the remaining arc."""
    _check_q(contact, q)
    ell = model.L - contact.s_c
    field = _distal_field(model, contact, q, literal)
    base = contact.base_pose_c
    if ell == 0.0:
        return PlanarPose(x=base.x, z=base.z, theta=field(0.0))
    nodes, weights = panel_nodes(0.0, ell, n_panels)
    th = field(nodes)
    return PlanarPose(x=base.x + float(np.cos(th) @ weights),
                      z=base.z + float(np.sin(th) @ weights),
                      theta=field(ell))


def contact_shape(model: modal.ModalModel, contact: ContactState, q: float,
                  n: int, literal: bool = False) -> list:
    """Contacted backbone poses at n equally spaced arc stations."""
    if n < 2:
        raise ValueError("need at least 2 stations")
    _check_q(contact, q)
    stations = np.linspace(0.0, model.L, n)
    fn = lambda s: contact_theta(model, contact, s, q, literal=literal)
    pos = cumulative_stations(fn, stations)
    return [PlanarPose(x=pos[k, 0], z=pos[k, 1], theta=fn(float(stations[k])))
            for k in range(n)]


def contact_jacobian(model: modal.ModalModel, contact: ContactState, q: float,
                     n_panels: int = DEFAULT_PANELS,
                     literal: bool = False) -> np.ndarray:
    """Actuation Jacobian after contact: (dx/dq, dz/dq, dtheta_L/dq).

    The frozen portion is pressure-independent (zero rows); only the distal
    arc of length L - s_c responds.  The integrand differentiates the same
    node layout as contact_tip_pose, so this is the exact derivative of the
    discrete tip position.
    """
    _check_q(contact, q)
    ell = model.L - contact.s_c
    if ell == 0.0:
        return np.zeros(3)
    field = _distal_field(model, contact, q, literal)
    nodes, weights = panel_nodes(0.0, ell, n_panels)
    th = field(nodes)
    dth = modal.dtheta_dq(model, nodes, q)
    dthL = modal.dtheta_dq(model, ell, q)
    if not literal:
        d0 = modal.dtheta_dq(model, 0.0, q)
        dth = dth - d0
        dthL = dthL - d0
    dx = float((-np.sin(th) * dth) @ weights)
    dz = float((np.cos(th) * dth) @ weights)
    return np.array([dx, dz, dthL])


def contact_tip_twist(model: modal.ModalModel, contact: ContactState, q: float,
                      qdot: float, n_panels: int = DEFAULT_PANELS,
                      literal: bool = False) -> PlanarTwist:
    """Tip twist of the contacted backbone under pressure rate qdot."""
    J = contact_jacobian(model, contact, q, n_panels=n_panels, literal=literal)
    return PlanarTwist(vx=J[0] * qdot, vz=J[1] * qdot, omega=J[2] * qdot)
