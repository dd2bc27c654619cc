"""Ramp simulation and the contact-location sweep.

Streams are quasi-static: pressure steps play the role of time, one sample
per step.  Simulated contact freezes the proximal shape at onset and keeps
the distal portion bending, so a sensed stream diverges from the free-model
prediction and the centrode machinery can detect and localize the pin.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import modal
from .centrode import PoseSample, fixed_centrode
from .contact import contact_tip_pose, freeze
from .estimation import predicted_centrode
from .kinematics import DEFAULT_PANELS, PlanarPose, tip_pose, tip_twist


@dataclass(frozen=True)
class PressureRamp:
    """Uniform pressure schedule q_start..q_end inclusive, fixed step."""

    q_start: float
    q_end: float
    step: float

    def __post_init__(self):
        if self.q_end < self.q_start:
            raise ValueError("ramp must be non-decreasing")
        if self.q_end > self.q_start and self.step <= 0:
            raise ValueError("step must be positive")

    @property
    def values(self) -> np.ndarray:
        if self.q_end == self.q_start:
            return np.array([self.q_start])
        n = int(round((self.q_end - self.q_start) / self.step)) + 1
        return self.q_start + self.step * np.arange(n)

    @classmethod
    def parse(cls, text: str) -> "PressureRamp":
        """Parse 'start:end:step' (e.g. '5:20:0.05')."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"ramp spec must be start:end:step, got {text!r}")
        return cls(q_start=float(parts[0]), q_end=float(parts[1]),
                   step=float(parts[2]))


def simulate_free(model: modal.ModalModel, ramp: PressureRamp,
                  n_panels: int = DEFAULT_PANELS) -> list:
    """Tip-pose stream of an unobstructed pressurization."""
    import warnings
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k, q in enumerate(ramp.values):
            out.append(PoseSample(t=k, q=float(q),
                                  pose=tip_pose(model, float(q),
                                                n_panels=n_panels)))
    return out


def simulate_contact(model: modal.ModalModel, ramp: PressureRamp,
                     s_c: float, q_c: float,
                     n_panels: int = DEFAULT_PANELS):
    """Tip-pose stream with a pin at s_c from pressure q_c onward.

    Samples below q_c follow the free model; from onset on, the contacted
    model.  Returns (samples, contact_state).
    """
    if not (0.0 < s_c < model.L):
        raise ValueError(f"contact location outside (0, {model.L})")
    contact = freeze(model, float(q_c), float(s_c))
    import warnings
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k, q in enumerate(ramp.values):
            q = float(q)
            if q < q_c:
                pose = tip_pose(model, q, n_panels=n_panels)
            else:
                pose = contact_tip_pose(model, contact, q, n_panels=n_panels)
            out.append(PoseSample(t=k, q=q, pose=pose))
    return out, contact


def add_noise(samples, sigma_pos: float, sigma_ang: float, seed: int = 0) -> list:
    """Additive Gaussian pose noise for robustness experiments."""
    rng = np.random.default_rng(seed)
    out = []
    for s in samples:
        dx, dz = rng.normal(0.0, sigma_pos, 2) if sigma_pos > 0 else (0.0, 0.0)
        da = rng.normal(0.0, sigma_ang) if sigma_ang > 0 else 0.0
        out.append(PoseSample(t=s.t, q=s.q,
                              pose=PlanarPose(x=s.pose.x + dx, z=s.pose.z + dz,
                                              theta=s.pose.theta + da)))
    return out


def model_centrode(model: modal.ModalModel, ramp: PressureRamp,
                   n_panels: int = DEFAULT_PANELS) -> list:
    """Free-motion centrode trace from analytic twists along the ramp."""
    import warnings
    qdot = ramp.step if ramp.q_end > ramp.q_start else 1.0
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k, q in enumerate(ramp.values):
            q = float(q)
            out.append(fixed_centrode(tip_pose(model, q, n_panels=n_panels),
                                      tip_twist(model, q, qdot,
                                                n_panels=n_panels),
                                      t_index=k))
    return out


def isa_sweep_index(model: modal.ModalModel, ramp: PressureRamp, s_c: float,
                    n_panels: int = DEFAULT_PANELS) -> float:
    """Max distance between contacted and free centrodes over the ramp.

    s_c = 0 pins the clamped base itself: the backbone is unchanged and the
    two centrodes coincide, so the index is exactly zero.
    """
    if s_c == 0.0:
        return 0.0
    free = model_centrode(model, ramp, n_panels=n_panels)
    contacted = predicted_centrode(model, s_c, ramp.values, n_panels=n_panels)
    best = 0.0
    for f, c in zip(free, contacted):
        if f.valid and c.valid:
            best = max(best, float(np.hypot(c.x - f.x, c.z - f.z)))
    return best


def _sweep_worker(args):
    model_json, ramp_tuple, s_c, n_panels = args
    model = modal.ModalModel.from_json(model_json)
    ramp = PressureRamp(*ramp_tuple)
    return s_c, isa_sweep_index(model, ramp, s_c, n_panels=n_panels)


def sweep(model: modal.ModalModel, ramp: PressureRamp, s_values,
          jobs: int = 1, n_panels: int = DEFAULT_PANELS) -> list:
    """ISA-difference index per contact location, in the given order."""
    tasks = [(model.to_json(), (ramp.q_start, ramp.q_end, ramp.step),
              float(s_c), n_panels) for s_c in s_values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_worker, tasks))
    return [_sweep_worker(t) for t in tasks]
