import os

import numpy as np
import pytest

from bellowkin.calibration import fit_modal, load_calibration_csv
from bellowkin.modal import ModalModel

DATA_CSV = os.path.join(os.path.dirname(__file__), "..", "data",
                        "bellow_calibration.csv")


@pytest.fixture(scope="session")
def reference_dataset():
    return load_calibration_csv(DATA_CSV)


@pytest.fixture(scope="session")
def reference_fit(reference_dataset):
    return fit_modal(reference_dataset, v=3, w=3)


@pytest.fixture(scope="session")
def reference_model(reference_fit):
    return reference_fit[0]


@pytest.fixture(scope="session")
def reference_report(reference_fit):
    return reference_fit[1]


def make_random_model(rng, v=None, w=None, L=None, max_tip_angle=2.5):
    """Random calibrated-looking model with a bounded tangent range.

    Coefficients are rescaled so |theta| stays below max_tip_angle over
    s in [0, L], q in [0, 21], keeping tip angles away from the +-pi wrap
    seam in derivative checks.
    """
    from bellowkin.modal import theta_grid

    v = v if v is not None else int(rng.integers(2, 5))
    w = w if w is not None else int(rng.integers(2, 5))
    L = L if L is not None else float(rng.uniform(100.0, 800.0))
    A = rng.normal(0.0, 1.0, (v, w))
    model = ModalModel(A=A, L=L, unit_scale=0.2959, q_range=(0.0, 21.0))
    peak = np.max(np.abs(theta_grid(model, np.linspace(0.0, L, 40),
                                    np.linspace(0.0, 21.0, 15))))
    scale = max_tip_angle / max(peak, 1e-9)
    return ModalModel(A=A * scale, L=L, unit_scale=0.2959, q_range=(0.0, 21.0))
