import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pseudosurv import SyntheticSpec, generate_synthetic_cohort


@pytest.fixture(scope="session")
def small_cohort():
    spec = SyntheticSpec(
        n_labeled=80,
        n_auxiliary=40,
        n_features=6,
        class_separation=3.0,
        noise_features=3,
        survival_effect=1.0,
        censoring_rate=0.2,
    )
    return generate_synthetic_cohort(spec, 7)


@pytest.fixture(scope="session")
def survival_cohort():
    spec = SyntheticSpec(
        n_labeled=200,
        n_auxiliary=0,
        n_features=10,
        class_separation=3.0,
        noise_features=5,
        survival_effect=1.5,
        censoring_rate=0.2,
    )
    return generate_synthetic_cohort(spec, 11)
