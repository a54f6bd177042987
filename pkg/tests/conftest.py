import json
import pathlib

import pytest

GOLDEN_DIR = pathlib.Path(__file__).parent / "golden"


def load_golden(name):
    path = GOLDEN_DIR / name
    if not path.exists():
        pytest.skip(f"{name} missing; run scripts/make_golden.py "
                    "(or scripts/derive_coefficients.py --write-golden)")
    with open(path) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def golden_probabilities():
    return load_golden("golden_probabilities.json")


@pytest.fixture(scope="session")
def golden_moments():
    return load_golden("golden_moments.json")


@pytest.fixture(scope="session")
def golden_stage():
    return load_golden("golden_tmsc_stage.json")


@pytest.fixture(scope="session")
def golden_keyrate():
    return load_golden("golden_keyrate.json")


@pytest.fixture(scope="session")
def golden_exponent():
    return load_golden("golden_exponent.json")
