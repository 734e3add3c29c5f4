import json

import numpy as np
import pytest

from porohom.model import CoefficientModel, HoleSpec

LAMINATE = {"family": "laminate", "params": {"axis": 0, "values": [1, 4]}}
SIN2_BETA = {"family": "trig", "params": {
    "constant": 1.0, "terms": [{"coef": 0.5, "kind": "sin", "freq": [0, 0, 1], "power": 2}]}}
SINE_U0 = {"family": "sine_product", "params": {"modes": [1, 1]}}


def identity_block(**extra):
    block = {"A": {"family": "constant", "params": {"matrix": [[1, 0], [0, 1]]}},
             "rho": 1.0, "beta": 1.0, "lambda_bound": 2.0, "alpha": 0.5}
    block.update(extra)
    return block


def laminate_block(**extra):
    block = {"A": {"family": "isotropic", "params": {"y": LAMINATE, "z": LAMINATE}},
             "rho": 1.0, "beta": 1.0, "lambda_bound": 17.0, "alpha": 0.5}
    block.update(extra)
    return block


@pytest.fixture
def identity_model():
    return CoefficientModel.from_config(identity_block(), 2)


@pytest.fixture
def laminate_model():
    return CoefficientModel.from_config(laminate_block(), 2)


@pytest.fixture
def disk():
    return HoleSpec("disk", (0.5, 0.5), 0.25)


@pytest.fixture
def no_hole():
    return HoleSpec("none", (0.5, 0.5), 0.0)


def write_config(path, raw):
    path.write_text(json.dumps(raw))
    return str(path)


def fixture_config(model, hole=None, T=0.05, f=1.0, u0=SINE_U0, h_cell=1 / 32, h_macro=1 / 32,
                   dt=0.0125, epsilons=(0.5,), out="out", formats=("csv",), **disc):
    model = dict(model)
    model["hole"] = hole if hole is not None else {"family": "none"}
    d = {"h_cell": h_cell, "h_macro": h_macro, "dt": dt, "epsilons": list(epsilons),
         "quadrature_resolution": 64}
    d.update(disc)
    return {"model": model,
            "problem": {"domain": [[0, 1], [0, 1]], "T": T, "f": f, "u0": u0, "v0": 0.0},
            "discretization": d,
            "output": {"directory": out, "formats": list(formats)}}


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
