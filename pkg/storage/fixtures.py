"""
JSON codec for measures and scattering models.

Complex matrices are stored as a pair of nested real arrays {"re", "im"}.
A measure document reads

    {"shape": [rows, cols],
     "atoms": [{"x": 0.5, "re": [[...]], "im": [[...]]}, ...],
     "cells": [{"left": 0.0, "right": 1.0, "re": [[...]], "im": [[...]]}, ...]}

and a model document {"H0": {...}, "G": {...}, "J": {...}}.
"""
import json
import logging
from typing import Any

import numpy as np

from analysis.dyadic import Interval
from analysis.errors import FixtureError
from analysis.opmeasure import DensityOpMeasure, OpMeasure, SimpleOpMeasure
from analysis.scattering import ScatteringModel


def matrix_to_dict(m: np.ndarray) -> dict:
    m = np.asarray(m, dtype=np.complex128)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def matrix_from_dict(payload: Any) -> np.ndarray:
    if not isinstance(payload, dict) or "re" not in payload:
        raise FixtureError("A matrix must be an object with 're' (and optionally 'im') arrays.")
    try:
        re = np.asarray(payload["re"], dtype=float)
        im = np.asarray(payload.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise FixtureError(f"Real part has shape {re.shape}, imaginary part {im.shape}.")
        m = re + 1j * im
    except (TypeError, ValueError) as e:
        raise FixtureError(f"Malformed matrix entries: {e}")
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(-1, 1)
    return m


def measure_to_dict(mu) -> dict:
    op = mu if isinstance(mu, OpMeasure) else OpMeasure(mu)
    payload = {
        "shape": list(op.shape),
        "atoms": [{"x": float(x), **matrix_to_dict(e)} for x, e in zip(op.atoms.positions, op.atoms.values)],
    }
    bps = op.density.breakpoints
    if op.density.cell_count:
        payload["cells"] = [
            {"left": float(a), "right": float(b), **matrix_to_dict(d)}
            for a, b, d in zip(bps[:-1], bps[1:], op.density.densities)
        ]
    return payload


def measure_from_dict(payload: Any) -> OpMeasure:
    if not isinstance(payload, dict) or "atoms" not in payload:
        raise FixtureError("A measure fixture needs an 'atoms' list.")
    try:
        shape = tuple(payload.get("shape") or ())
        atoms = [(float(a["x"]), matrix_from_dict(a)) for a in payload["atoms"]]
        if not shape:
            if not atoms:
                raise FixtureError("An empty measure fixture needs an explicit 'shape'.")
            shape = atoms[0][1].shape
        simple = SimpleOpMeasure.from_atoms(atoms, shape)
        cells = [
            (Interval(float(c["left"]), float(c["right"])), matrix_from_dict(c))
            for c in payload.get("cells", [])
        ]
        density = DensityOpMeasure.from_cells(cells, shape)
    except (KeyError, TypeError) as e:
        raise FixtureError(f"Malformed measure fixture: {e}")
    except FixtureError:
        raise
    except ValueError as e:
        raise FixtureError(f"Invalid measure fixture: {e}")
    return OpMeasure(simple, density)


def model_to_dict(model: ScatteringModel) -> dict:
    return {"H0": matrix_to_dict(model.h0), "G": matrix_to_dict(model.g), "J": matrix_to_dict(model.j)}


def model_from_dict(payload: Any) -> ScatteringModel:
    if not isinstance(payload, dict):
        raise FixtureError("A model fixture must be a JSON object.")
    missing = [k for k in ("H0", "G", "J") if k not in payload]
    if missing:
        raise FixtureError(f"Model fixture is missing {missing}.")
    try:
        return ScatteringModel.build(
            matrix_from_dict(payload["H0"]),
            matrix_from_dict(payload["G"]),
            matrix_from_dict(payload["J"]),
        )
    except FixtureError:
        raise
    except ValueError as e:
        raise FixtureError(f"Invalid model fixture: {e}")


def _read(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FixtureError(f"Fixture {path} is not valid JSON: {e}")


def load_measure(path: str) -> OpMeasure:
    logging.info(f"Loading measure fixture {path}")
    return measure_from_dict(_read(path))


def load_model(path: str) -> ScatteringModel:
    logging.info(f"Loading model fixture {path}")
    return model_from_dict(_read(path))


def save_fixture(payload: dict, path: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    return path
