import csv
import json
import logging
import math
import os
from typing import Any, Iterable, Sequence

import numpy as np


def format_number(value: Any) -> str:
    """Full precision (17 significant digits) so plots never re-round."""
    if isinstance(value, (complex, np.complexfloating)):
        return f"{value.real:.17g}{value.imag:+.17g}j"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _jsonable(float(value.real)), "im": _jsonable(float(value.imag))}
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return value
    return value


class ResultWriter:
    """
    Writes CSV series and JSON summaries under one output directory.
    """
    def __init__(self, output_dir: str):
        if not output_dir:
            raise ValueError("Output directory must be set.")
        self.output_dir = output_dir
        os.makedirs(output_dir, exist_ok=True)
        self.written: list[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        target = self.path(name)
        with open(target, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_number(v) for v in row])
        logging.debug(f"Wrote {target}")
        self.written.append(target)
        return target

    def write_json(self, name: str, payload: dict) -> str:
        target = self.path(name)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
        logging.debug(f"Wrote {target}")
        self.written.append(target)
        return target
