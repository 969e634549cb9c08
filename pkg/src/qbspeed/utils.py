"""
Shared utility functions for the quantum battery speed toolkit.

This module provides the settings, logging setup, serialization helpers and
response builders used across the library and the command-line front end.
"""
import csv
import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Environment variables
LOG_LEVEL = os.environ.get('QBSPEED_LOG_LEVEL', 'INFO')
DEFAULT_SEED = int(os.environ.get('QBSPEED_SEED', '1234'))
DEFAULT_RESTARTS = int(os.environ.get('QBSPEED_RESTARTS', '32'))
DEFAULT_JOBS = int(os.environ.get('QBSPEED_JOBS', '1'))
OUTPUT_DIR = os.environ.get('QBSPEED_OUTPUT_DIR', 'output')
CSV_DIGITS = int(os.environ.get('QBSPEED_CSV_DIGITS', '12'))
MAX_ENUMERATION = int(os.environ.get('QBSPEED_MAX_ENUMERATION', str(2 ** 14)))

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure root logging once for a command-line run.

    Args:
        level: Level name; defaults to QBSPEED_LOG_LEVEL
    """
    logging.basicConfig(format=LOG_FORMAT)
    logging.getLogger().setLevel((level or LOG_LEVEL).upper())


class NumpyEncoder(json.JSONEncoder):
    """JSON encoder that handles numpy scalars/arrays and complex numbers."""
    def default(self, obj):
        if isinstance(obj, (complex, np.complexfloating)):
            return [float(obj.real), float(obj.imag)]
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.ndarray):
            return [self.default(x) if isinstance(x, (complex, np.generic)) else x
                    for x in obj.tolist()]
        return super().default(obj)


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy/complex values into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return _finite_or_str(float(value))
    if isinstance(value, float):
        return _finite_or_str(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _finite_or_str(x: float) -> Any:
    # JSON has no inf/nan literals
    if math.isfinite(x):
        return x
    return 'nan' if math.isnan(x) else ('inf' if x > 0 else '-inf')


def dumps(payload: Any) -> str:
    """Serialize with stable key order."""
    return json.dumps(to_jsonable(payload), cls=NumpyEncoder, sort_keys=True, indent=2) + '\n'


def write_json(path: Path, payload: Any) -> Path:
    """
    Write a JSON document (UTF-8, stable key order).

    Args:
        path: Destination file
        payload: JSON-serializable value (numpy and complex allowed)

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps(payload))
    logger.info(f"Wrote {path}")
    return path


def format_number(value: Any, digits: int = CSV_DIGITS) -> str:
    """Format a CSV cell; floats get `digits` significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            return 'nan' if math.isnan(x) else ('inf' if x > 0 else '-inf')
        return f"{x:.{digits}g}"
    if value is None:
        return ''
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """
    Write an RFC-4180 CSV file with LF line endings.

    Args:
        path: Destination file
        header: Column names
        rows: Row values, floats formatted with CSV_DIGITS significant digits

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n', quoting=csv.QUOTE_MINIMAL)
        writer.writerow(list(header))
        count = 0
        for row in rows:
            writer.writerow([format_number(v) for v in row])
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return path


def build_response(exit_code: int, outputs: Optional[List[str]] = None,
                   summary: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Build the standardized experiment handler response.

    Args:
        exit_code: Process exit code (0 success)
        outputs: Paths of the files written
        summary: Small JSON-able summary of the run

    Returns:
        Response dictionary
    """
    return {
        'exit_code': exit_code,
        'outputs': [str(p) for p in (outputs or [])],
        'summary': to_jsonable(summary or {}),
    }


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    """Deterministic generator; falls back to QBSPEED_SEED."""
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)
