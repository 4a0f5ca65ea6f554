"""
Artifact writers: CSV with a JSON manifest header line, JSON reports, and
atomic replacement of the target file.
"""

import json
import logging
import os
import sys
import tempfile
from typing import Optional

import numpy as np
import pandas as pd

from backend.errors import RangeError
from backend.models.domain_models import RunManifest

logger = logging.getLogger(__name__)

STDOUT = '-'


def atomic_write_text(path: str, text: str):
    """Write via a temp file in the target directory and rename over ``path``"""
    if path == STDOUT:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info("wrote %s", path)


def csv_body(frame: pd.DataFrame) -> str:
    """CSV text with shortest round-trip float formatting"""
    return frame.to_csv(index=False, lineterminator='\n', float_format=_shortest_repr)


def _shortest_repr(value: float) -> str:
    return repr(float(value))


def write_csv(frame: pd.DataFrame, path: str, manifest: Optional[RunManifest] = None):
    header = ''
    if manifest is not None:
        header = '# ' + json.dumps(manifest.to_dict(), sort_keys=True, default=_json_default) + '\n'
    atomic_write_text(path, header + csv_body(frame))


def write_json(payload: dict, path: str, manifest: Optional[RunManifest] = None):
    document = dict(payload)
    if manifest is not None:
        document['manifest'] = manifest.to_dict()
    atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True, default=_json_default) + '\n')


def read_csv(path: str) -> pd.DataFrame:
    """Read an artifact written by write_csv, skipping the manifest line"""
    return pd.read_csv(path, comment='#')


def read_manifest(path: str) -> dict:
    with open(path, encoding='utf-8') as handle:
        first = handle.readline()
    if not first.startswith('# '):
        return {}
    return json.loads(first[2:])


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def parse_range(text: str, name: str) -> np.ndarray:
    """
    'a:b:step' into the inclusive grid a, a+step, …, b.

    A single number gives a one-point grid.
    """
    parts = text.split(':')
    try:
        values = [float(part) for part in parts]
    except ValueError:
        raise RangeError(f"{name} range '{text}' is not numeric") from None
    if len(values) == 1:
        return np.array(values)
    if len(values) != 3:
        raise RangeError(f"{name} range '{text}' must be a:b:step")
    start, stop, step = values
    if step <= 0 or stop < start:
        raise RangeError(f"{name} range '{text}' is empty (need step > 0 and b >= a)")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def output_path(out: str, filename: str) -> str:
    if out == STDOUT:
        return STDOUT
    return os.path.join(out, filename)
