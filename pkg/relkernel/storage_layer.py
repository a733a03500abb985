"""
Data Storage Layer - CSV and JSON artifacts of verification runs

Floats are written with repr (shortest round-trip form) so a CSV read back
reproduces every numeric field exactly, and nothing time-dependent is
written, so the same run gives byte-identical files.
"""
import json
import math
import os

import pandas as pd

from relkernel.logging_config import get_logger
from relkernel.verification_layer import RatioRecord

logger = get_logger(__name__)

CSV_COLUMNS = ['d', 'alpha', 'm', 't', 'x', 'y', 'comparator', 'estimate', 'std_err', 'ratio']


def _num(value):
    if value is None:
        return ''
    return repr(float(value))


def _coords(values):
    return ';'.join(repr(float(v)) for v in values)


def _parse_num(text):
    return None if text == '' else float(text)


def _parse_coords(text):
    return tuple(float(v) for v in text.split(';')) if text else ()


def ensure_dir(path):
    directory = os.path.dirname(os.fspath(path))
    if directory:
        os.makedirs(directory, exist_ok=True)


def emit_csv(report, path):
    """One row per record, header first; coordinates are ';'-joined inside their cell"""
    rows = [{
        'd': str(rec.d),
        'alpha': _num(rec.alpha),
        'm': _num(rec.m),
        't': _num(rec.t),
        'x': _coords(rec.x),
        'y': _coords(rec.y),
        'comparator': _num(rec.comparator),
        'estimate': _num(rec.estimate),
        'std_err': _num(rec.std_err),
        'ratio': _num(rec.ratio),
    } for rec in report.records]
    ensure_dir(path)
    pd.DataFrame(rows, columns=CSV_COLUMNS, dtype=object).to_csv(path, index=False, lineterminator='\r\n')
    logger.debug("wrote %d records to %s", len(rows), path)


def load_csv(path):
    """Records of an emitted CSV (stratum and boundary distances are not stored)"""
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(df.columns) != CSV_COLUMNS:
        raise ValueError(f"{path}: unexpected header {list(df.columns)}")
    records = []
    for row in df.itertuples(index=False):
        records.append(RatioRecord(
            d=int(row.d), alpha=float(row.alpha), m=float(row.m), t=_parse_num(row.t),
            x=_parse_coords(row.x), y=_parse_coords(row.y), comparator=float(row.comparator),
            estimate=float(row.estimate), std_err=float(row.std_err), ratio=float(row.ratio)))
    return records


def _clean(value):
    """JSON-safe copy: non-finite floats become null, tuples become lists"""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if hasattr(value, 'item'):
        return _clean(value.item())
    return value


def write_json(payload, path):
    ensure_dir(path)
    with open(path, 'w', newline='\n') as f:
        json.dump(_clean(payload), f, indent=2, allow_nan=False)
        f.write('\n')


def emit_report_json(report, path):
    """{config, summary, verdict, dropped_points, reason} in that order"""
    write_json(report.to_dict(), path)
    logger.debug("wrote report (%s) to %s", report.verdict, path)


def load_report_json(path):
    with open(path) as f:
        return json.load(f)


def emit_table(frame, path):
    """Write a pandas table (levy / kernel / simulate outputs) with repr floats"""
    out = frame.copy()
    for column in out.columns:
        if pd.api.types.is_float_dtype(out[column]):
            out[column] = [_num(v) for v in out[column]]
    ensure_dir(path)
    out.to_csv(path, index=False, lineterminator='\r\n')
