"""JSON report and CSV artifact writers."""

import json
import os

import numpy as np

__all__ = ["report_document", "dumps_report", "write_report", "write_csv"]


def _plain(obj):
    """Recursively convert numpy scalars and arrays to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def report_document(command, config, reports, version, elapsed=None, workers=1):
    """Assemble the report body.

    ``config`` is the resolved configuration without the worker count, so
    everything outside ``timing`` depends only on the configuration and seed.
    """
    return {
        "version": version,
        "command": command,
        "config": config,
        "pass": all(r.passed for r in reports),
        "reports": [r.to_dict() for r in reports],
        "timing": {"elapsed_s": elapsed, "workers": workers},
    }


def dumps_report(doc):
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


def write_report(path, doc):
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_report(doc))


def write_csv(path, obj, **kwargs):
    """Write anything with a ``to_csv(fh)`` method using LF line endings."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        obj.to_csv(fh, **kwargs)
