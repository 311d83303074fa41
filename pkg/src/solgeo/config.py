"""Experiment configuration: JSON documents validated against a schema.

A configuration looks like::

    {
      "command": "clt",
      "params": {"p": 1, "q": 1, "a": 1},
      "run": {"dt": 0.001, "T": 100, "N": 5000, "seed": 42, "workers": 1},
      "options": {"functional": "coordinates"},
      "output": {"dir": "out", "samples": true}
    }

``run`` is required for the stochastic commands and must then contain
``dt``, ``T``, ``N`` and ``seed``.
"""

import json

import jsonschema

from solgeo.errors import ConfigError

__all__ = ["COMMANDS", "SCHEMA", "load_config", "validate_config", "with_overrides"]

COMMANDS = ("simulate", "clt", "escape", "tails", "deviation", "boundary", "harmonic", "geometry")
STOCHASTIC = ("simulate", "clt", "escape", "tails", "deviation", "boundary")

_POS = {"type": "number", "exclusiveMinimum": 0}
_COUNT = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "required": ["command", "params"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "params": {
            "type": "object",
            "required": ["p", "q", "a"],
            "additionalProperties": False,
            "properties": {"p": _POS, "q": _POS, "a": {"type": "number"}},
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": _POS,
                "T": _POS,
                "N": _COUNT,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "workers": _COUNT,
            },
        },
        "options": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "samples": {"type": "boolean"},
                "path": {"type": "boolean"},
            },
        },
    },
    "allOf": [
        {
            "if": {"properties": {"command": {"enum": list(STOCHASTIC)}}},
            "then": {
                "required": ["run"],
                "properties": {"run": {"required": ["dt", "T", "N", "seed"]}},
            },
        },
    ],
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _error_path(err):
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = [r for r in err.validator_value if r not in err.instance]
        if missing:
            parts.append(missing[0])
    return ".".join(parts) or "<root>"


def validate_config(doc):
    """Raise :class:`ConfigError` naming the first offending field."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (len(e.absolute_path), e.message))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, path=_error_path(err))
    return doc


def load_config(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return validate_config(doc)


def with_overrides(doc, seed=None, workers=None, out=None):
    """Copy of ``doc`` with command-line overrides applied, then revalidated."""
    doc = json.loads(json.dumps(doc))
    if seed is not None or workers is not None:
        run = doc.setdefault("run", {})
        if seed is not None:
            run["seed"] = int(seed)
        if workers is not None:
            run["workers"] = int(workers)
    if out is not None:
        doc.setdefault("output", {})["dir"] = out
    return validate_config(doc)
