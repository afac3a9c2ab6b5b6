"""Test-time adaptation under joint label and covariate shift."""

import json as _json

from ._core import *  # noqa: F401,F403
from . import _core

__version__ = "0.1.0"


def _text(doc):
    return doc if isinstance(doc, str) else _json.dumps(doc)


def config(doc=None):
    """Config from a dict or JSON string; missing keys take their defaults."""
    return _core.config_from_json(_text(doc or {}))


def synthetic_source(spec):
    return _core.generate_source(_text(spec))


def synthetic_stream(spec):
    return _core.generate_stream(_text(spec))
