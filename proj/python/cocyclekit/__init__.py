"""Lyapunov metrics, isometric and conformal reductions of matrix cocycles."""

import json
from pathlib import Path

from ._core import (
    ConfigError,
    NumericalError,
    invariance_residual,
    loewner_margin,
    max_principal_angle,
    mininorm,
    operator_norm,
    orthogonality_defect,
    psd_sqrt,
    solve_positive,
)
from ._core import run as _run

__all__ = [
    "ConfigError",
    "NumericalError",
    "invariance_residual",
    "loewner_margin",
    "max_principal_angle",
    "mininorm",
    "operator_norm",
    "orthogonality_defect",
    "psd_sqrt",
    "run",
    "solve_positive",
]


def run(command, config, mode="", strict=False, seed=None):
    """Run a CLI command in process.

    ``config`` is a dict, a JSON string, or a path to a config file.
    Returns ``(report, exit_code)`` with the report decoded into a dict.
    """
    if isinstance(config, dict):
        text = json.dumps(config)
    elif isinstance(config, Path) or (isinstance(config, str) and not config.lstrip().startswith("{")):
        text = Path(config).read_text()
    else:
        text = config
    report, code = _run(command, text, mode, strict, seed)
    return json.loads(report), code
