"""Self-describing CSV/JSON tables and run manifests.

Every table starts with the resolved run configuration. Numbers are written
with nine significant digits and nothing time-dependent is recorded, so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import json
import math
import platform
import sys
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = ["format_value", "render_csv", "render_json", "write_table", "write_manifest", "manifest"]


def format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.9g}"
    if value is None:
        return ""
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            return format_value(value)
        return float(format_value(value))
    return value


def _config_line(config: dict) -> str:
    return json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]], config: dict) -> str:
    lines = [f"# config={_config_line(config)}", ",".join(columns)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def render_json(columns: Sequence[str], rows: Iterable[Sequence[Any]], config: dict) -> str:
    body = {
        "config": _jsonable(config),
        "columns": list(columns),
        "rows": [[_jsonable(v) for v in row] for row in rows],
    }
    return json.dumps(body, sort_keys=True, indent=1) + "\n"


def write_table(path: Path, columns: Sequence[str], rows: Sequence[Sequence[Any]], config: dict, fmt: str = "csv") -> None:
    text = render_json(columns, rows, config) if fmt == "json" else render_csv(columns, rows, config)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def manifest(config: dict, outputs: Sequence[str]) -> dict:
    """Run description: configuration, outputs and software versions."""
    from . import __version__

    import scipy

    return {
        "config": _jsonable(config),
        "outputs": list(outputs),
        "software": {
            "package": "optinc",
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "argv": sys.argv[1:],
    }


def write_manifest(path: Path, config: dict, outputs: Sequence[str]) -> None:
    path.write_text(json.dumps(manifest(config, outputs), sort_keys=True, indent=1) + "\n")
