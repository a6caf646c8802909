import json
import math
from pathlib import Path
from typing import Any, Union

import numpy as np


def check_file_exists(filepath: Union[Path, str]):
    filepath = Path(filepath)
    if not filepath.is_file():
        raise FileNotFoundError(f"Missing file {filepath}")


def time2str(t: float, precision: str = "") -> str:
    mins = int(t // 60)
    secs_float = t % 60
    secs = int(secs_float)
    time_str = f"{mins} min {secs} s"
    if precision == "ms":
        ms = round((secs_float - secs) * 1e3)
        time_str = time_str + f" {ms} ms"
    return time_str


def to_jsonable(obj: Any) -> Any:
    """Convert numpy containers/scalars (recursively) to plain JSON types.

    Non-finite floats become strings ("inf", "-inf", "nan") so the output stays
    strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dumps_report(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def write_text(out_path: Union[Path, str], text: str, overwrite: bool = False) -> Path:
    """Write `text` to `out_path`, refusing to clobber unless `overwrite`."""
    out_path = Path(out_path)
    if out_path.is_file() and not overwrite:
        raise FileExistsError(f"File {out_path} already exists!")
    if not out_path.parent.is_dir():
        raise FileNotFoundError(f"Directory {out_path.parent} not found!")
    with open(out_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return out_path
