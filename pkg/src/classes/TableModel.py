import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import jsonschema
import numpy as np

from ..utils.constants import AMBIENT_DIM, POLE_TOL
from ..utils.exceptions import PoleCoincidence, SchemaError, UnknownTablePoint
from ..utils.geo_utils import geodesic_distance
from ..utils.utils import check_file_exists
from .SphereModel import ManifoldModel, SpherePoint

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9
MATCH_TOL = 1e-9

TABLE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["points", "green"],
    "properties": {
        "points": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "coords", "A"],
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "coords": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": AMBIENT_DIM,
                        "maxItems": AMBIENT_DIM,
                    },
                    "A": {"type": "number"},
                },
            },
        },
        "green": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["i", "j", "value"],
                "properties": {
                    "i": {"type": ["string", "integer"]},
                    "j": {"type": ["string", "integer"]},
                    "value": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
    },
}


class TableModel(ManifoldModel):
    """Geometry provider backed by tabulated G and A at listed points.

    Points are matched by their coordinates; only listed points can be used
    (no interpolation). Distances are great-circle distances of the listed
    coordinates in the S^4 chart.

    Attributes
    ----------
    names : List[str]
        Point names, in file order.
    coords : Dict[str, np.ndarray]
        Unit coordinates per name.
    masses : Dict[str, float]
        A per name.
    greens : Dict[Tuple[str, str], float]
        G per ordered pair of distinct names.
    """

    name = "table"

    def __init__(
        self,
        names: List[str],
        coords: Dict[str, np.ndarray],
        masses: Dict[str, float],
        greens: Dict[Tuple[str, str], float],
        source: str = "",
        pole_tol: float = POLE_TOL,
    ):
        self.names = list(names)
        self.coords = coords
        self.masses = masses
        self.greens = greens
        self.source = source
        self.pole_tol = pole_tol

    def describe(self) -> dict:
        return {"type": self.name, "path": self.source, "points": self.names}

    def lookup(self, a: SpherePoint) -> str:
        for name in self.names:
            if np.max(np.abs(self.coords[name] - a.coords)) <= MATCH_TOL:
                return name
        raise UnknownTablePoint(a.coords.tolist())

    def distance(self, a: SpherePoint, x: SpherePoint) -> float:
        return geodesic_distance(a.coords, x.coords)

    def green(self, a: SpherePoint, x: SpherePoint) -> float:
        na, nx = self.lookup(a), self.lookup(x)
        if na == nx:
            raise PoleCoincidence(self.distance(a, x))
        return self.greens[(na, nx)]

    def mass(self, a: SpherePoint) -> float:
        return self.masses[self.lookup(a)]


def _resolve(ref: Union[str, int], names: List[str], idx: int, key: str) -> str:
    if isinstance(ref, int):
        if not 0 <= ref < len(names):
            raise SchemaError(f"point index {ref} out of range", field=f"green[{idx}].{key}")
        return names[ref]
    if ref not in names:
        raise SchemaError(f"unknown point {ref!r}", field=f"green[{idx}].{key}")
    return ref


def parse_manifold_table(data: dict, source: str = "") -> TableModel:
    try:
        jsonschema.validate(data, TABLE_SCHEMA)
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path)
        raise SchemaError(e.message, field=path) from None

    names = [p["name"] for p in data["points"]]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate point names", field="points")

    coords, masses = {}, {}
    for idx, p in enumerate(data["points"]):
        c = np.asarray(p["coords"], dtype=float)
        if abs(np.linalg.norm(c) - 1.0) > 1e-9:
            raise SchemaError("coords must be a unit vector", field=f"points[{idx}].coords")
        coords[p["name"]] = c
        masses[p["name"]] = float(p["A"])

    greens = {}
    for idx, entry in enumerate(data["green"]):
        i = _resolve(entry["i"], names, idx, "i")
        j = _resolve(entry["j"], names, idx, "j")
        if i == j:
            raise SchemaError("G is undefined on the diagonal", field=f"green[{idx}]")
        if (i, j) in greens:
            raise SchemaError(f"duplicate entry for ({i}, {j})", field=f"green[{idx}]")
        greens[(i, j)] = float(entry["value"])

    for i in names:
        for j in names:
            if i == j:
                continue
            if (i, j) not in greens:
                raise SchemaError(f"missing G entry for ({i}, {j})", field="green")
            if abs(greens[(i, j)] - greens[(j, i)]) > SYMMETRY_TOL:
                raise SchemaError(
                    f"G({i},{j}) = {greens[(i, j)]!r} differs from G({j},{i}) = {greens[(j, i)]!r}",
                    field="green",
                )
    logger.info(f"manifold table with {len(names)} points loaded from {source or '<memory>'}")
    return TableModel(names, coords, masses, greens, source=source)


def load_manifold_table(path: Union[Path, str]) -> TableModel:
    """Load a tabulated manifold (JSON: points with name/coords/A, pairwise G)."""
    if isinstance(path, str):
        path = Path(path)
    check_file_exists(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(e.msg, line=e.lineno) from None
    return parse_manifold_table(data, source=str(path))
