"""File helpers for trees, CSV tables and JSON reports"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import pandas as pd

from nestedot.core.exceptions import CsvSchemaException
from nestedot.models.tree import ScenarioTree
from nestedot.services.tree_service import parse_tree, serialize_tree

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_tree(path: PathLike) -> ScenarioTree:
    """Load and validate a tree document; errors name the file"""
    path = Path(path)
    return parse_tree(path.read_bytes(), source=str(path))


def write_tree(tree: ScenarioTree, path: PathLike) -> Path:
    path = Path(path)
    path.write_bytes(serialize_tree(tree))
    logger.debug(f"Wrote tree with {tree.size} nodes to {path}")
    return path


def write_csv(rows: Iterable[Dict[str, Any]], columns: List[str], path: PathLike) -> pd.DataFrame:
    """Write rows with a fixed header and column order"""
    frame = pd.DataFrame(list(rows), columns=columns)
    frame.to_csv(path, index=False)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return frame


def read_csv(path: PathLike, columns: List[str]) -> pd.DataFrame:
    """Read a CSV written by ``write_csv`` and check its header"""
    frame = pd.read_csv(path, keep_default_na=False, na_values=[""])
    if list(frame.columns) != list(columns):
        raise CsvSchemaException(str(path), list(columns), list(frame.columns))
    return frame


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, default=str) + "\n", encoding="utf-8")
    return path
