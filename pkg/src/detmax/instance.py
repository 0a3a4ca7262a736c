"""Problem instances and their JSON file form.

An instance file looks like::

    {"v": 1, "dim": 2, "vectors": [[1.0, 0.0], ...],
     "matroid": {"kind": "uniform", "n": 3, "rank": 2},
     "app": {"nsw": {"valuations": [[...], ...]}}}

``app`` is optional. When ``vectors``/``matroid`` are missing, the app
section is reduced to build them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from detmax import matroid as mt
from detmax.linalg import as_vectors

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


@dataclass(eq=False)
class Instance:
    vectors: np.ndarray
    matroid: mt.Matroid
    app: dict | None = field(default=None)

    def __post_init__(self):
        self.vectors = as_vectors(self.vectors)
        if self.matroid.ground_size != self.vectors.shape[0]:
            raise SchemaError(
                f"matroid ground size {self.matroid.ground_size} != vector count {self.vectors.shape[0]}"
            )

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def rank(self) -> int:
        return mt.rank(self.matroid)

    def restricted(self, support) -> "Instance":
        return Instance(self.vectors, mt.RestrictionMatroid(self.matroid, frozenset(support)), self.app)


def instance_from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise SchemaError("instance document must be a JSON object")
    if doc.get("v") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {doc.get('v')!r}")
    app = doc.get("app")
    try:
        if "vectors" not in doc or "matroid" not in doc:
            if not app:
                raise SchemaError("instance needs 'vectors' and 'matroid' or an 'app' section")
            from detmax.apps import instance_from_app

            inst = instance_from_app(app)
        else:
            vectors = as_vectors(doc["vectors"])
            m = mt.matroid_from_dict(doc["matroid"], ground_size=vectors.shape[0])
            inst = Instance(vectors, m, app)
    except SchemaError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(str(exc)) from exc
    if "dim" in doc and int(doc["dim"]) != inst.dim:
        raise SchemaError(f"declared dim {doc['dim']} does not match vector length {inst.dim}")
    return inst


def instance_to_dict(inst: Instance) -> dict:
    doc = {
        "v": SCHEMA_VERSION,
        "dim": inst.dim,
        "vectors": inst.vectors.tolist(),
        "matroid": inst.matroid.to_dict(),
    }
    if inst.app:
        doc["app"] = inst.app
    return doc


def dumps(doc: dict) -> str:
    """Canonical JSON text (sorted keys, fixed separators, trailing newline)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ": ")) + "\n"


def load_instance(path) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_dict(doc)
