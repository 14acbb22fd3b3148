"""Reproducible run manifests.

Every CLI run hashes its inputs and command line into a manifest digest; each
JSON output embeds that digest, and a manifest.json listing all produced files
with their hashes is written alongside.  Outputs are byte-deterministic:
fixed iteration orders, no unordered reductions, canonical JSON encoding.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

TOOL_VERSION = "0.1.0"


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float):
        if obj != obj or obj in (float("inf"), float("-inf")):
            return repr(obj)
        return obj
    return obj


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


@dataclass
class RunManifest:
    scene_digest: str
    config_digest: str
    tool_version: str
    command: str
    outputs: list = field(default_factory=list)

    @property
    def digest(self):
        header = {
            "sceneDigest": self.scene_digest,
            "configDigest": self.config_digest,
            "toolVersion": self.tool_version,
            "command": self.command,
        }
        return sha256_bytes(canonical_json(header).encode())

    def to_doc(self):
        return {
            "sceneDigest": self.scene_digest,
            "configDigest": self.config_digest,
            "toolVersion": self.tool_version,
            "command": self.command,
            "manifestDigest": self.digest,
            "outputs": self.outputs,
        }


class RunWriter:
    """Collects run outputs and writes them with the manifest."""

    def __init__(self, command_argv, scene_path=None, config_path=None, out_dir=None):
        self.manifest = RunManifest(
            scene_digest=sha256_file(scene_path) if scene_path else "",
            config_digest=sha256_file(config_path) if config_path else "",
            tool_version=TOOL_VERSION,
            command=" ".join(command_argv),
        )
        self.out_dir = out_dir or os.environ.get("YAMCAP_OUT_DIR", ".")
        self._pending = []

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def add_json(self, name, doc):
        doc = dict(_jsonable(doc))
        doc["manifestDigest"] = self.manifest.digest
        payload = (json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n").encode()
        self._pending.append((name, payload))

    def add_bytes(self, name, payload):
        self._pending.append((name, bytes(payload)))

    def add_csv(self, name, rows, header=None):
        lines = []
        if header:
            lines.append(",".join(str(h) for h in header))
        for row in rows:
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
        self._pending.append((name, ("\n".join(lines) + "\n").encode()))

    def add_field_dump(self, name, field_obj, extra_header=None):
        """Flat little-endian float64 dump (row-major) with a JSON sidecar header."""
        import numpy as np

        values = np.ascontiguousarray(field_obj.values, dtype="<f8")
        self.add_bytes(name, values.tobytes(order="C"))
        grid = field_obj.grid
        header = {
            "dtype": "<f8",
            "order": "row-major",
            "shape": list(grid.shape),
            "axisOrder": "slowest-to-fastest as listed in shape",
            "grid": {
                "lo": list(grid.lo), "hi": list(grid.hi), "cells": list(grid.cells),
                "reduction": grid.reduction, "ambientDim": grid.ambient_dim,
            },
            "maskDigest": sha256_bytes(field_obj.defined_mask.tobytes()),
        }
        if extra_header:
            header.update(extra_header)
        self.add_json(name + ".json", header)

    def finish(self):
        os.makedirs(self.out_dir, exist_ok=True)
        for name, payload in self._pending:
            with open(self.path(name), "wb") as fh:
                fh.write(payload)
            self.manifest.outputs.append(
                {"path": name, "sha256": sha256_bytes(payload)}
            )
        doc = self.manifest.to_doc()
        with open(self.path("manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return doc
