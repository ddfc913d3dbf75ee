"""Byte-stable artifact I/O and provenance headers shared by the CLI stages."""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__

_EPOCH = (1980, 1, 1, 0, 0, 0)


class MissingArtifact(FileNotFoundError):
    """An upstream stage has not been run yet."""

    def __init__(self, path: Path, producer: str):
        super().__init__(f"missing {path}; run `collabpred {producer}` first")
        self.path = path
        self.producer = producer


def provenance(config_hash: str, seed: int, command: str, **extra) -> dict:
    out = {"tool": "collabpred", "version": __version__, "config_hash": config_hash, "seed": int(seed),
           "command": command}
    out.update({k: v for k, v in extra.items() if v is not None})
    return out


def header_lines(prov: Mapping) -> list[str]:
    """Comment lines prepended to CSV artifacts."""
    return ["# " + " ".join(f"{k}={prov[k]}" for k in sorted(prov))]


def save_npz(path: str | Path, prov: Mapping | None = None, **arrays) -> None:
    """Like :func:`numpy.savez` but with fixed zip timestamps, so reruns are byte-identical."""
    if prov is not None:
        arrays["provenance"] = np.array(json.dumps(dict(prov), sort_keys=True))
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asanyarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH)
            info.external_attr = 0o644 << 16
            zf.writestr(info, buf.getvalue())
    tmp.replace(path)


def load_npz(path: str | Path, producer: str) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(path, producer)
    with np.load(path, allow_pickle=False) as z:
        return {k: z[k] for k in z.files}


def write_json(path: str | Path, obj, prov: Mapping | None = None) -> None:
    if prov is not None:
        obj = {"provenance": dict(prov), **obj}
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path, producer: str):
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(path, producer)
    return json.loads(path.read_text(encoding="utf-8"))


def require(path: str | Path, producer: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(path, producer)
    return path
