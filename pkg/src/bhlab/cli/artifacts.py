"""Atomic artifact output and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

__all__ = ["OutputDir", "csv_text", "json_text", "MANIFEST", "CSV_VERSION", "OutputError"]

MANIFEST = "manifest.json"
CSV_VERSION = 1


class OutputError(OSError):
    pass


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def csv_text(kind: str, columns, rows) -> str:
    """CSV with a versioned comment line, then the fixed header."""
    buf = io.StringIO()
    buf.write(f"# bhlab-csv v{CSV_VERSION} {kind}\n")
    w = csv.DictWriter(buf, list(columns), lineterminator="\n", extrasaction="raise")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class OutputDir:
    """Collects artifacts under ``root``; the manifest is written last.

    A directory holding a manifest from an earlier run is reused after the
    files it lists are removed.  Any other non-empty directory is refused,
    so nothing in the directory escapes the manifest.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.files: dict[str, str] = {}
        self._sizes: dict[str, int] = {}

    def prepare(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        man = self.root / MANIFEST
        present = sorted(p.name for p in self.root.iterdir())
        if not present:
            return
        if MANIFEST not in present:
            raise OutputError(f"output directory {self.root} is not empty and holds no {MANIFEST}")
        old = json.loads(man.read_text(encoding="utf-8"))
        listed = {f["name"] for f in old.get("files", [])} | {MANIFEST}
        stray = [n for n in present if n not in listed]
        if stray:
            raise OutputError(f"output directory {self.root} holds files outside its manifest: {stray}")
        for n in listed:
            p = self.root / n
            if p.exists():
                p.unlink()

    def write(self, name: str, data) -> Path:
        if name == MANIFEST or "/" in name or name.startswith("."):
            raise OutputError(f"invalid artifact name {name!r}")
        if isinstance(data, str):
            data = data.encode("utf-8")
        path = self.root / name
        _atomic_write(path, data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        self._sizes[name] = len(data)
        return path

    def write_manifest(self, info: dict) -> Path:
        files = [{"name": n, "sha256": self.files[n], "bytes": self._sizes[n]} for n in sorted(self.files)]
        path = self.root / MANIFEST
        _atomic_write(path, json_text({**info, "files": files}).encode("utf-8"))
        return path
