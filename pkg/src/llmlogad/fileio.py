"""Atomic file output: write to a sibling temp file, then rename over."""

from __future__ import annotations

import contextlib
import os
import tempfile
from pathlib import Path

from .errors import IoError


@contextlib.contextmanager
def atomic_open(path, mode: str = "w", encoding: str = "utf-8"):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    try:
        with os.fdopen(fd, mode, encoding=encoding, newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException as exc:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        if isinstance(exc, OSError):
            raise IoError(path, exc.strerror or str(exc)) from exc
        raise


def atomic_write_text(path, text: str) -> None:
    with atomic_open(path) as fh:
        fh.write(text)
