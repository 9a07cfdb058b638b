"""Small file-handling helpers shared by the save/load paths and the CLI."""

from __future__ import annotations

import os
import tempfile


def atomic_write(path, text: str, force: bool = False) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory.

    The rename is atomic on POSIX, so a crashed run never leaves a partial
    file behind.  Refuses to replace an existing file unless ``force``.
    """
    path = os.fspath(path)
    if not force and os.path.exists(path):
        raise FileExistsError(f"{path} exists; pass force to overwrite")
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def append_csv_row(path, header: str, row: str) -> None:
    """Append one CSV row, writing the header first when the file is new."""
    path = os.fspath(path)
    new = not os.path.exists(path)
    with open(path, "a", encoding="utf-8") as fh:
        if new:
            fh.write(header + "\n")
        fh.write(row + "\n")
