"""Atomic file output: write to a temporary file in the target directory, then rename."""

import os
import tempfile


def atomic_write_with(path, writer, binary=False):
    """Atomically replace ``path`` with whatever ``writer(fh)`` writes."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix="-" + os.path.basename(path), dir=directory)
    try:
        with os.fdopen(fd, "wb" if binary else "w", **({} if binary else {"newline": ""})) as fh:
            writer(fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write(path, data):
    """``data`` is str or bytes."""
    return atomic_write_with(path, lambda fh: fh.write(data), binary=isinstance(data, bytes))
