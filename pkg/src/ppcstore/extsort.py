"""External merge sort for (encoded key, value) pairs.

Bulk builds must not assume key-sorted input, and corpora can exceed RAM:
chunks are sorted in memory, spilled as length-framed runs, and merged
lazily with a heap.
"""

import heapq
import os
import struct
import tempfile
from operator import itemgetter
from typing import IO, Iterable, Iterator

_FRAME = struct.Struct("<II")  # key length, value length

DEFAULT_CHUNK_BYTES = 192 * 1024 * 1024


def _write_run(pairs: list[tuple[bytes, bytes]], out: IO[bytes]) -> None:
    for key, value in pairs:
        out.write(_FRAME.pack(len(key), len(value)))
        out.write(key)
        out.write(value)


def _read_run(f: IO[bytes]) -> Iterator[tuple[bytes, bytes]]:
    while True:
        header = f.read(_FRAME.size)
        if not header:
            return
        klen, vlen = _FRAME.unpack(header)
        key = f.read(klen)
        value = f.read(vlen)
        yield key, value


def sorted_pairs(
    pairs: Iterable[tuple[bytes, bytes]],
    tmp_dir: str | None = None,
    chunk_bytes: int = DEFAULT_CHUNK_BYTES,
) -> Iterator[tuple[bytes, bytes]]:
    """Yield the pairs in ascending key order using bounded memory."""
    runs: list[IO[bytes]] = []
    chunk: list[tuple[bytes, bytes]] = []
    size = 0
    try:
        for key, value in pairs:
            chunk.append((key, value))
            size += len(key) + len(value)
            if size >= chunk_bytes:
                chunk.sort(key=itemgetter(0))
                run = tempfile.TemporaryFile(dir=tmp_dir)
                _write_run(chunk, run)
                runs.append(run)
                chunk, size = [], 0

        chunk.sort(key=itemgetter(0))
        if not runs:
            yield from chunk
            return

        if chunk:
            run = tempfile.TemporaryFile(dir=tmp_dir)
            _write_run(chunk, run)
            runs.append(run)
        del chunk
        for run in runs:
            run.seek(0, os.SEEK_SET)
        yield from heapq.merge(*(_read_run(run) for run in runs), key=itemgetter(0))
    finally:
        for run in runs:
            run.close()
