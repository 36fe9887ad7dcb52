"""Dynamic store over sorted tables: memtable + WAL + flush + compaction.

Two levels: L0 holds fresh flushes (possibly overlapping, newest first),
L1 holds non-overlapping sorted runs. One logical writer at a time;
readers never take the writer lock — they snapshot the (L0, L1) table
tuple and the memtable reference, both swapped atomically.

Directory layout: MANIFEST (text), wal-<seq>.log, tbl-<seq>.ppcs.
"""

import heapq
import logging
import os
import re
import threading
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from . import wal as wal_mod
from .codec import CodecSpec
from .errors import (
    BatchAbortedError,
    CapacityError,
    ConfigError,
    IntegrityError,
    RecoveryError,
    StoreError,
)
from .keys import PpcKey
from .sstable import SSTable, build_table

logger = logging.getLogger(__name__)

KIB = 1024
MIB = 1024 * KIB
GIB = 1024 * MIB

MANIFEST_NAME = "MANIFEST"
_MANIFEST_HEADER = "ppcs-manifest v1"
_TABLE_RE = re.compile(r"^tbl-(\d+)\.ppcs$")
_WAL_RE = re.compile(r"^wal-(\d+)\.log$")

# Table values carry a 1-byte state prefix so deletions shadow older
# versions until compaction drops both.
_LIVE = b"\x00"
_TOMB = b"\x01"


class _Tombstone:
    __slots__ = ()

    def __repr__(self):
        return "<tombstone>"


TOMBSTONE = _Tombstone()


@dataclass
class StoreConfig:
    """Tunable knobs; defaults target a large box, tests scale them down."""

    data_dir: str | Path
    codec: CodecSpec = field(default_factory=lambda: CodecSpec.parse("zstd:3"))
    target_block_size: int = 64 * KIB
    write_buffer_bytes: int = 2 * GIB
    max_wal_bytes: int = 64 * GIB
    compaction_threads: int = 6
    bits_per_key: float = 10.0
    capacity_m: int | None = None
    mmap_reads: bool = False

    def __post_init__(self):
        if self.write_buffer_bytes < 1 * MIB:
            raise ConfigError("write_buffer_bytes must be at least 1 MiB")
        if self.compaction_threads < 1:
            raise ConfigError("compaction_threads must be >= 1")
        if self.capacity_m is not None and self.capacity_m < self.write_buffer_bytes:
            raise ConfigError("capacity_m must be >= write_buffer_bytes")


def _wrap(value: bytes | _Tombstone) -> bytes:
    return _TOMB if value is TOMBSTONE else _LIVE + value


def _unwrap(wrapped: bytes) -> bytes | None:
    return None if wrapped[:1] == _TOMB else wrapped[1:]


class Engine:
    """Open with Engine.open(config) or the open_store() convenience."""

    def __init__(self, config: StoreConfig):
        self.config = config
        self.dir = Path(config.data_dir)
        self._writer_lock = threading.RLock()
        self._memtable: dict[bytes, bytes | _Tombstone] = {}
        self._memtable_raw = 0
        # (l0 tuple newest-first, l1 tuple ascending, l1 first keys)
        self._tables: tuple[tuple[SSTable, ...], tuple[SSTable, ...], tuple[bytes, ...]] = ((), (), ())
        self._seq = 0
        self._wal: wal_mod.WalWriter | None = None
        self._replayed_wals: list[Path] = []
        self._closed = False

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def open(cls, config: StoreConfig) -> "Engine":
        engine = cls(config)
        engine._recover()
        return engine

    def _recover(self) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        l0_names: list[str] = []
        l1_names: list[str] = []
        manifest = self.dir / MANIFEST_NAME
        if manifest.exists():
            l0_names, l1_names, self._seq = self._parse_manifest(manifest)

        listed = set(l0_names) | set(l1_names)
        max_file_seq = 0
        for entry in os.listdir(self.dir):
            m = _TABLE_RE.match(entry)
            if m:
                max_file_seq = max(max_file_seq, int(m.group(1)))
                if entry not in listed:
                    # orphan from a crash between table write and manifest commit
                    logger.warning("removing orphan table %s", entry)
                    os.unlink(self.dir / entry)
                continue
            m = _WAL_RE.match(entry)
            if m:
                max_file_seq = max(max_file_seq, int(m.group(1)))
        self._seq = max(self._seq, max_file_seq + 1)

        try:
            l0 = tuple(SSTable(self.dir / name, self.config.mmap_reads) for name in l0_names)
            l1 = tuple(SSTable(self.dir / name, self.config.mmap_reads) for name in l1_names)
        except (OSError, StoreError) as exc:
            raise RecoveryError(f"cannot open tables from manifest: {exc}") from exc
        self._install_tables(l0, l1)

        wal_paths = sorted(
            (p for p in self.dir.iterdir() if _WAL_RE.match(p.name)),
            key=lambda p: int(_WAL_RE.match(p.name).group(1)),
        )
        self._replayed_wals = []
        for path in wal_paths:
            records = 0
            for op, key, value in wal_mod.replay_wal(path):
                records += 1
                if op == wal_mod.OP_PUT:
                    self._memtable_insert(key, value)
                elif op == wal_mod.OP_DELETE:
                    self._memtable_insert(key, TOMBSTONE)
            if records:
                self._replayed_wals.append(path)
            else:
                # empty segment from a past read-only session
                os.unlink(path)
        self._open_fresh_wal()

    def _parse_manifest(self, path: Path) -> tuple[list[str], list[str], int]:
        l0: list[str] = []
        l1: list[str] = []
        seq = 0
        try:
            lines = path.read_text().splitlines()
        except OSError as exc:
            raise RecoveryError(f"cannot read manifest: {exc}") from exc
        if not lines or lines[0] != _MANIFEST_HEADER:
            raise RecoveryError(f"{path}: bad manifest header")
        for line in lines[1:]:
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0] not in ("seq", "l0", "l1"):
                raise RecoveryError(f"{path}: bad manifest line {line!r}")
            if parts[0] == "seq":
                try:
                    seq = int(parts[1])
                except ValueError:
                    raise RecoveryError(f"{path}: bad sequence {parts[1]!r}") from None
            elif parts[0] == "l0":
                l0.append(parts[1])
            else:
                l1.append(parts[1])
        for name in l0 + l1:
            if not (self.dir / name).exists():
                raise RecoveryError(f"{path}: manifest references missing table {name}")
        return l0, l1, seq

    def _write_manifest(self) -> None:
        l0, l1, _ = self._tables
        lines = [_MANIFEST_HEADER, f"seq {self._seq}"]
        lines += [f"l0 {os.path.basename(t.path)}" for t in l0]
        lines += [f"l1 {os.path.basename(t.path)}" for t in l1]
        tmp = self.dir / (MANIFEST_NAME + ".tmp")
        tmp.write_text("\n".join(lines) + "\n")
        os.replace(tmp, self.dir / MANIFEST_NAME)

    def _install_tables(self, l0: tuple[SSTable, ...], l1: tuple[SSTable, ...]) -> None:
        self._tables = (l0, l1, tuple(t.first_key for t in l1))

    def _open_fresh_wal(self) -> None:
        path = self.dir / f"wal-{self._seq:06d}.log"
        self._seq += 1
        self._wal = wal_mod.WalWriter(path)

    def close(self) -> None:
        """Graceful shutdown: flush pending writes and release files."""
        if self._closed:
            return
        with self._writer_lock:
            self.flush()
            self._closed = True
            self._wal.close()
            l0, l1, _ = self._tables
            for t in l0 + l1:
                t.close()

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _check_open(self) -> None:
        if self._closed:
            raise StoreError("store is closed")

    # -- write path --------------------------------------------------------

    def _memtable_insert(self, key: bytes, value: bytes | _Tombstone) -> None:
        old = self._memtable.get(key)
        new_size = len(key) + (1 if value is TOMBSTONE else len(value))
        if old is not None:
            self._memtable_raw -= len(key) + (1 if old is TOMBSTONE else len(old))
        self._memtable[key] = value
        self._memtable_raw += new_size

    def _check_capacity(self, extra_raw: int) -> None:
        cap = self.config.capacity_m
        if cap is None:
            return
        raw, comp = self._table_totals()
        est_ratio = comp / raw if raw > 0 else 1.0
        projected = comp + est_ratio * (self._memtable_raw + extra_raw)
        if projected > cap:
            raise CapacityError(
                f"projected compressed size {projected:.0f} exceeds capacity {cap}"
            )

    def _table_totals(self) -> tuple[int, int]:
        l0, l1, _ = self._tables
        raw = sum(t.raw_bytes_total for t in l0 + l1)
        comp = sum(t.compressed_bytes_total for t in l0 + l1)
        return raw, comp

    def put(self, key: PpcKey, value: bytes) -> None:
        self.put_encoded(key.encoded(), value)

    def put_encoded(self, key: bytes, value: bytes) -> None:
        """Bulk-load path for callers that already hold encoded keys."""
        with self._writer_lock:
            self._check_open()
            self._check_capacity(len(key) + len(value))
            self._wal.append(wal_mod.OP_PUT, key, value)
            self._memtable_insert(key, value)
            self._maybe_flush()

    def delete(self, key: PpcKey) -> None:
        self.delete_encoded(key.encoded())

    def delete_encoded(self, key: bytes) -> None:
        with self._writer_lock:
            self._check_open()
            self._check_capacity(len(key) + 1)
            self._wal.append(wal_mod.OP_DELETE, key)
            self._memtable_insert(key, TOMBSTONE)
            self._maybe_flush()

    def _maybe_flush(self) -> None:
        if (
            self._memtable_raw >= self.config.write_buffer_bytes
            or self._wal.size >= self.config.max_wal_bytes
        ):
            self.flush()

    def flush(self) -> None:
        """Write the memtable as a new L0 table and retire the WAL."""
        with self._writer_lock:
            self._check_open()
            if not self._memtable:
                return
            entries = ((k, _wrap(v)) for k, v in sorted(self._memtable.items()))
            table = self._build_new_table(entries)
            l0, l1, _ = self._tables
            self._install_tables((table,) + l0, l1)
            self._write_manifest()
            self._memtable = {}
            self._memtable_raw = 0
            old_wal = self._wal
            old_wal.close()
            retired = self._replayed_wals + [Path(old_wal.path)]
            self._replayed_wals = []
            self._open_fresh_wal()
            for path in retired:
                try:
                    os.unlink(path)
                except OSError:
                    pass

    def _build_new_table(self, entries: Iterable[tuple[bytes, bytes]]) -> SSTable:
        path = self.dir / f"tbl-{self._seq:06d}.ppcs"
        self._seq += 1
        build_table(
            path,
            entries,
            target_block_size=self.config.target_block_size,
            codec=self.config.codec,
            bits_per_key=self.config.bits_per_key,
            compress_threads=self.config.compaction_threads,
        )
        return SSTable(path, self.config.mmap_reads)

    def compact(self) -> None:
        """Merge L0 into L1: newest version wins, tombstones drop out."""
        with self._writer_lock:
            self._check_open()
            l0, l1, _ = self._tables
            if not l0:
                return
            inputs = list(l0) + list(l1)
            cut = self.config.write_buffer_bytes

            new_tables: list[SSTable] = []
            chunk: list[tuple[bytes, bytes]] = []
            chunk_raw = 0
            try:
                for key, wrapped in _newest_wins(inputs):
                    if wrapped[:1] == _TOMB:
                        continue
                    chunk.append((key, wrapped))
                    chunk_raw += len(key) + len(wrapped)
                    if chunk_raw >= cut:
                        new_tables.append(self._build_new_table(iter(chunk)))
                        chunk, chunk_raw = [], 0
                if chunk:
                    new_tables.append(self._build_new_table(iter(chunk)))
            except BaseException:
                for t in new_tables:
                    t.close()
                    try:
                        os.unlink(t.path)
                    except OSError:
                        pass
                raise

            self._install_tables((), tuple(new_tables))
            self._write_manifest()
            # Old table objects stay open until readers drop them; the files
            # can be unlinked immediately (POSIX keeps data reachable by fd).
            for t in inputs:
                try:
                    os.unlink(t.path)
                except OSError:
                    pass

    # -- read path ---------------------------------------------------------

    def get(self, key: PpcKey) -> bytes | None:
        return self.get_encoded(key.encoded())

    def get_encoded(self, key: bytes) -> bytes | None:
        value = self._memtable.get(key)
        if value is not None:
            return None if value is TOMBSTONE else value
        l0, l1, l1_firsts = self._tables
        for table in l0:
            wrapped = table.get(key)
            if wrapped is not None:
                return _unwrap(wrapped)
        idx = bisect_right(l1_firsts, key) - 1
        if idx >= 0 and l1[idx].covers(key):
            wrapped = l1[idx].get(key)
            if wrapped is not None:
                return _unwrap(wrapped)
        return None

    def multi_get(self, keys: list[PpcKey]) -> list[bytes | None]:
        return self.multi_get_encoded([k.encoded() for k in keys])

    def multi_get_encoded(self, keys: list[bytes]) -> list[bytes | None]:
        """Positionally aligned gets; distinct keys are fetched once, in
        sorted order, sharing decompressed blocks within the call."""
        memtable = self._memtable
        l0, l1, l1_firsts = self._tables
        caches: dict[int, dict] = {}
        results: dict[bytes, bytes | None] = {}
        completed = 0
        for key in sorted(set(keys)):
            try:
                results[key] = self._cached_lookup(key, memtable, l0, l1, l1_firsts, caches)
            except IntegrityError as exc:
                raise BatchAbortedError(
                    f"batch aborted after {completed} keys: {exc}", completed
                ) from exc
            completed += 1
        return [results[k] for k in keys]

    def _cached_lookup(self, key, memtable, l0, l1, l1_firsts, caches) -> bytes | None:
        value = memtable.get(key)
        if value is not None:
            return None if value is TOMBSTONE else value
        for table in l0:
            wrapped = table.get(key, caches.setdefault(id(table), {}))
            if wrapped is not None:
                return _unwrap(wrapped)
        idx = bisect_right(l1_firsts, key) - 1
        if idx >= 0 and l1[idx].covers(key):
            table = l1[idx]
            wrapped = table.get(key, caches.setdefault(id(table), {}))
            if wrapped is not None:
                return _unwrap(wrapped)
        return None

    # -- maintenance / introspection ----------------------------------------

    def live_entries(self) -> Iterator[tuple[bytes, bytes]]:
        """Merged (encoded key, value) stream of live data, key-ascending.

        Takes the writer lock briefly to snapshot the memtable; intended for
        read-only phases (verification, workload universe construction).
        """
        with self._writer_lock:
            mem_items = sorted(self._memtable.items())
            l0, l1, _ = self._tables

        streams: list[Iterator[tuple[bytes, int, bytes]]] = []
        if mem_items:
            streams.append((k, 0, _wrap(v)) for k, v in mem_items)
        streams += [
            _tagged_scan(t, prio)
            for prio, t in enumerate(list(l0) + list(l1), start=1)
        ]
        prev = None
        for key, _prio, wrapped in heapq.merge(*streams):
            if key == prev:
                continue
            prev = key
            if wrapped[:1] != _TOMB:
                yield key, wrapped[1:]

    def live_keys(self) -> Iterator[bytes]:
        for key, _ in self.live_entries():
            yield key

    def stats(self) -> dict:
        l0, l1, _ = self._tables
        raw, comp = self._table_totals()
        mem_live = sum(1 for v in self._memtable.values() if v is not TOMBSTONE)
        per_table = {
            os.path.basename(t.path): {
                "level": 0 if t in l0 else 1,
                "entries": t.entry_count,
                "blocks_read": t.blocks_read,
                "bytes_decompressed": t.bytes_decompressed,
            }
            for t in l0 + l1
        }
        return {
            "entry_count": mem_live + sum(t.entry_count for t in l0 + l1),
            "raw_bytes": raw,
            "compressed_bytes": comp,
            "ratio": (comp / raw) if raw > 0 else None,
            "memtable_bytes": self._memtable_raw,
            "tables": per_table,
        }

    def read_counters(self) -> tuple[int, int]:
        """(data blocks decompressed, raw bytes decompressed) across live tables."""
        l0, l1, _ = self._tables
        blocks = sum(t.blocks_read for t in l0 + l1)
        data = sum(t.bytes_decompressed for t in l0 + l1)
        return blocks, data

    def effective_codec(self) -> tuple[CodecSpec, int]:
        """Codec and target block size of the stored tables.

        Table files are self-describing, so a store reopened with a default
        config still reports the configuration it was built with; an empty
        store falls back to the open config.
        """
        l0, l1, _ = self._tables
        for table in list(l1) + list(l0):
            return table.codec, table.target_block_size
        return self.config.codec, self.config.target_block_size


def _tagged_scan(table: SSTable, prio: int) -> Iterator[tuple[bytes, int, bytes]]:
    for key, wrapped in table.scan():
        yield key, prio, wrapped


def _newest_wins(tables: list[SSTable]) -> Iterator[tuple[bytes, bytes]]:
    """Merge table scans; for duplicate keys the lowest-index table wins."""
    streams = [_tagged_scan(t, prio) for prio, t in enumerate(tables)]
    prev = None
    for key, _prio, wrapped in heapq.merge(*streams):
        if key == prev:
            continue
        prev = key
        yield key, wrapped


def open_store(config: StoreConfig) -> Engine:
    return Engine.open(config)
