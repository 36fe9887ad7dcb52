"""End-to-end benchmark phases: sorted bulk build, threaded retrieval,
byte-equality verification, and frontier reporting.

The build phase external-sorts the corpus by encoded key before insertion,
so similar files land adjacently regardless of input order. Retrieval runs
a pool of exactly p worker threads draining one shared query queue; every
query executes exactly once, so total returned bytes are independent of p.
"""

import logging
import os
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import extsort
from .codec import CodecSpec
from .corpus import canonical_filename, parse_record_stream
from .engine import Engine, StoreConfig, open_store
from .errors import IntegrityError
from .keys import derive_key
from .metrics import EnergyProbe, ReportRow, measure, pareto_frontier
from .workload import Distribution, WorkloadSpec, make_batches, sample

logger = logging.getLogger(__name__)

KIB = 1024


def default_thread_sweep(max_threads: int | None = None) -> list[int]:
    """1, 2, 4, ... doubling up to the hardware concurrency."""
    limit = max_threads or os.cpu_count() or 1
    sweep = []
    p = 1
    while p <= limit:
        sweep.append(p)
        p *= 2
    return sweep or [1]


@dataclass
class BenchPlan:
    """A benchmark matrix: store configurations x thread counts x workloads."""

    configs: list[StoreConfig]
    thread_counts: list[int] = field(default_factory=default_thread_sweep)
    workloads: list[dict] = field(default_factory=list)
    repeats: int = 5

    def __post_init__(self):
        if any(p < 1 for p in self.thread_counts):
            raise ValueError("thread counts must be >= 1")
        if sorted(self.thread_counts) != self.thread_counts or len(
            set(self.thread_counts)
        ) != len(self.thread_counts):
            raise ValueError("thread counts must be strictly increasing")


def default_configs(base_dir, **overrides) -> list[StoreConfig]:
    """The four adopted large-scale picks: zstd-3/64K, zstd-6/4K,
    zstd-6/128K, zstd-9/128K."""
    picks = [("zstd:3", 64), ("zstd:6", 4), ("zstd:6", 128), ("zstd:9", 128)]
    base = Path(base_dir)
    return [
        StoreConfig(
            data_dir=base / f"{spec.replace(':', '')}-{kib}k",
            codec=CodecSpec.parse(spec),
            target_block_size=kib * KIB,
            **overrides,
        )
        for spec, kib in picks
    ]


def corpus_key_value_pairs(corpus_path) -> Iterable[tuple[bytes, bytes]]:
    """Stream (encoded key, content) pairs from a JSONL corpus."""
    with open(corpus_path, "rb") as stream:
        for record in parse_record_stream(stream):
            name = canonical_filename(record.filename_candidates)
            key = derive_key(name, record.content_id)
            yield key.encoded(), record.content


def build_store(
    corpus_path,
    config: StoreConfig,
    *,
    probe: EnergyProbe | None = None,
    tmp_dir=None,
    keep_open: bool = False,
) -> tuple[ReportRow, Engine | None]:
    """Sort the corpus by key, bulk-insert into a fresh store, flush+compact.

    Returns the build report row and, when keep_open is set, the live engine
    (otherwise it is closed and None is returned).
    """
    engine_holder: list[Engine] = []

    def phase() -> int:
        engine = open_store(config)
        engine_holder.append(engine)
        inserted = 0
        for key, content in extsort.sorted_pairs(
            corpus_key_value_pairs(corpus_path), tmp_dir=tmp_dir
        ):
            engine.put_encoded(key, content)
            inserted += len(content)
        engine.flush()
        engine.compact()
        return inserted

    measurement = measure(phase, probe=probe, repeats=1)
    engine = engine_holder[-1]
    stats = engine.stats()
    if measurement.bytes_processed == 0:
        logger.warning("corpus %s contained no records; store is empty", corpus_path)
    row = ReportRow.from_measurement(
        measurement,
        phase="build",
        codec=config.codec.algorithm.label,
        level=config.codec.level,
        block_kib=config.target_block_size / KIB,
        threads=config.compaction_threads,
        ratio=stats["ratio"],
    )
    if keep_open:
        return row, engine
    engine.close()
    return row, None


class _QueryPool:
    """Exactly p threads draining one shared queue of queries."""

    def __init__(self, engine: Engine, threads: int, batched: bool):
        self.engine = engine
        self.threads = threads
        self.batched = batched

    def run(self, items: Sequence) -> int:
        work: queue.SimpleQueue = queue.SimpleQueue()
        for item in items:
            work.put(item)
        for _ in range(self.threads):
            work.put(None)

        totals = [0] * self.threads
        failure: list[BaseException] = []
        stop = threading.Event()

        def worker(slot: int) -> None:
            local = 0
            get_encoded = self.engine.get_encoded
            multi = self.engine.multi_get_encoded
            try:
                while not stop.is_set():
                    item = work.get()
                    if item is None:
                        break
                    if self.batched:
                        for value in multi(item):
                            if value is None:
                                raise IntegrityError("hit-only workload got an absent key")
                            local += len(value)
                    else:
                        value = get_encoded(item)
                        if value is None:
                            raise IntegrityError("hit-only workload got an absent key")
                        local += len(value)
            except BaseException as exc:
                failure.append(exc)
                stop.set()
            finally:
                totals[slot] = local

        workers = [
            threading.Thread(target=worker, args=(slot,), daemon=True)
            for slot in range(self.threads)
        ]
        for t in workers:
            t.start()
        for t in workers:
            t.join()
        if failure:
            raise failure[0]
        return sum(totals)


def query_store(
    engine: Engine,
    *,
    distribution: Distribution,
    num_queries: int,
    batch_size: int = 1,
    threads: int = 1,
    seed: int = 1,
    repeats: int = 1,
    probe: EnergyProbe | None = None,
    universe: Sequence[bytes] | None = None,
    ordered: bool = False,
) -> ReportRow:
    """Sample a hit-only workload from live keys and drain it with a pool."""
    if universe is None:
        universe = list(engine.live_keys())
    spec = WorkloadSpec(
        distribution=distribution,
        num_queries=num_queries,
        seed=seed,
        batch_size=batch_size,
        universe=universe,
    )
    keys = sample(spec)
    if ordered:
        keys = sorted(keys)
    items: Sequence = keys if batch_size == 1 else make_batches(keys, batch_size)
    pool = _QueryPool(engine, threads, batched=batch_size > 1)

    measurement = measure(lambda: pool.run(items), probe=probe, repeats=repeats)
    stats = engine.stats()
    codec_spec, block_size = engine.effective_codec()
    return ReportRow.from_measurement(
        measurement,
        phase="get" if batch_size == 1 else "multi_get",
        codec=codec_spec.algorithm.label,
        level=codec_spec.level,
        block_kib=block_size / KIB,
        threads=threads,
        distribution=distribution.value,
        batch=batch_size,
        ratio=stats["ratio"],
    )


@dataclass
class VerifyReport:
    checked: int = 0
    missing: list[str] = field(default_factory=list)
    mismatched: list[str] = field(default_factory=list)
    detail_cap: int = 20

    @property
    def ok(self) -> bool:
        return not self.missing and not self.mismatched

    def summary(self) -> str:
        if self.ok:
            return f"ok: {self.checked} values byte-identical"
        return (
            f"DIFF: {self.checked} checked, {len(self.missing)} missing, "
            f"{len(self.mismatched)} mismatched; first ids: "
            f"{(self.missing + self.mismatched)[: self.detail_cap]}"
        )


def verify_store(engine: Engine, corpus_path) -> VerifyReport:
    """Byte-equality audit of every corpus value against the store."""
    report = VerifyReport()
    with open(corpus_path, "rb") as stream:
        for record in parse_record_stream(stream):
            name = canonical_filename(record.filename_candidates)
            key = derive_key(name, record.content_id)
            value = engine.get(key)
            report.checked += 1
            if value is None:
                report.missing.append(record.content_id)
            elif value != record.content:
                report.mismatched.append(record.content_id)
    return report


DEFAULT_OBJECTIVES = (("ratio", "min"), ("mib_per_s", "max"))


def frontier_rows(rows: Sequence[ReportRow], objectives=DEFAULT_OBJECTIVES) -> list[ReportRow]:
    return pareto_frontier(rows, objectives)


def format_table(rows: Sequence[ReportRow]) -> str:
    """Human-readable aligned table of report rows."""
    headers = [
        "phase", "codec", "level", "block_kib", "threads", "dist", "batch",
        "mib_per_s", "mb_per_j", "ratio",
    ]
    grid = [headers]
    for r in rows:
        grid.append(
            [
                r.phase,
                r.codec,
                str(r.level),
                f"{r.block_kib:g}",
                str(r.threads),
                r.distribution or "-",
                str(r.batch),
                f"{r.mib_per_s:.2f}",
                f"{r.mb_per_j:.2f}" if r.mb_per_j is not None else "-",
                f"{r.ratio:.4f}" if r.ratio is not None else "-",
            ]
        )
    widths = [max(len(row[i]) for row in grid) for i in range(len(headers))]
    lines = [
        "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        for row in grid
    ]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def run_plan(
    plan: BenchPlan,
    corpus_path,
    *,
    probe: EnergyProbe | None = None,
    tmp_dir=None,
) -> list[ReportRow]:
    """Execute the full matrix: one build per config, then every
    (workload x thread count) cell against it."""
    rows: list[ReportRow] = []
    for config in plan.configs:
        build_row, engine = build_store(
            corpus_path, config, probe=probe, tmp_dir=tmp_dir, keep_open=True
        )
        rows.append(build_row)
        try:
            universe = list(engine.live_keys())
            for workload in plan.workloads:
                for threads in plan.thread_counts:
                    rows.append(
                        query_store(
                            engine,
                            distribution=workload["distribution"],
                            num_queries=workload["num_queries"],
                            batch_size=workload.get("batch_size", 1),
                            seed=workload.get("seed", 1),
                            threads=threads,
                            repeats=plan.repeats,
                            probe=probe,
                            universe=universe,
                        )
                    )
        finally:
            engine.close()
    return rows
