"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

Scale: a generated desk corpus of 100k synthetic source-like files,
~1 GiB of raw content, with controlled cross-file redundancy. Criteria
that compare timings are directional reproductions of the published
trends, not absolute numbers. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import math
import time
from collections import Counter
from pathlib import Path

import pytest

from ppcstore import codec as codec_mod
from ppcstore.bench import (
    BenchPlan,
    build_store,
    corpus_key_value_pairs,
    query_store,
    run_plan,
    verify_store,
)
from ppcstore.codec import CodecSpec
from ppcstore.corpus import write_corpus
from ppcstore.engine import KIB, MIB, StoreConfig, open_store
from ppcstore.extsort import sorted_pairs
from ppcstore.keys import PpcKey
from ppcstore.metrics import (
    FakeProbe,
    NullProbe,
    ReportRow,
    measure,
    pareto_frontier,
    read_report_csv,
    write_report_csv,
)
from ppcstore.synth import SynthSpec, generate_corpus, generate_records
from ppcstore.tiercache import AdmissionPolicy, SimulatedBackend, TieredStore
from ppcstore.workload import (
    Distribution,
    WorkloadSpec,
    sample,
    sample_power_law,
    save_workload,
)

CORPUS_FILES = 100_000
CORPUS_SEED = 20_260_808
WRITE_BUFFER = 192 * MIB
CPU_COUNT = __import__("os").cpu_count() or 1

# the four adopted large-scale configurations
FOUR_CONFIGS = [
    ("zstd:3", 64),
    ("zstd:6", 4),
    ("zstd:6", 128),
    ("zstd:9", 128),
]

collected_rows: list[ReportRow] = []


def criterion(num: int, description: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f" [{detail}]" if detail else ""
    print(f"\nACCEPTANCE {num:2d} {status}: {description}{suffix}", flush=True)
    assert passed, f"criterion {num} failed: {description}{suffix}"


def store_config(base: Path, codec: str, block_kib: int) -> StoreConfig:
    return StoreConfig(
        data_dir=base / f"store-{codec.replace(':', '')}-{block_kib}k",
        codec=CodecSpec.parse(codec),
        target_block_size=block_kib * KIB,
        write_buffer_bytes=WRITE_BUFFER,
        compaction_threads=2,
        bits_per_key=10.0,
    )


@pytest.fixture(scope="module")
def base(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def corpus(base: Path) -> dict:
    path = base / "corpus.jsonl"
    spec = SynthSpec(files=CORPUS_FILES, seed=CORPUS_SEED)
    records = generate_corpus(path, spec)
    raw_bytes = sum(len(v) for _, v in corpus_key_value_pairs(path))
    assert records >= 100_000 and raw_bytes >= 1 << 30
    return {"path": path, "records": records, "raw_bytes": raw_bytes}


def build_with_crash_reopen(corpus_path, config: StoreConfig, tmp_dir) -> ReportRow:
    """Bulk build that abandons the engine mid-ingest and recovers via WAL."""
    t0 = time.perf_counter()
    engine = open_store(config)
    inserted = 0
    crash_at = CORPUS_FILES // 2
    for i, (key, value) in enumerate(
        sorted_pairs(corpus_key_value_pairs(corpus_path), tmp_dir=str(tmp_dir))
    ):
        if i == crash_at:
            del engine  # simulated crash: no close, no flush
            engine = open_store(config)  # WAL replay restores acknowledged puts
        engine.put_encoded(key, value)
        inserted += len(value)
    engine.flush()
    engine.compact()
    stats = engine.stats()
    engine.close()
    elapsed = time.perf_counter() - t0
    return ReportRow(
        phase="build",
        codec=config.codec.algorithm.label,
        level=config.codec.level,
        block_kib=config.target_block_size / KIB,
        threads=config.compaction_threads,
        distribution="",
        batch=1,
        runs=1,
        bytes=inserted,
        seconds=elapsed,
        joules=None,
        mib_per_s=inserted / (1 << 20) / elapsed,
        mb_per_j=None,
        ratio=stats["ratio"],
    )


@pytest.fixture(scope="module")
def stores(base: Path, corpus: dict) -> dict:
    """The four builds plus their verification results and wall times."""
    out = {}
    t_start = time.perf_counter()
    for i, (codec, block_kib) in enumerate(FOUR_CONFIGS):
        config = store_config(base, codec, block_kib)
        if i == 0:
            row = build_with_crash_reopen(corpus["path"], config, base)
        else:
            row, _ = build_store(corpus["path"], config, tmp_dir=str(base))
        collected_rows.append(row)
        engine = open_store(config)
        report = verify_store(engine, corpus["path"])
        engine.close()
        out[(codec, block_kib)] = {
            "config": config,
            "row": row,
            "verify": report,
        }
    out["elapsed"] = time.perf_counter() - t_start
    return out


def test_criterion_1_round_trip_integrity(corpus, stores):
    details = []
    all_ok = True
    for codec, block_kib in FOUR_CONFIGS:
        report = stores[(codec, block_kib)]["verify"]
        all_ok &= report.ok and report.checked == corpus["records"]
        details.append(f"{codec}/{block_kib}k:{report.checked}ok" if report.ok else report.summary())
    elapsed = stores["elapsed"]
    within_time = elapsed <= 600
    criterion(
        1,
        "100% byte-equality under all four configurations incl. crash-reopen",
        all_ok and within_time,
        f"{'; '.join(details)}; builds+verify {elapsed:.0f}s (limit 600)",
    )


def test_criterion_2_compression_ordering(stores):
    r = {cfg: stores[cfg]["row"].ratio for cfg in FOUR_CONFIGS}
    ordered = (
        r[("zstd:9", 128)] <= r[("zstd:6", 128)] <= r[("zstd:3", 64)] <= r[("zstd:6", 4)]
    )
    criterion(
        2,
        "ratio(zstd-9/128K) <= ratio(zstd-6/128K) <= ratio(zstd-3/64K) <= ratio(zstd-6/4K)",
        ordered,
        " ".join(f"{c}/{b}k={r[(c, b)]:.4f}" for c, b in FOUR_CONFIGS),
    )


@pytest.fixture(scope="module")
def zstd6_sweep(base: Path, corpus: dict, stores: dict) -> dict:
    """zstd-6 stores across block sizes {4,16,64,128} KiB; 4 and 128 reused."""
    sweep = {
        4: stores[("zstd:6", 4)]["config"],
        128: stores[("zstd:6", 128)]["config"],
    }
    for block_kib in (16, 64):
        config = store_config(base, "zstd:6", block_kib)
        row, _ = build_store(corpus["path"], config, tmp_dir=str(base))
        collected_rows.append(row)
        sweep[block_kib] = config
    return sweep


def test_criterion_3_block_size_tradeoff(zstd6_sweep):
    ratios = {}
    bytes_per_get = {}
    queries = 1_500
    for block_kib in (4, 16, 64, 128):
        with open_store(zstd6_sweep[block_kib]) as engine:
            ratios[block_kib] = engine.stats()["ratio"]
            universe = list(engine.live_keys())
            spec = WorkloadSpec(
                distribution=Distribution.UNIFORM_DISTINCT,
                num_queries=queries,
                seed=33,
                universe=universe,
            )
            keys = sample(spec)
            _, before = engine.read_counters()
            for key in keys:
                assert engine.get_encoded(key) is not None
            _, after = engine.read_counters()
            bytes_per_get[block_kib] = (after - before) / queries
    ratio_monotone = ratios[128] <= ratios[64] <= ratios[16] <= ratios[4]
    reads_monotone = (
        bytes_per_get[4] <= bytes_per_get[16] <= bytes_per_get[64] <= bytes_per_get[128]
    )
    criterion(
        3,
        "zstd-6 blocks {4,16,64,128}K: ratio falls, decompressed bytes/get rises",
        ratio_monotone and reads_monotone,
        "ratios "
        + " ".join(f"{b}k={ratios[b]:.4f}" for b in (4, 16, 64, 128))
        + "; bytes/get "
        + " ".join(f"{b}k={bytes_per_get[b]:.0f}" for b in (4, 16, 64, 128)),
    )


def test_criterion_4_ppc_premise(base, corpus):
    """Block-compressed size in key order vs corpus (id-hash) order."""
    spec = CodecSpec.parse("zstd:3")
    block = 64 * KIB

    def packed_size(pair_stream) -> int:
        total = 0
        cur = bytearray()
        for _, value in pair_stream:
            cur += value
            if len(cur) >= block:
                total += len(codec_mod.compress(bytes(cur), spec))
                cur.clear()
        if cur:
            total += len(codec_mod.compress(bytes(cur), spec))
        return total

    # corpus file order is content-id hash order: uncorrelated with keys
    file_order_keys = [k for k, _ in corpus_key_value_pairs(corpus["path"])]
    assert file_order_keys != sorted(file_order_keys)

    random_order_size = packed_size(corpus_key_value_pairs(corpus["path"]))
    ppc_order_size = packed_size(
        sorted_pairs(corpus_key_value_pairs(corpus["path"]), tmp_dir=str(base))
    )
    criterion(
        4,
        "key-grouped blocks compress to <= 0.9x of randomly ordered blocks",
        ppc_order_size <= 0.9 * random_order_size,
        f"grouped={ppc_order_size / 2**20:.1f}MiB random={random_order_size / 2**20:.1f}MiB "
        f"factor={ppc_order_size / random_order_size:.3f}",
    )


def test_criterion_5_bloom_efficiency(stores):
    config = stores[("zstd:3", 64)]["config"]
    with open_store(config) as engine:
        # misses fall inside live key ranges so only the blooms can skip them
        zero_block = 0
        probes = 10_000
        for i in range(probes):
            key = PpcKey(b"py", b"parser_%06d" % (i % 50_000), b"swh:1:cnt:miss%06d" % i)
            before = engine.read_counters()[0]
            assert engine.get(key) is None
            if engine.read_counters()[0] == before:
                zero_block += 1
        zero_fraction = zero_block / probes

        false_negatives = 0
        checked = 0
        l0, l1, _ = engine._tables
        for table in list(l0) + list(l1):
            for key, _ in table.scan():
                checked += 1
                if not table.bloom.might_contain(key):
                    false_negatives += 1
    criterion(
        5,
        "10k misses read zero data blocks >= 98%; zero bloom false negatives",
        zero_fraction >= 0.98 and false_negatives == 0,
        f"zero-block {zero_fraction:.2%}; {false_negatives} false negatives over {checked} keys",
    )


@pytest.fixture(scope="module")
def thread_sweep(stores) -> dict:
    """Uniform single-get throughput by thread count on the zstd-6/128K store."""
    config = stores[("zstd:6", 128)]["config"]
    out = {}
    with open_store(config) as engine:
        universe = list(engine.live_keys())
        p_high = min(16, CPU_COUNT)
        for p in sorted({1, 2, 8, p_high}):
            row = query_store(
                engine,
                distribution=Distribution.UNIFORM_DISTINCT,
                num_queries=min(30_000, len(universe)),
                threads=p,
                seed=41,
                universe=universe,
            )
            collected_rows.append(row)
            out[p] = row.mib_per_s
    out["p_high"] = p_high
    return out


def test_criterion_6_thread_scaling(thread_sweep):
    thr = thread_sweep
    p_high = thr["p_high"]
    clause1 = thr[8] >= 3 * thr[1]
    if p_high == 2:
        # min(16, cores) coincides with the p=2 baseline: the comparison is
        # between identical configurations, satisfied by identity
        clause2 = True
        clause2_detail = f"p_high=min(16,{CPU_COUNT})=2 equals baseline (identity)"
    else:
        clause2 = thr[p_high] >= thr[2]
        clause2_detail = f"p{p_high}={thr[p_high]:.0f} vs p2={thr[2]:.0f} MiB/s"
    criterion(
        6,
        "uniform single-get: p=8 >= 3x p=1 and p=min(16,cores) >= p=2",
        clause1 and clause2,
        f"p1={thr[1]:.0f} p2={thr[2]:.0f} p8={thr[8]:.0f} MiB/s "
        f"(p8/p1={thr[8] / thr[1]:.2f}x, need 3.0x, host has {CPU_COUNT} cores); {clause2_detail}",
    )


def test_criterion_7_power_law_locality(stores):
    config = stores[("zstd:6", 128)]["config"]
    with open_store(config) as engine:
        universe = list(engine.live_keys())
        rows = {}
        for dist in (Distribution.UNIFORM_DISTINCT, Distribution.POWER_LAW):
            rows[dist] = query_store(
                engine,
                distribution=dist,
                num_queries=min(30_000, len(universe)),
                batch_size=100,
                threads=4,
                seed=43,
                universe=universe,
            )
            collected_rows.append(rows[dist])
    power = rows[Distribution.POWER_LAW].mib_per_s
    uniform = rows[Distribution.UNIFORM_DISTINCT].mib_per_s
    criterion(
        7,
        "power-law multi-get throughput >= 2x uniform multi-get at p=4",
        power >= 2 * uniform,
        f"power-law {power:.0f} MiB/s vs uniform {uniform:.0f} MiB/s ({power / uniform:.2f}x)",
    )


def test_criterion_8_workload_correctness(base):
    n, draws = 100, 100_000
    universe = [b"u-%06d" % i for i in range(n)]
    spec = WorkloadSpec(
        distribution=Distribution.POWER_LAW, num_queries=draws, seed=51, universe=universe
    )
    keys = sample_power_law(spec)
    normalizer = sum(i ** -1.5 for i in range(1, n + 1))  # direct-sum oracle
    expected = 1.0 / normalizer
    top = Counter(keys).most_common(1)[0][1] / draws
    within = abs(top - expected) <= 0.01

    paths = [base / "wl-a.txt", base / "wl-b.txt"]
    for path in paths:
        s = WorkloadSpec(
            distribution=Distribution.POWER_LAW, num_queries=5_000, seed=52, universe=universe
        )
        save_workload(path, s, sample(s))
    identical = paths[0].read_bytes() == paths[1].read_bytes()
    criterion(
        8,
        "power-law rank-1 frequency within ±0.01 of i^-1.5 law; seeded files byte-identical",
        within and identical,
        f"rank-1 {top:.4f} vs {expected:.4f}; files identical={identical}",
    )


def test_criterion_9_pareto_correctness(base):
    # the published three-row build example: two non-dominated rows
    def row(ratio, thr):
        return {"ratio": ratio, "mib_per_s": thr}

    example = [row(0.1905, 446.67), row(0.1549, 157.75), row(0.1985, 190.28)]
    objectives = [("ratio", "min"), ("mib_per_s", "max")]
    example_front = pareto_frontier(example, objectives)
    example_ok = example_front == example[:2]

    # brute-force dominance audit over every row this suite emitted
    rows = [r for r in collected_rows if r.ratio is not None]
    assert len(rows) <= 1000
    csv_path = base / "all_rows.csv"
    write_report_csv(csv_path, rows)
    reloaded = read_report_csv(csv_path)
    frontier = pareto_frontier(reloaded, objectives)
    retained = set(map(id, frontier))

    def dominates(a, b):
        return (
            a.ratio <= b.ratio
            and a.mib_per_s >= b.mib_per_s
            and (a.ratio < b.ratio or a.mib_per_s > b.mib_per_s)
        )

    audit_ok = True
    for candidate in reloaded:
        if id(candidate) in retained:
            audit_ok &= not any(dominates(other, candidate) for other in reloaded)
        else:
            audit_ok &= any(dominates(keeper, candidate) for keeper in frontier)
    criterion(
        9,
        "frontier matches brute-force dominance on all emitted rows; 3-row example exact",
        example_ok and audit_ok,
        f"{len(reloaded)} rows audited, {len(frontier)} on frontier",
    )


def test_criterion_10_energy_optionality(base):
    corpus_path = base / "mini.jsonl"
    write_corpus(
        corpus_path,
        generate_records(SynthSpec(files=800, seed=77, min_file_bytes=1_000, max_file_bytes=5_000)),
    )
    plan = BenchPlan(
        configs=[
            StoreConfig(
                data_dir=base / "mini-z3",
                codec=CodecSpec.parse("zstd:3"),
                target_block_size=16 * KIB,
                write_buffer_bytes=4 * MIB,
                compaction_threads=2,
            ),
            StoreConfig(
                data_dir=base / "mini-z6",
                codec=CodecSpec.parse("zstd:6"),
                target_block_size=64 * KIB,
                write_buffer_bytes=4 * MIB,
                compaction_threads=2,
            ),
        ],
        thread_counts=[1, 2],
        workloads=[
            {"distribution": Distribution.UNIFORM_DISTINCT, "num_queries": 300},
            {"distribution": Distribution.POWER_LAW, "num_queries": 300, "batch_size": 100},
        ],
        repeats=2,
    )
    rows = run_plan(plan, corpus_path, probe=NullProbe(), tmp_dir=str(base))
    matrix_complete = len(rows) == 2 * (1 + 2 * 2)
    energy_empty = all(r.joules is None and r.mb_per_j is None for r in rows)
    csv_path = base / "null_energy.csv"
    write_report_csv(csv_path, rows)
    csv_empty = all(
        line.split(",")[10] == "" for line in csv_path.read_text().splitlines()[1:]
    )

    # a counter wrap between the probe's two reads must surface as the
    # exact injected consumption
    wrap = 2**32
    injected_uj = 7_000_000
    probe = FakeProbe([wrap - 2_000_000, (wrap - 2_000_000 + injected_uj) % wrap], wrap)
    m = measure(lambda: 1, probe=probe, repeats=1)
    wrap_ok = m.joules is not None and m.joules > 0 and math.isclose(m.joules, injected_uj * 1e-6)
    criterion(
        10,
        "full matrix completes with null probe (empty energy); fake wrap yields exact delta",
        matrix_complete and energy_empty and csv_empty and wrap_ok,
        f"{len(rows)} rows, joules={m.joules}J vs injected {injected_uj * 1e-6}J",
    )


def test_criterion_11_tier_behavior(base):
    corpus_path = base / "tier.jsonl"
    records = list(
        generate_records(SynthSpec(files=400, seed=88, min_file_bytes=500, max_file_bytes=2_000))
    )
    write_corpus(corpus_path, records)
    with open(corpus_path, "rb") as f:
        backend = SimulatedBackend.from_corpus(f)

    config = StoreConfig(
        data_dir=base / "tier-store",
        codec=CodecSpec.parse("zstd:3"),
        target_block_size=16 * KIB,
        write_buffer_bytes=1 * MIB,
        capacity_m=64 * MIB,
    )
    ok = True
    with open_store(config) as engine:
        tier = TieredStore(engine, backend, AdmissionPolicy.ADMIT_ALWAYS)
        keys = [k for k, _ in corpus_key_value_pairs(corpus_path)]
        from ppcstore.keys import decode

        ppc_keys = [decode(k) for k in keys]
        assert backend.total_bytes() <= config.capacity_m

        # preloaded key: zero backend fetches on the hit
        engine.put(ppc_keys[0], records[0].content)
        _, source = tier.tiered_get(ppc_keys[0])
        ok &= source == "cache" and backend.fetch_calls == 0

        # first full pass: exactly one fetch per miss
        for key in ppc_keys[1:]:
            value, source = tier.tiered_get(key)
            ok &= value is not None and source == "backend"
        first_pass_fetches = backend.fetch_calls
        ok &= first_pass_fetches == len(ppc_keys) - 1

        # converged: second pass touches the backend zero times
        for key in ppc_keys:
            value, source = tier.tiered_get(key)
            ok &= value is not None and source == "cache"
        ok &= backend.fetch_calls == first_pass_fetches
    criterion(
        11,
        "zero backend fetches on hits, exactly one per miss, admit_always converges",
        ok,
        f"{first_pass_fetches} fetches for {len(ppc_keys) - 1} misses, second pass all cache",
    )


def test_supplementary_read_write_asymmetry(stores, thread_sweep):
    """Directional: bulk insertion throughput < random single-get throughput
    at the get-optimal thread count (LSM read/write asymmetry)."""
    build_thr = stores[("zstd:6", 128)]["row"].mib_per_s
    best_get_thr = max(v for k, v in thread_sweep.items() if isinstance(k, int))
    print(
        f"\nSUPPLEMENTARY read-write asymmetry: build {build_thr:.0f} MiB/s "
        f"vs best get {best_get_thr:.0f} MiB/s",
        flush=True,
    )
    assert build_thr < best_get_thr
