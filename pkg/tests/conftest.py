"""Shared fixtures: small synthetic corpora and store factories."""

import pytest

from ppcstore.codec import CodecSpec
from ppcstore.engine import KIB, MIB, StoreConfig, open_store
from ppcstore.synth import SynthSpec, generate_corpus, generate_records


def small_synth_spec(files=300, seed=7, **overrides) -> SynthSpec:
    defaults = dict(
        files=files,
        seed=seed,
        min_file_bytes=800,
        max_file_bytes=6_000,
    )
    defaults.update(overrides)
    return SynthSpec(**defaults)


@pytest.fixture
def small_records():
    return list(generate_records(small_synth_spec()))


@pytest.fixture
def small_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    generate_corpus(path, small_synth_spec())
    return path


def make_store_config(data_dir, **overrides) -> StoreConfig:
    defaults = dict(
        data_dir=data_dir,
        codec=CodecSpec.parse("zstd:3"),
        target_block_size=8 * KIB,
        write_buffer_bytes=4 * MIB,
        compaction_threads=2,
    )
    defaults.update(overrides)
    return StoreConfig(**defaults)


@pytest.fixture
def store(tmp_path):
    engine = open_store(make_store_config(tmp_path / "store"))
    yield engine
    if not engine._closed:
        engine.close()
