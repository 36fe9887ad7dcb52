"""Bloom filter: no false negatives, false-positive rate, determinism."""

from ppcstore.bloom import BloomFilter


def keyset(n: int, tag: str) -> list[bytes]:
    return [f"{tag}-key-{i:07d}".encode() for i in range(n)]


def test_zero_false_negatives_exhaustive():
    keys = keyset(20_000, "present")
    filt = BloomFilter.build(keys, bits_per_key=10)
    assert all(filt.might_contain(k) for k in keys)


def test_false_positive_rate_within_2x_of_formula():
    keys = keyset(10_000, "in")
    filt = BloomFilter.build(keys, bits_per_key=10)
    probes = keyset(20_000, "out")
    fp = sum(filt.might_contain(k) for k in probes) / len(probes)
    expected = filt.expected_fp_rate()
    assert expected / 2 <= fp <= expected * 2


def test_higher_density_lowers_fp_rate():
    keys = keyset(5_000, "in")
    probes = keyset(10_000, "out")
    sparse = BloomFilter.build(keys, bits_per_key=5)
    dense = BloomFilter.build(keys, bits_per_key=12)
    fp_sparse = sum(sparse.might_contain(k) for k in probes)
    fp_dense = sum(dense.might_contain(k) for k in probes)
    assert fp_dense < fp_sparse


def test_empty_filter_rejects_everything():
    filt = BloomFilter.build([], bits_per_key=10)
    assert not filt.might_contain(b"anything")
    assert filt.expected_fp_rate() == 0.0


def test_serialization_roundtrip():
    keys = keyset(1_000, "s")
    filt = BloomFilter.build(keys, bits_per_key=10)
    clone = BloomFilter.from_bytes(filt.to_bytes())
    assert clone.m_bits == filt.m_bits and clone.k == filt.k
    assert all(clone.might_contain(k) for k in keys)
    assert clone.to_bytes() == filt.to_bytes()


def test_constant_seed_makes_identical_filters():
    a = BloomFilter.build(keyset(500, "d"), bits_per_key=10)
    b = BloomFilter.build(keyset(500, "d"), bits_per_key=10)
    assert a.to_bytes() == b.to_bytes()
