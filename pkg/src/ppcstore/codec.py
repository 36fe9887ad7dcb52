"""Uniform block-compression layer over zstd, deflate, snappy and identity.

zstd and snappy are bound to the system shared libraries through ctypes
(both release the GIL during calls, which the threaded read path relies
on); deflate uses the stdlib zlib. Each algorithm carries a stable 1-byte
tag so compressed blocks are self-describing on disk.
"""

import ctypes
import ctypes.util
import enum
import threading
import zlib
from dataclasses import dataclass
from functools import lru_cache

from .errors import CodecConfigError, IntegrityError, UndefinedRatioError

ZSTD_MIN_LEVEL, ZSTD_MAX_LEVEL = 1, 22
DEFLATE_MIN_LEVEL, DEFLATE_MAX_LEVEL = 1, 9

# Guard against corrupt headers requesting absurd output buffers.
MAX_REASONABLE_RAW = 1 << 31


class Algorithm(enum.Enum):
    IDENTITY = ("identity", 0, False)
    ZSTD = ("zstd", 1, True)
    DEFLATE = ("deflate", 2, True)
    SNAPPY = ("snappy", 3, False)

    def __init__(self, label: str, tag: int, leveled: bool):
        self.label = label
        self.tag = tag
        self.leveled = leveled


_BY_TAG = {a.tag: a for a in Algorithm}
_BY_LABEL = {a.label: a for a in Algorithm}


@dataclass(frozen=True, slots=True)
class CodecSpec:
    """One point in the compressor/level trade-off space."""

    algorithm: Algorithm
    level: int = 0

    def __post_init__(self):
        a, lvl = self.algorithm, self.level
        if a is Algorithm.ZSTD and not ZSTD_MIN_LEVEL <= lvl <= ZSTD_MAX_LEVEL:
            raise CodecConfigError(f"zstd level {lvl} outside {ZSTD_MIN_LEVEL}..{ZSTD_MAX_LEVEL}")
        if a is Algorithm.DEFLATE and not DEFLATE_MIN_LEVEL <= lvl <= DEFLATE_MAX_LEVEL:
            raise CodecConfigError(f"deflate level {lvl} outside {DEFLATE_MIN_LEVEL}..{DEFLATE_MAX_LEVEL}")
        if not a.leveled and lvl != 0:
            raise CodecConfigError(f"{a.label} does not take a level")

    def __str__(self) -> str:
        return f"{self.algorithm.label}:{self.level}" if self.algorithm.leveled else self.algorithm.label

    @classmethod
    def parse(cls, text: str) -> "CodecSpec":
        """Parse the CLI/config form: 'identity', 'snappy', 'zstd:<n>', 'deflate:<n>'."""
        name, _, level_text = text.strip().partition(":")
        algo = _BY_LABEL.get(name.lower())
        if algo is None:
            raise CodecConfigError(f"unknown algorithm {name!r}")
        if not algo.leveled:
            if level_text:
                raise CodecConfigError(f"{algo.label} does not take a level")
            return cls(algo)
        if not level_text:
            raise CodecConfigError(f"{algo.label} requires a level, e.g. '{algo.label}:3'")
        try:
            level = int(level_text)
        except ValueError:
            raise CodecConfigError(f"bad level {level_text!r}") from None
        return cls(algo, level)


# zstd.h stable public enum values
_ZSTD_C_COMPRESSION_LEVEL = 100
_ZSTD_C_CHECKSUM_FLAG = 201


@lru_cache(maxsize=None)
def _zstd():
    try:
        lib = ctypes.CDLL(ctypes.util.find_library("zstd") or "libzstd.so.1")
    except OSError as exc:
        raise CodecConfigError(f"libzstd not available: {exc}") from exc
    lib.ZSTD_compressBound.restype = ctypes.c_size_t
    lib.ZSTD_compressBound.argtypes = [ctypes.c_size_t]
    lib.ZSTD_createCCtx.restype = ctypes.c_void_p
    lib.ZSTD_createCCtx.argtypes = []
    lib.ZSTD_CCtx_setParameter.restype = ctypes.c_size_t
    lib.ZSTD_CCtx_setParameter.argtypes = [ctypes.c_void_p, ctypes.c_int, ctypes.c_int]
    lib.ZSTD_compress2.restype = ctypes.c_size_t
    lib.ZSTD_compress2.argtypes = [
        ctypes.c_void_p, ctypes.c_void_p, ctypes.c_size_t, ctypes.c_char_p, ctypes.c_size_t,
    ]
    lib.ZSTD_decompress.restype = ctypes.c_size_t
    lib.ZSTD_decompress.argtypes = [
        ctypes.c_void_p, ctypes.c_size_t, ctypes.c_char_p, ctypes.c_size_t,
    ]
    lib.ZSTD_isError.restype = ctypes.c_uint
    lib.ZSTD_isError.argtypes = [ctypes.c_size_t]
    lib.ZSTD_getFrameContentSize.restype = ctypes.c_ulonglong
    lib.ZSTD_getFrameContentSize.argtypes = [ctypes.c_char_p, ctypes.c_size_t]
    return lib


_zstd_tls = threading.local()


def _zstd_cctx(lib):
    """Per-thread compression context; params set per call."""
    cctx = getattr(_zstd_tls, "cctx", None)
    if cctx is None:
        cctx = lib.ZSTD_createCCtx()
        if not cctx:
            raise CodecConfigError("ZSTD_createCCtx failed")
        _zstd_tls.cctx = cctx
    return cctx


@lru_cache(maxsize=None)
def _snappy():
    try:
        lib = ctypes.CDLL(ctypes.util.find_library("snappy") or "libsnappy.so.1")
    except OSError as exc:
        raise CodecConfigError(f"libsnappy not available: {exc}") from exc
    lib.snappy_max_compressed_length.restype = ctypes.c_size_t
    lib.snappy_max_compressed_length.argtypes = [ctypes.c_size_t]
    lib.snappy_compress.restype = ctypes.c_int
    lib.snappy_compress.argtypes = [
        ctypes.c_char_p, ctypes.c_size_t, ctypes.c_void_p, ctypes.POINTER(ctypes.c_size_t),
    ]
    lib.snappy_uncompress.restype = ctypes.c_int
    lib.snappy_uncompress.argtypes = [
        ctypes.c_char_p, ctypes.c_size_t, ctypes.c_void_p, ctypes.POINTER(ctypes.c_size_t),
    ]
    lib.snappy_uncompressed_length.restype = ctypes.c_int
    lib.snappy_uncompressed_length.argtypes = [
        ctypes.c_char_p, ctypes.c_size_t, ctypes.POINTER(ctypes.c_size_t),
    ]
    return lib


def compress(raw: bytes, spec: CodecSpec) -> bytes:
    """Compress arbitrary bytes; only configuration problems can fail."""
    algo = spec.algorithm
    if algo is Algorithm.IDENTITY:
        return bytes(raw)
    if algo is Algorithm.DEFLATE:
        return zlib.compress(raw, spec.level)
    if algo is Algorithm.ZSTD:
        lib = _zstd()
        cctx = _zstd_cctx(lib)
        lib.ZSTD_CCtx_setParameter(cctx, _ZSTD_C_COMPRESSION_LEVEL, spec.level)
        # frame checksum so single-byte corruption is always detectable
        lib.ZSTD_CCtx_setParameter(cctx, _ZSTD_C_CHECKSUM_FLAG, 1)
        bound = lib.ZSTD_compressBound(len(raw))
        dst = ctypes.create_string_buffer(bound)
        written = lib.ZSTD_compress2(cctx, dst, bound, raw, len(raw))
        if lib.ZSTD_isError(written):
            raise CodecConfigError(f"zstd compression failed (level {spec.level})")
        return dst.raw[:written]
    if algo is Algorithm.SNAPPY:
        lib = _snappy()
        bound = lib.snappy_max_compressed_length(len(raw))
        dst = ctypes.create_string_buffer(max(bound, 1))
        out_len = ctypes.c_size_t(max(bound, 1))
        rc = lib.snappy_compress(raw, len(raw), dst, ctypes.byref(out_len))
        if rc != 0:
            raise CodecConfigError(f"snappy compression failed (status {rc})")
        return dst.raw[: out_len.value]
    raise CodecConfigError(f"unsupported algorithm {algo}")


def decompress(compressed: bytes, spec: CodecSpec, expected_size: int | None = None) -> bytes:
    """Recover the exact original bytes; corrupt input raises IntegrityError.

    expected_size, when the caller knows it (block headers record the raw
    length), both sizes the output buffer and is verified against the result.
    """
    algo = spec.algorithm
    if expected_size is not None and not 0 <= expected_size <= MAX_REASONABLE_RAW:
        raise IntegrityError(f"implausible raw size {expected_size}")

    if algo is Algorithm.IDENTITY:
        out = bytes(compressed)
    elif algo is Algorithm.DEFLATE:
        try:
            out = zlib.decompress(compressed)
        except zlib.error as exc:
            raise IntegrityError(f"deflate payload corrupt: {exc}") from exc
    elif algo is Algorithm.ZSTD:
        lib = _zstd()
        size = expected_size
        if size is None:
            raw = lib.ZSTD_getFrameContentSize(compressed, len(compressed))
            # 2^64-1 means unknown, 2^64-2 means not a zstd frame.
            if raw >= 2**64 - 2 or raw > MAX_REASONABLE_RAW:
                raise IntegrityError("zstd frame header corrupt or size unknown")
            size = raw
        dst = ctypes.create_string_buffer(max(size, 1))
        written = lib.ZSTD_decompress(dst, size, compressed, len(compressed))
        if lib.ZSTD_isError(written):
            raise IntegrityError("zstd payload corrupt")
        out = dst.raw[:written]
    elif algo is Algorithm.SNAPPY:
        lib = _snappy()
        size = expected_size
        if size is None:
            n = ctypes.c_size_t(0)
            rc = lib.snappy_uncompressed_length(compressed, len(compressed), ctypes.byref(n))
            if rc != 0 or n.value > MAX_REASONABLE_RAW:
                raise IntegrityError("snappy length header corrupt")
            size = n.value
        dst = ctypes.create_string_buffer(max(size, 1))
        out_len = ctypes.c_size_t(max(size, 1))
        rc = lib.snappy_uncompress(compressed, len(compressed), dst, ctypes.byref(out_len))
        if rc != 0:
            raise IntegrityError(f"snappy payload corrupt (status {rc})")
        out = dst.raw[: out_len.value]
    else:
        raise CodecConfigError(f"unsupported algorithm {algo}")

    if expected_size is not None and len(out) != expected_size:
        raise IntegrityError(f"decompressed to {len(out)} bytes, expected {expected_size}")
    return out


def compression_ratio(compressed_size: int, raw_size: int) -> float:
    """compressed/raw; lower is better. Undefined for zero raw bytes."""
    if raw_size <= 0:
        raise UndefinedRatioError("compression ratio undefined for raw_size = 0")
    return compressed_size / raw_size


def algorithm_from_tag(tag: int) -> Algorithm:
    try:
        return _BY_TAG[tag]
    except KeyError:
        raise IntegrityError(f"unknown algorithm tag {tag}") from None


def spec_from_tag(tag: int, level: int) -> CodecSpec:
    return CodecSpec(algorithm_from_tag(tag), level)
