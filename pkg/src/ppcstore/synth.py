"""Synthetic source-like corpora with controlled cross-file redundancy.

Each extension gets its own small pool of template chunks built from a
private identifier vocabulary, so files sharing an extension overlap
heavily while files of different extensions share almost nothing. The
remaining bytes are high-entropy filler unique to each file. That contrast
is what makes key-grouped block compression measurably better than
random placement, which the trade-off tests rely on.
"""

import hashlib
import random
import string
from dataclasses import dataclass
from typing import Iterator

from .corpus import CorpusRecord, write_corpus

DEFAULT_EXTENSIONS = ("py", "c", "js", "java")

_STEMS = (
    "parser", "buffer", "router", "codec", "worker", "index", "stream",
    "filter", "packet", "ledger", "cursor", "loader", "socket", "matrix",
)


@dataclass
class SynthSpec:
    files: int = 10_000
    seed: int = 1
    extensions: tuple[str, ...] = DEFAULT_EXTENSIONS
    overlap: float = 0.70          # fraction of file bytes drawn from templates
    templates_per_ext: int = 8
    template_bytes: int = 2048
    min_file_bytes: int = 3_000
    max_file_bytes: int = 20_000


def _identifier(rnd: random.Random, length: int = 10) -> str:
    return "".join(rnd.choice(string.ascii_lowercase + "_") for _ in range(length))


def _make_templates(rnd: random.Random, spec: SynthSpec) -> list[bytes]:
    vocab = [_identifier(rnd) for _ in range(60)]
    templates = []
    for t in range(spec.templates_per_ext):
        lines: list[str] = []
        total = 0
        while total < spec.template_bytes:
            a, b, c = rnd.choice(vocab), rnd.choice(vocab), rnd.choice(vocab)
            constant = rnd.getrandbits(64)
            line = (
                f"def {a}_{b}(self, {c}):\n"
                f"    {c} ^= 0x{constant:016x}\n"
                f"    return self.{a}.{b}({c})\n"
            )
            lines.append(line)
            total += len(line)
        templates.append("".join(lines).encode()[: spec.template_bytes])
    return templates


def generate_records(spec: SynthSpec) -> Iterator[CorpusRecord]:
    """Deterministic record stream; same spec, same bytes, every run."""
    rnd = random.Random(spec.seed)
    templates = {
        ext: _make_templates(random.Random(spec.seed * 7919 + i), spec)
        for i, ext in enumerate(spec.extensions)
    }
    noise_chunk_bytes = 1200
    for i in range(spec.files):
        ext = spec.extensions[rnd.randrange(len(spec.extensions))]
        size = rnd.randrange(spec.min_file_bytes, spec.max_file_bytes)
        pool = templates[ext]

        parts: list[bytes] = []
        total = 0
        while total < size:
            if rnd.random() < spec.overlap:
                chunk = pool[rnd.randrange(len(pool))]
            else:
                chunk = rnd.getrandbits(noise_chunk_bytes * 8).to_bytes(
                    noise_chunk_bytes, "little"
                )
            parts.append(chunk)
            total += len(chunk)
        content = b"".join(parts)[:size]

        digest = hashlib.sha1(f"{spec.seed}:{i}".encode()).hexdigest()
        content_id = f"swh:1:cnt:{digest}"
        stem = _STEMS[rnd.randrange(len(_STEMS))]
        name = f"{stem}_{i:06d}.{ext}"
        if i % 13 == 5:
            # equal counts exercise the deterministic tie-break
            candidates = [(name, 3), (f"alt_{name}", 3)]
        elif i % 7 == 2:
            candidates = [(name, 9), (f"old_{name}", 4), (f"tmp_{name}", 1)]
        else:
            candidates = [(name, 1 + rnd.randrange(50))]
        language = ext if rnd.random() < 0.5 else None
        yield CorpusRecord(content_id, candidates, content, language)


def generate_corpus(path, spec: SynthSpec) -> int:
    """Write the record stream as a JSONL corpus file; returns record count."""
    return write_corpus(path, generate_records(spec))


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        description="Generate a synthetic redundant source-code corpus (JSONL)."
    )
    parser.add_argument("--out", required=True, help="output corpus path")
    parser.add_argument("--files", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--overlap", type=float, default=0.70)
    parser.add_argument("--min-bytes", type=int, default=3_000)
    parser.add_argument("--max-bytes", type=int, default=20_000)
    args = parser.parse_args(argv)
    spec = SynthSpec(
        files=args.files,
        seed=args.seed,
        overlap=args.overlap,
        min_file_bytes=args.min_bytes,
        max_file_bytes=args.max_bytes,
    )
    count = generate_corpus(args.out, spec)
    print(f"wrote {count} records to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
