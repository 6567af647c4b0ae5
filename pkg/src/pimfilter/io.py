"""Data ingestion, result emission, and seeded synthetic fixtures.

Formats are plain text: FASTA for the reference, tab-separated
`read_id  read_seq  position` lines for candidates, and a results table
of `read_id  position  verdict` rows followed by a `# key value` summary
block. Non-ACGT letters are rejected at ingestion with their position so
the golden model and the simulated kernel can never drift apart on
alphabet handling.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .oracle import BASES, BaseCounts, edit_distance, histogram

MAX_POSITION = 2**32 - 1


@dataclass
class RunConfig:
    """Knobs of a full filtering run."""

    eth: int = 0
    read_length: int = 100
    iter_factor: float | None = 5
    active_limit: int | None = None
    strict: bool = True
    verify_oracle: bool = False
    trace: str | None = None
    seed: int = 0
    rows: int = 128
    cols: int = 256

    def __post_init__(self):
        if self.eth < 0:
            raise ValueError("eth must be >= 0")
        if not 1 <= self.read_length <= 100:
            raise ValueError("read_length must be 1..100")

    _FIELD_TYPES = {
        "eth": int, "read_length": int, "iter_factor": float,
        "active_limit": int, "strict": bool, "verify_oracle": bool,
        "trace": str, "seed": int, "rows": int, "cols": int,
    }

    def apply_line(self, key, value):
        kind = self._FIELD_TYPES.get(key)
        if kind is None:
            raise ValueError(f"unknown config key {key!r}")
        if value.lower() in ("none", ""):
            parsed = None
        elif kind is bool:
            parsed = value.lower() in ("1", "true", "yes", "on")
        else:
            parsed = kind(value)
        setattr(self, key, parsed)


def parse_config(stream, config=None):
    """Apply `key=value` lines (# comments allowed) onto a RunConfig."""
    config = config or RunConfig()
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno} is not key=value")
        key, _, value = line.partition("=")
        try:
            config.apply_line(key.strip(), value.strip())
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: {exc}") from None
    config.__post_init__()
    return config


class FastaError(ValueError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = f" (line {line}" + (f", column {col})" if col else ")") if line else ""
        super().__init__(message + where)


@dataclass
class Fasta:
    seq: str
    records: list  # (name, start, length) per input record

    def __len__(self):
        return len(self.seq)


def parse_fasta(stream):
    """Concatenated uppercase reference from a FASTA stream.

    Multi-record files concatenate in order; record boundaries are kept.
    Any letter outside ACGT fails with its line and column.
    """
    parts = []
    records = []
    name = None
    rec_start = 0
    total = 0

    def close_record():
        nonlocal rec_start
        if name is not None:
            records.append((name, rec_start, total - rec_start))
        rec_start = total

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line:
            continue
        if line.startswith(">"):
            close_record()
            name = line[1:].strip() or f"record{len(records) + 1}"
            continue
        if name is None:
            name = "record1"
        seq = line.upper()
        for col, ch in enumerate(seq, start=1):
            if ch not in "ACGT":
                raise FastaError(f"invalid base {ch!r}", lineno, col)
        parts.append(seq)
        total += len(seq)
    close_record()
    if total == 0:
        raise FastaError("no sequence data")
    return Fasta("".join(parts), records)


class CandidateError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message + (f" (line {line})" if line else ""))


@dataclass
class CandidateRecord:
    read_id: str
    seq: str | None
    position: int
    counts: BaseCounts | None = None


def _parse_counts(text, read_length, lineno):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise CandidateError("malformed histogram", lineno) from None
    if len(values) != 4 or any(v < 0 for v in values):
        raise CandidateError("histogram needs four non-negative counts", lineno)
    counts = BaseCounts(*values)
    if counts.total != read_length:
        raise CandidateError("histogram does not sum to the read length", lineno)
    return counts


def parse_candidates(stream, read_length=100, raw_histograms=False):
    """Candidate records from `read_id<TAB>read_seq<TAB>position` lines.

    Lines starting with '#' and blank lines are skipped. With
    `raw_histograms` the middle field is `A,T,G,C` counts instead of a
    sequence (testing hook for the histogram write path).
    """
    out = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise CandidateError("expected read_id<TAB>read_seq<TAB>position", lineno)
        read_id, body, pos_text = fields
        try:
            position = int(pos_text)
        except ValueError:
            raise CandidateError("malformed position", lineno) from None
        if not 0 <= position <= MAX_POSITION:
            raise CandidateError("position overflows 32 bits", lineno)
        if raw_histograms:
            out.append(CandidateRecord(read_id, None, position,
                                       _parse_counts(body, read_length, lineno)))
            continue
        seq = body.upper()
        if len(seq) != read_length:
            raise CandidateError(
                f"read length {len(seq)} != {read_length}", lineno)
        if any(ch not in "ACGT" for ch in seq):
            raise CandidateError("read has a non-ACGT base", lineno)
        out.append(CandidateRecord(read_id, seq, position))
    return out


RESULT_HEADER = "read_id\tposition\tverdict"


def emit_results(decisions, stats, stream):
    """One decision row per location, then the `# key value` summary block."""
    stream.write(RESULT_HEADER + "\n")
    for d in decisions:
        stream.write(f"{d.read_id}\t{d.position}\t{d.verdict}\n")
    for key in ("queued", "processed", "passthrough", "discarded", "kept"):
        stream.write(f"# {key} {getattr(stats, key)}\n")
    stream.write(f"# discard_rate {stats.discard_rate:.6f}\n")
    stream.write(f"# passthrough_rate {stats.passthrough_rate:.6f}\n")
    for key in ("compute_cycles", "init_cycles", "bytes_transferred", "waves"):
        stream.write(f"# {key} {getattr(stats, key)}\n")
    if stats.oracle_mismatches is not None:
        stream.write(f"# oracle_mismatches {stats.oracle_mismatches}\n")


def write_fasta(seq, stream, name="synthetic", width=70):
    stream.write(f">{name}\n")
    for i in range(0, len(seq), width):
        stream.write(seq[i:i + width] + "\n")


def write_candidates(records, stream):
    stream.write("# read_id\tread_seq\tposition\n")
    for rec in records:
        stream.write(f"{rec.read_id}\t{rec.seq}\t{rec.position}\n")


# ---------------------------------------------------------------------------
# Seeded synthetic fixtures.

def synth_genome(length, rng):
    return "".join(rng.choice(BASES) for _ in range(length))


def mutate_read(window, max_edits, rng):
    """A read within `max_edits` Levenshtein distance of `window`.

    Applies substitutions, insertions, and deletions while keeping the
    read length fixed, then certifies the distance; if the length
    bookkeeping pushed it over, falls back to substitutions only (each
    changes the distance by at most one).
    """
    n = len(window)
    if max_edits == 0:
        return window

    def apply_ops(subs_only):
        read = list(window)
        for _ in range(rng.randint(0, max_edits)):
            kind = "sub" if subs_only else rng.choice(("sub", "sub", "ins", "del"))
            i = rng.randrange(n)
            if kind == "sub":
                read[i] = rng.choice(BASES)
            elif kind == "ins":
                read.insert(i, rng.choice(BASES))
                read.pop()
            else:
                read.pop(i)
                read.append(rng.choice(BASES))
        return "".join(read)

    read = apply_ops(subs_only=False)
    if edit_distance(read, window) <= max_edits:
        return read
    return apply_ops(subs_only=True)


@dataclass
class SynthFixture:
    genome: str
    candidates: list
    true_positions: dict = field(default_factory=dict)  # read_id -> position


def synth_fixture(genome_len=100_000, reads=100, decoys_per_read=1,
                  max_edits=0, read_length=100, seed=0):
    """Deterministic genome + candidate list for tests and the CLI.

    Every read is a (possibly mutated) genome window queried at its true
    position, plus `decoys_per_read` additional random positions.
    """
    rng = random.Random(seed)
    genome = synth_genome(genome_len, rng)
    candidates = []
    true_positions = {}
    max_pos = genome_len - read_length
    for i in range(reads):
        pos = rng.randint(0, max_pos)
        window = genome[pos:pos + read_length]
        read = mutate_read(window, max_edits, rng)
        read_id = f"r{i}"
        true_positions[read_id] = pos
        candidates.append(CandidateRecord(read_id, read, pos))
        for _ in range(decoys_per_read):
            candidates.append(CandidateRecord(read_id, read, rng.randint(0, max_pos)))
    return SynthFixture(genome, candidates, true_positions)
