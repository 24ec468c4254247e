"""Streaming lag counter for genomic words.

Sequences are read from plain text or FASTA files and cut into runs of
A/C/G/T; every other symbol separates two runs.  For each word of length
``k`` the scanner records the lag between the first symbols of consecutive
(possibly overlapping) occurrences inside a run, keeping lags in
``k+1 .. max_lag``.

The scanner encodes words as base-4 integers (A=0, C=1, G=2, T=3), so word
``i`` of the output is the ``i``-th word in lexicographic order.
"""

from __future__ import annotations

import csv
import itertools
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError, EmptyInputError

ALPHABET = "ACGT"
SEPARATOR = 4

# byte -> base code; everything that is not a/c/g/t (either case) separates
_CODES = np.full(256, SEPARATOR, dtype=np.uint8)
for _i, _c in enumerate(ALPHABET):
    _CODES[ord(_c)] = _i
    _CODES[ord(_c.lower())] = _i

_SEGMENT_RE = re.compile(rb"[ACGTacgt]+")
_WHITESPACE = b" \t\r\n\v\f"

DEFAULT_MAX_LAG = {3: 1000, 5: 4000}


@dataclass(frozen=True)
class SequenceSegment:
    """A maximal run of A/C/G/T symbols.

    ``origin`` names the source file and record, ``offset`` is the position of
    the first symbol inside that record (whitespace removed).
    """

    symbols: str
    origin: str = ""
    offset: int = 0

    def __len__(self):
        return len(self.symbols)


@dataclass
class LagHistogram:
    """Absolute lag counts of one word on the lag domain ``k+1 .. max_lag``.

    ``counts[i]`` is the number of recorded lags equal to ``k + 1 + i``.
    """

    word: str
    k: int
    max_lag: int
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.max_lag - self.k,):
            raise ValueError(
                f"expected {self.max_lag - self.k} counts for lags "
                f"{self.k + 1}..{self.max_lag}, got {self.counts.shape}"
            )
        if np.any(self.counts < 0):
            raise ValueError("lag counts must be nonnegative")

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.k + 1, self.max_lag + 1)

    @property
    def n(self) -> int:
        """Total number of recorded lags."""
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        """Relative frequencies ``counts / n`` (all zero when ``n == 0``)."""
        n = self.n
        if n == 0:
            return np.zeros(len(self.counts))
        return self.counts / n

    def as_dict(self) -> dict[int, int]:
        """Sparse ``{lag: count}`` view of the nonzero counts."""
        nz = np.flatnonzero(self.counts)
        return {int(self.k + 1 + i): int(self.counts[i]) for i in nz}


def all_words(k: int) -> list[str]:
    """All ``4**k`` words in code order."""
    return ["".join(p) for p in itertools.product(ALPHABET, repeat=k)]


def word_code(word: str) -> int:
    code = 0
    for ch in word.upper():
        idx = ALPHABET.find(ch)
        if idx < 0:
            raise ValueError(f"{word!r} is not a word over ACGT")
        code = code * 4 + idx
    return code


# ---------------------------------------------------------------------------
# parsing


def _detect_format(path: Path) -> str:
    with open(path, "rb") as fh:
        for line in fh:
            line = line.strip()
            if line:
                return "fasta" if line.startswith(b">") else "plain"
    return "plain"


def iter_records(path, fmt: str = "auto") -> Iterator[tuple[str, bytes]]:
    """Yield ``(record_name, sequence_bytes)`` with line breaks removed.

    A plain file is a single record named after the file.  Lines starting
    with ``>`` open a new FASTA record; ``;`` comment lines are skipped.
    """
    path = Path(path)
    if fmt == "auto":
        fmt = _detect_format(path)
    if fmt not in ("plain", "fasta"):
        raise ValueError(f"unknown sequence format {fmt!r}")

    with open(path, "rb") as fh:
        if fmt == "plain":
            data = fh.read().translate(None, _WHITESPACE)
            yield path.name, data
            return
        name, parts = None, []
        for line in fh:
            if line.startswith(b">"):
                if name is not None or parts:
                    yield name or "", b"".join(parts)
                name = line[1:].strip().decode("ascii", "replace")
                parts = []
            elif line.startswith(b";"):
                continue
            else:
                parts.append(line.translate(None, _WHITESPACE))
        if name is not None or parts:
            yield name or "", b"".join(parts)


def parse_sequences(path, fmt: str = "auto") -> Iterator[SequenceSegment]:
    """Stream the A/C/G/T segments of a plain or FASTA sequence file.

    Lowercase bases are upper-cased; every other symbol ends a segment.
    Raises ``OSError`` for unreadable files and ``EmptyInputError`` when the
    file holds no usable base at all.
    """
    found = False
    for name, seq in iter_records(path, fmt):
        origin = f"{Path(path).name}:{name}" if name else Path(path).name
        for m in _SEGMENT_RE.finditer(seq):
            found = True
            yield SequenceSegment(m.group().upper().decode("ascii"), origin, m.start())
    if not found:
        raise EmptyInputError(f"no A/C/G/T segment found in {path}")


# ---------------------------------------------------------------------------
# counting


class LagScanner:
    """Incremental lag counter over a stream of base codes.

    Feed raw sequence bytes with :meth:`feed`; any non-ACGT byte acts as a
    segment separator and :meth:`end_segment` closes the current run.  Long
    inputs may be fed in arbitrary pieces: windows and lags that straddle
    two pieces of the same segment are handled through carried state.

    ``counts`` has shape ``(4**k, max_lag - k)`` and ``occurrences`` holds
    the number of word occurrences seen per word.
    """

    def __init__(self, k: int, max_lag: int, chunk_size: int = 1 << 22):
        if k < 1:
            raise ValueError("word length k must be at least 1")
        if max_lag <= k:
            raise ValueError("max_lag must exceed k")
        if k > 12:
            raise ValueError("k > 12 is not supported")
        self.k = k
        self.max_lag = max_lag
        self.chunk_size = chunk_size
        self.n_words = 4**k
        self.width = max_lag - k
        self._flat = np.zeros(self.n_words * self.width, dtype=np.int64)
        self.occurrences = np.zeros(self.n_words, dtype=np.int64)
        self._last = np.full(self.n_words, -1, dtype=np.int64)
        self._tail = np.empty(0, dtype=np.uint8)
        self._pos = 0
        self._dtype = np.uint16 if k <= 8 else np.uint32

    @property
    def counts(self) -> np.ndarray:
        return self._flat.reshape(self.n_words, self.width)

    def feed(self, data) -> None:
        if isinstance(data, str):
            data = data.encode("ascii")
        codes = _CODES[np.frombuffer(data, dtype=np.uint8)]
        for start in range(0, len(codes), self.chunk_size):
            self._scan(codes[start:start + self.chunk_size])

    def end_segment(self) -> None:
        self._scan(np.array([SEPARATOR], dtype=np.uint8))

    def _scan(self, chunk: np.ndarray) -> None:
        k = self.k
        buf = np.concatenate([self._tail, chunk])
        base = self._pos - len(self._tail)
        self._pos += len(chunk)
        self._tail = buf[len(buf) - (k - 1):] if k > 1 else buf[:0]

        n_win = len(buf) - k + 1
        sep = np.zeros(len(buf) + 1, dtype=np.int32)
        np.cumsum(buf == SEPARATOR, out=sep[1:])
        open_seg = sep[-1]
        if n_win <= 0:
            if open_seg:
                self._last.fill(-1)
            return

        word = np.zeros(n_win, dtype=self._dtype)
        for t in range(k):
            word <<= 2
            word |= buf[t:t + n_win] & 3
        # positions are chunk-relative int32 until they meet the carried state
        if open_seg:
            start = np.flatnonzero(sep[k:k + n_win] == sep[:n_win]).astype(np.int32)
            word = word[start]
            seg = sep[start]
        else:
            start = np.arange(n_win, dtype=np.int32)
            seg = None
        if len(start) == 0:
            self._last.fill(-1)
            return
        self.occurrences += np.bincount(word, minlength=self.n_words)

        # radix sort on small unsigned ints; stable keeps positions ascending
        order = np.argsort(word, kind="stable")
        w = word[order]
        p = start[order]

        new_word = np.ones(len(w), dtype=bool)
        np.not_equal(w[1:], w[:-1], out=new_word[1:])
        last_of_word = np.ones(len(w), dtype=bool)
        last_of_word[:-1] = new_word[1:]

        pair = ~new_word[1:]
        if seg is not None:
            s = seg[order]
            pair &= s[1:] == s[:-1]
            in_first, in_last = s == 0, s == open_seg
        else:
            in_first = in_last = True
        lag = p[1:] - p[:-1]
        pair &= (lag > k) & (lag <= self.max_lag)
        flat = [w[1:][pair].astype(np.int64) * self.width + (lag[pair] - (k + 1))]

        # first occurrence in this chunk may pair with the carried one
        first = np.flatnonzero(new_word & in_first)
        if len(first):
            fw = w[first].astype(np.int64)
            prev = self._last[fw]
            carried_lag = p[first] + base - prev
            ok = (prev >= 0) & (carried_lag > k) & (carried_lag <= self.max_lag)
            flat.append(fw[ok] * self.width + (carried_lag[ok] - (k + 1)))

        flat = np.concatenate(flat)
        if len(flat):
            self._flat += np.bincount(flat, minlength=len(self._flat))

        if open_seg:
            self._last.fill(-1)
        tail_idx = np.flatnonzero(last_of_word & in_last)
        self._last[w[tail_idx]] = p[tail_idx] + base

    def histograms(self) -> list[LagHistogram]:
        counts = self.counts
        return [
            LagHistogram(word, self.k, self.max_lag, counts[i].copy())
            for i, word in enumerate(all_words(self.k))
        ]


def count_lags(segments: Iterable, k: int, max_lag: int) -> list[LagHistogram]:
    """Lag histograms of all ``4**k`` words over a stream of segments.

    ``segments`` may hold :class:`SequenceSegment` objects or plain strings;
    lags never span two segments.
    """
    scanner = LagScanner(k, max_lag)
    batch, size = [], 0
    for seg in segments:
        sym = seg.symbols if isinstance(seg, SequenceSegment) else seg
        batch.append(sym.encode("ascii") if isinstance(sym, str) else bytes(sym))
        size += len(sym) + 1
        if size >= scanner.chunk_size:
            scanner.feed(b"N".join(batch) + b"N")
            batch, size = [], 0
    if batch:
        scanner.feed(b"N".join(batch) + b"N")
    return scanner.histograms()


def count_lags_file(path, k: int, max_lag: int, fmt: str = "auto") -> list[LagHistogram]:
    """Fast path of ``count_lags(parse_sequences(path), k, max_lag)``.

    Record bytes go straight to the scanner, which treats any non-ACGT byte
    as a separator, so no per-segment Python objects are created.
    """
    scanner = LagScanner(k, max_lag)
    for _, seq in iter_records(path, fmt):
        scanner.feed(seq)
        scanner.end_segment()
    if scanner.occurrences.sum() == 0 and not _has_bases(path, fmt):
        raise EmptyInputError(f"no A/C/G/T segment found in {path}")
    return scanner.histograms()


def _has_bases(path, fmt):
    return any(_SEGMENT_RE.search(seq) for _, seq in iter_records(path, fmt))


# ---------------------------------------------------------------------------
# persistence


def write_histograms(histograms: Iterable[LagHistogram], out_dir) -> Path:
    """Write one ``<word>.lag`` CSV per word plus ``manifest.csv``.

    Lag files list nonzero counts only, under a ``lag,count`` header.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from exc
    rows = []
    for h in histograms:
        with open(out / f"{h.word}.lag", "w", newline="") as fh:
            fh.write("lag,count\n")
            for lag, c in h.as_dict().items():
                fh.write(f"{lag},{c}\n")
        rows.append((h.word, h.n, h.k, h.max_lag))
    with open(out / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["word", "n", "k", "L"])
        writer.writerows(rows)
    return out


def read_histograms(hist_dir) -> list[LagHistogram]:
    """Load histograms written by :func:`write_histograms`, in manifest order."""
    d = Path(hist_dir)
    manifest = d / "manifest.csv"
    if not manifest.is_file():
        raise DataError(f"no manifest.csv in {d}")
    out = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            word, k, L = row["word"], int(row["k"]), int(row["L"])
            counts = np.zeros(L - k, dtype=np.int64)
            with open(d / f"{word}.lag", newline="") as lf:
                reader = csv.reader(lf)
                next(reader, None)
                for lag, c in reader:
                    counts[int(lag) - k - 1] = int(c)
            h = LagHistogram(word, k, L, counts)
            if h.n != int(row["n"]):
                raise DataError(f"{word}.lag sums to {h.n}, manifest says {row['n']}")
            out.append(h)
    if not out:
        raise DataError(f"manifest in {d} lists no words")
    return out


def default_max_lag(k: int) -> int:
    try:
        return DEFAULT_MAX_LAG[k]
    except KeyError:
        raise ValueError(f"no default max lag for k={k}; pass one explicitly") from None


__all__ = [
    "ALPHABET",
    "LagHistogram",
    "LagScanner",
    "SequenceSegment",
    "all_words",
    "count_lags",
    "count_lags_file",
    "default_max_lag",
    "iter_records",
    "parse_sequences",
    "read_histograms",
    "word_code",
    "write_histograms",
]
