import numpy as np
import pytest


def naive_lags(segments, word, max_lag):
    """Brute-force lag counts of ``word``: rescan every segment position by position."""
    k = len(word)
    counts = {}
    for seg in segments:
        pos = [i for i in range(len(seg) - k + 1) if seg[i:i + k] == word]
        for a, b in zip(pos, pos[1:]):
            d = b - a
            if k + 1 <= d <= max_lag:
                counts[d] = counts.get(d, 0) + 1
    return counts


def random_dna(rng, length, alphabet="ACGT"):
    return "".join(np.array(list(alphabet))[rng.integers(0, len(alphabet), length)])


def write_fasta(path, records, width=60):
    with open(path, "w") as fh:
        for name, seq in records:
            fh.write(f">{name}\n")
            for i in range(0, len(seq), width):
                fh.write(seq[i:i + width] + "\n")
    return path


def synthetic_genome(length, seed=0, motif="CGCGATCG", spacing=37, motif_share=0.1):
    """Random sequence with a periodic motif planted in a fraction of it.

    The tandem copies give some words sharp lag peaks so that peak
    extraction has something to find.
    """
    rng = np.random.default_rng(seed)
    bases = np.array(list("ACGT"))[rng.integers(0, 4, length)]
    n_blocks = int(length * motif_share) // (spacing * 20)
    for b in range(n_blocks):
        start = int(rng.integers(0, length - spacing * 20))
        for r in range(20):
            p = start + r * spacing
            bases[p:p + len(motif)] = list(motif)
    return "".join(bases)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def genome_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("genome") / "synthetic.fa"
    seq = synthetic_genome(1_000_000, seed=7)
    # split into two records with an N run to exercise separators
    write_fasta(path, [("chrA", seq[:600_000] + "N" * 50 + seq[600_000:800_000]),
                       ("chrB", seq[800_000:].lower())])
    return path


# acceptance summary -------------------------------------------------------

ACCEPTANCE_LINES = {}


def record_acceptance(criterion, ok, detail):
    """Remember a PASS/FAIL line for the end-of-session summary and echo it."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
