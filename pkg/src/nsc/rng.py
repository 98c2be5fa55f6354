"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream, index)``: word ``i`` of a
stream is produced by Philox-4x64 with key ``(seed, stream)`` at counter block
``i // 4``. Bulk generation and point lookups therefore agree exactly, and a
consumer can never perturb another consumer's numbers by reading out of order.
"""

import numpy as np

# Stream ids keep exploration signs and disturbance noise independent.
STREAM_EXPLORE = 1
STREAM_DISTURBANCE = 2
STREAM_INSTANCE = 3
STREAM_VERIFY = 4

_WORDS_PER_BLOCK = 4


def _key(seed, stream):
    return np.array([int(seed) & (2**64 - 1), int(stream)], dtype=np.uint64)


def raw_words(seed, stream, start, count):
    """Words ``start .. start+count-1`` of the stream as uint64."""
    if count <= 0:
        return np.zeros(0, dtype=np.uint64)
    block, offset = divmod(int(start), _WORDS_PER_BLOCK)
    bitgen = np.random.Philox(key=_key(seed, stream), counter=[block, 0, 0, 0])
    return bitgen.random_raw(offset + count)[offset:]


def rademacher(seed, t0, t1, n, stream=STREAM_EXPLORE):
    """Sign vectors for indices ``t0 .. t1-1`` as a ``(t1-t0, n)`` float array.

    Row ``t`` uses ``ceil(n/64)`` consecutive words starting at
    ``t * ceil(n/64)``; bit ``j`` of the row selects the sign of entry ``j``.
    """
    per_row = -(-n // 64)
    rows = t1 - t0
    words = raw_words(seed, stream, t0 * per_row, rows * per_row)
    words = words.reshape(rows, per_row)
    bits = np.arange(n)
    picked = words[:, bits // 64] >> (bits % 64).astype(np.uint64)
    return np.where(picked & np.uint64(1), 1.0, -1.0)


def uniform(seed, t0, t1, n, stream=STREAM_DISTURBANCE):
    """Uniform [0, 1) doubles, ``n`` per index, rows ``t0 .. t1-1``."""
    words = raw_words(seed, stream, t0 * n, (t1 - t0) * n)
    return ((words >> np.uint64(11)).astype(np.float64) * 2.0**-53).reshape(t1 - t0, n)


def generator(seed, stream):
    """A numpy Generator on the Philox stream, for non-indexed sampling."""
    return np.random.Generator(np.random.Philox(key=_key(seed, stream)))
