"""Byte-value histogram features.

A file's feature vector is its normalized 256-bin byte-value histogram:
bin v holds the fraction of bytes equal to v. Files are streamed in fixed
chunks, so memory stays constant regardless of file size; the whole file is
always histogrammed, never truncated.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyFileError

N_BINS = 256
CHUNK_SIZE = 1 << 20


@dataclass
class RawHistogram:
    counts: np.ndarray      # (256,) int64, counts[v] = occurrences of byte v
    total_bytes: int


def byte_histogram(data):
    """Count byte values in a bytes-like object.

    Raises EmptyFileError on zero-length input: an empty file has no byte
    distribution and a zero vector would break the sum-to-1 invariant.
    """
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    if buf.size == 0:
        raise EmptyFileError("cannot histogram empty input")
    counts = np.bincount(buf, minlength=N_BINS).astype(np.int64)
    return RawHistogram(counts=counts, total_bytes=int(buf.size))


def normalize(raw):
    """Scale counts to a distribution summing to 1."""
    return raw.counts.astype(np.float64) / float(raw.total_bytes)


def histogram_stream(chunks):
    """RawHistogram over an iterable of bytes chunks."""
    counts = np.zeros(N_BINS, dtype=np.int64)
    total = 0
    for chunk in chunks:
        buf = np.frombuffer(chunk, dtype=np.uint8)
        if buf.size == 0:
            continue
        counts += np.bincount(buf, minlength=N_BINS)
        total += buf.size
    if total == 0:
        raise EmptyFileError("cannot histogram empty input")
    return RawHistogram(counts=counts, total_bytes=total)


def _file_chunks(path):
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(CHUNK_SIZE)
            if not chunk:
                return
            yield chunk


def raw_histogram_file(path):
    return histogram_stream(_file_chunks(path))


def featurize_file(path):
    """Normalized histogram of a file's contents. Raises OSError on
    unreadable paths and EmptyFileError on empty files."""
    return normalize(raw_histogram_file(path))


def featurize_bytes(data):
    return normalize(byte_histogram(data))
