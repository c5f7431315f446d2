import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from typesift import features
from typesift.errors import EmptyFileError


def test_byte_histogram_two_bytes():
    raw = features.byte_histogram(b"AA")
    assert raw.counts[0x41] == 2
    assert raw.counts.sum() == 2
    assert raw.total_bytes == 2


def test_byte_histogram_all_values_once():
    raw = features.byte_histogram(bytes(range(256)))
    np.testing.assert_array_equal(raw.counts, np.ones(256, dtype=np.int64))


@given(st.binary(min_size=1, max_size=512))
def test_byte_histogram_permutation_invariant_and_complete(data):
    raw = features.byte_histogram(data)
    shuffled = bytes(sorted(data))
    raw2 = features.byte_histogram(shuffled)
    np.testing.assert_array_equal(raw.counts, raw2.counts)
    assert raw.counts.sum() == len(data)


def test_byte_histogram_empty_rejected():
    with pytest.raises(EmptyFileError):
        features.byte_histogram(b"")


def test_normalize_single_value():
    raw = features.byte_histogram(b"AA")
    bins = features.normalize(raw)
    assert bins[0x41] == 1.0
    assert bins.sum() == 1.0


def test_normalize_uniform():
    raw = features.byte_histogram(bytes(range(256)))
    np.testing.assert_array_equal(features.normalize(raw), np.full(256, 1 / 256))


def test_normalize_direct_ratio():
    raw = features.byte_histogram(bytes([0, 1, 1, 1]))
    bins = features.normalize(raw)
    assert bins[0] == 0.25 and bins[1] == 0.75
    assert bins[2:].sum() == 0.0


@given(st.binary(min_size=1, max_size=2048))
def test_normalized_histogram_invariants(data):
    bins = features.featurize_bytes(data)
    assert abs(bins.sum() - 1.0) <= 1e-9
    assert (bins >= 0).all()


def test_featurize_file(tmp_path):
    path = tmp_path / "sample.bin"
    path.write_bytes(b"AA")
    bins = features.featurize_file(path)
    assert bins[0x41] == 1.0
    np.testing.assert_array_equal(bins, features.featurize_file(path))


def test_featurize_file_errors(tmp_path):
    empty = tmp_path / "empty.bin"
    empty.write_bytes(b"")
    with pytest.raises(EmptyFileError):
        features.featurize_file(empty)
    with pytest.raises(OSError):
        features.featurize_file(tmp_path / "missing.bin")


def test_featurize_streams_large_file_in_chunks(tmp_path):
    path = tmp_path / "big.bin"
    blob = bytes(range(256)) * 5000   # ~1.25 MiB, spans two chunks
    path.write_bytes(blob)
    np.testing.assert_array_equal(features.featurize_file(path),
                                  features.featurize_bytes(blob))


@given(st.binary(min_size=6, max_size=512))
def test_first_six_byte_change_touches_at_most_12_bins(data):
    patched = b"\xaa\xbb\xcc\xdd\xee\xff" + data[6:]
    a = features.byte_histogram(data).counts
    b = features.byte_histogram(patched).counts
    assert (a != b).sum() <= 12
    assert a.sum() == b.sum()


def test_real_pdf_histogram_shape():
    """Shape-only check against real .pdf samples: spiky, with visible mass
    in the printable range and on stream bytes."""
    import os
    root = os.environ.get("TYPESIFT_GOVDOCS_DIR", os.path.join("data", "govdocs1"))
    if not os.path.isdir(root):
        pytest.skip("needs the Govdocs1 corpus for real .pdf samples")
    pdfs = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        pdfs.extend(os.path.join(dirpath, f) for f in sorted(filenames)
                    if f.lower().endswith(".pdf"))
        if len(pdfs) >= 5:
            break
    assert pdfs, "corpus present but holds no .pdf files"
    mean_bins = np.mean([features.featurize_file(p) for p in pdfs[:5]], axis=0)
    assert mean_bins.max() > 5 * np.median(mean_bins)     # spiky
    assert mean_bins[0x20:0x7F].sum() > 0.2               # printable-range mass
