import shutil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssfkymo.exceptions import CompressorError, MissingProgramError, ShapeError
from ssfkymo.kymograph import QuantizedKymograph, quantize_cohort
from ssfkymo.ncd import (
    DistanceMatrix,
    ExternalCompressor,
    LZMACompressor,
    PairwiseNCD,
    ZlibCompressor,
    concat,
    get_compressor,
    ncd,
    pairwise_matrix,
    parse_stream,
    serialize_for_compression,
)
from ssfkymo.synth import SyntheticSpec, generate_class_kymograph

EDGES = np.linspace(0, 1, 254)


def qk(data, name=""):
    return QuantizedKymograph(np.asarray(data, dtype=np.uint8), EDGES, (0.5, 0.5), name=name)


def structured(seed, class_index=1, dims=(64, 64, 50)):
    spec = SyntheticSpec(dims=dims, n_per_class=1)
    vel, _ = generate_class_kymograph(spec, class_index, seed, name=f"s{seed}")
    (q,) = quantize_cohort([vel])
    q.name = f"s{seed}"
    return q


def test_layout_x_fastest():
    # image rows are y, columns are x: [[1, 2], [3, 4]]
    data = np.array([[1, 2], [3, 4]], dtype=np.uint8).T[:, :, None]
    assert serialize_for_compression(qk(data)) == bytes([1, 2, 3, 4])


def test_zero_stream():
    assert serialize_for_compression(qk(np.zeros((4, 4, 4)))) == bytes(64)


@settings(max_examples=30)
@given(st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)), st.integers(0, 2**31))
def test_stream_roundtrip(dims, seed):
    data = np.random.default_rng(seed).integers(0, 256, size=dims, dtype=np.uint8)
    np.testing.assert_array_equal(parse_stream(serialize_for_compression(qk(data)), dims), data)


def test_concat_rules(rng):
    a = qk(rng.integers(0, 256, (4, 4, 2)))
    b = qk(rng.integers(0, 256, (4, 4, 3)))
    assert len(concat(a, a)) == 2 * len(serialize_for_compression(a))
    assert concat(a, b) != concat(b, a)
    # time concatenation is a single (4, 4, 5) image
    joined = parse_stream(concat(a, b), (4, 4, 5))
    np.testing.assert_array_equal(joined[:, :, 2:], b.data)
    with pytest.raises(ShapeError):
        concat(qk(np.zeros((64, 64, 1))), qk(np.zeros((32, 32, 1))))


def test_self_distance_small():
    lz = LZMACompressor()
    for seed in (1, 2, 3):
        x = structured(seed)
        assert ncd(x, x, lz) <= 0.15


def test_random_pairs_far(rng):
    lz = LZMACompressor()
    a = qk(rng.integers(0, 256, (32, 32, 16)))
    b = qk(rng.integers(0, 256, (32, 32, 16)))
    assert ncd(a, b, lz) >= 0.9


def test_symmetry_structured():
    lz = LZMACompressor()
    a, b = structured(4), structured(5, class_index=2)
    assert abs(ncd(a, b, lz) - ncd(b, a, lz)) <= 0.02


def test_deflate_window_limit():
    # deflate cannot reach the repeat in x || x once x outgrows its 32 KiB window
    x = structured(6)
    assert ncd(x, x, ZlibCompressor()) > ncd(x, x, LZMACompressor())


def test_matrix_counts_and_shape():
    ks = [structured(s, dims=(24, 24, 10)) for s in range(10)]
    dm2 = pairwise_matrix(ks[:2], "lzma", diagonal=False)
    assert dm2.counts == {"single": 2, "pair": 1, "self": 0}
    assert dm2.values.shape == (2, 2)
    assert dm2.values[0, 1] == dm2.values[1, 0] == pytest.approx(ncd(ks[0], ks[1], "lzma"))
    dm10 = pairwise_matrix(ks, "lzma")
    assert dm10.counts["pair"] == 45
    assert np.allclose(dm10.values, dm10.values.T)
    assert np.all(np.isfinite(dm10.values)) and np.all(dm10.values >= 0)


def test_duplicate_items_have_matching_rows():
    ks = [structured(s, dims=(32, 32, 20)) for s in range(4)]
    dup = QuantizedKymograph(ks[1].data.copy(), EDGES, (0.5, 0.5), name="dup")
    dm = pairwise_matrix(ks + [dup], "lzma")
    others = [0, 2, 3]
    assert np.max(np.abs(dm.values[1, others] - dm.values[4, others])) <= 0.02


def test_threads_do_not_change_values():
    ks = [structured(s, dims=(24, 24, 10)) for s in range(5)]
    a = pairwise_matrix(ks, LZMACompressor(), n_jobs=1, symmetrize=True)
    b = pairwise_matrix(ks, LZMACompressor(), n_jobs=3, symmetrize=True)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.asymmetry, b.asymmetry)
    assert a.counts == {"single": 5, "pair": 20, "self": 5}


def test_matrix_csv_roundtrip(tmp_path):
    ks = [structured(s, dims=(24, 24, 10)) for s in range(3)]
    dm = pairwise_matrix(ks, "lzma")
    dm.to_csv(tmp_path / "d.csv")
    back = DistanceMatrix.from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.values, dm.values)
    assert back.item_ids == ["s0", "s1", "s2"]


def test_size_is_deterministic_and_cached():
    c = LZMACompressor()
    data = serialize_for_compression(structured(7, dims=(24, 24, 10)))
    assert c.size(data) == c.size(data) == len(c.compress(data))


@pytest.mark.skipif(shutil.which("cp") is None, reason="needs cp")
def test_identity_external_compressor(rng):
    c = ExternalCompressor("cp", container="raw")
    a = qk(rng.integers(0, 256, (4, 4, 3)))
    assert c.size(serialize_for_compression(a), a.data.shape) == 48
    pgm = ExternalCompressor("cp", container="pgm")
    assert pgm.size(serialize_for_compression(a), a.data.shape) == 48 + len(b"P5\n4 12\n255\n")


def test_missing_executable_and_fallback():
    desc = {"executable": "no-such-codec-xyz"}
    with pytest.raises(MissingProgramError):
        get_compressor(desc)
    with pytest.warns(RuntimeWarning):
        c = get_compressor({**desc, "fallback": "lzma"})
    assert isinstance(c, LZMACompressor)


@pytest.mark.skipif(shutil.which("false") is None, reason="needs false")
def test_failing_external_compressor(rng):
    c = ExternalCompressor("false")
    with pytest.raises(CompressorError):
        ncd(qk(rng.integers(0, 256, (4, 4, 2))), qk(rng.integers(0, 256, (4, 4, 2))), c)


def test_unknown_builtin():
    with pytest.raises(ValueError):
        get_compressor("flif-but-not-really")


def test_pairwise_estimator():
    ks = [structured(s, dims=(24, 24, 10)) for s in range(4)]
    est = PairwiseNCD(compressor="lzma")
    square = est.fit_transform(ks)
    np.testing.assert_allclose(square, pairwise_matrix(ks, "lzma").values)
    cross = est.transform(ks[:2])
    assert cross.shape == (2, 4)
    assert cross[1, 2] == pytest.approx(ncd(ks[1], ks[2], "lzma"))
    assert est.get_params()["symmetrize"] is False
