import numpy as np
import pytest

from rgglab.rng import RngStream, as_generator, as_stream, chunk_sizes, map_indexed


def test_same_pair_reproduces():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    assert np.array_equal(a, b)


def test_distinct_pairs_differ():
    draws = {
        (s, i): RngStream(s, i).generator().random(4).tobytes()
        for s in (0, 1, 2**64 - 1)
        for i in (0, 1, 2**63)
    }
    assert len(set(draws.values())) == len(draws)


def test_substreams_are_distinct_from_parent():
    root = RngStream(11, 0)
    assert root.generator().random() != root.substream(0).generator().random()
    assert root.substream(1).generator().random() != root.substream(2).generator().random()


def test_distinct_streams_uncorrelated():
    x = RngStream(5, 0).generator().standard_normal(200_000)
    y = RngStream(5, 1).generator().standard_normal(200_000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / np.sqrt(200_000)


def test_rejects_out_of_range_seed():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(0, 2**64)


def test_coercions():
    assert isinstance(as_generator(3), np.random.Generator)
    gen = np.random.default_rng(0)
    assert as_generator(gen) is gen
    assert as_stream(5) == RngStream(5)
    with pytest.raises(TypeError):
        as_generator("seed")


def test_chunk_sizes():
    assert chunk_sizes(10, 4) == [4, 4, 2]
    assert chunk_sizes(8, 4) == [4, 4]
    assert sum(chunk_sizes(12345, 1000)) == 12345


def _square(x):
    return x * x


def test_map_indexed_order_independent_of_workers():
    tasks = list(range(7))
    assert map_indexed(_square, tasks, workers=1) == map_indexed(_square, tasks, workers=2)
