import numpy as np
import pytest

from st_glmm_tools.const import VERSION, RandomStream
from st_glmm_tools.errors import UsageError
from st_glmm_tools.helpers import (
    config_hash,
    read_manifest,
    stream_rng,
    threads_from_env,
    type7_quantiles,
    write_manifest,
)


def test_streams_are_reproducible_and_distinct():
    first = stream_rng(3, RandomStream.PREDICT, 1).random(4)

    np.testing.assert_array_equal(first, stream_rng(3, RandomStream.PREDICT, 1).random(4))
    assert not np.array_equal(first, stream_rng(3, RandomStream.PREDICT, 2).random(4))
    assert not np.array_equal(first, stream_rng(3, RandomStream.FORECAST, 1).random(4))


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_threads_from_env(monkeypatch):
    monkeypatch.delenv("ST_GLMM_THREADS", raising=False)
    assert threads_from_env() == 1

    monkeypatch.setenv("ST_GLMM_THREADS", "4")
    assert threads_from_env() == 4

    monkeypatch.setenv("ST_GLMM_THREADS", "many")
    with pytest.raises(UsageError):
        threads_from_env()

    monkeypatch.setenv("ST_GLMM_THREADS", "0")
    with pytest.raises(UsageError):
        threads_from_env()


def test_manifest(tmp_path):
    write_manifest(tmp_path / "run", 7, {"chain": {"seed": 7}}, shapes={"T": 3})

    manifest = read_manifest(tmp_path / "run")

    assert manifest["version"] == VERSION
    assert manifest["seed"] == 7
    assert manifest["shapes"] == {"T": 3}
    assert manifest["config_hash"] == config_hash({"chain": {"seed": 7}})


def test_type7_quantiles():
    q = type7_quantiles(np.array([1.0, 2.0, 3.0, 4.0]), (0.0, 0.5, 0.9))

    np.testing.assert_allclose(q, [1.0, 2.5, 3.7])
