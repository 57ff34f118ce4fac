import json

import numpy as np
import pytest

from st_glmm_tools.const import MANIFEST_JSON, SCALARS_CSV, XI_BIN
from st_glmm_tools.construct.draws import read_draws, write_draws
from st_glmm_tools.errors import SchemaError
from st_glmm_tools.sampler.archive import load_archive, save_archive


def test_draw_blocks(tmp_path, rng):
    draws = rng.standard_normal((4, 2, 3))
    path = write_draws(tmp_path / "eta.bin", draws)

    assert path.stat().st_size == 4 * 6 * 8
    np.testing.assert_array_equal(read_draws(path, 4, (2, 3)), draws)


def test_truncated_draw_block(tmp_path, rng):
    path = write_draws(tmp_path / "K.bin", rng.standard_normal((3, 2, 2)))
    path.write_bytes(path.read_bytes()[:-8])

    with pytest.raises(SchemaError):
        read_draws(path, 3, (2, 2))


def test_trailing_bytes(tmp_path, rng):
    path = write_draws(tmp_path / "K.bin", rng.standard_normal((3, 2, 2)))

    with pytest.raises(SchemaError):
        read_draws(path, 2, (2, 2))


def test_archive_directory(tmp_path, archive):
    directory = save_archive(tmp_path / "chain", archive)

    loaded = load_archive(directory)

    assert loaded.shapes() == archive.shapes()
    assert loaded.seed == archive.seed
    np.testing.assert_allclose(loaded.samples.beta, archive.samples.beta)
    np.testing.assert_array_equal(loaded.samples.eta, archive.samples.eta)
    np.testing.assert_array_equal(loaded.samples.iterations, archive.samples.iterations)
    np.testing.assert_array_equal(loaded.basis.adjacency, archive.basis.adjacency)
    np.testing.assert_allclose(loaded.basis.col_means, archive.basis.col_means)
    np.testing.assert_allclose(loaded.layout[0], archive.layout[0])
    assert loaded.samples.acceptance == archive.samples.acceptance
    assert set(loaded.samples.accept_flags) == set(archive.samples.accept_flags)


def test_archive_missing_manifest_key(tmp_path, archive):
    directory = save_archive(tmp_path / "chain", archive)
    manifest = json.loads((directory / MANIFEST_JSON).read_text())
    del manifest["shapes"]
    (directory / MANIFEST_JSON).write_text(json.dumps(manifest))

    with pytest.raises(SchemaError):
        load_archive(directory)


def test_archive_scalar_row_count(tmp_path, archive):
    directory = save_archive(tmp_path / "chain", archive)
    lines = (directory / SCALARS_CSV).read_text().splitlines()
    (directory / SCALARS_CSV).write_text("\n".join(lines[:-1]) + "\n")

    with pytest.raises(SchemaError):
        load_archive(directory)


def test_archive_short_xi_block(tmp_path, archive):
    directory = save_archive(tmp_path / "chain", archive)
    (directory / XI_BIN).write_bytes((directory / XI_BIN).read_bytes()[:16])

    with pytest.raises(SchemaError):
        load_archive(directory)


def test_missing_archive(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_archive(tmp_path / "nowhere")
