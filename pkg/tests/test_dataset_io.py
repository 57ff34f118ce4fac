import numpy as np
import pytest

from st_glmm_tools.const import Metric
from st_glmm_tools.dataset import (
    TargetSet,
    load_dataset,
    load_mask,
    load_params,
    load_targets,
    save_dataset,
    save_params,
    save_targets,
)
from st_glmm_tools.errors import SchemaError

THREE_ROWS = """t,coord1,coord2,z,cov1
1,0.1,0.2,1,1.0
1,0.3,0.4,0,1.0
2,0.1,0.2,1,1.0
"""


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_three_rows(tmp_path):
    dataset = load_dataset(write(tmp_path, THREE_ROWS))

    assert dataset.T == 2
    assert dataset.sizes == [2, 1]
    assert dataset.p == 1
    np.testing.assert_array_equal(dataset.z[0], [1, 0])
    np.testing.assert_allclose(dataset.coords[0][1], [0.3, 0.4])


def test_bad_response_names_its_line(tmp_path):
    path = write(tmp_path, "t,coord1,coord2,z,cov1\n1,0.1,0.2,2,1.0\n")

    with pytest.raises(SchemaError) as error:
        load_dataset(path)

    assert error.value.line == 2


def test_missing_value(tmp_path):
    path = write(tmp_path, THREE_ROWS + "2,0.3,,1,1.0\n")

    with pytest.raises(SchemaError) as error:
        load_dataset(path)

    assert error.value.line == 5


def test_bad_header(tmp_path):
    with pytest.raises(SchemaError):
        load_dataset(write(tmp_path, "t,x,y,z,cov1\n1,0,0,1,1\n"))
    with pytest.raises(SchemaError):
        load_dataset(write(tmp_path, "t,coord1,coord2,z,elev\n1,0,0,1,1\n"))


def test_time_index_must_be_positive(tmp_path):
    with pytest.raises(SchemaError):
        load_dataset(write(tmp_path, "t,coord1,coord2,z,cov1\n0,0,0,1,1\n"))


def test_latitude_range_on_the_sphere(tmp_path):
    path = write(tmp_path, "t,coord1,coord2,z,cov1\n1,10,95,1,1\n")

    with pytest.raises(SchemaError):
        load_dataset(path, Metric.GREAT_CIRCLE)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "missing.csv")


def test_saved_dataset_reloads(tmp_path, simulation):
    path = save_dataset(simulation.dataset, tmp_path / "out" / "dataset.csv")

    loaded = load_dataset(path)

    assert loaded.sizes == simulation.dataset.sizes
    np.testing.assert_array_equal(loaded.z[2], simulation.dataset.z[2])
    np.testing.assert_allclose(loaded.X[1], simulation.dataset.X[1])


def test_targets(tmp_path):
    targets = TargetSet(
        times=[2, 4],
        coords=[np.array([[0.1, 0.2]]), np.array([[0.3, 0.4], [0.5, 0.6]])],
        X=[np.ones((1, 2)), np.zeros((2, 2))],
    )
    path = save_targets(targets, tmp_path / "targets.csv")

    loaded = load_targets(path)

    assert loaded.times == [2, 4]
    assert loaded.sizes == [1, 2]
    np.testing.assert_allclose(loaded.coords[1], targets.coords[1])


def test_mask(tmp_path):
    np.testing.assert_array_equal(load_mask(write(tmp_path, "index\n3\n0\n")), [3, 0])

    with pytest.raises(SchemaError):
        load_mask(write(tmp_path, "index\n-1\n"))
    with pytest.raises(SchemaError):
        load_mask(write(tmp_path, "idx\n1\n"))


def test_params(tmp_path, simulation):
    params = simulation.params
    path = save_params(tmp_path / "params.json", params)

    loaded = load_params(path, simulation.basis.adjacency)

    np.testing.assert_allclose(loaded.K, params.K)
    np.testing.assert_allclose(loaded.H.H, params.H.H)
    assert loaded.sigma2_xi == params.sigma2_xi


def test_params_for_another_basis(tmp_path, simulation):
    path = save_params(tmp_path / "params.json", simulation.params)

    with pytest.raises(SchemaError):
        load_params(path, np.ones((2, 1)))
