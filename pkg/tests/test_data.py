import numpy as np
import pytest

import marginflow as mf
from marginflow.data import FIGURE1_W_HAT, make_degenerate3d, make_figure1, make_random_separable


def test_fold_labels_examples():
    out = mf.fold_labels(np.array([[1.0], [2.0]]), [1])
    assert np.array_equal(out.points, [[1.0], [2.0]])
    out = mf.fold_labels(np.array([[-0.5], [-1.5]]), [-1])
    assert np.array_equal(out.points, [[0.5], [1.5]])
    out = mf.fold_labels(np.array([[1.0, 3.0], [2.0, 4.0]]), [1, -1])
    assert np.array_equal(out.points, [[1.0, -3.0], [2.0, -4.0]])


def test_fold_labels_validation():
    with pytest.raises(mf.InputError):
        mf.fold_labels(np.array([[1.0]]), [0])
    with pytest.raises(mf.InputError):
        mf.fold_labels(np.array([[1.0]]), [1, 1])


def test_fold_twice_with_positive_labels_is_identity():
    pts = np.random.default_rng(0).normal(size=(3, 5))
    once = mf.fold_labels(pts, [1] * 5)
    twice = mf.fold_labels(once.points, [1] * 5)
    assert np.array_equal(twice.points, pts)


def test_dataset_validation():
    with pytest.raises(mf.InputError):
        mf.Dataset(np.array([[np.nan]]))
    with pytest.raises(mf.InputError):
        mf.Dataset(np.empty((2, 0)))


def test_separability_cases(fig1):
    assert mf.check_separability(fig1).separable
    anti = mf.Dataset(np.array([[1.0, -1.0], [0.0, 0.0]]))
    cert = mf.check_separability(anti)
    assert not cert.separable and cert.witness is None
    halfplane = make_random_separable(2, 6, seed=5, margin=0.1)
    cert = mf.check_separability(halfplane)
    assert cert.separable
    assert np.min(cert.witness @ halfplane.points) >= 1.0 - 1e-8


@pytest.mark.parametrize("seed", range(20))
def test_figure1_separable_every_seed(seed):
    data = make_figure1(seed)
    assert data.dim == 2 and data.count == 16
    assert mf.check_separability(data).separable
    # the 12 random points stay strictly off the margin
    assert np.all((FIGURE1_W_HAT @ data.points)[4:] > 1.05)


def test_figure1_deterministic():
    assert np.array_equal(make_figure1(7).points, make_figure1(7).points)


def test_degenerate3d_shape_and_certificate():
    data = make_degenerate3d()
    assert data.dim == 3 and data.count == 3
    cert = mf.check_separability(data)
    assert cert.separable
    assert np.min(cert.witness @ data.points) >= 1.0 - 1e-8


def test_csv_round_trip(tmp_path, fig1):
    path = tmp_path / "fig1.csv"
    mf.save_csv(fig1, path)
    again = mf.load_csv(path)
    assert np.max(np.abs(again.points - fig1.points)) <= 1e-12


def test_csv_single_row(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("1.0,2.0,1\n")
    data = mf.load_csv(path)
    assert np.array_equal(data.points, [[1.0], [2.0]])


def test_csv_header_detected(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("x_1,x_2,label\n1.0,2.0,-1\n")
    data = mf.load_csv(path)
    assert np.array_equal(data.points, [[-1.0], [-2.0]])


def test_csv_parse_errors(tmp_path):
    bad_label = tmp_path / "bad_label.csv"
    bad_label.write_text("1.0,2.0,0\n")
    with pytest.raises(mf.ParseError):
        mf.load_csv(bad_label)

    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1.0,2.0,1\n1.0,1\n")
    with pytest.raises(mf.ParseError, match="row 2"):
        mf.load_csv(ragged)

    non_numeric = tmp_path / "nn.csv"
    non_numeric.write_text("1.0,2.0,1\nfoo,2.0,1\n")
    with pytest.raises(mf.ParseError, match="row 2"):
        mf.load_csv(non_numeric)

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(mf.ParseError):
        mf.load_csv(empty)


def test_generator_registry():
    assert mf.generate("degenerate3d").provenance == "degenerate3d"
    assert mf.generate("figure1_scaled", seed=2).provenance == "figure1_scaled"
    with pytest.raises(mf.InputError):
        mf.generate("no-such-generator")


def test_scaled_generator_scales_second_coordinate():
    base = mf.generate("figure1", seed=2)
    scaled = mf.generate("figure1_scaled", seed=2)
    assert np.allclose(scaled.points[0], base.points[0])
    assert np.allclose(scaled.points[1], 20.0 * base.points[1])
