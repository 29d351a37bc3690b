""" Unit tests for data.py module """
import os
import pytest
import numpy as np

from spavid.errors import FormatError, ShapeError
from spavid.tensor import save_tensor
from spavid.data import SyntheticSpec, LabeledVideo, simulate_video, generate, stack_videos, \
                        save_video, load_video, save_dataset, load_dataset, \
                        frame_probe_accuracy, BACKGROUND

from spavid.tests.data_fixtures import tiny_spec, tiny_dataset


# =============================================================================
# Unit tests for dataset spec and simulation
# =============================================================================
def test_synthetic_spec():
    """ Unit tests for SyntheticSpec validation and identifiers """
    spec = SyntheticSpec()
    assert spec.validate() is spec
    assert spec.frame_shape == (16,16,1)
    assert len(spec.dataset_id) == 12
    assert spec.dataset_id == SyntheticSpec().dataset_id
    assert spec.dataset_id != SyntheticSpec(seed=1).dataset_id

    for kwargs in [dict(W=3), dict(H=2), dict(T=1), dict(C=0), dict(num_classes=3),
                   dict(samples_per_class=3), dict(noise_std=-0.1)]:
        with pytest.raises(ValueError):
            SyntheticSpec(**kwargs).validate()


@pytest.mark.parametrize('label', range(8))
def test_simulate_video(label):
    """ Unit tests for single-clip simulation """
    spec = SyntheticSpec(T=10, W=12, H=8, C=2, noise_std=0.0)
    video = simulate_video(label, spec, rng=label)
    assert video.shape == (10,12,8,2)
    assert np.all((video >= 0) & (video <= 1))
    assert np.array_equal(video.astype(np.float32), video)
    # Channels are copies of one another
    assert np.array_equal(video[...,0], video[...,1])
    # Object adds the same total brightness to every frame
    mass = (video[...,0] - BACKGROUND).sum(axis=(1,2))
    assert np.allclose(mass, mass[0], rtol=1e-5)
    assert mass[0] > 0

    # Object moves along x (right/left) or y (down/up)
    direction = label % 4
    frame_axis = 0 if direction < 2 else 1
    coords = np.arange(video.shape[1+frame_axis])
    profile = (video[...,0] - BACKGROUND).sum(axis=2-frame_axis)
    center = (profile*coords).sum(axis=1) / profile.sum(axis=1)
    if direction in (0,2):
        assert np.all(np.diff(center) > 0)
    else:
        assert np.all(np.diff(center) < 0)


def test_simulate_reversed_direction():
    """ Opposite directions show the same frames in reverse order """
    spec = SyntheticSpec(T=8, W=10, H=10, noise_std=0.0)
    for label in (0, 2, 4, 6):
        forward = simulate_video(label, spec, rng=3)
        backward = simulate_video(label+1, spec, rng=3)
        assert np.array_equal(forward, backward[::-1])
        assert not np.array_equal(forward, backward)


def test_simulate_errors():
    """ Out-of-range labels are rejected """
    with pytest.raises(AssertionError):
        simulate_video(4, SyntheticSpec(num_classes=4))
    with pytest.raises(ValueError):
        simulate_video(0, SyntheticSpec(T=1))


def test_generate(tiny_spec, tiny_dataset):
    """ Unit tests for dataset generation and splitting """
    train, test = tiny_dataset
    assert (len(train), len(test)) == (14, 6)
    assert [item.id for item in train] == sorted(item.id for item in train)
    assert not set(item.id for item in train) & set(item.id for item in test)
    assert set(item.label for item in test) == {0,1,2,3}
    assert all(item.video.shape == (6,6,6,1) for item in train + test)

    # Deterministic given the seed; different seeds give different clips
    train2, test2 = generate(tiny_spec)
    assert [item.id for item in test2] == [item.id for item in test]
    assert all(np.array_equal(a.video, b.video) for a,b in zip(train, train2))

    other_train, _ = generate(SyntheticSpec(**{**tiny_spec.__dict__, 'seed': 2}))
    assert not np.array_equal(other_train[0].video, train[0].video)


def test_stack_videos(tiny_dataset):
    """ Unit tests for stack_videos """
    train, _ = tiny_dataset
    videos, labels, ids = stack_videos(train)
    assert videos.shape == (14,6,6,6,1)
    assert labels.dtype.kind == 'i'
    assert ids == [item.id for item in train]
    with pytest.raises(ValueError):
        stack_videos([])


# =============================================================================
# Unit tests for video and dataset I/O
# =============================================================================
def test_video_io(tiny_dataset, tmp_path):
    """ Clips round-trip bit-exactly through VTEN files """
    video = tiny_dataset[0][0].video
    filename = os.path.join(str(tmp_path), 'clip.vten')
    save_video(filename, video)
    assert np.array_equal(load_video(filename), video)

    with pytest.raises(ShapeError):
        save_video(filename, video[0])

    save_tensor(filename, np.zeros((6,6,1)))
    with pytest.raises(FormatError):
        load_video(filename)
    save_tensor(filename, np.zeros((0,6,6,1)))
    with pytest.raises(FormatError):
        load_video(filename)


def test_dataset_io(tiny_spec, tiny_dataset, tmp_path):
    """ Datasets round-trip through a manifest directory """
    train, test = tiny_dataset
    dirname = str(tmp_path)
    save_dataset(dirname, train, test, tiny_spec)
    assert os.path.isfile(os.path.join(dirname, 'manifest'))
    assert os.path.isfile(os.path.join(dirname, 'train', train[0].id + '.vten'))

    train2, test2, spec2 = load_dataset(dirname)
    assert spec2 == tiny_spec
    assert [(item.id, item.label) for item in train2] == [(item.id, item.label) for item in train]
    assert [(item.id, item.label) for item in test2] == [(item.id, item.label) for item in test]
    assert all(np.array_equal(a.video, b.video) for a,b in zip(test, test2))

    # Dataset without spec
    dirname = os.path.join(str(tmp_path), 'nospec')
    save_dataset(dirname, train[:2], test[:1])
    train3, test3, spec3 = load_dataset(dirname)
    assert (len(train3), len(test3), spec3) == (2, 1, None)


def test_dataset_io_errors(tiny_dataset, tmp_path):
    """ Missing or malformed manifests raise errors """
    with pytest.raises(FileNotFoundError):
        load_dataset(os.path.join(str(tmp_path), 'missing'))

    train, test = tiny_dataset
    dirname = str(tmp_path)
    save_dataset(dirname, train[:1], test[:1])
    manifest = os.path.join(dirname, 'manifest')

    with open(manifest, 'a') as f:
        f.write('clip99999 3\n')
    with pytest.raises(FormatError):
        load_dataset(dirname)

    with open(manifest, 'w') as f:
        f.write('%s %d other/%s.vten\n' % (train[0].id, train[0].label, train[0].id))
    with pytest.raises(FormatError):
        load_dataset(dirname)


def test_frame_probe_accuracy(tiny_dataset):
    """ Frame-level probe returns a direction accuracy (or NaN if no same-pair predictions) """
    train, test = tiny_dataset
    videos, labels, _ = stack_videos(train + test)
    accuracy = frame_probe_accuracy(videos, labels, seed=0)
    assert np.isnan(accuracy) or (0 <= accuracy <= 1)
    assert accuracy == frame_probe_accuracy(videos, labels, seed=0) or np.isnan(accuracy)

    with pytest.raises(ShapeError):
        frame_probe_accuracy(videos[0], labels[:1])
