import numpy as np
import pytest
from hypothesis import given, strategies as st

from auxpose.core import (GrayImage, LandmarkSet, ManifestError, Patch, extract_patch, load_dataset,
                          load_image, pose_vector, save_image, unflatten_pose, write_manifest)

coord = st.floats(-1e4, 1e4, allow_nan=False)


def test_gray_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage(np.full((4, 4), 1.5))
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 3)))


def test_landmarks_need_four_entries():
    with pytest.raises(ValueError):
        LandmarkSet(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        LandmarkSet(np.array([[np.nan, 0]] + [[0, 0]] * 3))


def test_pose_vector_order():
    lm = LandmarkSet([[1, 2], [3, 4], [5, 6], [7, 8]])
    assert pose_vector(lm).tolist() == [1, 2, 3, 4, 5, 6, 7, 8]
    assert pose_vector(LandmarkSet(np.zeros((4, 2)))).tolist() == [0.0] * 8


@given(st.lists(coord, min_size=8, max_size=8), st.lists(st.booleans(), min_size=4, max_size=4))
def test_pose_vector_round_trip(values, occ):
    lm = LandmarkSet(np.reshape(values, (4, 2)), tuple(occ))
    assert unflatten_pose(pose_vector(lm), lm.occluded) == lm


def test_extract_patch_constant():
    img = GrayImage(np.full((100, 120), 0.5))
    assert np.all(extract_patch(img, (60, 50)).pixels == 0.5)


def test_extract_patch_rejects_border():
    img = GrayImage(np.zeros((600, 800)))
    with pytest.raises(ValueError):
        extract_patch(img, (10, 10))


def test_extract_patch_ramp_matches_loop_crop():
    xs = np.arange(800) / 800.0
    img = GrayImage(np.tile(xs, (600, 1)))
    p = extract_patch(img, (400, 300))
    for r in range(64):
        for c in range(64):
            assert p.pixels[r, c] == img.values[300 - 32 + r, 400 - 32 + c]


@given(st.integers(32, 68), st.integers(32, 58))
def test_extract_patch_lossless(cx, cy):
    v = np.random.default_rng(cx * 1000 + cy).uniform(size=(90, 100))
    p = extract_patch(GrayImage(v), (cx, cy))
    assert np.array_equal(p.pixels, v[cy - 32:cy + 32, cx - 32:cx + 32])


def test_patch_shape_enforced():
    with pytest.raises(ValueError):
        Patch(np.zeros((63, 64)), "a", (0, 0))


def _write_dataset(tmp_path, n_train=3, n_test=2):
    (tmp_path / "img").mkdir()
    records = []
    for i in range(n_train + n_test):
        name = f"img/{i}.png"
        save_image(GrayImage(np.full((70, 80), i / 10.0)), tmp_path / name)
        lm = LandmarkSet(np.arange(8).reshape(4, 2) + i, (i == 0, False, False, True))
        records.append((name, lm, "train" if i < n_train else "test", None))
    write_manifest(tmp_path / "m.txt", records)
    return tmp_path / "m.txt", records


def test_load_dataset_round_trip(tmp_path):
    path, records = _write_dataset(tmp_path)
    m = load_dataset(path)
    assert len(m.train) == 3 and len(m.test) == 2
    for e, (name, lm, split, _) in zip(m.entries, records):
        assert e.image_id == name and e.landmarks == lm and e.split == split
    assert load_dataset(path) == m
    img = load_image(m.entries[2].image_path)
    assert abs(img.values[0, 0] - 0.2) < 1 / 255


@pytest.mark.parametrize("line, needle", [
    ("img/0.png;1,2,3,4,5,6;0,0,0,0;train", "entry 0"),
    ("img/0.png;1,2,3,4,5,6,7,8;0,0,0,0;train;", "entry 0"),
    ("img/0.png;1,2,3,4,5,6,7,8x;0,0,0,0;train", "entry 0"),
    ("img/0.png;1,2,3,4,5,6,7,8;0,0,2,0;train", "entry 0"),
    ("img/0.png;1,2,3,4,5,6,7,8;0,0,0,0;validation", "entry 0"),
    ("img/0.png;1,2,3,4,5,6,7,8;0,0,0,0;train;extra;junk", "entry 0"),
    ("missing.png;1,2,3,4,5,6,7,8;0,0,0,0;train", "image not found"),
])
def test_manifest_errors(tmp_path, line, needle):
    _write_dataset(tmp_path)
    path = tmp_path / "bad.txt"
    path.write_text(line + "\n")
    with pytest.raises(ManifestError, match=needle):
        load_dataset(path)


def test_manifest_error_names_later_entry(tmp_path):
    _write_dataset(tmp_path)
    path = tmp_path / "bad.txt"
    path.write_text("img/0.png;1,2,3,4,5,6,7,8;0,0,0,0;train\nimg/1.png;1,2,3;0,0,0,0;test\n")
    with pytest.raises(ManifestError, match="entry 1"):
        load_dataset(path)


def test_manifest_empty_and_missing(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# only a comment\n")
    with pytest.raises(ManifestError, match="empty dataset"):
        load_dataset(path)
    with pytest.raises(ManifestError, match="not found"):
        load_dataset(tmp_path / "nope.txt")


def test_manifest_rejects_duplicates(tmp_path):
    _write_dataset(tmp_path)
    path = tmp_path / "dup.txt"
    path.write_text("img/0.png;1,2,3,4,5,6,7,8;0,0,0,0;train\n" * 2)
    with pytest.raises(ManifestError, match="duplicate"):
        load_dataset(path)


def test_load_image_16bit(tmp_path):
    from PIL import Image
    arr = np.array([[0, 65535], [32768, 1000]], dtype=np.uint16)
    Image.fromarray(arr).save(tmp_path / "a.png")
    img = load_image(tmp_path / "a.png")
    assert img.values.max() == 1.0 and img.values.min() == 0.0
