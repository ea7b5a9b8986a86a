import json
from collections import Counter

import numpy as np
import pytest

from conceptray.corpus import (
    BBoxAnnotation,
    CaseRecord,
    load_manifest,
    preprocess_image,
    save_image_png,
    save_manifest,
    split_dataset,
)
from conceptray.errors import ImageError, ManifestError


def make_records(label_counts: dict[str, int]) -> list[CaseRecord]:
    records = []
    i = 0
    for label, n in label_counts.items():
        for _ in range(n):
            records.append(
                CaseRecord(
                    case_id=f"r{i:06d}",
                    image_path=f"img/{i}.png",
                    report_path=f"rep/{i}.txt",
                    label=label,
                )
            )
            i += 1
    return records


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    from dataclasses import replace

    from conceptray.extraction import ConceptVector

    records = make_records({"Healthy": 2, "Pneumonia": 1})
    records[0] = replace(
        records[0],
        bboxes=(BBoxAnnotation("mass", 1, 2, 5, 9),),
        concept_vector=ConceptVector((1, 0, 1), "lexabc"),
        split="train",
    )
    path = tmp_path / "m.jsonl"
    save_manifest(records, path)
    loaded = load_manifest(path)
    assert loaded == records


def test_manifest_three_lines(tmp_path):
    path = tmp_path / "m.jsonl"
    save_manifest(make_records({"Healthy": 3}), path)
    assert len(load_manifest(path)) == 3


def test_manifest_missing_label_field(tmp_path):
    path = tmp_path / "m.jsonl"
    lines = [
        json.dumps({"case_id": "a", "image_path": "x", "report_path": "y", "label": "L"}),
        json.dumps({"case_id": "b", "image_path": "x", "report_path": "y"}),
    ]
    path.write_text("\n".join(lines))
    with pytest.raises(ManifestError, match="line 2.*label"):
        load_manifest(path)


def test_manifest_malformed_line_number(tmp_path):
    path = tmp_path / "m.jsonl"
    path.write_text('{"case_id": "a", "image_path": "x", "report_path": "y", "label": "L"}\nnot json\n')
    with pytest.raises(ManifestError, match="line 2"):
        load_manifest(path)


def test_manifest_duplicate_id(tmp_path):
    path = tmp_path / "m.jsonl"
    rec = {"case_id": "dup", "image_path": "x", "report_path": "y", "label": "L"}
    path.write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(ManifestError, match="'dup'"):
        load_manifest(path)


def test_manifest_bbox_validation(tmp_path):
    path = tmp_path / "m.jsonl"
    rec = {
        "case_id": "a",
        "image_path": "x",
        "report_path": "y",
        "label": "L",
        "bboxes": [{"label": "mass", "x0": 5, "y0": 1, "x1": 5, "y1": 4}],
    }
    path.write_text(json.dumps(rec) + "\n")
    with pytest.raises(ManifestError, match="degenerate"):
        load_manifest(path)


def test_manifest_count_matches_generator(small_corpus):
    assert len(load_manifest(small_corpus["manifest"])) == small_corpus["spec"].n_cases


# ---------------------------------------------------------------------------
# preprocess_image
# ---------------------------------------------------------------------------


def phantom(size=80, lo=0.2, hi=0.8, seed=0):
    rng = np.random.default_rng(seed)
    img = rng.uniform(lo, hi, (size, size))
    return img


def test_preprocess_crops_exact_black_margin(tmp_path):
    inner = phantom(60)
    img = np.zeros((80, 80))
    img[10:70, 10:70] = inner
    path = tmp_path / "img.png"
    save_image_png(img, path)
    tensor = preprocess_image(path, target_size=60)
    assert tensor.provenance["crop_box"] == [10, 10, 70, 70]
    assert tensor.pixels.shape == (60, 60)


def test_preprocess_borderless_crop_is_identity(tmp_path):
    img = phantom(64, lo=0.3, hi=0.9)
    path = tmp_path / "img.png"
    save_image_png(img, path)
    tensor = preprocess_image(path, target_size=64)
    assert tensor.provenance["crop_box"] == [0, 0, 64, 64]


def test_preprocess_constant_image_all_zero():
    img = np.full((64, 64), 0.5)
    tensor = preprocess_image(img, target_size=64)
    assert tensor.pixels.min() == tensor.pixels.max() == 0.0


def test_preprocess_range_and_normalization():
    tensor = preprocess_image(phantom(96), target_size=64)
    assert tensor.pixels.min() == 0.0
    assert tensor.pixels.max() == 1.0


def test_preprocess_idempotent_on_own_output():
    tensor = preprocess_image(phantom(96, lo=0.2, hi=0.9), target_size=64)
    again = preprocess_image(tensor.pixels, target_size=64)
    np.testing.assert_array_equal(tensor.pixels, again.pixels)


def test_preprocess_rgb_luminance(tmp_path):
    from PIL import Image

    rgb = np.zeros((64, 64, 3), dtype=np.uint8)
    rgb[:, :, 1] = 200
    path = tmp_path / "img.png"
    Image.fromarray(rgb, mode="RGB").save(path)
    tensor = preprocess_image(path, target_size=64)
    assert tensor.pixels.shape == (64, 64)


def test_preprocess_undecodable(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"this is not an image")
    with pytest.raises(ImageError, match="decode"):
        preprocess_image(path, target_size=64)


def test_preprocess_too_small_after_crop(tmp_path):
    img = np.zeros((64, 64))
    img[30:40, 30:40] = 0.8
    with pytest.raises(ImageError, match="after border crop"):
        preprocess_image(img, target_size=64)


# ---------------------------------------------------------------------------
# split_dataset
# ---------------------------------------------------------------------------


def test_split_balanced_divisible_exact():
    records = make_records({"A": 50, "B": 50})
    out = split_dataset(records, seed=3)
    counts = Counter(r.split for r in out)
    assert counts == {"train": 80, "val": 10, "test": 10}
    for label in ("A", "B"):
        per = Counter(r.split for r in out if r.label == label)
        assert per == {"train": 40, "val": 5, "test": 5}


def test_split_paper_scale_test_size():
    sizes = {"Healthy": 20000, "Lung Cancer": 4000, "Pneumonia": 3500,
             "Pleural Effusion": 4500, "Cardiomegaly": 2400, "Pneumothorax": 1493}
    records = make_records(sizes)
    assert len(records) == 35893
    out = split_dataset(records, seed=11)
    counts = Counter(r.split for r in out)
    assert counts["test"] in (3589, 3590)
    assert counts["val"] in (3589, 3590)
    for label, n in sizes.items():
        per = Counter(r.split for r in out if r.label == label)
        assert abs(per["test"] - n * 0.1) <= 1
        assert abs(per["val"] - n * 0.1) <= 1


def test_split_deterministic():
    records = make_records({"A": 37, "B": 23, "C": 11})
    a = split_dataset(records, seed=9)
    b = split_dataset(records, seed=9)
    assert a == b
    c = split_dataset(records, seed=10)
    assert a != c


def test_split_partition_total_disjoint():
    records = make_records({"A": 17, "B": 9, "C": 5})
    out = split_dataset(records, seed=2)
    assert len(out) == len(records)
    assert {r.case_id for r in out} == {r.case_id for r in records}
    assert all(r.split in ("train", "val", "test") for r in out)


def test_split_small_label_error():
    records = make_records({"A": 10, "B": 2})
    with pytest.raises(ManifestError, match="'B'"):
        split_dataset(records, seed=0)


def test_split_bad_ratios():
    with pytest.raises(ValueError, match="sum to 100"):
        split_dataset(make_records({"A": 10}), ratios=(70, 10, 10), seed=0)
