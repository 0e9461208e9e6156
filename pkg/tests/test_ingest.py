import logging

import numpy as np
import pytest
from PIL import Image

from mitensor.errors import CorruptImage, EmptyDataset, FileNotReadable, UnsupportedFormat
from mitensor.ingest import ClassLabel, GrayImage, load_dataset, load_image, load_manifest_csv, scan_dataset
from synth import write_png


def test_class_label_order_and_codes():
    assert [int(c) for c in ClassLabel] == [0, 1, 2, 3]
    assert ClassLabel.NON_DEMENTED < ClassLabel.VERY_MILD_DEMENTED < ClassLabel.MILD_DEMENTED < ClassLabel.MODERATE_DEMENTED
    assert [c.dirname for c in ClassLabel] == ["NonDemented", "VeryMildDemented", "MildDemented", "ModerateDemented"]


@pytest.mark.parametrize("text,expected", [
    ("MildDemented", ClassLabel.MILD_DEMENTED),
    ("moderate_demented", ClassLabel.MODERATE_DEMENTED),
    ("1", ClassLabel.VERY_MILD_DEMENTED),
])
def test_class_label_parse(text, expected):
    assert ClassLabel.parse(text) is expected


def test_class_label_parse_rejects_unknown():
    with pytest.raises(ValueError):
        ClassLabel.parse("Demented")


def test_gray_image_rejects_negative_and_nan():
    with pytest.raises(ValueError):
        GrayImage(np.array([[-1.0]]))
    with pytest.raises(ValueError):
        GrayImage(np.array([[np.nan, 1.0]]))
    img = GrayImage([[1, 2, 3], [4, 5, 6]])
    assert (img.width, img.height) == (3, 2)
    assert img.pixels.size == img.width * img.height


def test_load_white_pixel(tmp_path):
    p = write_png(tmp_path / "w.png", [[255]])
    img = load_image(p)
    assert (img.width, img.height) == (1, 1)
    assert img.pixels[0, 0] == 255.0


def test_load_red_pixel_uses_bt601_luma(tmp_path):
    p = tmp_path / "red.png"
    Image.new("RGB", (1, 1), (255, 0, 0)).save(p)
    assert load_image(p).pixels[0, 0] == pytest.approx(76.245, abs=1e-9)


def test_load_rgba_and_palette(tmp_path):
    p = tmp_path / "rgba.png"
    Image.new("RGBA", (2, 1), (0, 255, 0, 10)).save(p)
    assert load_image(p).pixels[0].tolist() == pytest.approx([0.587 * 255] * 2)
    q = tmp_path / "pal.png"
    Image.new("RGB", (1, 1), (0, 0, 255)).convert("P").save(q)
    assert load_image(q).pixels[0, 0] == pytest.approx(0.114 * 255)


def test_load_jpeg_grayscale(tmp_path):
    p = tmp_path / "g.jpg"
    Image.new("L", (8, 8), 128).save(p, quality=95)
    img = load_image(p)
    assert img.pixels.shape == (8, 8)
    assert np.all(np.abs(img.pixels - 128) <= 2)


def test_load_16bit_png_is_rescaled(tmp_path):
    p = tmp_path / "deep.png"
    Image.fromarray(np.array([[65535, 0]], dtype=np.uint16)).save(p)
    assert load_image(p).pixels.tolist() == [[255.0, 0.0]]


def test_truncated_file_is_corrupt(tmp_path):
    p = write_png(tmp_path / "ok.png", np.arange(64 * 64, dtype=np.uint32).reshape(64, 64) % 251)
    data = p.read_bytes()
    bad = tmp_path / "bad.png"
    bad.write_bytes(data[: len(data) // 2])
    with pytest.raises(CorruptImage):
        load_image(bad)
    stub = tmp_path / "stub.png"
    stub.write_bytes(data[:12])
    with pytest.raises(CorruptImage):
        load_image(stub)


def test_missing_and_unsupported(tmp_path):
    with pytest.raises(FileNotReadable):
        load_image(tmp_path / "nope.png")
    txt = tmp_path / "notes.png"
    txt.write_text("hello")
    with pytest.raises(UnsupportedFormat):
        load_image(txt)
    bmp = tmp_path / "a.bmp"
    Image.new("L", (2, 2)).save(bmp)
    with pytest.raises(UnsupportedFormat):
        load_image(bmp)


def test_decoding_is_deterministic(tmp_path):
    rng = np.random.default_rng(3)
    p = write_png(tmp_path / "r.png", rng.integers(0, 256, size=(9, 7)))
    assert np.array_equal(load_image(p).pixels, load_image(p).pixels)


def test_scan_single_class(tmp_path):
    for name in ("b.png", "a.png"):
        write_png(tmp_path / "NonDemented" / name, [[1]])
    m = scan_dataset(tmp_path)
    assert [e.path.name for e in m.entries] == ["a.png", "b.png"]
    assert m.labels() == [ClassLabel.NON_DEMENTED] * 2


def test_scan_ignores_unknown_dirs_and_other_files(tmp_path, caplog):
    write_png(tmp_path / "MildDemented" / "x.png", [[1]])
    write_png(tmp_path / "Other" / "y.png", [[1]])
    (tmp_path / "MildDemented" / "readme.txt").write_text("x")
    write_png(tmp_path / "MildDemented" / "deep" / "z.png", [[1]])
    with caplog.at_level(logging.WARNING):
        m = scan_dataset(tmp_path)
    assert [e.path.relative_to(tmp_path).as_posix() for e in m.entries] == ["MildDemented/deep/z.png", "MildDemented/x.png"]
    assert "Other" in caplog.text


def test_scan_order_is_lexicographic_across_classes(tmp_path):
    write_png(tmp_path / "VeryMildDemented" / "a.png", [[1]])
    write_png(tmp_path / "NonDemented" / "z.png", [[1]])
    write_png(tmp_path / "MildDemented" / "m.jpg", [[1]])
    rel = [e.path.relative_to(tmp_path).as_posix() for e in scan_dataset(tmp_path).entries]
    assert rel == sorted(rel)


def test_scan_empty_dataset(tmp_path):
    (tmp_path / "random").mkdir()
    with pytest.raises(EmptyDataset):
        scan_dataset(tmp_path)
    (tmp_path / "NonDemented").mkdir()
    with pytest.raises(EmptyDataset):
        scan_dataset(tmp_path)


def test_manifest_csv(tmp_path):
    write_png(tmp_path / "imgs" / "one.png", [[3]])
    csv_path = tmp_path / "manifest.csv"
    csv_path.write_text("path,label\nimgs/one.png,ModerateDemented\n")
    m = load_manifest_csv(csv_path)
    assert m.entries[0].label is ClassLabel.MODERATE_DEMENTED
    assert m.entries[0].path == tmp_path / "imgs" / "one.png"
    assert load_dataset(csv_path).entries == m.entries

    csv_path.write_text("path,label\nimgs/missing.png,MildDemented\n")
    with pytest.raises(FileNotReadable):
        load_manifest_csv(csv_path)
    csv_path.write_text("path,label\n")
    with pytest.raises(EmptyDataset):
        load_manifest_csv(csv_path)
