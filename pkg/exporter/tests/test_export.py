import numpy as np
import pytest

from featexport import (
    BackboneError,
    ExportManifest,
    ImageDecodeError,
    ManifestError,
    build_backbone,
    dense_width,
    export_features,
    load_image_tensor,
    read_manifest_csv,
)
from featexport.cli import main
from conftest import write_toy_image


def test_duplicate_images_get_identical_vectors(tmp_path):
    img = write_toy_image(tmp_path / "a.png", seed=3, lesion=True)
    twin = tmp_path / "b.png"
    twin.write_bytes(img.read_bytes())
    manifest = ExportManifest(
        entries=[(img, None), (twin, None)],
        backbone="tiny", weights="random", output=tmp_path / "out.feat", seed=1,
    )
    out = export_features(manifest)
    lines = out.read_text().splitlines()
    assert lines[0] == "lesionfeat v1"
    vec_a = lines[2].split()[2:]
    vec_b = lines[3].split()[2:]
    assert vec_a == vec_b  # textual equality means bit equality


def test_export_deterministic_across_runs(tmp_path):
    img = write_toy_image(tmp_path / "a.png", seed=5)
    m = dict(entries=[(img, 1)], backbone="tiny", weights="random", seed=7)
    out1 = export_features(ExportManifest(output=tmp_path / "o1.feat", **m))
    out2 = export_features(ExportManifest(output=tmp_path / "o2.feat", **m))
    assert out1.read_bytes() == out2.read_bytes()


def test_dim_header_read_from_dense_layer(tmp_path):
    model = build_backbone("vgg16", weights="random", seed=0)
    width = dense_width(model)
    assert width == model.classifier[0].out_features == 4096
    img = write_toy_image(tmp_path / "a.png", seed=1)
    manifest = ExportManifest(entries=[(img, None)], backbone="vgg16",
                              weights="random", output=tmp_path / "v.feat")
    out = export_features(manifest, model=model)
    header = out.read_text().splitlines()[:2]
    assert header == ["lesionfeat v1", "dim 4096"]


def test_emitted_file_parses_in_primary_package(tmp_path):
    lungcad = pytest.importorskip("lungcad")
    imgs = [
        (write_toy_image(tmp_path / "a.png", seed=1, lesion=True), 1),
        (write_toy_image(tmp_path / "b.png", seed=2), 0),
        (write_toy_image(tmp_path / "c.png", seed=3), None),
    ]
    manifest = ExportManifest(entries=imgs, backbone="tiny", weights="random",
                              output=tmp_path / "x.feat", seed=2)
    out = export_features(manifest)
    ff = lungcad.read_features(out)
    assert ff.dim == 64
    assert [r.label for r in ff.records] == [1, 0, None]
    assert all(np.isfinite(r.vector).all() for r in ff.records)


def test_labels_round_into_file(tmp_path):
    imgs = [
        (write_toy_image(tmp_path / "a.png", seed=1), 1),
        (write_toy_image(tmp_path / "b.png", seed=2), None),
    ]
    manifest = ExportManifest(entries=imgs, backbone="tiny", weights="random",
                              output=tmp_path / "x.feat")
    lines = export_features(manifest).read_text().splitlines()
    assert lines[2].split()[1] == "1"
    assert lines[3].split()[1] == "?"


def test_undecodable_image_reported(tmp_path):
    bogus = tmp_path / "junk.png"
    bogus.write_bytes(b"not an image at all")
    with pytest.raises(ImageDecodeError, match="undecodable"):
        load_image_tensor(bogus, 32)


def test_manifest_validation(tmp_path):
    img = write_toy_image(tmp_path / "a.png")
    with pytest.raises(ManifestError, match="no images"):
        ExportManifest(entries=[])
    with pytest.raises(ManifestError, match="exist"):
        ExportManifest(entries=[(tmp_path / "missing.png", 0)])
    with pytest.raises(ManifestError, match="label"):
        ExportManifest(entries=[(img, 7)])


def test_manifest_csv_parsing(tmp_path):
    img_a = write_toy_image(tmp_path / "a.png")
    img_b = write_toy_image(tmp_path / "b.png")
    csv_path = tmp_path / "m.csv"
    csv_path.write_text(f"{img_a},1\nb.png,\n")  # relative path resolved
    entries = read_manifest_csv(csv_path)
    assert entries[0] == (img_a, 1)
    assert entries[1] == (img_b, None)
    csv_path.write_text(f"{img_a},banana\n")
    with pytest.raises(ManifestError, match="label"):
        read_manifest_csv(csv_path)


def test_unknown_backbone_rejected():
    with pytest.raises(BackboneError, match="unknown backbone"):
        build_backbone("resnet99")


def test_cli_export_runs(tmp_path):
    img = write_toy_image(tmp_path / "a.png", seed=4, lesion=True)
    mpath = tmp_path / "m.csv"
    mpath.write_text(f"{img},1\n")
    out = tmp_path / "cli.feat"
    code = main(["export", "--manifest", str(mpath), "--out", str(out),
                 "--backbone", "tiny", "--weights", "random", "--seed", "3"])
    assert code == 0
    assert out.read_text().startswith("lesionfeat v1\ndim 64\n")


def test_cli_reports_errors(tmp_path, capsys):
    mpath = tmp_path / "m.csv"
    mpath.write_text("missing.png,1\n")
    code = main(["export", "--manifest", str(mpath), "--out", str(tmp_path / "x.feat"),
                 "--backbone", "tiny"])
    assert code == 1
    assert "error" in capsys.readouterr().err
