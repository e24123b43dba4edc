import numpy as np
import pytest

from lungcad import (
    ConfigError,
    ConfusionMatrix,
    FeatureRecord,
    ImageGrid,
    SegMask,
    builtin_descriptor,
    confusion_from_predictions,
    dice,
    load_image,
    load_model,
    metrics,
    normalize,
    parse_config,
    predict_score,
    read_features,
    save_image,
    stratified_split,
    write_features,
)
from lungcad import cli
from lungcad import pipeline as pl
from conftest import descriptor_records, write_flat_pgm, write_phantom_pgm


# --- metrics -------------------------------------------------------------------

def test_metrics_perfect():
    m = metrics(ConfusionMatrix(tp=5, tn=5))
    assert m["accuracy"] == 1.0 and m["sensitivity"] == 1.0 and m["specificity"] == 1.0


def test_metrics_sensitivity_absent_when_no_positives():
    m = metrics(ConfusionMatrix(tp=0, fn=0, tn=3, fp=1))
    assert m["sensitivity"] is None


def test_metrics_headline_rate():
    m = metrics(ConfusionMatrix(tp=48, tn=48, fp=2, fn=2))
    assert m["accuracy"] == 0.96


def test_metrics_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        metrics(ConfusionMatrix())


def test_metrics_integer_identity():
    cm = ConfusionMatrix(tp=7, fp=3, tn=11, fn=2)
    assert cm.correct == cm.tp + cm.tn
    assert metrics(cm)["accuracy"] * cm.total == cm.correct


def test_confusion_counts_negative_rejected():
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)


# --- config --------------------------------------------------------------------

def test_config_parses_typed_values():
    cfg = parse_config(
        """
        # clustering
        fcm.clusters = 2
        fcm.window = 5
        levelset.auto = false
        levelset.time_step = 0.05
        levelset.iterations = 9
        booster.rounds = 12
        classify.threshold = 0.75
        seed = 7
        out = results
        """
    )
    assert cfg.fcm_clusters == 2 and cfg.fcm_window == 5
    assert cfg.levelset_auto is False
    assert cfg.levelset_overrides == {"time_step": 0.05, "iterations": 9}
    assert cfg.booster_rounds == 12
    assert cfg.classify_threshold == 0.75
    assert cfg.seed == 7 and cfg.out_dir == "results"


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("fcm.clusterz = 2\n")


def test_config_bad_value_rejected():
    with pytest.raises(ConfigError, match="fcm.clusters"):
        parse_config("fcm.clusters = sausage\n")


def test_config_bad_bool_rejected():
    with pytest.raises(ConfigError, match="true or false"):
        parse_config("levelset.auto = yes\n")


def test_config_missing_equals_rejected():
    with pytest.raises(ConfigError, match="key = value"):
        parse_config("just some words\n")


# --- split ----------------------------------------------------------------------

def test_stratified_split_deterministic_and_stratified():
    labels = np.array([0] * 40 + [1] * 10)
    tr1, te1 = stratified_split(labels, 0.2, seed=3)
    tr2, te2 = stratified_split(labels, 0.2, seed=3)
    assert np.array_equal(tr1, tr2) and np.array_equal(te1, te2)
    assert len(set(tr1) & set(te1)) == 0
    assert len(tr1) + len(te1) == 50
    assert (labels[te1] == 1).sum() == 2  # 20% of each class
    assert (labels[te1] == 0).sum() == 8


# --- helpers for command tests -------------------------------------------------------

def _separable_records(n_per_class=25, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for i in range(2 * n_per_class):
        label = i % 2
        vec = rng.normal(0, 0.15, dim)
        vec[0] += 1.0 if label else -1.0
        records.append(FeatureRecord(f"s{i:03d}", label, vec))
    return records




# --- cmd_train ------------------------------------------------------------------------

def test_train_writes_model_and_metrics(tmp_path, capsys):
    feat = tmp_path / "train.feat"
    write_features(_separable_records(), feat)
    cfg = pl.PipelineConfig()
    code = pl.cmd_train(feat, cfg, out_dir=tmp_path / "out", seed=3)
    out = capsys.readouterr().out
    assert code == 0
    assert (tmp_path / "out" / "model.txt").exists()
    lines = dict(
        line.split(" ", 1) for line in out.strip().splitlines() if " " in line
    )
    assert float(lines["accuracy"]) >= 0.95
    assert "confusion" in out


def test_train_rerun_byte_identical(tmp_path, capsys):
    feat = tmp_path / "train.feat"
    write_features(_separable_records(seed=5), feat)
    cfg = pl.PipelineConfig()
    pl.cmd_train(feat, cfg, out_dir=tmp_path / "a", seed=9)
    first_out = capsys.readouterr().out
    pl.cmd_train(feat, cfg, out_dir=tmp_path / "b", seed=9)
    second_out = capsys.readouterr().out
    assert (tmp_path / "a" / "model.txt").read_bytes() == (tmp_path / "b" / "model.txt").read_bytes()
    assert first_out.replace(str(tmp_path / "a"), "") == second_out.replace(str(tmp_path / "b"), "")


def test_train_rejects_single_class(tmp_path):
    recs = [FeatureRecord(f"r{i}", 1, np.array([float(i), 0.0])) for i in range(10)]
    feat = tmp_path / "one.feat"
    write_features(recs, feat)
    with pytest.raises(ValueError, match="degenerate labels"):
        pl.cmd_train(feat, pl.PipelineConfig(), out_dir=tmp_path)


def test_train_rejects_unlabeled(tmp_path):
    recs = [
        FeatureRecord("a", 1, np.array([1.0])),
        FeatureRecord("b", None, np.array([0.0])),
        FeatureRecord("c", 0, np.array([-1.0])),
    ]
    feat = tmp_path / "u.feat"
    write_features(recs, feat)
    with pytest.raises(ValueError, match="unlabeled"):
        pl.cmd_train(feat, pl.PipelineConfig(), out_dir=tmp_path)


def test_train_checks_configured_dim(tmp_path):
    feat = tmp_path / "train.feat"
    write_features(_separable_records(dim=6), feat)
    cfg = pl.PipelineConfig(features_dim=9)
    with pytest.raises(ConfigError, match="dim"):
        pl.cmd_train(feat, cfg, out_dir=tmp_path)


# --- cmd_classify -----------------------------------------------------------------------

def _trained_model(tmp_path, capsys, dim=6, seed=3):
    feat = tmp_path / "train.feat"
    write_features(_separable_records(dim=dim, seed=1), feat)
    pl.cmd_train(feat, pl.PipelineConfig(), out_dir=tmp_path, seed=seed)
    capsys.readouterr()
    return tmp_path / "model.txt"


def test_classify_matches_library_predictions(tmp_path, capsys):
    model_path = _trained_model(tmp_path, capsys)
    model = load_model(model_path)
    recs = _separable_records(n_per_class=25, dim=6, seed=44)
    feat = tmp_path / "fresh.feat"
    write_features(recs, feat)
    code = pl.cmd_classify(model_path, features_path=feat)
    out = capsys.readouterr().out
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 50
    for line, rec in zip(lines, recs):
        rid, cls, score = line.split()
        assert rid == rec.id
        want = predict_score(model, rec.vector)
        assert score == repr(want)  # bit-for-bit agreement
        assert cls == ("1" if want >= 0.5 else "0")


def test_classify_no_tree_model_uses_base_score(tmp_path, capsys):
    from lungcad.boosting import BoostedModel, save_model

    model = BoostedModel(base_score=2.0, trees=[], learning_rate=0.3,
                         loss_kind="logistic", dim=1)
    mp = tmp_path / "m.txt"
    save_model(model, mp)
    feat = tmp_path / "f.feat"
    write_features([FeatureRecord("q", None, np.array([0.0]))], feat)
    pl.cmd_classify(mp, features_path=feat)
    rid, cls, score = capsys.readouterr().out.split()
    assert rid == "q" and cls == "1"
    assert float(score) == pytest.approx(1 / (1 + np.exp(-2.0)))


def test_classify_dim_mismatch(tmp_path, capsys):
    model_path = _trained_model(tmp_path, capsys, dim=6)
    feat = tmp_path / "wrong.feat"
    write_features([FeatureRecord("a", None, np.zeros(3))], feat)
    with pytest.raises(ConfigError, match="dim"):
        pl.cmd_classify(model_path, features_path=feat)


def test_classify_builtin_requires_matching_model(tmp_path, capsys):
    model_path = _trained_model(tmp_path, capsys, dim=6)
    img = tmp_path / "img.pgm"
    write_flat_pgm(img)
    with pytest.raises(ConfigError, match="144"):
        pl.cmd_classify(model_path, image_paths=[img], builtin=True)


# --- cmd_segment ------------------------------------------------------------------------

def test_segment_phantom_with_truth(tmp_path, capsys):
    img_path = tmp_path / "phantom.pgm"
    truth = write_phantom_pgm(img_path)
    truth_path = tmp_path / "truth.pgm"
    save_image(truth, truth_path)
    cfg = parse_config("fcm.clusters = 2\n")
    code = pl.cmd_segment(img_path, cfg, out_dir=tmp_path / "seg",
                          truth_path=truth_path, seed=5)
    out = capsys.readouterr().out
    assert code == 0
    mask_path = tmp_path / "seg" / "phantom.mask.pgm"
    overlay_path = tmp_path / "seg" / "phantom.overlay.pgm"
    assert mask_path.exists() and overlay_path.exists()
    values = dict(line.split(" ", 1) for line in out.strip().splitlines())
    assert float(values["dice"]) >= 0.95
    assert int(values["area"]) > 0 and int(values["iterations"]) > 0
    # the written mask agrees with the Dice we printed
    mask_img = load_image(mask_path)
    mask = SegMask(mask_img.width, mask_img.height, mask_img.values >= 128)
    assert dice(mask, truth) == float(values["dice"])


def test_segment_uniform_image_exits_2(tmp_path):
    img_path = tmp_path / "flat.pgm"
    write_flat_pgm(img_path)
    code = cli.main(["segment", str(img_path), "--out", str(tmp_path)])
    assert code == 2


def test_segment_zero_iterations_returns_clustering_mask(tmp_path, capsys):
    img_path = tmp_path / "phantom.pgm"
    write_phantom_pgm(img_path)
    cfg = parse_config("fcm.clusters = 2\nlevelset.iterations = 0\n")
    code = pl.cmd_segment(img_path, cfg, out_dir=tmp_path / "z", seed=5)
    capsys.readouterr()
    assert code == 0
    from lungcad import fcm_fit, select_lesion_cluster, spatial_regularize

    image = normalize(load_image(img_path))
    res = fcm_fit(image.values.ravel(), cfg.fcm_config(5))
    mm = spatial_regularize(res.memberships, 128, 128, 3)
    k = select_lesion_cluster(res)
    expected = mm.mu[:, k].reshape(128, 128) >= 0.5
    mask_img = load_image(tmp_path / "z" / "phantom.mask.pgm")
    assert np.array_equal(mask_img.values >= 128, expected)


# --- cmd_pipeline ------------------------------------------------------------------------



def _pipeline_setup(tmp_path, capsys):
    feat = tmp_path / "desc.feat"
    write_features(descriptor_records(), feat)
    pl.cmd_train(feat, pl.PipelineConfig(), out_dir=tmp_path, seed=2)
    capsys.readouterr()
    images = []
    t1 = tmp_path / "img_a.pgm"
    write_phantom_pgm(t1, seed=31)
    t2 = tmp_path / "img_b.pgm"
    write_phantom_pgm(t2, seed=32, radius=12.0)
    t3 = tmp_path / "img_c.pgm"
    write_flat_pgm(t3)
    images = [t1, t2, t3]
    return tmp_path / "model.txt", images


def test_pipeline_batch_segments_only_positives(tmp_path, capsys):
    model_path, images = _pipeline_setup(tmp_path, capsys)
    cfg = parse_config("fcm.clusters = 2\n")
    code = pl.cmd_pipeline(model_path, images, cfg, out_dir=tmp_path / "runs", seed=5)
    out = capsys.readouterr().out
    assert code == 0
    class_lines = [l for l in out.splitlines() if l.split()[0] in ("img_a", "img_b", "img_c")]
    assert len(class_lines) == 3
    mask_lines = [l for l in out.splitlines() if l.startswith("mask ")]
    assert len(mask_lines) == 2
    run_dir = tmp_path / "runs"
    assert (run_dir / "img_a.mask.pgm").exists()
    assert (run_dir / "img_b.mask.pgm").exists()
    assert not (run_dir / "img_c.mask.pgm").exists()


def test_pipeline_deterministic(tmp_path, capsys):
    model_path, images = _pipeline_setup(tmp_path, capsys)
    cfg = parse_config("fcm.clusters = 2\n")
    pl.cmd_pipeline(model_path, images, cfg, out_dir=tmp_path / "r1", seed=5)
    out1 = capsys.readouterr().out
    pl.cmd_pipeline(model_path, images, cfg, out_dir=tmp_path / "r2", seed=5)
    out2 = capsys.readouterr().out
    assert out1.replace("r1", "r2") == out2
    for name in ("img_a.mask.pgm", "img_b.mask.pgm", "img_a.overlay.pgm"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


# --- cmd_eval & CLI ----------------------------------------------------------------------

def test_eval_reports_metrics(tmp_path, capsys):
    model_path = _trained_model(tmp_path, capsys)
    feat = tmp_path / "eval.feat"
    write_features(_separable_records(seed=77), feat)
    code = pl.cmd_eval(model_path, feat)
    out = capsys.readouterr().out
    assert code == 0
    values = dict(line.split(" ", 1) for line in out.strip().splitlines())
    assert float(values["accuracy"]) >= 0.95


def test_cli_usage_error_is_exit_1(capsys):
    assert cli.main([]) == 1
    assert cli.main(["classify"]) == 1  # missing --model
    capsys.readouterr()


def test_cli_missing_file_is_exit_3(tmp_path, capsys):
    code = cli.main(["eval", "--model", str(tmp_path / "no.txt"),
                     "--features", str(tmp_path / "no.feat")])
    assert code == 3
    capsys.readouterr()


def test_cli_bad_config_is_exit_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nonsense.key = 1\n")
    img = tmp_path / "img.pgm"
    write_flat_pgm(img)
    code = cli.main(["segment", str(img), "--config", str(cfg)])
    assert code == 1
    capsys.readouterr()


def test_cli_happy_path_train_and_classify(tmp_path, capsys):
    feat = tmp_path / "train.feat"
    write_features(_separable_records(seed=15), feat)
    assert cli.main(["train", "--features", str(feat), "--out", str(tmp_path),
                     "--seed", "4"]) == 0
    capsys.readouterr()
    assert cli.main(["classify", "--model", str(tmp_path / "model.txt"),
                     "--features", str(feat)]) == 0
    out = capsys.readouterr().out
    assert len(out.strip().splitlines()) == 50


def test_cli_end_to_end_pipeline(tmp_path, capsys):
    feat = tmp_path / "desc.feat"
    write_features(descriptor_records(), feat)
    assert cli.main(["train", "--features", str(feat), "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    img = tmp_path / "scan.pgm"
    write_phantom_pgm(img, seed=41)
    cfgfile = tmp_path / "p.cfg"
    cfgfile.write_text("fcm.clusters = 2\n")
    code = cli.main(["pipeline", "--model", str(tmp_path / "model.txt"),
                     str(img), "--config", str(cfgfile),
                     "--out", str(tmp_path / "out"), "--seed", "5"])
    out = capsys.readouterr().out
    assert code == 0
    assert (tmp_path / "out" / "scan.mask.pgm").exists()
    assert out.splitlines()[0].startswith("scan 1 ")
