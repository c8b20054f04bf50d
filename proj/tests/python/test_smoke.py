import math

import numpy as np
import pytest

import distillnn as dn

TINY = """[run]
seed = 3
[teacher]
epochs = 3
hidden = 16,16
[student]
epochs = 2
[dataset]
train_size = 200
eval_size = 100
{extra}
[metrics]
timing_repeats = 2
timing_warmup = 1
"""


def write_config(tmp_path, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(TINY.format(extra=extra))
    return path


def test_version_and_defaults():
    assert dn.__version__
    text = dn.print_defaults()
    assert "[sampler]" in text
    assert "m = 5" in text


def test_metric_examples():
    assert dn.bald(np.array([[0.9, 0.1], [0.5, 0.5]])) == pytest.approx(0.10175, abs=5e-6)
    assert dn.epistemic_variance(np.array([[1.0], [3.0]]))[0] == pytest.approx(1.0)
    total = dn.total_variance(np.array([[1.0], [3.0]]), np.log(np.array([[0.5], [1.5]])))
    assert total[0] == pytest.approx(2.0)
    errs = np.array([0.1, 0.5, 0.2, 0.9])
    assert dn.ause(errs, errs) == pytest.approx(0.0, abs=1e-15)
    assert dn.ece_regression(np.zeros(50)) == pytest.approx(math.sqrt(8555 / 27000))
    assert dn.js_distance(np.zeros(20), np.ones(20)) == pytest.approx(1.0)


def test_generators_are_seeded():
    a = dn.gen_regression(50, split="gap", seed=4)
    b = dn.gen_regression(50, split="gap", seed=4)
    np.testing.assert_array_equal(a["x"], b["x"])
    assert np.all(np.abs(a["x"]) < 0.5)
    c = dn.gen_classification(40, num_classes=4, split="train", held_out={3}, seed=1)
    assert c["x"].shape == (40, 2)
    assert 3 not in set(c["labels"].tolist())


def test_regression_pipeline(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert dn.train_teacher(config=cfg, out=out) == 0
    assert dn.distill(config=cfg, out=out, teacher=out / "teacher.ckpt") == 0
    assert dn.evaluate(config=cfg, out=out, student=out / "student.ckpt") == 0
    assert (out / "student_report.txt").exists()

    x = np.linspace(-2, 2, 7)
    mu, logvar = dn.student_predict(out / "student.ckpt", x)
    assert mu.shape == (7, 1) and logvar.shape == (7, 1)
    samples = dn.teacher_predict(out / "teacher.ckpt", x, samples=4, seed=1)
    assert samples["mu"].shape == (4, 7, 1)
    assert samples["logvar"].shape == (4, 7, 1)


def test_contract_errors_raise(tmp_path):
    with pytest.raises(dn.ContractError):
        dn.train_teacher(config=tmp_path / "missing.cfg", seed=1)
    with pytest.raises(dn.ContractError):
        dn.ablate("depth", config=write_config(tmp_path))
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert dn.train_teacher(config=cfg, out=out) == 0
    with pytest.raises(dn.ContractError):
        dn.outlier_eval(config=cfg, out=out, teacher=out / "teacher.ckpt", student=out / "teacher.ckpt")
