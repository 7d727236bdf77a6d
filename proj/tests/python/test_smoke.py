import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import typegan

DATA = Path(os.environ.get("TYPEGAN_TEST_DATA", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    src = typegan.open_font(str(DATA / "synth_glyf.ttf"))
    tgt = typegan.open_font(str(DATA / "synth_cff.otf"))
    cps = typegan.shared_codepoints(src, tgt)
    out = tmp_path_factory.mktemp("corpus")
    return typegan.render_corpus(src, tgt, cps, 32, str(out)), cps


def test_version():
    assert typegan.__version__ == "0.1.0"


def test_rasterize_range_and_shape():
    font = typegan.open_font(str(DATA / "synth_glyf.ttf"))
    cp = font.codepoints()[0]
    img = typegan.rasterize(font, cp, 32)
    assert img.shape == (32, 32, 3)
    assert img.min() >= -1.0 and img.max() <= 1.0
    assert img.min() < img.max()


def test_errors_carry_kind():
    with pytest.raises(typegan.TypeganError) as info:
        typegan.open_font(str(DATA / "not_a_font.ttf"))
    assert info.value.args[0] == "UnparsableFont"
    with pytest.raises(typegan.TypeganError) as info:
        typegan.open_font(str(DATA / "missing.ttf"))
    assert info.value.args[0] == "FileNotFound"


def test_planned_shapes_full_scale():
    plan = typegan.planned_shapes(typegan.ModelSpec.full(), 1)
    assert len(plan) == 21
    layer, src, out = plan[8]
    assert layer == "gen/deconv1"
    assert src == [1, 1, 1, 640]
    assert out == [1, 2, 2, 1024]
    assert plan[-1] == ("disc/fc", [1, 16, 16, 512], [1, 3])


def test_loss_closed_forms():
    zeros = np.zeros((4, 3))
    d, g = typegan.gan_losses(zeros, zeros, zeros)
    assert d == pytest.approx(math.log(3), abs=1e-12)
    assert g == pytest.approx(math.log(3), abs=1e-12)
    pattern = np.array([0.0, 1.0, 0.0, 1.0]).reshape(1, 2, 2, 1)
    assert typegan.tv_loss(pattern) == pytest.approx(0.5, abs=1e-12)
    a = np.full((2, 4, 4, 3), 0.25)
    assert typegan.pixel_l2(a, -a) == pytest.approx(0.25, abs=1e-12)
    assert typegan.const_loss(np.zeros((1, 1, 1, 8)), np.full((1, 1, 1, 8), 2.0)) == pytest.approx(4.0)


def test_pairing_policies(corpus):
    manifest, cps = corpus
    strong = typegan.build_pairs(manifest, cps, "strong")
    assert all(s == t for s, t in strong)
    soft = typegan.build_pairs(manifest, cps, "soft", seed=3)
    assert sorted(s for s, _ in soft) == sorted(cps)
    assert sorted(t for _, t in soft) == sorted(cps)
    assert any(s != t for s, t in soft)
    assert typegan.round_half_even(2.5) == 2
    assert typegan.round_half_even(3.5) == 4


def test_fit_generate_evaluate(corpus, tmp_path):
    manifest, _ = corpus
    pairs = tmp_path / "pairs"
    code, out, err = typegan.run_cli(
        ["pair", "--corpus", str(manifest), "--policy", "strong", "--train", "4", "--test", "2", "--out", str(pairs)]
    )
    assert code == 0, err
    train = next(pairs.rglob("train.jsonl"))

    config = json.loads(typegan.micro_config(32, 2))
    config["batch_size"] = 2
    ckpt_bytes, log = typegan.fit(json.dumps(config), str(train), 1, str(tmp_path / "run"))
    assert len(log) == 2
    assert all(math.isfinite(r["total_g"]) for r in log)
    ckpt = tmp_path / "run" / "checkpoint.tgck"
    assert ckpt.read_bytes() == ckpt_bytes
    assert "gen/conv1/kernel" in typegan.checkpoint_tensor_names(str(ckpt))

    images = np.zeros((3, 32, 32, 3))
    y1 = typegan.generate(str(ckpt), images)
    y2 = typegan.generate(str(ckpt), images)
    assert y1.shape == (3, 32, 32, 3)
    assert np.array_equal(y1, y2)
    assert np.abs(y1).max() <= 1.0

    mean_l2, n = typegan.evaluate(str(ckpt), str(train))
    assert n == 4
    assert 0.0 <= mean_l2 <= 4.0
