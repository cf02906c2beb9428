import numpy as np
import pytest

from freqnet.data import DatasetSplit, synth_spectral_dataset
from freqnet.gradcheck import CHECKS, TOLERANCE, numerical_gradient, rel_error, run_check
from freqnet.nn import (
    Adam,
    Conv2D,
    Dense,
    DimensionError,
    Dropout,
    ModelSpec,
    Placement,
    ReLU,
    SpecError,
    TrainConfig,
    TransformLayer,
    build_model,
    evaluate,
    loss_and_metrics,
    softmax_cross_entropy,
    train,
)
from freqnet.nn.model import ParamStore
from freqnet.transforms import dct_2d, wht2d


@pytest.mark.parametrize("name", CHECKS)
def test_gradcheck(name):
    for seed in (0, 1, 2):
        r = run_check(name, seed)
        assert r.max_rel_error < TOLERANCE, (name, seed, r.max_rel_error)


def test_identity_1x1_conv(rng):
    conv = Conv2D(3, 3, 1, rng=rng, dtype=np.float64)
    conv.params["kernel"][:] = np.eye(3)[None, None]
    x = rng.standard_normal((2, 4, 5, 3))
    np.testing.assert_array_equal(conv.forward(x), x)


def test_conv_matches_direct_loop(rng):
    conv = Conv2D(2, 3, 3, 2, rng=rng, dtype=np.float64)
    x = rng.standard_normal((1, 5, 6, 2))
    out = conv.forward(x)
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    k = conv.params["kernel"]
    assert out.shape == (1, 3, 3, 3)
    for i in range(3):
        for j in range(3):
            patch = xp[0, 2 * i:2 * i + 3, 2 * j:2 * j + 3, :]
            np.testing.assert_allclose(out[0, i, j], np.einsum("abc,abco->o", patch, k), atol=1e-12)


def test_relu_backward_gate():
    relu = ReLU()
    relu.forward(np.array([-1.0, 2.0]))
    np.testing.assert_array_equal(relu.backward(np.array([1.0, 1.0])), [0.0, 1.0])


def test_dropout_eval_identity_and_train_mask(rng):
    d = Dropout(0.5, seed=7, layer_id=3)
    x = rng.standard_normal((64, 32))
    np.testing.assert_array_equal(d.forward(x, training=False), x)
    d.step = 5
    a = d.forward(x, training=True)
    b = d.forward(x, training=True)
    np.testing.assert_array_equal(a, b)
    kept = a != 0
    assert 0.4 < kept.mean() < 0.6
    np.testing.assert_allclose(a[kept], 2 * x[kept])
    d.step = 6
    assert not np.array_equal(d.forward(x, training=True), a)


def test_layer_dimension_errors(rng):
    with pytest.raises(DimensionError, match="conv"):
        Conv2D(3, 4, rng=rng, name="conv").forward(np.zeros((1, 4, 4, 2)))
    with pytest.raises(DimensionError, match="dense"):
        Dense(5, 2, rng=rng, name="dense").forward(np.zeros((1, 4)))


def test_wht_layer_backward_is_wht(rng):
    layer = TransformLayer("wht")
    x = rng.standard_normal((2, 8, 4, 3))
    np.testing.assert_allclose(layer.forward(x), wht2d(x), atol=1e-12)
    g = rng.standard_normal(x.shape)
    np.testing.assert_allclose(layer.backward(g), wht2d(g), atol=1e-12)


def test_dct_layer_all_ones():
    out = TransformLayer("dct").forward(np.ones((1, 4, 4, 1)))
    assert abs(out[0, 0, 0, 0] - 4.0) < 1e-6
    np.testing.assert_allclose(out.ravel()[1:], 0, atol=1e-6)


def test_fft_layer_zero_input_zero_gradient(rng):
    layer = TransformLayer("fft")
    layer.forward(np.zeros((1, 4, 4, 2)))
    assert np.all(layer.backward(rng.standard_normal((1, 4, 4, 2))) == 0)


@pytest.mark.parametrize("kind", ["wht", "dct"])
def test_orthogonal_layers_preserve_slab_norm(kind, rng):
    x = rng.standard_normal((2, 32, 32, 3)).astype(np.float32)
    y = TransformLayer(kind).forward(x)
    nx = np.linalg.norm(x.astype(np.float64), axis=(1, 2))
    ny = np.linalg.norm(y.astype(np.float64), axis=(1, 2))
    assert np.max(np.abs(ny / nx - 1)) < 1e-5


def test_transform_layer_pads_and_crops(rng):
    x = rng.standard_normal((1, 6, 5, 2))
    for kind in ("wht", "fft", "dct"):
        assert TransformLayer(kind).forward(x).shape == x.shape
    np.testing.assert_allclose(TransformLayer("dct").forward(x), dct_2d(x), atol=1e-12)


# --- model ---------------------------------------------------------------------


def small_spec(**kw):
    base = dict(num_classes=4, widths=(4, 4, 8), blocks_per_stage=1, input_shape=(8, 8, 3), seed=3)
    base.update(kw)
    return ModelSpec(**base)


@pytest.mark.parametrize("kind", ["fft", "dct", "wht"])
@pytest.mark.parametrize("placement", ["input", "early", "early_and_late"])
def test_transform_layers_add_no_parameters(kind, placement):
    base = build_model(ModelSpec(num_classes=10))
    variant = build_model(ModelSpec(transform=kind, placement=placement, num_classes=10))
    assert variant.params.count() == base.params.count()
    for (n1, p1, _), (n2, p2, _) in zip(base.params.items(), variant.params.items()):
        assert n1 == n2
        np.testing.assert_array_equal(p1, p2)
    assert variant.macs_per_sample() == base.macs_per_sample()
    assert variant.transform_macs_per_sample() > 0 and base.transform_macs_per_sample() == 0


def test_topology_dump_placements():
    topo = build_model(ModelSpec(transform="wht", placement="early_and_late")).topology()
    lines = topo.strip().splitlines()
    names = [line.split()[1] for line in lines]
    assert sum("wht2d" in n for n in names) == 2
    assert names.index("wht2d_early") == names.index("stage1_block1") + 1
    assert names.index("wht2d_late") == names.index("stage3_block2") + 1
    for i, line in enumerate(lines):
        idx, name, shape, count = line.split()
        assert int(idx) == i and int(count) >= 0
        assert all(d.isdigit() for d in shape.split("x"))
    input_topo = build_model(ModelSpec(transform="dct", placement="input")).topology().splitlines()
    assert input_topo[0].split()[1:] == ["dct2d_input", "32x32x3", "0"]
    assert build_model(ModelSpec()).topology().count("2d_") == 0


def test_spec_validation():
    with pytest.raises(SpecError):
        build_model(ModelSpec(placement="early"))
    with pytest.raises(SpecError):
        build_model(ModelSpec(widths=(16, 0, 64)))
    with pytest.raises(ValueError):
        Placement.parse("middle")


def test_forward_softmax_rows(rng):
    net = build_model(ModelSpec(transform="fft", placement="early_and_late", num_classes=7))
    probs = net.predict(rng.uniform(0, 1, (2, 32, 32, 3)).astype(np.float32))
    assert probs.shape == (2, 7)
    assert np.all(probs >= 0)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_eval_forward_is_per_sample(rng):
    net = build_model(small_spec(transform="wht", placement="early"))
    x = rng.uniform(0, 1, (6, 8, 8, 3)).astype(np.float32)
    net.loss_and_grad(x, np.arange(6) % 4)  # populate running statistics
    full = net.forward(x)
    perm = rng.permutation(6)
    np.testing.assert_allclose(net.forward(x[perm]), full[perm], rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(net.forward(x[2:3]), full[2:3], rtol=1e-5, atol=1e-6)
    np.testing.assert_array_equal(net.forward(x), full)


def test_model_input_shape_error():
    with pytest.raises(ValueError, match="model input"):
        build_model(ModelSpec()).forward(np.zeros((1, 28, 28, 3), np.float32))


# --- loss ------------------------------------------------------------------------


def test_uniform_logits_loss():
    loss, acc = loss_and_metrics(np.zeros((5, 10)), np.arange(5))
    assert abs(loss - 2.302585) < 1e-6
    assert abs(loss - np.log(10)) < 1e-12


def test_confident_correct_logits():
    logits = np.full((3, 4), -50.0)
    labels = np.array([0, 3, 2])
    logits[np.arange(3), labels] = 50.0
    loss, acc = loss_and_metrics(logits, labels, l2_penalty=0.25)
    assert acc == 1.0 and abs(loss - 0.25) < 1e-12


def test_loss_gradient_finite_difference(rng):
    logits = rng.standard_normal((6, 5))
    labels = rng.integers(0, 5, 6)
    _, g = softmax_cross_entropy(logits, labels)
    num = numerical_gradient(lambda: softmax_cross_entropy(logits, labels)[0], logits)
    assert rel_error(g, num) < 1e-6


def test_loss_label_out_of_range():
    with pytest.raises(ValueError, match="index 1"):
        softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))


# --- adam ------------------------------------------------------------------------


class _Holder:
    def __init__(self, value, grad):
        self.params = {"w": np.array(value, dtype=np.float64)}
        self.grads = {"w": np.array(grad, dtype=np.float64)}

    def children(self):
        return []


def test_adam_zero_gradient():
    h = _Holder([1.0, -2.0], [0.0, 0.0])
    opt = Adam(lr=0.1)
    for _ in range(3):
        opt.step(ParamStore([("h", h)]))
    np.testing.assert_array_equal(h.params["w"], [1.0, -2.0])


def test_adam_first_step():
    for b1, b2 in ((0.9, 0.999), (0.5, 0.9)):
        h = _Holder(3.0, 1.0)
        Adam(lr=0.1, beta1=b1, beta2=b2).step(ParamStore([("h", h)]))
        # bias-corrected first step: lr * 1 / (1 + eps)
        assert abs(float(h.params["w"]) - (3.0 - 0.1 / (1 + 1e-7))) < 1e-12


def test_adam_determinism(rng):
    x = rng.uniform(0, 1, (8, 8, 8, 3)).astype(np.float32)
    y = np.arange(8) % 4
    finals = []
    for _ in range(2):
        net = build_model(small_spec())
        opt = Adam()
        for step in range(10):
            net.set_step(step)
            net.loss_and_grad(x, y)
            opt.step(net.params)
        finals.append(net.params.snapshot())
    for k in finals[0]:
        assert np.array_equal(finals[0][k], finals[1][k])


def test_adam_rejects_bad_lr():
    with pytest.raises(ValueError):
        Adam(lr=0)


# --- training --------------------------------------------------------------------


def test_train_zero_epochs():
    net = build_model(small_spec())
    before = net.params.snapshot()
    ds = DatasetSplit(np.zeros((4, 8, 8, 3), np.float32), np.arange(4), 4)
    params, records = train(net, ds, TrainConfig(epochs=0))
    assert records == []
    for k in before:
        np.testing.assert_array_equal(params[k], before[k])


def test_train_shape_mismatch_before_any_step():
    net = build_model(small_spec())
    before = net.params.snapshot()
    ds = DatasetSplit(np.zeros((4, 6, 6, 3), np.float32), np.arange(4), 4)
    with pytest.raises(DimensionError):
        train(net, ds, TrainConfig(epochs=1))
    for k, v in net.params.snapshot().items():
        np.testing.assert_array_equal(v, before[k])


@pytest.mark.parametrize("kind", [None, "fft", "dct", "wht"])
def test_first_epoch_reduces_loss(kind):
    ds = synth_spectral_dataset(48, 4, 0.05, seed=1)
    spec = ModelSpec(transform=kind, placement="none" if kind is None else "input", num_classes=4,
                     widths=(8, 8, 16), blocks_per_stage=1, seed=0)
    net = build_model(spec)
    init_loss, _, _ = evaluate(net, ds)
    train(net, ds, TrainConfig(epochs=1, batch_size=32, lr=3e-3, seed=0))
    after_loss, _, _ = evaluate(net, ds)
    assert after_loss < init_loss


def test_train_records_and_monotone_time():
    ds = synth_spectral_dataset(8, 4, 0.05, seed=2)
    net = build_model(ModelSpec(num_classes=4, widths=(4, 4, 4), blocks_per_stage=1))
    _, recs = train(net, ds, TrainConfig(epochs=2, batch_size=16), val_split=ds)
    assert [(r.epoch, r.split) for r in recs] == [(0, "train"), (0, "val"), (1, "train"), (1, "val")]
    assert all(b.wall_ms >= a.wall_ms >= 0 for a, b in zip(recs, recs[1:]))
    assert len({r.macs for r in recs if r.split == "train"}) == 1
