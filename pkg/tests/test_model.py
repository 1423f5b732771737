import random

import numpy as np
import pytest

from eqsearch import autodiff as ad
from eqsearch import expr as ex
from eqsearch import model as md


def t(text):
    return ex.parse(text)


def small_model(seed=0):
    cfg = md.ModelConfig(memory_dim=4, hidden_sizes=(5,))
    return md.Model(cfg, seed=seed)


class TestConfig:
    def test_defaults(self):
        cfg = md.ModelConfig()
        assert cfg.input_dim == 6 and cfg.branching == 2
        assert cfg.memory_dim == 32
        assert cfg.hidden_sizes == (128, 64, 32)
        assert cfg.num_classes == 8

    def test_fixed_dims_enforced(self):
        with pytest.raises(ValueError):
            md.ModelConfig(input_dim=7)
        with pytest.raises(ValueError):
            md.ModelConfig(branching=3)
        with pytest.raises(ValueError):
            md.ModelConfig(num_classes=9)


class TestInit:
    def test_shapes(self):
        cfg = md.ModelConfig(memory_dim=8, hidden_sizes=(10, 4))
        params = md.init_params(cfg, seed=1)
        assert params["W_i"].shape == (6, 8)
        assert params["U_f_21"].shape == (8, 8)
        assert params["b_o"].shape == (8,)
        assert params["C_W0"].shape == (16, 10)
        assert params["C_W1"].shape == (10, 4)
        assert params["C_W2"].shape == (4, 8)
        # one W/U/b per gate, four forget U blocks, classifier stack
        assert len(params) == 4 * 2 + 6 + 4 + 3 * 2

    def test_deterministic_and_bounded(self):
        cfg = md.ModelConfig(memory_dim=16)
        a = md.init_params(cfg, seed=3)
        b = md.init_params(cfg, seed=3)
        for name in a:
            assert np.array_equal(a[name].data, b[name].data)
            assert np.all(np.abs(a[name].data) <= 1.0 / np.sqrt(16))
        c = md.init_params(cfg, seed=4)
        assert not np.array_equal(a["W_i"].data, c["W_i"].data)


def reference_unit(params, x, h1, c1, h2, c2):
    """Straight-line transcription of the cell equations in plain numpy."""
    def s(v):
        return 1.0 / (1.0 + np.exp(-v))

    def pre(g, u1, u2):
        return (x @ params[f"W_{g}"].data + h1 @ params[u1].data
                + h2 @ params[u2].data + params[f"b_{g}"].data)

    i = s(pre('i', "U_i_1", "U_i_2"))
    o = s(pre('o', "U_o_1", "U_o_2"))
    u = np.tanh(pre('u', "U_u_1", "U_u_2"))
    f1 = s(pre('f', "U_f_11", "U_f_12"))
    f2 = s(pre('f', "U_f_21", "U_f_22"))
    c = i * u + f1 * c1 + f2 * c2
    return c, o * np.tanh(c)


class TestUnit:
    def test_matches_reference(self):
        model = small_model(seed=5)
        rng = np.random.default_rng(7)
        x = rng.normal(size=(3, 6))
        h1, c1, h2, c2 = (rng.normal(size=(3, 4)) for _ in range(4))
        c, h = md.tree_lstm_unit(model.params, ad.constant(x),
                                 ad.constant(h1), ad.constant(c1),
                                 ad.constant(h2), ad.constant(c2))
        c_ref, h_ref = reference_unit(model.params, x, h1, c1, h2, c2)
        assert np.allclose(c.data, c_ref, atol=1e-12)
        assert np.allclose(h.data, h_ref, atol=1e-12)

    def test_zero_params_give_zero_states(self):
        cfg = md.ModelConfig(memory_dim=4, hidden_sizes=(5,))
        model = md.Model(cfg, params=md.zero_params(cfg))
        h = md.embed(t("(* a (F (+ b c)))"), model)
        assert np.allclose(h.data, 0.0)
        logits = md.classify(h, h, model)
        assert np.allclose(logits.data, 0.0)

    def test_forget_gates_differ_per_slot(self):
        # swapping the children must change the cell state in general
        model = small_model(seed=9)
        rng = np.random.default_rng(11)
        x = rng.normal(size=6)
        h1, c1, h2, c2 = (rng.normal(size=4) for _ in range(4))
        c_a, _ = md.tree_lstm_unit(model.params, ad.constant(x),
                                   ad.constant(h1), ad.constant(c1),
                                   ad.constant(h2), ad.constant(c2))
        c_b, _ = md.tree_lstm_unit(model.params, ad.constant(x),
                                   ad.constant(h2), ad.constant(c2),
                                   ad.constant(h1), ad.constant(c1))
        assert not np.allclose(c_a.data, c_b.data)


class TestBatchEmbed:
    def test_matches_serial(self):
        model = small_model(seed=1)
        rng = random.Random(13)
        exprs = [ex.gen_random_expr((2, 5), rng) for _ in range(12)]
        batch = md.batch_embed(exprs, model)
        for b, e in enumerate(exprs):
            serial = md.embed(e, model)
            assert np.max(np.abs(batch.data[b] - serial.data)) <= 1e-9

    def test_padding_is_inert(self):
        # the same lane gives bit-identical output whatever its batchmates
        model = small_model(seed=2)
        small = t("(F a)")
        big = t("(* (+ a b) (F (* (+ c a) (+ b c))))")
        alone = md.batch_embed([small], model)
        padded = md.batch_embed([small, big], model)
        assert np.array_equal(alone.data[0], padded.data[0])

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            md.batch_embed([], small_model())

    def test_gradients_match_finite_differences(self):
        model = small_model(seed=3)
        exprs = [t("(F (+ a b))"), t("(* a (F c))")]
        names = ("W_i", "U_f_21", "b_u", "C_W0")
        params = [model.params[n] for n in names]

        def f():
            h = md.batch_embed(exprs, model)
            logits = md.classify(h, h, model)
            return ad.mean(ad.mul(logits, logits))

        report = ad.grad_check(f, params)
        assert report["passed"], report


class TestHeads:
    def test_classify_shape(self):
        model = small_model()
        rng = np.random.default_rng(17)
        h1 = ad.constant(rng.normal(size=(3, 4)))
        h2 = ad.constant(rng.normal(size=(3, 4)))
        assert md.classify(h1, h2, model).shape == (3, 8)

    def test_predict_distance_nonnegative_and_zero_on_equal(self):
        model = small_model(seed=4)
        a, b = t("(F (+ a b))"), t("(F (* b c))")
        assert md.predict_distance(a, a, model) == 0.0
        assert md.predict_distance(a, b, model) >= 0.0

    def test_predict_first_transformation_length(self):
        model = small_model(seed=4)
        logits = md.predict_first_transformation(
            t("(F (+ a b))"), t("(F (+ b a))"), model)
        assert logits.shape == (8,)

    def test_prediction_records_no_tape(self):
        model = small_model(seed=4)
        md.predict_distance(t("(F a)"), t("(F b)"), model)
        assert all(p.grad is None for p in model.param_list())


class TestSerialization:
    def test_round_trip_exact(self, tmp_path):
        model = small_model(seed=6)
        path = tmp_path / "model.txt"
        md.save_model(model, path)
        loaded = md.load_model(path)
        assert loaded.cfg == model.cfg
        for name, p in model.params.items():
            assert np.array_equal(loaded.params[name].data, p.data)

    def test_round_trip_preserves_predictions(self, tmp_path):
        model = small_model(seed=7)
        path = tmp_path / "model.txt"
        md.save_model(model, path)
        loaded = md.load_model(path)
        a, b = t("(F (+ a b))"), t("(* a (F c))")
        assert (md.predict_distance(a, b, loaded)
                == md.predict_distance(a, b, model))

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("something-else 1\n")
        with pytest.raises(md.FormatError):
            md.load_model(path)

    def test_rejects_future_version(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.txt"
        md.save_model(model, path)
        text = path.read_text().replace("eqsearch-model 1", "eqsearch-model 99", 1)
        path.write_text(text)
        with pytest.raises(md.VersionMismatchError):
            md.load_model(path)

    def test_rejects_truncated(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.txt"
        md.save_model(model, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:len(lines) // 2]) + "\n")
        with pytest.raises(md.FormatError):
            md.load_model(path)

    def test_rejects_missing_tensor(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.txt"
        md.save_model(model, path)
        lines = path.read_text().splitlines()
        # drop the last tensor block entirely
        cut = max(i for i, ln in enumerate(lines) if ln.startswith("tensor"))
        path.write_text("\n".join(lines[:cut]) + "\n")
        with pytest.raises(md.FormatError):
            md.load_model(path)
