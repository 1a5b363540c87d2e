import numpy as np
import pytest

from tabattack.data import minmax_normalize, synth_two_class
from tabattack.errors import DataError, FormatVersionError, ShapeError
from tabattack.vaegen import (
    VaeParams,
    cosine,
    decode,
    encode,
    generate_batch,
    generate_poisoned,
    init_vae,
    load_vae,
    loss_and_grads,
    save_vae,
    score_generation,
    train_vae,
    vae_loss,
)

SMALL = dict(widths=(32, 16), latent_dim=6, desk_scale=False)


def low_rank(n=600, d=40, rank=3, seed=0):
    """Data on a smooth low-dimensional manifold; isotropic noise has
    nothing for a VAE to compress."""
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(n, rank))
    A = rng.normal(size=(rank, d))
    X = np.tanh(0.6 * Z @ A) * 0.9 + 0.02 * rng.normal(size=(n, d))
    return np.clip(X, -1, 1)


@pytest.fixture(scope="module")
def manifold_vae():
    X = low_rank()
    vae = train_vae(X, VaeParams(input_dim=40, epochs=200, batch_size=32, seed=0, **SMALL))
    return vae, X


class TestLoss:
    def test_standard_normal_has_zero_kl(self):
        _, _, kld = vae_loss(np.ones(3), np.ones(3), np.zeros(4), np.zeros(4))
        assert kld == 0.0

    def test_perfect_reconstruction(self):
        _, rec, _ = vae_loss([0.2, -0.4], [0.2, -0.4], [0.0], [0.0])
        assert rec == 0.0

    def test_unit_mean_shift(self):
        assert vae_loss([0.0], [0.0], [1.0], [0.0])[2] == pytest.approx(0.5)

    def test_decomposition(self):
        rng = np.random.default_rng(0)
        total, rec, kld = vae_loss(rng.normal(size=(4, 5)), rng.normal(size=(4, 5)),
                                   rng.normal(size=(4, 2)), rng.normal(size=(4, 2)))
        assert total == rec + kld

    def test_mean_reconstruction_option(self):
        _, rec, _ = vae_loss([0.0, 0.0], [1.0, 3.0], [0.0], [0.0], reconstruction="mean")
        assert rec == pytest.approx(5.0)
        _, rec, _ = vae_loss([0.0, 0.0], [1.0, 3.0], [0.0], [0.0])
        assert rec == pytest.approx(10.0)

    def test_kl_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            mu, lv = rng.normal(scale=3, size=5), rng.normal(scale=3, size=5)
            assert vae_loss([0.0], [0.0], mu, lv)[2] >= 0

    def test_errors(self):
        with pytest.raises(DataError):
            vae_loss([np.inf], [0.0], [0.0], [0.0])
        with pytest.raises(ShapeError):
            vae_loss([0.0, 1.0], [0.0], [0.0], [0.0])


class TestGradients:
    @pytest.mark.parametrize("reconstruction", ["sum", "mean"])
    def test_finite_differences(self, reconstruction):
        params = VaeParams(input_dim=7, widths=(6, 5), latent_dim=3, desk_scale=False, seed=2,
                           reconstruction=reconstruction)
        vae = init_vae(params)
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, (5, 7))
        eps = rng.standard_normal((5, 3))
        _, _, _, grads = loss_and_grads(vae, X, eps)
        h = 1e-5
        checked, worst = 0, 0.0
        for li, (W, b) in enumerate(vae.weights):
            for which, arr in ((0, W), (1, b)):
                for flat in rng.choice(arr.size, min(2, arr.size), replace=False):
                    idx = np.unravel_index(flat, arr.shape)
                    old = arr[idx]
                    arr[idx] = old + h
                    lp = loss_and_grads(vae, X, eps)[0]
                    arr[idx] = old - h
                    lm = loss_and_grads(vae, X, eps)[0]
                    arr[idx] = old
                    num = (lp - lm) / (2 * h)
                    ana = grads[li][which][idx]
                    worst = max(worst, abs(num - ana) / max(abs(num) + abs(ana), 1e-8))
                    checked += 1
        assert checked >= 10
        assert worst < 1e-3


class TestTraining:
    def test_loss_decreases_on_synth(self):
        X = minmax_normalize(synth_two_class(300, 50, 0.5, seed=1))
        vae = train_vae(X, VaeParams(input_dim=50, epochs=20, seed=0))
        assert vae.loss_curve[-1] < vae.loss_curve[0]
        assert min(vae.kld_curve) >= 0

    def test_memorises_a_single_vector(self):
        x = np.linspace(-0.8, 0.8, 20) * np.cos(np.arange(20))
        vae = train_vae(np.tile(x, (200, 1)),
                        VaeParams(input_dim=20, widths=(16,), latent_dim=4, desk_scale=False,
                                  epochs=100, batch_size=20, seed=0))
        rec = decode(vae, encode(vae, x).mu)
        assert np.mean((rec - x) ** 2) < 0.01

    def test_deterministic(self):
        X = low_rank(80, 10)
        p = VaeParams(input_dim=10, widths=(8,), latent_dim=3, desk_scale=False, epochs=3)
        a, b = train_vae(X, p), train_vae(X, p)
        np.testing.assert_array_equal(a.weights[0][0], b.weights[0][0])
        assert a.loss_curve == b.loss_curve

    def test_out_of_range_rejected(self):
        with pytest.raises(DataError):
            train_vae(np.full((4, 3), 2.0), VaeParams(input_dim=3, **SMALL))

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            train_vae(np.zeros((4, 3)), VaeParams(input_dim=5, **SMALL))

    def test_desk_scale_architecture(self):
        widths, latent = VaeParams(input_dim=500).architecture()
        assert widths == [500, 380, 285, 190, 121] and latent == 119
        full = VaeParams(input_dim=500, desk_scale=False).architecture()
        assert full == ([2100, 1600, 1200, 800, 512], 500)


class TestGeneration:
    def test_encode_determinism(self, manifold_vae):
        vae, X = manifold_vae
        a, b, c = encode(vae, X[0], 1), encode(vae, X[0], 1), encode(vae, X[0], 2)
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.mu, c.mu)
        assert not np.array_equal(a.z, c.z)
        assert a.mu.shape == a.log_var.shape == a.z.shape == (6,)

    def test_endpoints_are_decoded_means(self, manifold_vae):
        vae, X = manifold_vae
        s, t = X[0], X[1]
        np.testing.assert_array_equal(generate_poisoned(vae, s, t, 100, 0),
                                      decode(vae, encode(vae, s).mu))
        np.testing.assert_array_equal(generate_poisoned(vae, s, t, 100, 99),
                                      decode(vae, encode(vae, t).mu))

    def test_generated_resembles_target(self, manifold_vae):
        vae, X = manifold_vae
        wins = 0
        for i in range(50):
            s, t = X[2 * i], X[2 * i + 1]
            g = generate_poisoned(vae, s, t, 100, 99)
            wins += cosine(g, t) > cosine(g, s)
        assert wins >= 45

    def test_bad_position(self, manifold_vae):
        vae, X = manifold_vae
        with pytest.raises(ValueError):
            generate_poisoned(vae, X[0], X[1], 10, 10)

    def test_width_mismatch(self, manifold_vae):
        with pytest.raises(ShapeError):
            encode(manifold_vae[0], np.zeros(3))

    def test_batch(self, manifold_vae):
        vae, X = manifold_vae
        batch, elapsed = generate_batch(vae, X[:5], X[5:10])
        assert batch.shape == (5, 40) and elapsed >= 0


class TestScore:
    def test_identical(self):
        x = np.random.default_rng(0).uniform(-1, 1, (6, 15))
        q = score_generation(x, x, 0.25)
        assert (q.mse, q.ssim, q.cosine, q.ttg_seconds, q.n) == (0.0, 1.0, pytest.approx(1.0), 0.25, 6)

    def test_negated(self):
        x = np.random.default_rng(1).uniform(0.1, 1, (3, 15))
        assert score_generation(x, -x, 0.0).cosine == pytest.approx(-1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            score_generation(np.zeros((2, 3)), np.zeros((3, 3)), 0.0)


class TestPersistence:
    def test_round_trip(self, tmp_path, manifold_vae):
        vae, X = manifold_vae
        back = load_vae(save_vae(vae, tmp_path / "v.npz"))
        np.testing.assert_array_equal(decode(back, encode(back, X[3]).mu),
                                      decode(vae, encode(vae, X[3]).mu))
        assert back.params == vae.params

    def test_version_refused(self, tmp_path, manifold_vae):
        path = save_vae(manifold_vae[0], tmp_path / "v.npz")
        data = dict(np.load(path))
        data["format_version"] = np.array(42)
        np.savez(path, **data)
        with pytest.raises(FormatVersionError):
            load_vae(path)
