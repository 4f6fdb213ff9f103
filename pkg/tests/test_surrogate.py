import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gridid import surrogate
from gridid.diffcore import Rng, directional_derivative
from gridid.gridsim import Normalization
from gridid.surrogate import MlpParams

H = surrogate.DEFAULT_HIDDEN


def oracle(vec, t, p, hidden=H):
    """Plain loops over the flat layout."""
    out = np.zeros(2)
    for j in range(hidden):
        z = vec[2 * j] * t + vec[2 * j + 1] * p + vec[2 * hidden + j]
        a = np.tanh(z)
        for k in range(2):
            out[k] += vec[3 * hidden + k * hidden + j] * a
    out += vec[5 * hidden:5 * hidden + 2]
    return out


def test_layout_size():
    assert surrogate.n_params(20) == 102


def test_zero_network_outputs_zero():
    p = MlpParams.from_flat(np.zeros(surrogate.n_params()))
    assert np.array_equal(surrogate.forward(p, np.linspace(-1, 1, 7), 0.3), np.zeros((7, 2)))


def test_constant_bias_network():
    v = np.zeros(surrogate.n_params())
    v[-2:] = (0.4, -1.3)
    p = MlpParams.from_flat(v)
    assert np.array_equal(surrogate.forward(p, 0.7, -0.2), [0.4, -1.3])
    assert np.array_equal(surrogate.time_derivative(p, np.linspace(0, 1, 5), 0.1), np.zeros((5, 2)))


def test_forward_matches_loop_oracle():
    r = Rng(1)
    for _ in range(20):
        p = surrogate.init_params(r, "prior_sample")
        v = p.flatten()
        for t, pm in r.uniform(-1, 1, (5, 2)):
            assert np.max(np.abs(surrogate.forward(p, t, pm) - oracle(v, t, pm))) < 1e-12


def test_time_derivative_matches_finite_differences():
    r = Rng(2)
    for _ in range(20):
        p = surrogate.init_params(r, "prior_sample")
        t = r.uniform(-1, 1, 8)
        h = 1e-5
        fd = (surrogate.forward(p, t + h, 0.3) - surrogate.forward(p, t - h, 0.3)) / (2 * h)
        exact = surrogate.time_derivative(p, t, 0.3)
        assert np.max(np.abs(exact - fd)) < 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_time_scale_chain_rule():
    p = surrogate.init_params(Rng(3))
    t = np.linspace(-1, 1, 9)
    norm = Normalization({"t": 2.5}, {"t": 2.5})
    s = norm.scale["t"]
    assert np.array_equal(surrogate.time_derivative(p, t, 0.0, s),
                          surrogate.time_derivative(p, t, 0.0) / s)
    # against physical time through the normalisation map
    tp = norm.decode("t", t)
    h = 1e-5
    fd = (surrogate.forward(p, norm.encode("t", tp + h), 0.0)
          - surrogate.forward(p, norm.encode("t", tp - h), 0.0)) / (2 * h)
    assert np.max(np.abs(surrogate.time_derivative(p, t, 0.0, s) - fd)) < 1e-6


def test_time_derivative_is_the_forward_mode_jvp():
    p = surrogate.init_params(Rng(4))
    t = np.linspace(-1, 1, 11)
    layers = (p.W1, p.b1, p.W2, p.b2)
    jvp = directional_derivative(lambda x: surrogate.apply(layers, x, np.full(11, 0.2)), t,
                                 np.ones(11))
    assert np.array_equal(surrogate.time_derivative(p, t, 0.2), jvp)


def test_prior_sample_moments():
    r = Rng(5)
    draws = np.array([surrogate.init_params(r.child(i)).flatten() for i in range(10_000)])
    std = draws.std(axis=0)
    assert np.all((std > 0.97) & (std < 1.03))


def test_init_is_deterministic():
    a = surrogate.init_params(Rng(9), "small_uniform").flatten()
    b = surrogate.init_params(Rng(9), "small_uniform").flatten()
    assert np.array_equal(a, b)


def test_small_uniform_bounds():
    for seed in range(50):
        p = surrogate.init_params(Rng(seed), "small_uniform", 20)
        assert np.all(np.abs(p.W1) <= 0.5 / np.sqrt(2))
        assert np.all(np.abs(p.W2) <= 0.5 / np.sqrt(20))


def test_unknown_scheme_and_bad_params():
    with pytest.raises(ValueError):
        surrogate.init_params(Rng(0), "xavier")
    v = np.zeros(surrogate.n_params())
    v[0] = np.nan
    with pytest.raises(ValueError):
        MlpParams.from_flat(v)
    with pytest.raises(ValueError):
        MlpParams.from_flat(np.zeros(7))


@given(arrays(np.float64, surrogate.n_params(5), elements=st.floats(-1e6, 1e6)))
def test_flatten_roundtrip(v):
    assert np.array_equal(MlpParams.from_flat(v, 5).flatten(), v)


def test_lipschitz_in_time():
    r = Rng(6)
    for i in range(100):
        p = surrogate.init_params(r.child(i))
        bound = np.linalg.norm(p.W2, 2) * np.linalg.norm(p.W1[:, 0])
        t = np.linspace(-1, 1, 201)
        y = surrogate.forward(p, t, 0.5)
        slope = np.abs(np.diff(y, axis=0)).max(axis=0) / (t[1] - t[0])
        assert slope.max() <= bound + 1e-12


def test_checkpoint_roundtrip(tmp_path):
    p = surrogate.init_params(Rng(7))
    norm = Normalization({"t": 2.5, "P_m": 0.0}, {"t": 2.5, "P_m": 0.1})
    path = surrogate.save_checkpoint(tmp_path / "net.json", p, norm, {"note": "x"})
    q, n2, doc = surrogate.load_checkpoint(path)
    assert np.array_equal(q.flatten(), p.flatten()) and n2 == norm
    assert doc["activation"] == "tanh" and doc["layers"] == [[2, 20], [20, 2]]
