"""Acceptance criteria 1-11.

Each test records a single PASS/FAIL line (shown in the terminal summary) and
then asserts it. Expensive synthetic fits are cached per module so that
criteria sharing data (recovery, saturation, noise, positivity) reuse them.
"""

import filecmp
import time
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphgp.cli import main
from graphgp.gp import (
    Hyperparameters,
    KroneckerFactor,
    TrainingSet,
    full_covariance,
    icm_gram_oracle,
    kron_solve_and_logdet,
    log_marginal_likelihood,
    output_gram,
    posterior_predict,
    test_log_likelihood,
)
from graphgp.graph import random_graph
from graphgp.kernels import (
    BaselineGraphKernel,
    InputKernel,
    PolynomialGraphFilter,
    scale_polynomial,
)
from graphgp.learner import fit_baseline, fit_polynomial, free_parameters, nll_gradient
from graphgp.synth import (
    BANDPASS,
    LOWPASS_TAYLOR,
    GroundTruthFilter,
    generate_filtered_signals,
    generate_wishart_dataset,
)

from conftest import random_connected_graph, random_psd
from test_gp import dense_condition
from test_learner import finite_difference

SEEDS = range(10)
REQUIRED_SEEDS = 8
GRID = np.linspace(0.0, 1.0, 1001)
POSITIVITY_TOL = 1e-8
IDENTITY = InputKernel("identity")

TARGETS = {
    "lowpass": (LOWPASS_TAYLOR, 2, "lowpass"),
    "bandpass": (BANDPASS, 3, "general"),
}
GRAPHS = {
    "sensor": ("sensor", {"n": 30}),
    "ba": ("barabasi_albert", {"n": 30, "m0": 10, "m": 5}),
}

# every constrained fit made in this module: (label, min_i g(lam_i))
FIT_MINIMA = {}


def sup_distance(beta, theta):
    """Sup-norm gap between the max-scaled spectra over [0, 1]."""
    a, _ = scale_polynomial(PolynomialGraphFilter(beta))
    b, _ = scale_polynomial(PolynomialGraphFilter(theta))
    return float(np.abs(a(GRID) - b(GRID)).max())


@lru_cache(maxsize=None)
def graph_for(kind, seed):
    name, params = GRAPHS[kind]
    return random_graph(name, params, seed=seed)


def filtered_fit(kind, target, seed, degree=None, snr_db=10.0):
    """Constrained fit on N=50 filtered signals; returns (report, sup distance)."""
    return _filtered_fit(kind, target, seed, degree or TARGETS[target][1], float(snr_db))


@lru_cache(maxsize=None)
def _filtered_fit(kind, target, seed, degree, snr_db):
    theta, _, hint = TARGETS[target]
    g = graph_for(kind, seed)
    ds = generate_filtered_signals(g, GroundTruthFilter(theta), 50, snr_db, seed)
    rep = fit_polynomial(ds.training_set(), g, degree, spectrum_hint=hint, input_kernel=IDENTITY)
    FIT_MINIMA[(kind, target, seed, degree, snr_db)] = rep.min_spectrum
    return rep, sup_distance(rep.hyperparameters.output.coefficients, theta)


def recovery(kind, target, tol):
    start = time.perf_counter()
    dists = [filtered_fit(kind, target, s)[1] for s in SEEDS]
    elapsed = time.perf_counter() - start
    hits = sum(d <= tol for d in dists)
    ok = hits >= REQUIRED_SEEDS and elapsed < 300
    detail = (f"{target} on {kind}: {hits}/10 seeds within {tol} "
              f"(sup {np.round(dists, 3).tolist()}), {elapsed:.0f} s")
    return ok, detail


class TestKroneckerFastPath:
    def test_criterion_1(self, acceptance):
        start = time.perf_counter()
        worst = 0.0

        def rel(a, b):
            return float(np.linalg.norm(np.ravel(a - b)) / max(np.linalg.norm(np.ravel(b)), 1e-300))

        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            N, M, T = int(rng.integers(1, 9)), int(rng.integers(2, 11)), int(rng.integers(1, 4))
            noise = float(rng.uniform(0.05, 1.0))
            # arbitrary PSD factors: solve, log-determinant and marginal likelihood
            K, G = random_psd(rng, N, int(rng.integers(1, N + 1))), random_psd(rng, M)
            Y = rng.standard_normal((N, M))
            S = full_covariance(K, G, noise)
            x, logdet = kron_solve_and_logdet(K, G, noise, Y.ravel())
            worst = max(worst, rel(x, np.linalg.solve(S, Y.ravel())),
                        abs(logdet - np.linalg.slogdet(S)[1]) / abs(np.linalg.slogdet(S)[1]))
            lml = KroneckerFactor.from_matrices(K, G, noise).log_marginal_likelihood(Y)
            dense = -0.5 * (Y.ravel() @ np.linalg.solve(S, Y.ravel()) + np.linalg.slogdet(S)[1]
                            + N * M * np.log(2 * np.pi))
            worst = max(worst, abs(lml - dense) / abs(dense))
            # posterior with a precomputed PSD input kernel and a random polynomial filter
            g = random_connected_graph(rng, M)
            C = random_psd(rng, N + T)
            h = Hyperparameters(PolynomialGraphFilter(rng.uniform(-2, 2, int(rng.integers(1, 4)))),
                                InputKernel("precomputed", matrix=C), noise)
            data = TrainingSet(np.arange(N, dtype=float)[:, None], Y)
            Xs = np.arange(N, N + T, dtype=float)[:, None]
            post = posterior_predict(h, data, g, Xs)
            mean, cov = dense_condition(C, output_gram(h, g), noise, N, Y)
            worst = max(worst, rel(post.mean.ravel(), mean), rel(post.joint_covariance(), cov))
            lml_fast = log_marginal_likelihood(h, data, g)
            lml_dense = log_marginal_likelihood(h, data, g, method="dense")
            worst = max(worst, abs(lml_fast - lml_dense) / abs(lml_dense))
        elapsed = time.perf_counter() - start
        ok = worst <= 1e-7 and elapsed < 10
        assert acceptance(1, ok, f"20 instances, worst relative error {worst:.2e}, {elapsed:.1f} s")


class TestGradient:
    def test_criterion_2(self, acceptance):
        start = time.perf_counter()
        worst = 0.0
        for seed in range(20):
            rng = np.random.default_rng(2000 + seed)
            N, M = int(rng.integers(2, 7)), int(rng.integers(3, 9))
            g = random_connected_graph(rng, M)
            beta = rng.uniform(0.2, 2.0, int(rng.integers(1, 5)))
            h = Hyperparameters(PolynomialGraphFilter(beta),
                                InputKernel("se", float(rng.uniform(0.5, 3.0)), 1.0),
                                float(rng.uniform(0.05, 1.0)))
            data = TrainingSet(rng.standard_normal((N, 2)), rng.standard_normal((N, M)))
            names = free_parameters(h)
            _, grad = nll_gradient(h, data, g, names)
            analytic = np.array([grad[n] for n in names])
            numeric = finite_difference(h, data, g, names)
            worst = max(worst, float(np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)))
        elapsed = time.perf_counter() - start
        ok = worst <= 1e-4 and elapsed < 30
        assert acceptance(2, ok, f"20 instances, worst relative error {worst:.2e}, {elapsed:.1f} s")


@pytest.mark.slow
class TestRecovery:
    def test_criterion_3_lowpass(self, acceptance):
        assert acceptance(3, *recovery("sensor", "lowpass", 0.15))

    def test_criterion_4_bandpass(self, acceptance):
        assert acceptance(4, *recovery("sensor", "bandpass", 0.15))


@pytest.mark.slow
class TestDegreeSaturation:
    def test_criterion_5(self, acceptance):
        hits, ratios = 0, []
        for s in SEEDS:
            lml = {P: filtered_fit("sensor", "lowpass", s, degree=P)[0].log_marginal_likelihood
                   for P in (1, 2, 4)}
            gain12, gain24 = lml[2] - lml[1], lml[4] - lml[2]
            ratios.append(gain24 / gain12)
            hits += gain24 < 0.2 * gain12
        ok = hits >= REQUIRED_SEEDS
        assert acceptance(5, ok, f"{hits}/10 seeds with gain(2->4) < 0.2 gain(1->2), "
                                 f"ratios {np.round(ratios, 3).tolist()}")


@pytest.mark.slow
class TestAdaptivity:
    def test_criterion_7(self, acceptance):
        start = time.perf_counter()
        hits, margins = 0, []
        N, n_train = 60, 30
        for s in SEEDS:
            g = graph_for("sensor", s)
            ds = generate_wishart_dataset(g, GroundTruthFilter(BANDPASS), N, seed=s)
            train = ds.training_set(slice(0, n_train))
            ik = InputKernel("precomputed", matrix=ds.input_covariance)
            rep = fit_polynomial(train, g, 3, spectrum_hint="general", input_kernel=ik)
            FIT_MINIMA[("wishart", s)] = rep.min_spectrum
            models = {
                "poly": rep.hyperparameters,
                "standard": fit_baseline(train, g, BaselineGraphKernel("standard"), input_kernel=ik),
                "global": fit_baseline(train, g, BaselineGraphKernel("global_filtering"),
                                       input_kernel=ik),
            }
            folds = np.array_split(np.arange(n_train, N), 10)
            score = {name: np.mean([test_log_likelihood(posterior_predict(h, train, g, ds.X[f]),
                                                        ds.Y[f]) for f in folds])
                     for name, h in models.items()}
            margin = score["poly"] - max(score["standard"], score["global"])
            margins.append(margin)
            hits += margin > 0
        elapsed = time.perf_counter() - start
        ok = hits >= REQUIRED_SEEDS and elapsed < 900
        assert acceptance(7, ok, f"{hits}/10 seeds beat both baselines, margins "
                                 f"{np.round(margins, 2).tolist()}, {elapsed:.0f} s")


class TestICM:
    def test_criterion_8(self, acceptance):
        worst = 0.0
        rng = np.random.default_rng(8)
        for _ in range(20):
            M = int(rng.integers(2, 12))
            B = rng.standard_normal((M, M))
            worst = max(worst, float(np.abs(icm_gram_oracle(B) - B @ B.T).max()))
        assert acceptance(8, worst <= 1e-12, f"20 random B, max deviation {worst:.1e}")


@pytest.mark.slow
class TestNoiseDegradation:
    def test_criterion_9(self, acceptance):
        hits = 0
        for s in SEEDS:
            lml = [filtered_fit("sensor", "lowpass", s, snr_db=snr)[0].log_marginal_likelihood
                   for snr in (20.0, 10.0, 5.0, 0.0)]
            hits += bool(np.all(np.diff(lml) < 0))
        ok = hits >= REQUIRED_SEEDS
        assert acceptance(9, ok, f"{hits}/10 seeds monotone over SNR 20,10,5,0 dB")


@pytest.mark.slow
class TestBarabasiAlbert:
    def test_criterion_10(self, acceptance):
        ok_low, low = recovery("ba", "lowpass", 0.2)
        ok_band, band = recovery("ba", "bandpass", 0.2)
        assert acceptance(10, ok_low and ok_band, f"{low}; {band}")


@pytest.mark.slow
class TestPositivity:
    """Runs after the synthetic fits above so their minima are included."""

    @given(seed=st.integers(0, 2**16), degree=st.integers(1, 4),
           theta=st.lists(st.floats(-3, 3), min_size=1, max_size=5),
           snr=st.sampled_from([None, 20.0, 5.0]))
    @settings(max_examples=15, deadline=None)
    def test_random_fits(self, seed, degree, theta, snr):
        if not np.any(np.abs(theta) > 1e-3):
            theta = [1.0]
        g = random_graph("sensor", {"n": 12, "k": 4}, seed=seed)
        ds = generate_filtered_signals(g, GroundTruthFilter(theta), 15, snr, seed)
        hint = "lowpass" if degree <= 2 else "general"
        rep = fit_polynomial(ds.training_set(), g, degree, spectrum_hint=hint, input_kernel=IDENTITY)
        FIT_MINIMA[("property", seed, degree, tuple(theta), snr)] = rep.min_spectrum
        assert rep.min_spectrum >= -POSITIVITY_TOL

    def test_criterion_6(self, acceptance):
        if not any(key[0] in GRAPHS for key in FIT_MINIMA):
            for s in SEEDS:
                filtered_fit("sensor", "lowpass", s)
                filtered_fit("sensor", "bandpass", s)
        worst = min(FIT_MINIMA.values())
        ok = worst >= -POSITIVITY_TOL
        assert acceptance(6, ok, f"{len(FIT_MINIMA)} constrained fits, "
                                 f"smallest g(lambda_i) {worst:.3e}")


def _pipeline():
    steps = [
        ["synth", "--graph", "sensor:30", "--filter", "bandpass", "--mode", "wishart",
         "--n", "40", "--holdout", "20", "--seed", "11", "--out", "data"],
        ["fit", "--graph", "edgelist:data/graph.edges", "--signals", "data/signals.csv",
         "--inputs", "data/inputs.csv", "--input-kernel", "precomputed",
         "--input-cov", "data/input_cov.csv", "--degree", "3", "--spectrum-hint", "general",
         "--seed", "11", "--out", "fit"],
        ["eval", "--model", "fit/model.json", "--graph", "edgelist:data/graph.edges",
         "--signals", "data/signals_test.csv", "--inputs", "data/inputs_test.csv",
         "--folds", "10", "--seed", "11", "--out", "eval"],
        ["spectrum", "--model", "fit/model.json", "--graph", "edgelist:data/graph.edges",
         "--seed", "11", "--out", "spectrum"],
    ]
    return [main(argv) for argv in steps]


class TestReproducibility:
    def test_criterion_11(self, acceptance, tmp_path, monkeypatch):
        runs = []
        for name in ("first", "second"):
            (tmp_path / name).mkdir()
            monkeypatch.chdir(tmp_path / name)
            assert _pipeline() == [0, 0, 0, 0]
            runs.append(tmp_path / name)
        files = sorted(p.relative_to(runs[0]) for p in runs[0].rglob("*") if p.is_file())
        differing = [str(f) for f in files
                     if not (runs[1] / f).is_file()
                     or not filecmp.cmp(runs[0] / f, runs[1] / f, shallow=False)]
        extra = {p.relative_to(runs[1]) for p in runs[1].rglob("*") if p.is_file()} - set(files)
        ok = not differing and not extra and len(files) > 0
        assert acceptance(11, ok, f"{len(files)} files compared, differing {differing or 'none'}")
