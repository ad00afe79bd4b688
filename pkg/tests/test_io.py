import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from graphgp.errors import FileFormatError, ValidationError
from graphgp.gp import Hyperparameters, TrainingSet, posterior_predict
from graphgp.io import (
    ModelArtifact,
    artifact_from_json,
    artifact_to_json,
    edge_list_text,
    load_model,
    matrix_to_csv,
    parse_edge_list,
    parse_keyvalue,
    read_matrix,
    read_signals,
    save_model,
    write_signals,
)
from graphgp.kernels import BaselineGraphKernel, InputKernel, PolynomialGraphFilter


class TestCsv:
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                  elements=st.floats(allow_nan=False, allow_infinity=False)))
    @settings(max_examples=50, deadline=None)
    def test_roundtrip_exact(self, tmp_path_factory, A):
        path = tmp_path_factory.mktemp("csv") / "m.csv"
        write_signals(path, A)
        np.testing.assert_array_equal(read_signals(path), A)

    def test_header(self):
        assert matrix_to_csv(np.ones((1, 3)), "node").splitlines()[0] == "node_0,node_1,node_2"

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(FileFormatError):
            read_signals(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("node_0,node_1\n1,abc\n")
        with pytest.raises(FileFormatError):
            read_matrix(path, "node")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError):
            read_matrix(tmp_path / "absent.csv")

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(FileFormatError):
            write_signals(blocker / "sub" / "y.csv", np.ones((1, 1)))


class TestEdgeList:
    def test_roundtrip(self, sensor30):
        g = parse_edge_list(edge_list_text(sensor30))
        np.testing.assert_array_equal(g.adjacency, sensor30.adjacency)
        assert g.fingerprint() == sensor30.fingerprint()

    def test_comments_and_format(self):
        g = parse_edge_list("# a path\nnodes 3\n0 1 1.5\n# mid\n1 2 2\n")
        assert g.edges() == [(0, 1, 1.5), (1, 2, 2.0)]

    @pytest.mark.parametrize("text", ["0 1 1\n", "nodes 2\n0 2 1\n", "nodes 2\n0 1\n",
                                      "nodes x\n", "nodes 2\n0 0 1\n", ""])
    def test_malformed(self, text):
        with pytest.raises(FileFormatError):
            parse_edge_list(text)


class TestKeyValue:
    def test_parse(self):
        cfg = parse_keyvalue("# comment\ndegree = 3\nspectrum-hint general\nlr_beta=0.5 # inline\n")
        assert cfg == {"degree": "3", "spectrum_hint": "general", "lr_beta": "0.5"}

    def test_malformed(self):
        with pytest.raises(FileFormatError):
            parse_keyvalue("lonely\n")


def _model(kind, sensor30):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((6, 2))
    data = TrainingSet(X, rng.standard_normal((6, 30)))
    if kind == "poly":
        out = PolynomialGraphFilter([0.3, 1.1, -0.4])
        inp = InputKernel("se", 0.7, 1.0)
    elif kind == "baseline":
        out = BaselineGraphKernel("diffusion", 1.7)
        inp = InputKernel("se", 1.3, 2.2)
    else:
        out = PolynomialGraphFilter([1.0, -0.5])
        A = rng.standard_normal((8, 8))
        inp = InputKernel("precomputed", matrix=A @ A.T)
        data = TrainingSet(np.arange(6.0)[:, None], data.Y)
    h = Hyperparameters(out, inp, 0.17)
    return ModelArtifact(h, data, sensor30.fingerprint()), data


class TestModelArtifact:
    @pytest.mark.parametrize("kind", ["poly", "baseline", "precomputed"])
    def test_roundtrip_predictions(self, tmp_path, sensor30, kind):
        art, data = _model(kind, sensor30)
        save_model(tmp_path / "m.json", art)
        back = load_model(tmp_path / "m.json")
        Xs = np.array([[6.0], [7.0]]) if kind == "precomputed" else np.ones((2, 2))
        p1 = posterior_predict(art.hyperparameters, data, sensor30, Xs)
        p2 = posterior_predict(back.hyperparameters, back.training, sensor30, Xs)
        assert np.abs(p1.mean - p2.mean).max() <= 1e-12
        assert np.abs(p1.joint_covariance() - p2.joint_covariance()).max() <= 1e-12
        assert artifact_to_json(back) == artifact_to_json(art)

    def test_graph_check(self, sensor30, path2):
        art, _ = _model("poly", sensor30)
        art.check_graph(sensor30)
        with pytest.raises(ValidationError):
            art.check_graph(path2)

    def test_fields(self, sensor30):
        art, _ = _model("baseline", sensor30)
        doc = json.loads(artifact_to_json(art))
        assert doc["format_version"] == 1 and doc["convention"] == "node-fastest"
        assert doc["kernel"] == {"type": "baseline", "kind": "diffusion", "alpha": 1.7, "p": 1}
        assert doc["input_kernel"]["lengthscale"] == 1.3 and doc["noise"] == 0.17

    @pytest.mark.parametrize("mutate", [lambda d: d.update(format_version=99),
                                        lambda d: d.update(convention="signal-fastest"),
                                        lambda d: d.pop("kernel")])
    def test_rejects_bad_documents(self, sensor30, mutate):
        art, _ = _model("poly", sensor30)
        doc = json.loads(artifact_to_json(art))
        mutate(doc)
        with pytest.raises(FileFormatError):
            artifact_from_json(json.dumps(doc))

    def test_rejects_garbage(self):
        with pytest.raises(FileFormatError):
            artifact_from_json("{not json")
