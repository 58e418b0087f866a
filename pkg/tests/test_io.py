import json

import numpy as np
import pytest

from quanterr.io import (
    load_network,
    load_quantized,
    load_scheme,
    network_from_dict,
    save_network,
    save_quantized,
    save_scheme,
)
from quanterr.model import QuantizationError
from conftest import random_instances


def test_network_roundtrip_exact(tmp_path):
    for net, qnet, _, _ in random_instances(10, seed=3):
        save_network(net, tmp_path / "n.json")
        back = load_network(tmp_path / "n.json")
        for a, b in zip(net.weights + net.biases, back.weights + back.biases):
            assert np.array_equal(a, b)
        save_quantized(qnet, tmp_path / "q.json")
        qb = load_quantized(tmp_path / "q.json")
        assert qb.scheme == qnet.scheme
        assert all(np.array_equal(a, b) for a, b in zip(qnet.weights, qb.weights))


def test_scheme_file_and_inline(tmp_path, pair):
    _, qnet = pair
    save_scheme(qnet.scheme, tmp_path / "s.json")
    assert load_scheme(str(tmp_path / "s.json")) == qnet.scheme
    assert load_scheme("w=±,4,2;b=±,4,2;in=+,4,4;h=+,4,2") == qnet.scheme


def test_rejects_other_activations():
    with pytest.raises(QuantizationError):
        network_from_dict({"activation": "tanh", "layers": [{"weights": [[1.0]], "bias": [0.0]}]})


def test_rejects_malformed(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(QuantizationError):
        load_network(tmp_path / "bad.json")
    with pytest.raises(QuantizationError):
        network_from_dict({"layers": [{"weights": [[1.0]]}]})
    (tmp_path / "plain.json").write_text(json.dumps({"layers": [{"weights": [[1.0]], "bias": [0.0]}]}))
    with pytest.raises(QuantizationError):
        load_quantized(tmp_path / "plain.json")
