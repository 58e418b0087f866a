"""JSON model, scheme and quantized-model files.

Model file::

    {"activation": "relu",
     "layers": [{"weights": [[1.2, -0.2], [-0.7, 0.8]], "bias": [0, 0]}, ...]}

Scheme file (or the ``scheme`` key of a quantized-model file)::

    {"weights": ["±", 4, 2], "bias": ["±", 4, 2],
     "input": ["+", 4, 4], "hidden": ["+", 4, 2]}

Floats are written with ``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import Network, QuantizationError, QuantizedNetwork, QuantScheme


def network_to_dict(net: Network) -> dict:
    return {
        "activation": "relu",
        "layers": [{"weights": w.tolist(), "bias": b.tolist()} for w, b in zip(net.weights, net.biases)],
    }


def network_from_dict(d: dict) -> Network:
    act = d.get("activation", "relu")
    if act != "relu":
        raise QuantizationError(f"unsupported activation {act!r}")
    try:
        layers = d["layers"]
        return Network(tuple(l["weights"] for l in layers), tuple(l["bias"] for l in layers))
    except (KeyError, TypeError) as e:
        raise QuantizationError(f"malformed model document: {e}") from None


def quantized_to_dict(qnet: QuantizedNetwork) -> dict:
    return {
        "activation": "relu",
        "quantized": True,
        "scheme": qnet.scheme.to_dict(),
        "layers": [{"weights": w.tolist(), "bias": b.tolist()} for w, b in zip(qnet.weights, qnet.biases)],
    }


def quantized_from_dict(d: dict) -> QuantizedNetwork:
    if not d.get("quantized"):
        raise QuantizationError("document is not a quantized network")
    layers = d["layers"]
    return QuantizedNetwork(
        tuple(l["weights"] for l in layers),
        tuple(l["bias"] for l in layers),
        QuantScheme.from_dict(d["scheme"]),
    )


def _dump(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def _load(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise QuantizationError(f"{path}: not valid JSON ({e})") from None


def save_network(net: Network, path) -> None:
    _dump(network_to_dict(net), path)


def load_network(path) -> Network:
    return network_from_dict(_load(path))


def save_quantized(qnet: QuantizedNetwork, path) -> None:
    _dump(quantized_to_dict(qnet), path)


def load_quantized(path) -> QuantizedNetwork:
    return quantized_from_dict(_load(path))


def save_scheme(scheme: QuantScheme, path) -> None:
    _dump(scheme.to_dict(), path)


def load_scheme(spec: str) -> QuantScheme:
    """Read a scheme from a JSON file path, or parse it inline (``w=±,4,2;b=...``)."""
    p = Path(spec)
    if p.suffix == ".json" or p.is_file():
        return QuantScheme.from_dict(_load(p))
    return QuantScheme.parse(spec)
