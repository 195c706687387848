"""JSON round-tripping for classifier rules backed by CPE models.

Rules built on oracle scorers (exact conditionals of a distribution) are
bound to in-memory objects and do not serialize; everything trained from
data does. Mixture documents embed one CPE document per component; loading
dedupes identical models so that large ensembles keep sharing one scorer.
"""

from __future__ import annotations

from confopt.confusion import (
    ClassifierRule,
    ConstantRule,
    GainMatrix,
    MixtureRule,
    WeightedArgmaxRule,
)
from confopt.cpe import CpeModel
from confopt.plugin import BinaryThresholdRule

__all__ = ["rule_to_json", "rule_from_json"]


def _cpe_doc(scorer) -> dict:
    if not isinstance(scorer, CpeModel):
        raise ValueError(
            f"only CPE-backed rules serialize; got scorer {type(scorer).__name__}"
        )
    return scorer.to_json()


def rule_to_json(rule: ClassifierRule, meta: dict | None = None) -> dict:
    if isinstance(rule, ConstantRule):
        doc: dict = {"kind": "constant", "dist": [float(v) for v in rule.dist]}
    elif isinstance(rule, WeightedArgmaxRule):
        doc = {
            "kind": "weighted_argmax",
            "gain": rule.gain.to_json(),
            "cpe": _cpe_doc(rule.scorer),
        }
    elif isinstance(rule, BinaryThresholdRule):
        doc = {
            "kind": "binary_threshold",
            "t": rule.threshold,
            "cpe": _cpe_doc(rule.scorer),
        }
    elif isinstance(rule, MixtureRule):
        doc = {
            "kind": "mixture",
            "weights": [float(w) for w in rule.weights],
            "components": [rule_to_json(c) for c in rule.components],
        }
    else:
        raise ValueError(f"cannot serialize rule of type {type(rule).__name__}")
    if meta is not None:
        doc["meta"] = meta
    return doc


def _load_cpe(doc: dict, cache: dict) -> CpeModel:
    key = (int(doc["n"]), int(doc["d"]), tuple(doc["weights"]))
    model = cache.get(key)
    if model is None:
        model = CpeModel.from_json(doc)
        cache[key] = model
    return model


def rule_from_json(doc: dict, _cache: dict | None = None) -> ClassifierRule:
    cache: dict = {} if _cache is None else _cache
    kind = doc.get("kind")
    if kind == "constant":
        return ConstantRule(doc["dist"])
    if kind == "weighted_argmax":
        return WeightedArgmaxRule(GainMatrix.from_json(doc["gain"]), _load_cpe(doc["cpe"], cache))
    if kind == "binary_threshold":
        return BinaryThresholdRule(_load_cpe(doc["cpe"], cache), float(doc["t"]))
    if kind == "mixture":
        comps = [rule_from_json(c, cache) for c in doc["components"]]
        return MixtureRule(doc["weights"], comps)
    raise ValueError(f"unknown rule kind {kind!r}")
