"""Plot-ready payload builders for explanation documents.

These functions consume the JSON explanation document (a plain dict) and emit
deterministic, renderer-agnostic payloads.  No drawing happens here.
"""

from __future__ import annotations

from .errors import ConfigError

KINDS = ("network", "force", "waterfall", "nsii-stacks")


def _scores_for_order(doc: dict, order: int) -> list[dict]:
    entries = doc.get("scores", {}).get(str(order))
    if entries is None:
        raise ConfigError(f"document lacks order-{order} scores required by this plot kind")
    return entries


def _feature_label(doc: dict, index: int) -> str:
    names = doc.get("instance", {}).get("feature_names")
    if names and 0 <= index < len(names):
        return names[index]
    return f"x{index}"


def _all_entries(doc: dict) -> list[dict]:
    out = []
    for order in sorted(int(k) for k in doc.get("scores", {})):
        out.extend(_scores_for_order(doc, order))
    return out


def _sorted_by_magnitude(entries: list[dict]) -> list[dict]:
    return sorted(entries, key=lambda e: (-abs(e["score"]), e["subset"]))


def network_payload(doc: dict) -> dict:
    """Vertices from order-1 scores, edges from order-2 scores."""
    ones = _scores_for_order(doc, 1)
    twos = _scores_for_order(doc, 2)
    return {
        "kind": "network",
        "baseline": doc["baseline"],
        "prediction": doc["prediction"],
        "nodes": [
            {
                "feature": e["subset"][0],
                "label": _feature_label(doc, e["subset"][0]),
                "value": e["score"],
            }
            for e in ones
        ],
        "edges": [
            {"features": e["subset"], "value": e["score"]} for e in twos
        ],
    }


def force_payload(doc: dict) -> dict:
    """Signed bars of every score, largest magnitude first."""
    entries = _sorted_by_magnitude(_all_entries(doc))
    bars = [
        {
            "subset": e["subset"],
            "labels": [_feature_label(doc, f) for f in e["subset"]],
            "value": e["score"],
        }
        for e in entries
    ]
    return {
        "kind": "force",
        "baseline": doc["baseline"],
        "prediction": doc["prediction"],
        "bars": bars,
        "bar_sum": sum(b["value"] for b in bars),
    }


def waterfall_payload(doc: dict) -> dict:
    """Cumulative walk from the baseline to the prediction, biggest steps first."""
    entries = _sorted_by_magnitude(_all_entries(doc))
    steps = []
    level = doc["baseline"]
    for e in entries:
        steps.append(
            {
                "subset": e["subset"],
                "labels": [_feature_label(doc, f) for f in e["subset"]],
                "value": e["score"],
                "start": level,
                "end": level + e["score"],
            }
        )
        level += e["score"]
    return {
        "kind": "waterfall",
        "baseline": doc["baseline"],
        "prediction": doc["prediction"],
        "final_level": level,
        "steps": steps,
    }


def nsii_stacks_payload(doc: dict) -> dict:
    """Per-feature stacked masses: each order-k score split k ways, signs kept apart."""
    orders = sorted(int(k) for k in doc.get("scores", {}))
    if not orders or orders != list(range(1, len(orders) + 1)):
        raise ConfigError("nsii-stacks requires a complete order 1..s0 document")
    n_features = len(doc["instance"]["values"])
    pos = {i: {k: 0.0 for k in orders} for i in range(n_features)}
    neg = {i: {k: 0.0 for k in orders} for i in range(n_features)}
    for order in orders:
        for e in _scores_for_order(doc, order):
            share = e["score"] / order
            for f in e["subset"]:
                if share >= 0:
                    pos[f][order] += share
                else:
                    neg[f][order] += share
    features = []
    for i in range(n_features):
        features.append(
            {
                "feature": i,
                "label": _feature_label(doc, i),
                "stacks": [
                    {"order": k, "positive": pos[i][k], "negative": neg[i][k]}
                    for k in orders
                ],
                "signed_sum": sum(pos[i][k] + neg[i][k] for k in orders),
            }
        )
    return {
        "kind": "nsii-stacks",
        "baseline": doc["baseline"],
        "prediction": doc["prediction"],
        "features": features,
    }


def build_payload(doc: dict, kind: str) -> dict:
    if kind not in KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    builder = {
        "network": network_payload,
        "force": force_payload,
        "waterfall": waterfall_payload,
        "nsii-stacks": nsii_stacks_payload,
    }[kind]
    return builder(doc)
