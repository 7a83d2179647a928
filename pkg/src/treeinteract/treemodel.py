"""Tree-ensemble data model, interchange format, and per-edge precomputation.

The interchange document is UTF-8 JSON::

    {
      "format_version": 1,
      "routing": "le-left",
      "n_features": <int>,
      "baseline_offset": <float>,
      "output_kind": "raw-margin" | "regression-value",
      "feature_names": [<str>, ...],          # optional
      "trees": [
        {"left": [...], "right": [...], "feature": [...],
         "threshold": [...], "count": [...], "value": [...]},
        ...
      ]
    }

Node arrays are indexed by node id with node 0 the root; ``-1`` in left /
right / feature marks a leaf.  ``count`` holds the number of observed data
points at each node, so the weight of the edge into a child is
``count[child] / count[parent]``.  Routing is fixed: ``x[feature] <=
threshold`` goes left, and the header records that convention explicitly.

Canonical serialization keeps arrays in node-id order, normalizes the unused
slots (leaf thresholds and internal values to 0.0), and writes floats as their
shortest round-trip decimal, so load -> dump is idempotent byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceError, ModelFormatError

FORMAT_VERSION = 1
ROUTING = "le-left"
OUTPUT_KINDS = ("raw-margin", "regression-value")

# Children may disagree with their parent's count by this relative tolerance
# (floating-point exports); anything larger is a hard error.
COUNT_RTOL = 1e-6


@dataclass
class TreeModel:
    """One binary decision tree in node-array form (already validated)."""

    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    count: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    def is_leaf(self, node: int) -> bool:
        return self.left[node] < 0

    def leaves(self) -> np.ndarray:
        return np.nonzero(self.left < 0)[0]


@dataclass
class Ensemble:
    trees: list[TreeModel]
    n_features: int
    baseline_offset: float = 0.0
    output_kind: str = "regression-value"
    feature_names: list[str] | None = None


def _as_int_array(raw, name: str, n: int) -> np.ndarray:
    arr = np.asarray(raw)
    if arr.shape != (n,):
        raise ModelFormatError(f"tree array {name!r} has shape {arr.shape}, expected ({n},)")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ModelFormatError(f"tree array {name!r} must hold integers")
        arr = arr.astype(np.int64)
    return arr.astype(np.int64)


def _as_float_array(raw, name: str, n: int) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (n,):
        raise ModelFormatError(f"tree array {name!r} has shape {arr.shape}, expected ({n},)")
    return arr


def _validate_tree(tree: TreeModel, n_features: int, index: int) -> None:
    n = tree.n_nodes
    tag = f"tree {index}"
    left, right, feat = tree.left, tree.right, tree.feature
    leaf = left < 0
    if not np.array_equal(leaf, right < 0) or not np.array_equal(leaf, feat < 0):
        raise ModelFormatError(f"{tag}: leaf markers disagree across left/right/feature")
    internal = ~leaf
    for name, child in (("left", left[internal]), ("right", right[internal])):
        if child.size and (child.min() < 1 or child.max() >= n):
            raise ModelFormatError(f"{tag}: {name} child id out of range")
    if not np.isfinite(tree.threshold[internal]).all():
        raise ModelFormatError(f"{tag}: non-finite split threshold")
    if internal.any() and (feat[internal].min() < 0 or feat[internal].max() >= n_features):
        raise ModelFormatError(f"{tag}: split feature index out of range")
    if not np.isfinite(tree.value[leaf]).all():
        raise ModelFormatError(f"{tag}: non-finite leaf value")
    if not np.isfinite(tree.count).all() or (tree.count <= 0).any():
        raise ModelFormatError(f"{tag}: sample counts must be positive and finite")

    # Tree property: every non-root node has exactly one parent and all nodes
    # are reachable from the root (this also rules out cycles).
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        node = stack.pop()
        if leaf[node]:
            continue
        for child in (int(left[node]), int(right[node])):
            if seen[child]:
                raise ModelFormatError(f"{tag}: node {child} has multiple parents (cycle?)")
            seen[child] = True
            stack.append(child)
        lc, rc = int(left[node]), int(right[node])
        total = tree.count[lc] + tree.count[rc]
        if abs(total - tree.count[node]) > COUNT_RTOL * abs(tree.count[node]):
            raise ModelFormatError(
                f"{tag}: children counts {total!r} inconsistent with parent "
                f"count {tree.count[node]!r} at node {node}"
            )
        if tree.count[lc] >= tree.count[node] or tree.count[rc] >= tree.count[node]:
            raise ModelFormatError(
                f"{tag}: edge weight outside (0,1) at node {node} "
                "(child count must be strictly below the parent's)"
            )
    if not seen.all():
        raise ModelFormatError(f"{tag}: {int((~seen).sum())} unreachable node(s)")


def _tree_from_doc(doc: dict, n_features: int, index: int) -> TreeModel:
    if not isinstance(doc, dict):
        raise ModelFormatError(f"tree {index} is not an object")
    missing = {"left", "right", "feature", "threshold", "count", "value"} - doc.keys()
    if missing:
        raise ModelFormatError(f"tree {index} missing arrays: {sorted(missing)}")
    try:
        n = len(doc["left"])
    except TypeError as exc:
        raise ModelFormatError(f"tree {index}: left is not an array") from exc
    if n == 0:
        raise ModelFormatError(f"tree {index} has no nodes")
    tree = TreeModel(
        left=_as_int_array(doc["left"], "left", n),
        right=_as_int_array(doc["right"], "right", n),
        feature=_as_int_array(doc["feature"], "feature", n),
        threshold=_as_float_array(doc["threshold"], "threshold", n),
        count=_as_float_array(doc["count"], "count", n),
        value=_as_float_array(doc["value"], "value", n),
    )
    _validate_tree(tree, n_features, index)
    # Normalize slots that carry no information so serialization is canonical.
    leaf = tree.left < 0
    tree.threshold = np.where(leaf, 0.0, tree.threshold)
    tree.value = np.where(leaf, tree.value, 0.0)
    return tree


def load_ensemble(source) -> Ensemble:
    """Parse and fully validate an interchange document.

    ``source`` may be a JSON string / bytes, an already-parsed dict, or an
    open text file.
    """
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"malformed JSON: {exc}") from exc
    elif isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.load(source)
        except (json.JSONDecodeError, AttributeError, TypeError) as exc:
            raise ModelFormatError(f"cannot read model document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {doc.get('format_version')!r}")
    if doc.get("routing") != ROUTING:
        raise ModelFormatError(f"unsupported routing {doc.get('routing')!r}")
    kind = doc.get("output_kind")
    if kind not in OUTPUT_KINDS:
        raise ModelFormatError(f"unsupported output_kind {kind!r}")
    n_features = doc.get("n_features")
    if not isinstance(n_features, int) or n_features < 1:
        raise ModelFormatError(f"n_features must be a positive integer, got {n_features!r}")
    offset = doc.get("baseline_offset", 0.0)
    if not isinstance(offset, (int, float)) or not np.isfinite(offset):
        raise ModelFormatError(f"baseline_offset must be a finite number, got {offset!r}")
    names = doc.get("feature_names")
    if names is not None:
        if len(names) != n_features or not all(isinstance(s, str) for s in names):
            raise ModelFormatError("feature_names must list one string per feature")
        names = list(names)
    trees_doc = doc.get("trees")
    if not isinstance(trees_doc, list) or not trees_doc:
        raise ModelFormatError("trees must be a nonempty array")
    trees = [_tree_from_doc(t, n_features, i) for i, t in enumerate(trees_doc)]
    return Ensemble(trees, n_features, float(offset), kind, names)


def load_ensemble_file(path) -> Ensemble:
    with open(path, "rb") as fh:
        return load_ensemble(fh.read())


def dump_ensemble(ensemble: Ensemble) -> str:
    """Canonical serialization (stable key order, shortest float decimals)."""
    doc = {
        "format_version": FORMAT_VERSION,
        "routing": ROUTING,
        "n_features": ensemble.n_features,
        "baseline_offset": float(ensemble.baseline_offset),
        "output_kind": ensemble.output_kind,
    }
    if ensemble.feature_names is not None:
        doc["feature_names"] = list(ensemble.feature_names)
    doc["trees"] = [
        {
            "left": t.left.tolist(),
            "right": t.right.tolist(),
            "feature": t.feature.tolist(),
            "threshold": t.threshold.tolist(),
            "count": t.count.tolist(),
            "value": t.value.tolist(),
        }
        for t in ensemble.trees
    ]
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


def model_digest(ensemble: Ensemble) -> str:
    return hashlib.sha256(dump_ensemble(ensemble).encode("utf-8")).hexdigest()


def _check_instance(x, n_features: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n_features,):
        raise InstanceError(f"instance has shape {x.shape}, expected ({n_features},)")
    if not np.isfinite(x).all():
        raise InstanceError("instance contains non-finite values")
    return x


def tree_predict(tree: TreeModel, x: np.ndarray) -> float:
    node = 0
    while not tree.is_leaf(node):
        if x[tree.feature[node]] <= tree.threshold[node]:
            node = int(tree.left[node])
        else:
            node = int(tree.right[node])
    return float(tree.value[node])


def predict(ensemble: Ensemble, x) -> float:
    """Raw model output at ``x``: offset plus the sum of the trees' leaf values."""
    x = _check_instance(x, ensemble.n_features)
    return ensemble.baseline_offset + sum(tree_predict(t, x) for t in ensemble.trees)


@dataclass
class EdgeTables:
    """Per-edge precomputation consumed by the traversal and the oracle.

    Edges are identified by their head node id.  ``p_raw[v]`` is the product
    of inverse edge weights over all same-feature edges on the path down to
    and including the edge into ``v``; ``ancestor[v]`` is the head of the
    closest shallower edge splitting on the same feature (-1 if none);
    ``path_features[v]`` counts distinct features on the path to ``v``.
    """

    parent: np.ndarray
    label: np.ndarray
    weight: np.ndarray
    p_raw: np.ndarray
    ancestor: np.ndarray
    path_features: np.ndarray
    node_depth: np.ndarray
    leaf_r_empty: np.ndarray
    leaf_feature_sets: dict[int, frozenset[int]] = field(repr=False)
    max_path_features: int = 0
    max_node_depth: int = 0
    tree_baseline: float = 0.0
    features_used: frozenset[int] = frozenset()


def precompute_edge_tables(tree: TreeModel) -> EdgeTables:
    """One depth-first pass computing all edge quantities."""
    n = tree.n_nodes
    parent = np.full(n, -1, dtype=np.int64)
    label = np.full(n, -1, dtype=np.int64)
    weight = np.zeros(n)
    p_raw = np.zeros(n)
    ancestor = np.full(n, -1, dtype=np.int64)
    path_features = np.zeros(n, dtype=np.int64)
    node_depth = np.zeros(n, dtype=np.int64)
    leaf_r_empty = np.zeros(n)
    leaf_feature_sets: dict[int, frozenset[int]] = {}
    # stack entries: (node, last same-feature head per feature, prod of path
    # weights, features seen on path)
    stack: list[tuple[int, dict[int, int], float, frozenset[int]]] = [
        (0, {}, 1.0, frozenset())
    ]
    max_path = 0
    max_depth = 0
    baseline = 0.0
    while stack:
        node, last_by_feature, w_prod, seen = stack.pop()
        max_depth = max(max_depth, int(node_depth[node]))
        if tree.is_leaf(node):
            leaf_r_empty[node] = tree.value[node] * w_prod
            leaf_feature_sets[node] = seen
            baseline += leaf_r_empty[node]
            max_path = max(max_path, len(seen))
            continue
        feat = int(tree.feature[node])
        child_seen = seen | {feat}
        for child in (int(tree.left[node]), int(tree.right[node])):
            w = tree.count[child] / tree.count[node]
            parent[child] = node
            label[child] = feat
            weight[child] = w
            anc = last_by_feature.get(feat, -1)
            ancestor[child] = anc
            p_raw[child] = (p_raw[anc] if anc >= 0 else 1.0) / w
            path_features[child] = len(child_seen)
            node_depth[child] = node_depth[node] + 1
            child_last = dict(last_by_feature)
            child_last[feat] = child
            stack.append((child, child_last, w_prod * w, child_seen))
    return EdgeTables(
        parent=parent,
        label=label,
        weight=weight,
        p_raw=p_raw,
        ancestor=ancestor,
        path_features=path_features,
        node_depth=node_depth,
        leaf_r_empty=leaf_r_empty,
        leaf_feature_sets=leaf_feature_sets,
        max_path_features=max_path,
        max_node_depth=max_depth,
        tree_baseline=baseline,
        features_used=frozenset().union(*leaf_feature_sets.values()),
    )
