"""
Scenario tree service
Validation, path laws, conditional distributions, generation and JSON I/O
"""

import json
import logging
import math
from collections import Counter, deque
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from nestedot.core.config import settings
from nestedot.core.exceptions import (
    NoChildrenException,
    TreeParseException,
    TreeSchemaException,
    TreeValidationException,
)
from nestedot.models.transport import DiscreteDistribution
from nestedot.models.tree import Node, PathLaw, ScenarioTree
from nestedot.schemas.solver import GenSpec
from nestedot.schemas.tree import NodeSchema, TreeSchema

logger = logging.getLogger(__name__)


def validate(tree: ScenarioTree) -> List[str]:
    """
    Check every scenario-tree invariant

    Args:
        tree: Tree to inspect

    Returns:
        Violation descriptions naming node ids; empty iff the tree is valid
    """
    tolerance = settings.PROBABILITY_TOLERANCE
    violations: List[str] = []

    if tree.depth < 1:
        violations.append(f"depth must be >= 1, got {tree.depth}")
    if tree.value_dim < 1:
        violations.append(f"value_dim must be >= 1, got {tree.value_dim}")
    if not tree.nodes:
        violations.append("tree has no nodes")
        return violations

    id_counts = Counter(node.id for node in tree.nodes)
    duplicates = sorted(node_id for node_id, count in id_counts.items() if count > 1)
    for node_id in duplicates:
        violations.append(f"node {node_id}: duplicate id")
    by_id: Dict[int, Node] = {node.id: node for node in tree.nodes}

    roots = [node for node in tree.nodes if node.parent_id is None]
    if len(roots) != 1:
        violations.append(
            f"expected exactly one root, found {len(roots)} ({[node.id for node in roots]})"
        )

    for node in tree.nodes:
        if not 1 <= node.stage <= tree.depth:
            violations.append(f"node {node.id}: stage {node.stage} outside [1, {tree.depth}]")
        if len(node.value) != tree.value_dim:
            violations.append(
                f"node {node.id}: value has length {len(node.value)}, expected {tree.value_dim}"
            )
        if not all(math.isfinite(x) for x in node.value):
            violations.append(f"node {node.id}: value is not finite")
        if not (math.isfinite(node.cond_prob) and 0.0 < node.cond_prob <= 1.0):
            violations.append(f"node {node.id}: cond_prob {node.cond_prob!r} outside (0, 1]")

        if node.parent_id is None:
            if node.stage != 1:
                violations.append(f"node {node.id}: root must be at stage 1, got {node.stage}")
            if node.cond_prob != 1.0:
                violations.append(f"node {node.id}: root cond_prob must be 1")
            continue

        parent = by_id.get(node.parent_id)
        if parent is None:
            violations.append(f"node {node.id}: parent {node.parent_id} does not exist")
        elif parent.stage != node.stage - 1:
            violations.append(
                f"node {node.id}: parent {parent.id} is at stage {parent.stage}, "
                f"expected {node.stage - 1}"
            )

    children: Dict[int, List[Node]] = {node.id: [] for node in tree.nodes}
    for node in tree.nodes:
        if node.parent_id in children:
            children[node.parent_id].append(node)

    for node in tree.nodes:
        kids = children[node.id]
        if not kids:
            if node.stage != tree.depth:
                violations.append(
                    f"node {node.id}: leaf at stage {node.stage}, expected stage {tree.depth}"
                )
            continue
        total = math.fsum(kid.cond_prob for kid in kids)
        if abs(total - 1.0) > tolerance:
            violations.append(
                f"node {node.id}: children probabilities sum ≠ 1 (sum = {total!r})"
            )

    return violations


def ensure_valid(tree: ScenarioTree, source: Optional[str] = None) -> ScenarioTree:
    """Raise TreeValidationException unless the tree is valid"""
    violations = validate(tree)
    if violations:
        raise TreeValidationException(violations, source=source)
    return tree


def path_law(tree: ScenarioTree) -> PathLaw:
    """
    Materialize the law of the full value path

    Returns:
        One entry per leaf, ordered by leaf id; path probability is the
        product of conditional probabilities along the root-to-leaf path
    """
    ensure_valid(tree)

    paths = []
    for leaf_id in tree.leaves:
        ancestry = tree.ancestry(leaf_id)
        values: Tuple[float, ...] = tuple(
            x for node_id in ancestry for x in tree.node(node_id).value
        )
        probability = 1.0
        for node_id in ancestry:
            probability *= tree.node(node_id).cond_prob
        paths.append((values, probability))

    return PathLaw(leaf_ids=tree.leaves, paths=tuple(paths))


def children_distribution(tree: ScenarioTree, node_id: int) -> DiscreteDistribution:
    """Conditional law of the next stage given a node, supported on child ids"""
    kids = tree.children(node_id)
    if not kids:
        raise NoChildrenException(node_id)
    weights = np.array([tree.node(kid).cond_prob for kid in kids], dtype=np.float64)
    return DiscreteDistribution(weights, kids)


def generate(spec: GenSpec) -> ScenarioTree:
    """
    Grow a random tree forward from a Gaussian root

    The root value is standard normal times root_scale (the origin when
    root_scale is 0). Every non-leaf node draws its child count uniformly in
    1..max_children, child values as parent value plus scaled standard normal
    increments, and child probabilities uniform in (0, 1] then normalized.
    Nodes are numbered breadth first, and all draws happen in id order, so
    the tree depends only on the GenSpec fields.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.root_scale > 0:
        root_value = rng.standard_normal(spec.value_dim) * spec.root_scale
    else:
        root_value = np.zeros(spec.value_dim)
    nodes: List[Node] = [
        Node(
            id=0,
            stage=1,
            value=tuple(float(x) for x in root_value),
            cond_prob=1.0,
            parent_id=None,
        )
    ]
    queue = deque([nodes[0]])
    next_id = 1

    while queue:
        parent = queue.popleft()
        if parent.stage == spec.depth:
            continue

        count = int(rng.integers(1, spec.max_children + 1))
        increments = rng.standard_normal((count, spec.value_dim)) * spec.increment_scale
        raw = 1.0 - rng.random(count)
        weights = raw / raw.sum()
        base = np.asarray(parent.value, dtype=np.float64)

        for k in range(count):
            child = Node(
                id=next_id,
                stage=parent.stage + 1,
                value=tuple(float(x) for x in base + increments[k]),
                cond_prob=1.0 if count == 1 else float(weights[k]),
                parent_id=parent.id,
            )
            nodes.append(child)
            queue.append(child)
            next_id += 1

    tree = ScenarioTree(depth=spec.depth, value_dim=spec.value_dim, nodes=tuple(nodes))
    logger.debug(f"Generated tree depth={spec.depth} seed={spec.seed} nodes={tree.size}")
    return tree


def scale_tree(tree: ScenarioTree, factor: float) -> ScenarioTree:
    """Multiply every node value by a positive factor"""
    if not factor > 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    nodes = tuple(
        Node(
            id=node.id,
            stage=node.stage,
            value=tuple(factor * x for x in node.value),
            cond_prob=node.cond_prob,
            parent_id=node.parent_id,
        )
        for node in tree.nodes
    )
    return ScenarioTree(depth=tree.depth, value_dim=tree.value_dim, nodes=nodes)


def information_gap_pair(amplitude: float = 1.0, epsilon: float = 0.1) -> Tuple[ScenarioTree, ScenarioTree]:
    """
    Two three-stage price trees with close path laws but different filtrations

    The first tree reveals at stage 2 (A + eps or A - eps) whether the price
    jumps to 2A or drops to 0; the second stays at A and only branches at
    stage 3.
    """
    a, eps = float(amplitude), float(epsilon)
    informed = ScenarioTree(
        depth=3,
        value_dim=1,
        nodes=(
            Node(0, 1, (a,), 1.0, None),
            Node(1, 2, (a + eps,), 0.5, 0),
            Node(2, 2, (a - eps,), 0.5, 0),
            Node(3, 3, (2 * a,), 1.0, 1),
            Node(4, 3, (0.0,), 1.0, 2),
        ),
    )
    uninformed = ScenarioTree(
        depth=3,
        value_dim=1,
        nodes=(
            Node(0, 1, (a,), 1.0, None),
            Node(1, 2, (a,), 1.0, 0),
            Node(2, 3, (2 * a,), 0.5, 1),
            Node(3, 3, (0.0,), 0.5, 1),
        ),
    )
    return informed, uninformed


def tree_summary(tree: ScenarioTree) -> Dict[str, Any]:
    """Node, leaf and per-stage counts"""
    branching = [len(tree.children(node.id)) for node in tree.nodes]
    return {
        "depth": tree.depth,
        "value_dim": tree.value_dim,
        "nodes": tree.size,
        "leaves": len(tree.leaves),
        "stage_sizes": [len(tree.stage_nodes(t)) for t in range(1, tree.depth + 1)],
        "max_children": max(branching) if branching else 0,
    }


def _schema_field(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error.get("loc", ())) or "<root>"


def parse_tree(text: Union[bytes, str], source: Optional[str] = None) -> ScenarioTree:
    """
    Parse the canonical JSON document

    Raises:
        TreeParseException: text is not JSON
        TreeSchemaException: document does not match the schema
        TreeValidationException: tree invariants are violated
    """
    try:
        payload = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise TreeParseException(str(e), source=source) from e

    try:
        document = TreeSchema.model_validate(payload)
    except ValidationError as e:
        first = e.errors()[0]
        raise TreeSchemaException(_schema_field(first), first["msg"], source=source) from e

    tree = ScenarioTree(
        depth=document.depth,
        value_dim=document.value_dim,
        nodes=tuple(
            Node(
                id=node.id,
                stage=node.stage,
                value=tuple(node.value),
                cond_prob=node.cond_prob,
                parent_id=node.parent,
            )
            for node in document.nodes
        ),
    )
    return ensure_valid(tree, source=source)


def serialize_tree(tree: ScenarioTree) -> bytes:
    """Canonical JSON: nodes sorted by id, fixed field order, round-trip floats"""
    ensure_valid(tree)
    document = TreeSchema(
        depth=tree.depth,
        value_dim=tree.value_dim,
        nodes=[
            NodeSchema(
                id=node.id,
                stage=node.stage,
                parent=node.parent_id,
                value=list(node.value),
                cond_prob=node.cond_prob,
            )
            for node in tree.nodes
        ],
    )
    return (json.dumps(document.model_dump(), indent=2, allow_nan=False) + "\n").encode("utf-8")
