"""Region hierarchies and the pixel labeling of the segmentation model.

An image is described by a set of overlapping regions. These regions form one or
more bottom-up merge trees (hierarchies) that share the same leaves: the superpixels
of the initial oversegmentation. Each pixel takes the class of the highest calibrated
score over all classes and over all regions that contain it.

Since all regions that contain a superpixel are exactly its ancestors in each tree,
this maximum can be found by walking each tree top-down once, handing the best
``(score, label)`` pair of the ancestors to the children. This is :func:`label_image_fast`.
The :func:`label_image_naive` function evaluates the definition literally,
and serves as reference implementation in the tests.

Ties are resolved deterministically:

* Within a region, the lowest class id wins.
* Within a tree, a child only replaces the incumbent on a strictly higher score,
  so the larger region wins on exact ties.
* Across trees, a later tree only replaces the result on a strictly higher score,
  so the first root in ``roots`` wins on exact ties.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from django.utils.functional import cached_property

from regioncal.exceptions import UnknownSuperpixel
from regioncal.types import Labeling, RegionId, ScoreMatrix, SuperpixelId

if TYPE_CHECKING:
    from regioncal.calibration.sigmoid import CalibrationParams
    from regioncal.datasets.base import ImageRecord

__all__ = [
    "RegionNode",
    "RegionForest",
    "ForestViolation",
    "validate_forest",
    "regions_containing",
    "propagate_max",
    "label_image_fast",
    "label_image_naive",
]


@dataclass(frozen=True)
class RegionNode:
    """A single region proposal.

    Leaves link to the superpixel they represent,
    internal nodes list the regions they were merged from.
    """

    id: RegionId
    children: tuple[RegionId, ...] = ()
    leaf_link: Optional[SuperpixelId] = None
    pixel_count: int = 0

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class ForestViolation:
    """A broken invariant, as reported by :func:`validate_forest`."""

    node_id: Optional[RegionId]
    message: str

    def __str__(self):
        if self.node_id is None:
            return self.message
        return f"region {self.node_id}: {self.message}"


@dataclass(frozen=True)
class RegionForest:
    """All region proposals of an image, organized as trees over shared leaves.

    The derived data (superpixel sets, parent links, walking order) is computed
    once on first access. These assume a valid forest; use :func:`validate_forest`
    for data that comes from external sources.
    """

    nodes: tuple[RegionNode, ...]
    roots: tuple[RegionId, ...]

    def __post_init__(self):
        # Allow passing lists, but keep the object hashable.
        self.__dict__["nodes"] = tuple(self.nodes)
        self.__dict__["roots"] = tuple(self.roots)

    @property
    def region_count(self) -> int:
        return len(self.nodes)

    @cached_property
    def leaf_nodes(self) -> np.ndarray:
        """The region id of the leaf for every superpixel (index = SuperpixelId)."""
        leaves = [node for node in self.nodes if node.is_leaf]
        result = np.empty(len(leaves), dtype=np.intp)
        for node in leaves:
            result[node.leaf_link] = node.id
        return result

    @property
    def superpixel_count(self) -> int:
        return len(self.leaf_nodes)

    @cached_property
    def superpixel_sets(self) -> tuple[frozenset[SuperpixelId], ...]:
        """The superpixels covered by each region."""
        sets: list[Optional[frozenset]] = [None] * len(self.nodes)
        for levels in self._tree_levels:
            # Deepest level first, so all children are known before their parent.
            for level_nodes, _ in reversed(levels):
                for node_id in level_nodes:
                    if sets[node_id] is not None:
                        continue
                    node = self.nodes[node_id]
                    if node.is_leaf:
                        sets[node_id] = frozenset((node.leaf_link,))
                    else:
                        sets[node_id] = frozenset().union(
                            *(sets[child] for child in node.children)
                        )
        return tuple(sets)

    @cached_property
    def membership_matrix(self) -> np.ndarray:
        """Boolean ``(R, S)`` matrix telling which superpixels each region covers."""
        matrix = np.zeros((len(self.nodes), self.superpixel_count), dtype=bool)
        for region_id, superpixels in enumerate(self.superpixel_sets):
            matrix[region_id, list(superpixels)] = True
        return matrix

    @cached_property
    def parents(self) -> tuple[tuple[RegionId, ...], ...]:
        """The parents of each region, over all trees.

        Leaves have one parent per tree, internal nodes have a single parent,
        and roots have none.
        """
        parents = defaultdict(list)
        for levels in self._tree_levels:
            for level_nodes, level_parents in levels[1:]:
                for node_id, parent_id in zip(level_nodes, level_parents):
                    parents[int(node_id)].append(int(parent_id))
        return tuple(tuple(parents[node_id]) for node_id in range(len(self.nodes)))

    @cached_property
    def _tree_levels(self) -> tuple[tuple[tuple[np.ndarray, np.ndarray], ...], ...]:
        """Per tree, the nodes grouped by depth with their parent ids.

        The top-down walk handles a full level at once,
        as all nodes of a level only depend on the previous level.
        """
        trees = []
        for root in self.roots:
            levels = []
            frontier = [root]
            frontier_parents = [-1]
            while frontier:
                levels.append(
                    (
                        np.asarray(frontier, dtype=np.intp),
                        np.asarray(frontier_parents, dtype=np.intp),
                    )
                )
                next_frontier = []
                next_parents = []
                for node_id in frontier:
                    for child in self.nodes[node_id].children:
                        next_frontier.append(child)
                        next_parents.append(node_id)
                frontier = next_frontier
                frontier_parents = next_parents
            trees.append(tuple(levels))
        return tuple(trees)

    def tree_regions(self, tree_index: int) -> list[RegionId]:
        """All regions of a single tree, outermost first (breadth-first order)."""
        return [
            int(node_id)
            for level_nodes, _ in self._tree_levels[tree_index]
            for node_id in level_nodes
        ]

    def as_dict(self) -> dict:
        return {
            "roots": list(self.roots),
            "nodes": [
                {
                    "id": node.id,
                    "children": list(node.children),
                    "leaf": node.leaf_link,
                    "pixel_count": node.pixel_count,
                }
                for node in self.nodes
            ],
        }


def validate_forest(  # noqa: C901
    forest: RegionForest, image: ImageRecord
) -> list[ForestViolation]:
    """Check all structural invariants of the forest against the image superpixels.

    All violations are returned, an empty list means the forest is valid.
    This doesn't use any of the cached properties, so it's safe for broken data.
    """
    violations = []
    nodes = forest.nodes
    region_count = len(nodes)
    superpixels = image.superpixels
    superpixel_count = len(superpixels)

    def _is_region(value) -> bool:
        return isinstance(value, int) and 0 <= value < region_count

    # Node level checks
    leaves_by_superpixel = defaultdict(list)
    for index, node in enumerate(nodes):
        if node.id != index:
            violations.append(ForestViolation(index, f"has id {node.id}, expected {index}"))

        bad_children = [child for child in node.children if not _is_region(child)]
        for child in bad_children:
            violations.append(ForestViolation(index, f"references unknown region {child}"))
        if index in node.children:
            violations.append(ForestViolation(index, "lists itself as child"))

        if node.is_leaf:
            if node.leaf_link is None:
                violations.append(ForestViolation(index, "leaf without superpixel link"))
            elif not 0 <= node.leaf_link < superpixel_count:
                violations.append(
                    ForestViolation(index, f"links to unknown superpixel {node.leaf_link}")
                )
            else:
                leaves_by_superpixel[node.leaf_link].append(index)
                expected = superpixels[node.leaf_link].pixel_count
                if node.pixel_count != expected:
                    violations.append(
                        ForestViolation(
                            index,
                            f"pixel count {node.pixel_count} differs from"
                            f" superpixel {node.leaf_link} ({expected})",
                        )
                    )
        else:
            if node.leaf_link is not None:
                violations.append(ForestViolation(index, "internal node links a superpixel"))
            if not bad_children:
                total = sum(nodes[child].pixel_count for child in node.children)
                if total != node.pixel_count:
                    violations.append(
                        ForestViolation(
                            index,
                            f"children's pixel counts sum to {total}, not {node.pixel_count}",
                        )
                    )

    # The leaves are in bijection with the superpixels.
    for superpixel_id in range(superpixel_count):
        leaves = leaves_by_superpixel.get(superpixel_id, [])
        if len(leaves) != 1:
            violations.append(
                ForestViolation(
                    None, f"superpixel {superpixel_id} has {len(leaves)} leaf regions"
                )
            )

    if not forest.roots:
        violations.append(ForestViolation(None, "forest has no roots"))

    # Walk every tree, detecting cycles, shared nodes and missing leaves.
    trees_of_node = defaultdict(list)
    for position, root in enumerate(forest.roots):
        if not _is_region(root):
            violations.append(ForestViolation(None, f"unknown root region {root}"))
            continue
        if root in forest.roots[:position]:
            violations.append(ForestViolation(root, "listed twice as root"))
            continue

        seen = set()
        reached_superpixels = set()
        stack = [root]
        while stack:
            node_id = stack.pop()
            if node_id in seen:
                violations.append(
                    ForestViolation(
                        node_id,
                        f"reached twice from root {root} (cycle or multiple parents)",
                    )
                )
                continue
            seen.add(node_id)
            trees_of_node[node_id].append(root)
            node = nodes[node_id]
            if node.is_leaf:
                reached_superpixels.add(node.leaf_link)
            else:
                stack.extend(child for child in node.children if _is_region(child))

        missing = set(range(superpixel_count)) - reached_superpixels
        if missing:
            violations.append(
                ForestViolation(
                    root, f"root doesn't reach superpixels {sorted(missing)}"
                )
            )

    for node_id in range(region_count):
        roots = trees_of_node.get(node_id)
        if not roots:
            violations.append(ForestViolation(node_id, "not reachable from any root"))
        elif len(roots) > 1 and not nodes[node_id].is_leaf:
            shared = ", ".join(map(str, roots))
            violations.append(
                ForestViolation(node_id, f"internal region shared by roots {shared}")
            )

    return violations


def regions_containing(forest: RegionForest, superpixel_id: SuperpixelId) -> list[RegionId]:
    """Tell which regions contain the superpixel: its leaf and all ancestors in all trees."""
    if not 0 <= superpixel_id < forest.superpixel_count:
        raise UnknownSuperpixel(superpixel_id)

    leaf = int(forest.leaf_nodes[superpixel_id])
    found = {leaf}
    stack = [leaf]
    parents = forest.parents
    while stack:
        for parent in parents[stack.pop()]:
            if parent not in found:
                found.add(parent)
                stack.append(parent)
    return sorted(found)


def propagate_max(forest: RegionForest, calibrated: np.ndarray) -> tuple[Labeling, np.ndarray]:
    """Find the best ``(score, class)`` for every superpixel using top-down propagation.

    :param calibrated: The ``(R, C)`` matrix the regions are ranked by,
        the log calibrated scores of :func:`~regioncal.calibration.sigmoid.rank_scores`.
    :returns: The labels and their winning scores, both indexed by SuperpixelId.
    """
    own_label = calibrated.argmax(axis=1)  # first occurrence: lowest class id
    own_score = calibrated[np.arange(len(own_label)), own_label]

    best_score = np.empty_like(own_score)
    best_label = np.empty_like(own_label)
    leaf_nodes = forest.leaf_nodes
    final_score = final_label = None

    for levels in forest._tree_levels:
        root_nodes = levels[0][0]
        best_score[root_nodes] = own_score[root_nodes]
        best_label[root_nodes] = own_label[root_nodes]

        for level_nodes, level_parents in levels[1:]:
            # The parent's incumbent is installed first, the node replaces it
            # only when its own best is strictly higher.
            incoming = best_score[level_parents]
            candidate = own_score[level_nodes]
            take_own = candidate > incoming
            best_score[level_nodes] = np.where(take_own, candidate, incoming)
            best_label[level_nodes] = np.where(
                take_own, own_label[level_nodes], best_label[level_parents]
            )

        tree_score = best_score[leaf_nodes]
        tree_label = best_label[leaf_nodes]
        if final_score is None:
            final_score = tree_score
            final_label = tree_label
        else:
            better = tree_score > final_score
            final_score = np.where(better, tree_score, final_score)
            final_label = np.where(better, tree_label, final_label)

    return final_label, final_score


def label_image_fast(
    forest: RegionForest, scores: ScoreMatrix, params: CalibrationParams
) -> Labeling:
    """Label all superpixels of an image, in ``O(R * C)``."""
    from regioncal.calibration.sigmoid import rank_scores

    labels, _ = propagate_max(forest, rank_scores(scores, params))
    return labels


def label_image_naive(
    forest: RegionForest, scores: ScoreMatrix, params: CalibrationParams
) -> Labeling:
    """Label all superpixels by literally taking the argmax over all regions containing it.

    Region membership is tested on the superpixel sets. The candidates are
    visited tree by tree, outermost region first and classes in ascending order,
    so the strict comparison yields the same tie-breaking as :func:`label_image_fast`.
    """
    from regioncal.calibration.sigmoid import rank_scores

    ranked = rank_scores(scores, params)
    class_count = ranked.shape[1]
    superpixel_sets = forest.superpixel_sets
    tree_regions = [forest.tree_regions(i) for i in range(len(forest.roots))]

    labels = np.zeros(forest.superpixel_count, dtype=np.intp)
    for superpixel_id in range(forest.superpixel_count):
        best_score = -np.inf
        best_label = None
        for regions in tree_regions:
            for region_id in regions:
                if superpixel_id not in superpixel_sets[region_id]:
                    continue
                for class_id in range(class_count):
                    value = ranked[region_id, class_id]
                    if best_label is None or value > best_score:
                        best_score = value
                        best_label = class_id
        labels[superpixel_id] = best_label
    return labels
