"""Cosine similarity between varying components."""

from typing import List, Optional, Sequence

import numpy as np

from reoptbench.errors import StructuralError, UndefinedSimilarityError
from reoptbench.model.instance import Instance
from reoptbench.model.variation import VariationMask, varying_vector


def similarity(c: Sequence[float], c_bar: Sequence[float]) -> float:
    """Cosine of the angle between two vectors, clipped to [-1, 1].

    Raises:
        StructuralError: lengths differ
        UndefinedSimilarityError: either vector is zero
    """
    a = np.asarray(c, dtype=float)
    b = np.asarray(c_bar, dtype=float)
    if a.shape != b.shape:
        raise StructuralError(f"similarity of vectors with lengths {a.size} and {b.size}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise UndefinedSimilarityError("similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def masked_similarity(instance: Instance, base: Instance, mask: VariationMask) -> Optional[float]:
    """Similarity of the masked components of two instances; None if a vector is zero."""
    try:
        return similarity(varying_vector(instance, mask), varying_vector(base, mask))
    except UndefinedSimilarityError:
        return None


def similarity_profile(instances: Sequence[Instance], mask: VariationMask) -> List[Optional[float]]:
    """Similarity of every instance's varying components to the first instance."""
    if not instances:
        return []
    base = instances[0]
    return [masked_similarity(instance, base, mask) for instance in instances]
