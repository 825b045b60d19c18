"""
Diversity of generated answers
==============================

Mentions from a model are resolved against a reference list by nearest
embedding, then counted and scored.
"""

import numpy as np

from knowledge_collapse.diversity import (
    VectorSet,
    frequency_table,
    minimal_representativeness,
    pielou_evenness,
    proportional_deviation,
    resolve_entities,
    shannon_index,
    uniform_deviation,
)

rng = np.random.default_rng(0)

# five reference thinkers placed far apart in a toy 2-d embedding
reference = VectorSet(
    ("confucius", "aristotle", "kant", "nagarjuna", "ibn_rushd"),
    np.array([[0, 0], [10, 0], [0, 10], [10, 10], [20, 5]], dtype=float),
)

# the model mostly names two of them, with spelling noise in the embedding
picks = rng.choice([1, 1, 1, 2, 2, 0], size=40)
mention_vecs = reference.vectors[picks] + rng.normal(scale=0.4, size=(40, 2))
mentions = VectorSet(tuple(f"m{i}" for i in range(40)), mention_vecs)

resolved = resolve_entities(mentions, reference, eps=3.0)
labels = [v for v in resolved.values() if v is not None]
table = frequency_table(labels, reference.labels)

h = shannon_index(table)
print("counts:", {k: int(c) for k, c in zip(table.reference, table.vector())})
print("Shannon H' = %.3f, Pielou J' = %.3f" % (h, pielou_evenness(h, len(reference))))
print("never mentioned:", minimal_representativeness(table))
print("distance from uniform: %.3f" % uniform_deviation(table))

# a target that weights the unmentioned traditions more heavily
weights = {"confucius": 2, "aristotle": 1, "kant": 1, "nagarjuna": 2, "ibn_rushd": 2}
print("distance from weighted target: %.3f" % proportional_deviation(table, weights))
