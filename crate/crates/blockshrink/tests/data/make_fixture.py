"""Writes the bundled annotated fixture used when the Eucore/blogs files are
not available: 200 nodes in 11 labelled groups of unequal size, with block
probabilities drawn from Beta(4, 6) within groups and Beta(1, 30) between.

The edge list mimics a SNAP export: string node tokens, a comment header,
edges in shuffled order, some reversed duplicates and a self-loop.
"""
import random

rng = random.Random(20240611)
sizes = [40, 32, 27, 22, 19, 16, 13, 11, 9, 7, 4]
labels = []
for g, s in enumerate(sizes):
    labels += [g] * s
n = len(labels)
order = list(range(n))
rng.shuffle(order)
token = {v: f"blog{1000 + order[v]}" for v in range(n)}
k = len(sizes)
theta = [[0.0] * k for _ in range(k)]
for a in range(k):
    for b in range(a, k):
        p = rng.betavariate(4, 6) if a == b else rng.betavariate(1, 30)
        theta[a][b] = theta[b][a] = p
edges = [(i, j) for i in range(n) for j in range(i + 1, n)
         if rng.random() < theta[labels[i]][labels[j]]]
lines = [f"{token[i]}\t{token[j]}" for i, j in edges]
lines += [f"{token[j]}\t{token[i]}" for i, j in rng.sample(edges, 25)]
lines.append(f"{token[3]}\t{token[3]}")
rng.shuffle(lines)
with open("fixture_edges.txt", "w") as f:
    f.write("# synthetic annotated network\n# FromNode\tToNode\n")
    f.write("\n".join(lines) + "\n")
names = ["arts", "business", "education", "health", "law", "media",
         "politics", "religion", "science", "sports", "travel"]
with open("fixture_labels.txt", "w") as f:
    for v in sorted(range(n), key=lambda v: token[v]):
        f.write(f"{token[v]} {names[labels[v]]}\n")
print(f"nodes {n} edges {len(edges)} labels {k} duplicates 25 self_loops 1")
