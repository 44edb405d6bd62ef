"""
Hubs and the CSLS criterion
===========================

Source words share a common direction, and the target space contains one
extra word sitting on the image of that direction. Plain nearest-neighbor
search sends many queries to this hub; CSLS discounts targets that are
close to everything.
"""

import numpy as np

import xlalign as xa

pair = xa.hub_fixture()
seeds, test = pair.split(1000, 500)
W = xa.procrustes_fit(pair.X.vectors[seeds.src], pair.Y.vectors[seeds.tgt])
hub = pair.Y.vocab.index("hub")

queries = np.array(test.sources())
nn = xa.nn_translate(W, pair.X.vectors[queries], pair.Y)
csls = xa.csls_translate(W, pair.X.vectors[queries], pair.Y, pair.X, k=10)

for name, res in (("NN", nn), ("CSLS", csls)):
    acc = xa.precision_at_1(xa.TranslationResult(res.indices, res.scores, res.criterion, queries), test)
    share = np.mean(res.indices == hub)
    print(f"{name:4s}: P@1 = {100 * acc.accuracy:.1f}, queries sent to the hub = {100 * share:.1f}%")

# how many distinct targets each criterion ever predicts
print("distinct predictions:", len(set(nn.indices.tolist())), "(NN)",
      len(set(csls.indices.tolist())), "(CSLS)")

# neighborhood density r_X of the hub versus an ordinary target
r_x = xa.mean_knn_similarity(pair.Y.vectors[[hub, 0]], xa.map_queries(W, pair.X.vectors), 10)
print(f"mean similarity to 10 nearest mapped sources: hub {r_x.r_values[0]:.3f}, "
      f"ordinary word {r_x.r_values[1]:.3f}")
