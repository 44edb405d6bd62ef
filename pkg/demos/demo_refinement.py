"""
Growing a small seed lexicon
============================

Start from only 60 seed pairs on noisy data, then alternate between
translating the 2000 most frequent words with CSLS and refitting
Procrustes on the seeds plus the mutual translations.
"""

import xlalign as xa

pair = xa.planted_rotation(3000, 32, noise=0.2, seed=1)
seeds, _ = pair.split(60, 0)
test = xa.BilingualLexicon(pair.lexicon.pairs[2500:3000])

W = xa.procrustes_fit(pair.X.vectors[seeds.src], pair.Y.vectors[seeds.tgt])
print(f"seeds only: P@1 = {100 * xa.evaluate_mapping(W, pair.X, pair.Y, test).accuracy:.1f}")

for rule in ("mutual_csls", "best_inferred"):
    config = xa.RefinementConfig(rounds=3, candidate_pool_size=2000, pairing_rule=rule)
    R, sizes = xa.refine(W, pair.X, pair.Y, seeds, config)
    acc = xa.evaluate_mapping(R, pair.X, pair.Y, test).accuracy
    print(f"{rule}: lexicon sizes per round {sizes}, P@1 = {100 * acc:.1f}")
