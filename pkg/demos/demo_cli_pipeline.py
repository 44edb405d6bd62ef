"""
The command-line pipeline end to end
====================================

Writes a small synthetic language pair to a temporary directory in the
usual text formats, then runs ``xlalign align``, ``refine`` and
``evaluate`` on it.
"""

import json
import os
import subprocess
import sys
import tempfile

import xlalign as xa

work = tempfile.mkdtemp(prefix="xlalign-demo-")
pair = xa.planted_rotation(2000, 32, noise=0.2, seed=5)
xa.save_text_embeddings(pair.X, os.path.join(work, "src.vec"))
xa.save_text_embeddings(pair.Y, os.path.join(work, "tgt.vec"))
words = [(pair.X.vocab[i], pair.Y.vocab[i]) for i in range(2000)]
with open(os.path.join(work, "train.txt"), "w") as f:
    f.writelines(f"{s} {t}\n" for s, t in words[:500])
with open(os.path.join(work, "test.txt"), "w") as f:
    f.writelines(f"{s} {t}\n" for s, t in words[1500:])


def run(*args):
    cmd = [sys.executable, "-m", "xlalign", *args,
           "--src-emb", os.path.join(work, "src.vec"), "--tgt-emb", os.path.join(work, "tgt.vec")]
    print("$ xlalign", " ".join(args))
    subprocess.run(cmd, check=True, cwd=work)


run("align", "--method", "rcsls", "--lexicon", "train.txt", "--lr", "1,10",
    "--epochs", "5", "--extended-norm", "--out-map", "rcsls.txt")
run("refine", "--lexicon", "train.txt", "--map", "rcsls.txt", "--rounds", "2",
    "--pool-size", "1000", "--out-map", "refined.txt")
for name in ("rcsls.txt", "refined.txt"):
    run("evaluate", "--map", name, "--eval-lexicon", "test.txt", "--out-report", name + ".json")
    with open(os.path.join(work, name + ".json")) as f:
        print(f"  {name}: P@1 = {100 * json.load(f)['accuracy']:.1f}")

with open(os.path.join(work, "refined.txt.manifest.json")) as f:
    print("refinement lexicon sizes:", json.load(f)["lexicon_sizes"])
print("outputs in", work)
