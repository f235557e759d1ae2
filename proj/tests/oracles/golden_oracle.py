"""Hand trace of the golden scenario, computed without the library.

Recomputes chunking, pairing, pooled scores, the elbow, expansion, the
bi-encoder ranking and the efficiency sweep from the raw inputs, then
checks the committed expected reports against the trace.

  python3 golden_oracle.py <golden dir>
"""
import json
import math
import pathlib
import re
import sys

d = pathlib.Path(sys.argv[1])
cfg = json.loads((d / "config.json").read_text())
pins = json.loads((d / "pins.json").read_text())
docs = [json.loads(l) for l in (d / "documents.jsonl").read_text().splitlines() if l]
qa = json.loads((d / "qa.jsonl").read_text().splitlines()[0])
script = [json.loads(l) for l in (d / "script.jsonl").read_text().splitlines() if l]
size = cfg["chunk_size"]

chunks = {}
for doc in docs:
    words = doc["text"].split()
    for i in range(0, len(words), size):
        chunks[(doc["doc_id"], i // size)] = " ".join(words[i:i + size])
assert len(chunks) == 10

rationale_text = next(s["response"] for s in script if "<rationale_1>" in s["response"])
rationales = [f"[{tag}] {body}" for _, tag, body in
              re.findall(r"<rationale_(\d+)>\[(.*?)\]\s*(.*?)</rationale_\1>", rationale_text, re.S)]
assert len(rationales) == cfg["ecse"]["n_rationales"]


def cos(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return sum(x * y for x, y in zip(a, b)) / (na * nb)


keys = sorted(chunks)
vec = {k: pins[chunks[k]] for k in keys}

# Stage 1: argmax per rationale, lexicographic key tie-break.
paired = {}
for ordinal, r in enumerate(rationales, 1):
    best = max(keys, key=lambda k: (cos(pins[r], vec[k]), [-ord(c) for c in k[0]], -k[1]))
    paired.setdefault(best, []).append(ordinal)

# Stage 2: pooled mean, sorted, z-score elbow.
mean = [sum(pins[r][j] for r in rationales) / len(rationales) for j in range(len(pins[rationales[0]]))]
scored = sorted(keys, key=lambda k: (-cos(mean, vec[k]), k))
s = [cos(mean, vec[k]) for k in scored]
deltas = [s[i] - s[i + 1] for i in range(len(s) - 1)]
mu = sum(deltas) / len(deltas)
sigma = math.sqrt(sum((x - mu) ** 2 for x in deltas) / len(deltas))
z = [(x - mu) / sigma for x in deltas]
k_star = next(i + 1 for i, v in enumerate(z) if v > cfg["ecse"]["tau"])
pooled = scored[:k_star]

# Stage 3: neighbours of the union inside the candidate set.
union = set(paired) | set(pooled)
expanded = {}
for doc, idx in sorted(union):
    for n in (idx - 1, idx + 1):
        if (doc, n) in chunks and (doc, n) not in union:
            expanded.setdefault((doc, n), []).append((doc, idx))
final = sorted(union | set(expanded))
gold = {(g["doc_id"], g["chunk_index"]) for g in qa["gold"]}
recall = len(gold & set(final)) / len(gold)
precision = len(gold & set(final)) / len(final)

# Bi-encoder ranking against the query vector.
ranking = sorted(keys, key=lambda k: (-cos(pins[qa["query_text"]], vec[k]), k))
ranks = sorted(ranking.index(g) + 1 for g in gold)
k_needed = next(k for k in range(1, len(keys) + 1) if len(gold & set(ranking[:k])) / len(gold) >= recall)
ratio = k_needed / len(final)

print("paired", paired)
print("k_star", k_star, "z", z[:2])
print("final", final, "P", precision, "R", recall)
print("gold ranks", ranks, "k_needed", k_needed, "ratio", ratio)

assert final == [("B", 0), ("B", 1), ("B", 2)]
assert (precision, recall) == (1.0, 1.0)
assert ranks == [1, 3, 6]
assert (k_needed, ratio) == (6, 2.0)

sel = json.loads((d / "expected" / "q1.selection.json").read_text())
assert sel["k_star"] == k_star and sel["elbow_method"] == "z-score"
assert [(p["doc_id"], p["chunk_index"]) for p in sel["paired"]] == sorted(paired)
assert [p["ordinals"] for p in sel["paired"]] == [paired[k] for k in sorted(paired)]
assert [(p["doc_id"], p["chunk_index"]) for p in sel["pooled"]] == pooled
assert all(abs(a - b) < 1e-12 for a, b in zip(sel["elbow"]["z_scores"], z))
assert {(e["doc_id"], e["chunk_index"]): [(p["doc_id"], p["chunk_index"]) for p in e["parents"]]
        for e in sel["expanded"]} == expanded
assert [(f["doc_id"], f["chunk_index"]) for f in sel["final"]] == final

report = json.loads((d / "expected" / "report.json").read_text())
systems = {s["system"]: s for s in report["systems"]}
assert systems["ecse"]["aggregate"]["recall"] == recall
assert systems["ecse"]["aggregate"]["precision"] == precision
assert systems["bi-encoder"]["k"] == len(final)
eff = report["efficiency"][0]
assert (eff["k_needed"], eff["ratio"]) == (k_needed, ratio)
print("golden oracle: ok")
