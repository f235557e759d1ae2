"""Brute-force z-score / curvature elbow recomputation for the worked example."""
import math

scores = [0.9, 0.85, 0.8, 0.5, 0.45]
tau = 1.0
deltas = [scores[i] - scores[i + 1] for i in range(len(scores) - 1)]
mu = sum(deltas) / len(deltas)
sigma = math.sqrt(sum((d - mu) ** 2 for d in deltas) / len(deltas))
z = [(d - mu) / sigma for d in deltas]
k_star = next(i + 1 for i, v in enumerate(z) if v > tau)
print("deltas", deltas)
print("mu", mu, "sigma", sigma)
print("z", z)
print("k_star", k_star)

assert k_star == 3, k_star
assert abs(z[2] - 1.732) < 1e-3, z[2]
