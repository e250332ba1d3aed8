"""
Greedy non-negative quadratic pursuit, step by step
===================================================

min 0.5 x'Qx + c'x  with  x >= 0  and at most T non-zeros.
We watch the support grow and compare with trying every support.
"""

import itertools

import numpy as np

from mkproto.nqp import nqp_solve, select_dimension

rng = np.random.default_rng(4)
B = rng.standard_normal((8, 8))
Q = B @ B.T
c = rng.standard_normal(8)

# at x = 0 the gradient is just c, so the first pick is the best-scoring negative entry
print("c =", np.round(c, 3))
print("first pick (raw gradient):", select_dimension(Q, c, np.zeros(8), range(8)))
print("first pick (scaled by sqrt(q_jj)):", select_dimension(Q, c, np.zeros(8), range(8), scaled=True))

sol = nqp_solve(Q, c, T=3)
print("\nobjective after each iteration:", np.round(sol.history, 4).tolist())
print("active sets:", sol.supports)
print("x =", np.round(sol.x, 4))


# brute force: every support of size <= 3, closed form on it, keep the non-negative ones
def brute(Q, c, T):
    best = 0.0
    for k in range(1, T + 1):
        for S in itertools.combinations(range(c.size), k):
            S = list(S)
            xs = -np.linalg.solve(Q[np.ix_(S, S)], c[S])
            if (xs >= 0).all():
                best = min(best, 0.5 * xs @ Q[np.ix_(S, S)] @ xs + c[S] @ xs)
    return best


print(f"\ngreedy {sol.objective:.6f}   exhaustive {brute(Q, c, 3):.6f}")

# over many random problems the greedy answer is usually the global one
hits = 0
for _ in range(300):
    n, T = int(rng.integers(2, 10)), int(rng.integers(1, 4))
    B = rng.standard_normal((n, n))
    Q, c = B @ B.T, rng.standard_normal(n)
    hits += nqp_solve(Q, c, T).objective <= brute(Q, c, T) + 1e-9
print(f"global optimum reached on {hits}/300 random problems")
