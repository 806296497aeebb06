"""Exact reference for the two-step recommender, written from the definition.

Pure Python over nested lists (None = erased); no code shared with the
package.  Step 1: the user's row plus T-1 others such that no excluded row
scores higher than an included one; every such set is equally likely.
Step 2: among candidates, the columns with most 1s over the chosen rows,
equally likely.
"""

from fractions import Fraction
from itertools import combinations


def agree(a, b):
    return sum(1 for x, y in zip(a, b) if x is not None and y is not None and x == y)


def top_sets(M, user, T):
    others = [i for i in range(len(M)) if i != user]
    score = {i: agree(M[user], M[i]) for i in others}
    out = []
    for chosen in combinations(others, T - 1):
        rest = [i for i in others if i not in chosen]
        if not chosen or not rest or min(score[i] for i in chosen) >= max(score[i] for i in rest):
            out.append(frozenset(chosen) | {user})
    return out


def best_columns(M, rows, candidates):
    ones = {j: sum(1 for i in rows if M[i][j] == 1) for j in candidates}
    top = max(ones.values())
    return [j for j in candidates if ones[j] == top]


def distribution(M, user, T, candidates=None):
    """{(neighbor set, item): probability} as exact fractions."""
    if candidates is None:
        candidates = [j for j, x in enumerate(M[user]) if x is None]
    if not candidates:
        raise ValueError("no candidates")
    sets = top_sets(M, user, T)
    dist = {}
    for s in sets:
        cols = best_columns(M, s, candidates)
        for j in cols:
            key = (s, j)
            dist[key] = dist.get(key, 0) + Fraction(1, len(sets) * len(cols))
    return dist


def item_distribution(M, user, T, candidates=None):
    out = {}
    for (_, j), pr in distribution(M, user, T, candidates).items():
        out[j] = out.get(j, 0) + pr
    return out
