#!/usr/bin/env python3
"""Reference generator for the backbone golden values in test_backbone.cpp.

Independent re-implementation of the SplitMix64 stream and the mixing
backbone in numpy. Prints C++ initializer lists; the test freezes them.
"""
import numpy as np

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def uniform(self, lo, hi):
        u = (self.next() >> 11) * 2.0**-53
        return lo + (hi - lo) * u


def init(d, layers, seed, vocab, visual_dim):
    rng = SplitMix64(seed)

    def draw(shape, bound):
        n = int(np.prod(shape))
        vals = [rng.uniform(-bound, bound) for _ in range(n)]
        return np.array(vals, dtype=np.float32).reshape(shape)

    P = draw((visual_dim, d), np.sqrt(3.0 / visual_dim))
    E = draw((vocab, d), np.sqrt(3.0))
    mix = []
    for _ in range(layers):
        W = draw((d, d), 1.0 / np.sqrt(d))
        b = draw((d,), 1.0 / np.sqrt(d))
        mix.append((W, b))
    return P, E, mix


def encode(weights, visual, ids, mask):
    P, E, mix = weights
    H = np.vstack([visual.astype(np.float64) @ P, E[ids].astype(np.float64)])
    for W, b in mix:
        H = H + np.tanh(H @ W + b)
    full_mask = np.concatenate([np.ones(len(visual)), mask])
    return H * full_mask[:, None]


def fmt(a):
    return ", ".join(repr(float(x)) for x in np.ravel(a))


if __name__ == "__main__":
    r = SplitMix64(0)
    print("splitmix64(0) first 3:", ", ".join(hex(r.next()) for _ in range(3)))
    w = init(4, 2, 7, 258, 6)
    print("visual_proj[0:8]:", fmt(w[0].ravel()[:8]))
    print("embedding[0:8]:", fmt(w[1].ravel()[:8]))
    print("mix1.b:", fmt(w[2][1][1]))
    visual = np.array([[0.5, -0.25, 1.0, 0.0, -1.0, 0.75], [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]])
    ids = np.array([72, 105, 0])
    mask = np.array([1, 1, 0])
    print("hidden:", fmt(encode(w, visual, ids, mask)))
