"""Exhaustive evaluation of the toy sum-decoding instance.

Prints the group-SRM error and the pair-SRM-then-add error.
"""
import itertools

import numpy as np

ANGLES = {"00": 0.0, "11": 0.3, "01": 1.2, "10": 1.5}
G = np.array([1, 1, 0])
B2 = np.array([0, 0, 1])
B3 = np.array([0, 0, 0])


def ket(t):
    v = np.array([np.cos(t), np.sin(t)])
    return np.outer(v, v)


def word_state(u2, u3):
    out = np.eye(1)
    for a, b in zip(u2, u3):
        out = np.kron(out, ket(ANGLES[f"{a}{b}"]))
    return out


def inv_sqrt(m):
    w, v = np.linalg.eigh(m)
    d = np.array([1 / np.sqrt(x) if x > 1e-12 else 0.0 for x in w])
    return (v * d) @ v.conj().T


def srm(priors, states):
    s = sum(p * r for p, r in zip(priors, states))
    k = inv_sqrt(s)
    return [k @ (p * r) @ k for p, r in zip(priors, states)]


pairs = []
for m2, m3 in itertools.product([0, 1], repeat=2):
    u2 = (m2 * G + B2) % 2
    u3 = (m3 * G + B3) % 2
    pairs.append((m2 ^ m3, word_state(u2, u3)))

groups = sorted({s for s, _ in pairs})
gstates = [sum(r for s, r in pairs if s == g) / sum(1 for s, _ in pairs if s == g) for g in groups]
gpri = [sum(1 for s, _ in pairs if s == g) / len(pairs) for g in groups]
mus = srm(gpri, gstates)
group_error = 1 - sum(p * np.trace(m @ r).real for p, m, r in zip(gpri, mus, gstates))

mus = srm([0.25] * 4, [r for _, r in pairs])
ok = 0.0
for s, r in pairs:
    for (t, _), m in zip(pairs, mus):
        if t == s:
            ok += 0.25 * np.trace(m @ r).real
pair_error = 1 - ok
print(repr(group_error), repr(pair_error))
