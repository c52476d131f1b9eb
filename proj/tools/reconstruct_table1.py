"""Regenerate data/table1_unrounded.csv from data/table1.csv.

Y(0) is R's set.seed(123); rnorm(10): Mersenne Twister with R's seed
scrambling and inversion sampling. Treated units add an effect of 0.5.
Usage: python3 tools/reconstruct_table1.py data/table1.csv > data/table1_unrounded.csv
"""
import csv
import sys

from scipy.special import ndtri

M32 = 0xFFFFFFFF
EFFECT = 0.5


class RMersenneTwister:
    def __init__(self, seed):
        s = seed & M32
        for _ in range(50):
            s = (69069 * s + 1) & M32
        state = []
        for _ in range(625):
            s = (69069 * s + 1) & M32
            state.append(s)
        self.mt = state[1:]
        self.mti = 624

    def unif(self):
        n, m, mt = 624, 397, self.mt
        if self.mti >= n:
            for k in range(n):
                y = (mt[k] & 0x80000000) | (mt[(k + 1) % n] & 0x7FFFFFFF)
                mt[k] = mt[(k + m) % n] ^ (y >> 1) ^ (0x9908B0DF if y & 1 else 0)
            self.mti = 0
        y = mt[self.mti]
        self.mti += 1
        y ^= y >> 11
        y ^= (y << 7) & 0x9D2C5680
        y ^= (y << 15) & 0xEFC60000
        y ^= y >> 18
        return y * 2.3283064365386963e-10


def rnorm(n, seed):
    rng = RMersenneTwister(seed)
    big = 134217728
    out = []
    for _ in range(n):
        u = int(big * rng.unif()) + rng.unif()
        out.append(float(ndtri(u / big)))
    return out


def main(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    y0 = rnorm(len(rows), 123)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["unit_id", "w_obs", "y_obs", "propensity"])
    for row, y in zip(rows, y0):
        w = int(row["w_obs"])
        out.writerow([row["unit_id"], w, repr(y + EFFECT * w), row["propensity"]])


if __name__ == "__main__":
    main(sys.argv[1])
