"""Portable seeded generator so synthetic datasets are bit-reproducible.

``xorshift64*`` (Vigna 2014): shifts 12, 25, 27 and multiplier
0x2545F4914F6CDD1D. Seeds are scrambled with one SplitMix64 step (increment
0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB)
so that nearby seeds give unrelated streams and the state is never zero.
Doubles take the top 53 bits of the output.
"""
MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *index: int) -> int:
    """Per-item seed: fold each index into the parent seed through SplitMix64."""
    s = splitmix64(seed & MASK)
    for i in index:
        s = splitmix64(s ^ ((i * GOLDEN) & MASK))
    return s


class XorShift64Star:
    def __init__(self, seed: int):
        self.state = splitmix64(seed & MASK) or GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * self.random()

    def random_array(self, n: int):
        import numpy as np

        return np.array([self.random() for _ in range(n)])
