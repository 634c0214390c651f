"""Independent reference for spatial_hash and the grid level sizes.

Recomputes the frozen constants used in test_encodings.cpp with plain Python
integers (masked to 32 bits, matching uint32 wraparound).
"""

import math

PRIMES = (1, 2654435761, 805459861)
MASK = (1 << 32) - 1


def spatial_hash(idx, table_size):
    h = 0
    for k, v in enumerate(idx):
        h ^= (v * PRIMES[k]) & MASK
    return h % table_size


def level_resolutions(n_min=16, b=1.5, levels=8):
    return [math.floor(n_min * b**l) for l in range(levels)]


if __name__ == "__main__":
    print("hash2d(1,2)", spatial_hash((1, 2), 1 << 14))
    print("hash3d(3,1,2)", spatial_hash((3, 1, 2), 1 << 14))
    print("hash3d(100,200,300)", spatial_hash((100, 200, 300), 1 << 14))
    res = level_resolutions()
    print("levels", res)
    print("dense2d", [r * r <= 1 << 14 for r in res])
    print("dense3d", [r**3 <= 1 << 14 for r in res])
