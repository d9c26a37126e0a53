"""Deterministic seed derivation for every random decision in a run.

Every generator in a run is seeded by mixing (master seed, generation,
individual id, purpose tag) through the splitmix64 finalizer, so fitness
evaluations are order-independent and a parallel run reproduces a serial
one byte for byte.

The mixing function is part of the external contract: starting from
``splitmix64(master)``, each field is XORed in and re-finalized — first the
generation, then the individual id, then every byte of the UTF-8 purpose
tag. splitmix64 is ``z += 0x9E3779B97F4A7C15; z ^= z>>30; z *= 0xBF58476D1CE4E5B9;
z ^= z>>27; z *= 0x94D049BB133111EB; z ^= z>>31`` with 64-bit wrapping.
All arithmetic happens on integer values, never on host byte order.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master_seed: int, generation: int, individual_id: int, purpose_tag: str) -> int:
    """64-bit seed, stable across platforms, distinct per (gen, id, tag)."""
    h = _splitmix64(master_seed & _MASK)
    h = _splitmix64(h ^ (generation & _MASK))
    h = _splitmix64(h ^ (individual_id & _MASK))
    for byte in purpose_tag.encode("utf-8"):
        h = _splitmix64(h ^ byte)
    return h
