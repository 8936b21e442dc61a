"""Fixed-length feature vectors: circular (Morgan-style) fingerprints and
k-mer / IDF-weighted k-mer counts over raw SMILES characters.

Fingerprint hashing is FNV-1a (64 bit) over the little-endian uint64
serialization of an integer tuple, so bit positions are reproducible in any
language:

* radius 0: ``(atomic number, degree, formal charge, H count or 0,
  aromatic, in ring)``
* radius r: ``(r, previous invariant, code_1, inv_1, code_2, inv_2, ...)``
  with the (bond code, neighbour invariant) pairs sorted ascending.
  Bond codes are single=1, double=2, triple=3, aromatic=4.

Negative integers are serialized as their two's complement modulo 2**64.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .smiles import MolecularGraph

__all__ = [
    "FeatureVector",
    "KmerVocabulary",
    "StringShorterThanK",
    "fnv1a_64",
    "hash_ints",
    "morgan_invariants",
    "morgan_fingerprint",
    "build_vocabulary",
    "kmer_vector",
    "weighted_kmer_vector",
    "idf_weights",
    "embed_corpus",
]

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

KINDS = ("morgan", "kmers", "weighted_kmers")


class StringShorterThanK(ValueError):
    def __init__(self, index: int, length: int, k: int):
        self.index = index
        super().__init__(f"string at index {index} has length {length} < k={k}")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("feature values must be a non-empty 1-D array")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.values, other.values)


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def hash_ints(values: Sequence[int]) -> int:
    data = struct.pack(f"<{len(values)}Q", *(v & _MASK64 for v in values))
    return fnv1a_64(data)


def morgan_invariants(graph: MolecularGraph, radius: int) -> list[list[int]]:
    """Per-radius atom invariants; element ``r`` holds one value per atom."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    current = []
    for i, atom in enumerate(graph.atoms):
        current.append(
            hash_ints(
                (
                    atom.atomic_number,
                    graph.degree(i),
                    atom.formal_charge,
                    atom.explicit_hydrogens or 0,
                    int(atom.aromatic),
                    int(atom.ring_membership),
                )
            )
        )
    layers = [current]
    for r in range(1, radius + 1):
        prev = layers[-1]
        nxt = []
        for i in range(len(graph.atoms)):
            env = sorted((int(order), prev[j]) for j, order in graph.neighbors(i))
            flat = [r, prev[i]]
            for code, inv in env:
                flat.extend((code, inv))
            nxt.append(hash_ints(flat))
        layers.append(nxt)
    return layers


def morgan_fingerprint(graph: MolecularGraph, radius: int = 2, nbits: int = 2048) -> FeatureVector:
    """Binary circular fingerprint; one bit per distinct invariant value."""
    if nbits < 1:
        raise ValueError("nbits must be >= 1")
    if len(graph.atoms) == 0:
        raise ValueError("graph has no atoms")
    seen = {inv for layer in morgan_invariants(graph, radius) for inv in layer}
    bits = np.zeros(nbits)
    bits[[inv % nbits for inv in seen]] = 1.0
    return FeatureVector(bits, "morgan")


@dataclass(frozen=True)
class KmerVocabulary:
    k: int
    kmers: tuple[str, ...]
    document_frequency: tuple[int, ...]

    @property
    def kmer_to_index(self) -> dict[str, int]:
        return {m: i for i, m in enumerate(self.kmers)}

    def __len__(self) -> int:
        return len(self.kmers)

    def df(self, kmer: str) -> int:
        return self.document_frequency[self.kmer_to_index[kmer]]


def _windows(text: str, k: int) -> Iterable[str]:
    return (text[i : i + k] for i in range(len(text) - k + 1))


def build_vocabulary(corpus: Sequence[str], k: int = 3) -> KmerVocabulary:
    if k < 1:
        raise ValueError("k must be positive")
    df: Counter = Counter()
    for idx, text in enumerate(corpus):
        if len(text) < k:
            raise StringShorterThanK(idx, len(text), k)
        df.update(set(_windows(text, k)))
    kmers = tuple(sorted(df))
    return KmerVocabulary(k, kmers, tuple(df[m] for m in kmers))


def _counts(text: str, vocab: KmerVocabulary, index: dict[str, int] | None = None) -> np.ndarray:
    if len(text) < vocab.k:
        raise StringShorterThanK(0, len(text), vocab.k)
    index = vocab.kmer_to_index if index is None else index
    counts = np.zeros(len(vocab))
    for window in _windows(text, vocab.k):
        i = index.get(window)
        if i is not None:
            counts[i] += 1
    return counts


def kmer_vector(text: str, vocab: KmerVocabulary) -> FeatureVector:
    """Overlapping k-mer counts; k-mers outside ``vocab`` are ignored."""
    return FeatureVector(_counts(text, vocab), "kmers")


def idf_weights(vocab: KmerVocabulary, corpus_size: int) -> np.ndarray:
    df = np.asarray(vocab.document_frequency, dtype=np.float64)
    if corpus_size < 1 or (df.size and corpus_size < df.max()):
        raise ValueError("corpus_size must be >= every document frequency")
    return np.log(corpus_size / df)


def weighted_kmer_vector(text: str, vocab: KmerVocabulary, corpus_size: int) -> FeatureVector:
    """k-mer counts scaled by ``ln(corpus_size / df)``."""
    return FeatureVector(_counts(text, vocab) * idf_weights(vocab, corpus_size), "weighted_kmers")


def embed_corpus(
    smiles: Sequence[str],
    graphs: Sequence[MolecularGraph] | None,
    kind: str,
    *,
    radius: int = 2,
    nbits: int = 2048,
    k: int = 3,
) -> list[FeatureVector]:
    """Embed a whole corpus; k-mer vocabularies are built on the corpus itself."""
    if kind == "morgan":
        if graphs is None:
            raise ValueError("morgan embedding needs parsed graphs")
        return [morgan_fingerprint(g, radius, nbits) for g in graphs]
    vocab = build_vocabulary(smiles, k)
    index = vocab.kmer_to_index
    if kind == "kmers":
        return [FeatureVector(_counts(s, vocab, index), "kmers") for s in smiles]
    if kind == "weighted_kmers":
        w = idf_weights(vocab, len(smiles))
        return [FeatureVector(_counts(s, vocab, index) * w, "weighted_kmers") for s in smiles]
    raise ValueError(f"unknown embedding {kind!r}")

