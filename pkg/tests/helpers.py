"""Test-only utilities: a randomized SMILES writer and brute-force oracles."""

import csv
import random
from importlib import resources

import numpy as np

from smiles_gram.smiles import BondOrder, MolecularGraph


def read_bundled_csv(name):
    with (resources.files("smiles_gram") / "data" / name).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _atom_token(atom):
    symbol = atom.element.lower() if atom.aromatic else atom.element
    if atom.explicit_hydrogens is None:
        return symbol
    out = "["
    if atom.isotope:
        out += str(atom.isotope)
    out += symbol
    if atom.explicit_hydrogens:
        out += "H" + (str(atom.explicit_hydrogens) if atom.explicit_hydrogens > 1 else "")
    if atom.formal_charge:
        sign = "+" if atom.formal_charge > 0 else "-"
        out += sign + (str(abs(atom.formal_charge)) if abs(atom.formal_charge) > 1 else "")
    return out + "]"


def _bond_token(graph, u, v, order):
    both_aromatic = graph.atoms[u].aromatic and graph.atoms[v].aromatic
    if order == BondOrder.SINGLE:
        return "-" if both_aromatic else ""
    if order == BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return "=" if order == BondOrder.DOUBLE else "#"


def random_smiles(graph: MolecularGraph, seed: int) -> str:
    """Write ``graph`` as SMILES from a random start atom with random DFS order."""
    rng = random.Random(seed)
    n = len(graph.atoms)
    order_of = {}
    children = {i: [] for i in range(n)}
    tree = set()

    def dfs(v):
        order_of[v] = len(order_of)
        nbrs = [w for w, _ in graph.neighbors(v)]
        rng.shuffle(nbrs)
        for w in nbrs:
            if w not in order_of:
                children[v].append(w)
                tree.add(frozenset((v, w)))
                dfs(w)

    dfs(rng.randrange(n))
    ring_edges = {i: [] for i in range(n)}
    for bond in graph.bonds:
        if frozenset(bond.endpoints) not in tree:
            ring_edges[bond.begin].append(bond)
            ring_edges[bond.end].append(bond)

    labels = {}
    free = list(range(1, 100))

    def label_text(x):
        return str(x) if x < 10 else f"%{x:02d}"

    def emit(v):
        out = _atom_token(graph.atoms[v])
        closing = [b for b in ring_edges[v] if frozenset(b.endpoints) in labels]
        opening = [b for b in ring_edges[v] if frozenset(b.endpoints) not in labels]
        released = []
        for b in closing:
            lab = labels.pop(frozenset(b.endpoints))
            out += label_text(lab)
            released.append(lab)
        for b in opening:
            lab = free.pop(0)
            labels[frozenset(b.endpoints)] = lab
            out += _bond_token(graph, b.begin, b.end, b.order) + label_text(lab)
        free.extend(released)
        free.sort()
        kids = children[v]
        for i, c in enumerate(kids):
            order = next(o for w, o in graph.neighbors(v) if w == c)
            piece = _bond_token(graph, v, c, order) + emit(c)
            out += piece if i == len(kids) - 1 else f"({piece})"
        return out

    return emit(next(iter(order_of)))


def brute_force_ring_atoms(graph: MolecularGraph):
    """Enumerate simple cycles by exhaustive path search (small graphs only)."""
    n = len(graph.atoms)
    adj = [[w for w, _ in graph.neighbors(i)] for i in range(n)]
    cycles = []

    def collect(start, v, path):
        for w in adj[v]:
            if w == start and len(path) >= 3:
                cycles.append(list(path))
            elif w not in path and w > start:
                collect(start, w, path + [w])

    for start in range(n):
        collect(start, start, [start])
    flags = [False] * n
    for cyc in cycles:
        for a in cyc:
            flags[a] = True
    return flags


def plain_sinkhorn(P, tol=1e-13, max_iter=1_000_000):
    """Alternating row/column normalization to uniform 1/N marginals."""
    n = P.shape[0]
    K = np.array(P, dtype=float)
    for _ in range(max_iter):
        K /= K.sum(axis=1, keepdims=True) * n
        K /= K.sum(axis=0, keepdims=True) * n
        if np.max(np.abs(K.sum(axis=1) - 1.0 / n)) < tol:
            break
    return K


def pair_count_auc(pos, score):
    """(concordant + ties/2) / (pos * neg) by enumerating every pair."""
    p = [s for s, y in zip(score, pos) if y]
    n = [s for s, y in zip(score, pos) if not y]
    total = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in p for b in n)
    return total / (len(p) * len(n))


def confusion_oracle(y_true, y_pred):
    labels = sorted(set(y_true) | set(y_pred))
    out = {}
    prec, rec, f1, support = [], [], [], []
    for c in labels:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        pr = tp / (tp + fp) if tp + fp else 0.0
        rc = tp / (tp + fn) if tp + fn else 0.0
        prec.append(pr)
        rec.append(rc)
        f1.append(2 * pr * rc / (pr + rc) if pr + rc else 0.0)
        support.append(tp + fn)
    n = len(y_true)
    out["accuracy"] = sum(t == p for t, p in zip(y_true, y_pred)) / n
    out["precision_weighted"] = sum(s * v for s, v in zip(support, prec)) / n
    out["recall_weighted"] = sum(s * v for s, v in zip(support, rec)) / n
    out["f1_weighted"] = sum(s * v for s, v in zip(support, f1)) / n
    out["f1_macro"] = sum(f1) / len(f1)
    return out
