"""A small SMILES reader producing connectivity graphs for fingerprinting.

Supported: organic-subset atoms (B C N O P S F Cl Br I and aromatic
b c n o p s), bracket atoms ``[isotope? symbol chirality? H-count? charge?]``,
bond symbols ``- = # :`` (plus ``/`` and ``\\`` read as single bonds),
branches, ring closures ``1``-``9`` and ``%nn``. Chirality marks are dropped.
Dot-separated fragments are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Optional

__all__ = [
    "Atom",
    "Bond",
    "BondOrder",
    "MolecularGraph",
    "parse_smiles",
    "heavy_atom_count",
    "ring_atoms",
    "SmilesError",
    "EmptyInput",
    "UnmatchedParenthesis",
    "UnclosedRingBond",
    "UnknownAtomSymbol",
    "MalformedBracketAtom",
    "DisconnectedFragments",
    "RingBondConflict",
    "SmilesSyntaxError",
]

# Hydrogen is deliberately absent: hydrogens are never graph atoms here.
_ELEMENTS = (
    "He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni "
    "Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I "
    "Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt "
    "Au Hg Tl Pb Bi Po At Rn"
).split()
ATOMIC_NUMBERS = {sym: z for z, sym in enumerate(_ELEMENTS, start=2)}

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ELEMENTS = frozenset("BCNOPS")


class BondOrder(IntEnum):
    """Bond orders; the integer values double as fingerprint hash codes."""

    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4


_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}


class SmilesError(ValueError):
    """Base class for all SMILES parse failures."""

    def __init__(self, message: str, smiles: str = "", position: int = -1):
        self.smiles = smiles
        self.position = position
        if position >= 0:
            message = f"{message} at position {position} in {smiles!r}"
        super().__init__(message)


class EmptyInput(SmilesError):
    pass


class UnmatchedParenthesis(SmilesError):
    pass


class UnclosedRingBond(SmilesError):
    pass


class UnknownAtomSymbol(SmilesError):
    pass


class MalformedBracketAtom(SmilesError):
    pass


class DisconnectedFragments(SmilesError):
    pass


class RingBondConflict(SmilesError):
    pass


class SmilesSyntaxError(SmilesError):
    """Anything else the grammar does not allow (dangling bonds, self rings...)."""


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    formal_charge: int = 0
    isotope: Optional[int] = None
    explicit_hydrogens: Optional[int] = None
    ring_membership: bool = False

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBERS[self.element]

    @property
    def bracketed(self) -> bool:
        return self.explicit_hydrogens is not None


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.begin, self.end)


@dataclass(frozen=True)
class MolecularGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    source: str = ""
    _adjacency: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        adj: list[list[tuple[int, BondOrder]]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.begin].append((bond.end, bond.order))
            adj[bond.end].append((bond.begin, bond.order))
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adj))

    def __len__(self) -> int:
        return len(self.atoms)

    def neighbors(self, index: int) -> tuple[tuple[int, BondOrder], ...]:
        """(neighbor index, bond order) pairs of atom ``index``."""
        return self._adjacency[index]

    def degree(self, index: int) -> int:
        return len(self._adjacency[index])


def ring_atoms(n_atoms: int, edges) -> list[bool]:
    """Flag atoms lying on at least one cycle.

    An atom is in a ring iff it touches an edge that is not a bridge; bridges
    come from an iterative Tarjan low-link pass.
    """
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n_atoms)]
    for eid, (u, v) in enumerate(edges):
        adj[u].append((v, eid))
        adj[v].append((u, eid))

    disc = [-1] * n_atoms
    low = [0] * n_atoms
    is_bridge = [False] * len(edges)
    timer = 0
    for root in range(n_atoms):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        # frames: (vertex, edge id used to enter, iterator position)
        stack = [(root, -1, 0)]
        while stack:
            v, parent_edge, pos = stack[-1]
            if pos < len(adj[v]):
                stack[-1] = (v, parent_edge, pos + 1)
                w, eid = adj[v][pos]
                if eid == parent_edge:
                    continue
                if disc[w] == -1:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, eid, 0))
                else:
                    low[v] = min(low[v], disc[w])
            else:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        is_bridge[parent_edge] = True

    flags = [False] * n_atoms
    for eid, (u, v) in enumerate(edges):
        if not is_bridge[eid]:
            flags[u] = flags[v] = True
    return flags


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.atoms: list[Atom] = []
        self.bonds: list[tuple[int, int, BondOrder]] = []
        self.bonded: set[frozenset] = set()
        self.open_rings: dict[int, tuple[int, Optional[BondOrder], int]] = {}

    def fail(self, cls, message, position=None):
        raise cls(message, self.text, self.pos if position is None else position)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse(self) -> MolecularGraph:
        text = self.text
        prev: Optional[int] = None
        pending_bond: Optional[BondOrder] = None
        pending_at = -1
        branch_stack: list[tuple[int, int]] = []
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in _BOND_SYMBOLS:
                if pending_bond is not None:
                    self.fail(SmilesSyntaxError, "two consecutive bond symbols")
                if prev is None:
                    self.fail(SmilesSyntaxError, "bond symbol with no preceding atom")
                pending_bond, pending_at = _BOND_SYMBOLS[ch], self.pos
                self.pos += 1
            elif ch == "(":
                if prev is None:
                    self.fail(SmilesSyntaxError, "branch with no preceding atom")
                if pending_bond is not None:
                    self.fail(SmilesSyntaxError, "bond symbol before branch")
                branch_stack.append((prev, self.pos))
                self.pos += 1
                if self.peek() == ")":
                    self.fail(SmilesSyntaxError, "empty branch")
            elif ch == ")":
                if not branch_stack:
                    self.fail(UnmatchedParenthesis, "unmatched ')'")
                if pending_bond is not None:
                    self.fail(SmilesSyntaxError, "dangling bond symbol", pending_at)
                prev, _ = branch_stack.pop()
                self.pos += 1
            elif ch.isdigit() or ch == "%":
                if prev is None:
                    self.fail(SmilesSyntaxError, "ring closure with no preceding atom")
                start = self.pos
                label = self.read_ring_label()
                self.ring_closure(prev, label, pending_bond, start)
                pending_bond = None
            elif ch == ".":
                self.fail(DisconnectedFragments, "disconnected fragments are not supported")
            else:
                start = self.pos
                atom = self.read_bracket_atom() if ch == "[" else self.read_organic_atom()
                self.atoms.append(atom)
                idx = len(self.atoms) - 1
                if prev is not None:
                    self.add_bond(prev, idx, pending_bond, start)
                pending_bond = None
                prev = idx
        if pending_bond is not None:
            self.fail(SmilesSyntaxError, "dangling bond symbol", pending_at)
        if branch_stack:
            self.fail(UnmatchedParenthesis, "unclosed '('", branch_stack[-1][1])
        if self.open_rings:
            label, (_, _, at) = min(self.open_rings.items(), key=lambda kv: kv[1][2])
            self.fail(UnclosedRingBond, f"ring bond {label} never closed", at)

        flags = ring_atoms(len(self.atoms), [(u, v) for u, v, _ in self.bonds])
        atoms = tuple(replace(a, ring_membership=f) for a, f in zip(self.atoms, flags))
        bonds = tuple(Bond(u, v, order) for u, v, order in self.bonds)
        return MolecularGraph(atoms, bonds, self.text)

    def default_order(self, u: int, v: int) -> BondOrder:
        if self.atoms[u].aromatic and self.atoms[v].aromatic:
            return BondOrder.AROMATIC
        return BondOrder.SINGLE

    def add_bond(self, u: int, v: int, order: Optional[BondOrder], at: int):
        if u == v:
            self.fail(SmilesSyntaxError, "atom bonded to itself", at)
        key = frozenset((u, v))
        if key in self.bonded:
            self.fail(SmilesSyntaxError, f"duplicate bond between atoms {u} and {v}", at)
        self.bonded.add(key)
        self.bonds.append((u, v, order if order is not None else self.default_order(u, v)))

    def read_ring_label(self) -> int:
        text = self.text
        if text[self.pos] == "%":
            digits = text[self.pos + 1 : self.pos + 3]
            if len(digits) != 2 or not digits.isdigit():
                self.fail(SmilesSyntaxError, "'%' must be followed by two digits")
            self.pos += 3
            return int(digits)
        label = int(text[self.pos])
        if label == 0:
            self.fail(SmilesSyntaxError, "ring closure digit 0 is not supported")
        self.pos += 1
        return label

    def ring_closure(self, atom: int, label: int, order: Optional[BondOrder], at: int):
        if label not in self.open_rings:
            self.open_rings[label] = (atom, order, at)
            return
        other, other_order, _ = self.open_rings.pop(label)
        if order is not None and other_order is not None and order != other_order:
            self.fail(RingBondConflict, f"ring bond {label} has conflicting orders", at)
        self.add_bond(other, atom, order if order is not None else other_order, at)

    def read_organic_atom(self) -> Atom:
        text, start = self.text, self.pos
        two = text[start : start + 2]
        if two in ("Cl", "Br"):
            self.pos += 2
            return Atom(two)
        ch = text[start]
        if ch in "BCNOPSFI":
            self.pos += 1
            return Atom(ch)
        if ch in "bcnops":
            self.pos += 1
            return Atom(ch.upper(), aromatic=True)
        self.fail(UnknownAtomSymbol, f"unknown atom symbol {ch!r}")

    def read_bracket_atom(self) -> Atom:
        text = self.text
        open_at = self.pos
        close = text.find("]", open_at)
        if close == -1:
            self.fail(MalformedBracketAtom, "bracket atom is never closed", open_at)
        body = text[open_at + 1 : close]
        if "[" in body:
            self.fail(MalformedBracketAtom, "bracket atom is never closed", open_at)
        i = 0

        def digits() -> Optional[int]:
            nonlocal i
            j = i
            while j < len(body) and body[j].isdigit():
                j += 1
            if j == i:
                return None
            value = int(body[i:j])
            i = j
            return value

        isotope = digits()
        if isotope == 0:
            self.fail(MalformedBracketAtom, "isotope must be positive", open_at)

        if i >= len(body) or not body[i].isalpha():
            self.fail(MalformedBracketAtom, "bracket atom has no element symbol", open_at)
        if body[i].islower():
            symbol, aromatic = body[i].upper(), True
            if symbol not in AROMATIC_ELEMENTS:
                self.fail(UnknownAtomSymbol, f"unknown aromatic symbol {body[i]!r}", open_at)
            i += 1
        else:
            aromatic = False
            if len(body[i : i + 2]) == 2 and body[i : i + 2] in ATOMIC_NUMBERS:
                symbol = body[i : i + 2]
                i += 2
            elif body[i] in ATOMIC_NUMBERS:
                symbol = body[i]
                i += 1
            else:
                bad = body[i : i + 2] if body[i + 1 : i + 2].islower() else body[i]
                self.fail(UnknownAtomSymbol, f"unknown element symbol {bad!r}", open_at)

        # chirality marks are accepted and dropped
        if body[i : i + 2] == "@@":
            i += 2
        elif body[i : i + 1] == "@":
            i += 1

        hcount = 0
        if body[i : i + 1] == "H":
            i += 1
            n = digits()
            hcount = 1 if n is None else n

        charge = 0
        if body[i : i + 1] in ("+", "-"):
            sign = 1 if body[i] == "+" else -1
            i += 1
            n = digits()
            if n is not None:
                charge = sign * n
            else:
                charge = sign
                while body[i : i + 1] == body[i - 1 : i]:
                    charge += sign
                    i += 1

        if i != len(body):
            self.fail(
                MalformedBracketAtom,
                f"unexpected {body[i]!r} in bracket atom (fields out of order?)",
                open_at + 1 + i,
            )
        self.pos = close + 1
        return Atom(symbol, aromatic, charge, isotope, hcount)


def parse_smiles(text: str) -> MolecularGraph:
    """Parse ``text`` into a :class:`MolecularGraph`.

    Atoms are numbered in the order their tokens appear. Raises a subclass
    of :class:`SmilesError` on invalid input.
    """
    if not text or not text.strip():
        raise EmptyInput("empty SMILES string")
    if not text.isascii():
        raise SmilesSyntaxError("SMILES must be ASCII", text, 0)
    return _Parser(text.strip()).parse()


def heavy_atom_count(graph: MolecularGraph) -> int:
    return len(graph.atoms)
