"""SMILES parsing, molecular graphs, featurization, and dataset files.

The supported SMILES subset: organic-subset atoms B C N O P S F Cl Br I,
aromatic lowercase b c n o p s, bracket atoms with charge and explicit H
count, bond symbols ``- = # :``, branches, and ring closures (``0``-``9``
and ``%nn``). Stereo markers, isotopes, wildcards, and multi-fragment
strings are rejected with explicit errors rather than silently ignored.

Hydrogens are implicit: bracket atoms carry their stated H count, all other
atoms derive it from standard valence (adjusted by formal charge) minus the
bond-order sum.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParseError

ORGANIC = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC = {"b", "c", "n", "o", "p", "s"}

VALENCE = {"B": 3, "C": 4, "N": 3, "O": 2, "P": 3, "S": 2,
           "F": 1, "Cl": 1, "Br": 1, "I": 1}

ATOMIC_MASS = {"H": 1.008, "B": 10.81, "C": 12.011, "N": 14.007, "O": 15.999,
               "F": 18.998, "P": 30.974, "S": 32.06, "Cl": 35.45,
               "Br": 79.904, "I": 126.904}

BOND_VALUE = {"single": 1.0, "double": 2.0, "triple": 3.0, "aromatic": 1.5}
BOND_SYMBOL = {"-": "single", "=": "double", "#": "triple", ":": "aromatic"}

# Featurization layout: 12-slot element vocabulary (ten known elements plus
# two reserved slots), heavy-atom degree 1..6 clipped, formal charge -2..+2
# clipped, one aromatic bit.
ELEMENT_SLOTS = ["B", "C", "N", "O", "F", "P", "S", "Cl", "Br", "I"]
NODE_FEATURE_DIM = 12 + 6 + 5 + 1
EDGE_FEATURE_DIM = 4
_BOND_SLOT = {"single": 0, "double": 1, "triple": 2, "aromatic": 3}


class CallCounter:
    """Cheap instrumentation so tests can assert cached paths stay cold."""

    def __init__(self):
        self.value = 0

    def reset(self):
        self.value = 0


PARSE_COUNTER = CallCounter()


@dataclass
class Atom:
    element: str
    charge: int = 0
    aromatic: bool = False
    explicit_h: int | None = None


@dataclass
class Bond:
    a: int
    b: int
    order: str


@dataclass
class MolecularGraph:
    """Undirected simple graph of heavy atoms."""

    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def neighbors(self, i: int) -> list[tuple[int, Bond]]:
        out = []
        for bond in self.bonds:
            if bond.a == i:
                out.append((bond.b, bond))
            elif bond.b == i:
                out.append((bond.a, bond))
        return out

    def degree(self, i: int) -> int:
        return sum(1 for b in self.bonds if i in (b.a, b.b))


@dataclass
class FeaturizedGraph:
    """One-hot node/edge features plus adjacency, ready for batching.

    Directed edges store each bond twice (j->i and i->j), sorted by
    (dst, src) for a canonical reduction order. `rwpe` is attached after
    preprocessing; `rwpe_k` records the walk length it was computed with.
    """

    graph_id: str
    node_features: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_features: np.ndarray
    degrees: np.ndarray
    rwpe: np.ndarray | None = None
    rwpe_k: int | None = None

    @property
    def num_atoms(self) -> int:
        return self.node_features.shape[0]


_BRACKET = re.compile(
    r"^(?P<elem>Cl|Br|[BCNOPSFI]|[bcnops])"
    r"(?P<h>H\d*)?"
    r"(?P<charge>\+\+|--|\+\d?|-\d?)?$"
)


def _parse_bracket(body: str, pos: int) -> Atom:
    if any(c in body for c in "@/\\"):
        raise ParseError(f"unsupported feature: stereochemistry in bracket atom at position {pos}")
    if body[:1].isdigit():
        raise ParseError(f"unsupported feature: isotope label in bracket atom at position {pos}")
    if ":" in body:
        raise ParseError(f"unsupported feature: atom-class label in bracket atom at position {pos}")
    m = _BRACKET.match(body)
    if not m:
        raise ParseError(f"unknown element or malformed bracket atom '[{body}]' at position {pos}")
    elem = m.group("elem")
    aromatic = elem.islower()
    hpart = m.group("h")
    hcount = 0
    if hpart:
        hcount = int(hpart[1:]) if len(hpart) > 1 else 1
    charge = 0
    cpart = m.group("charge")
    if cpart:
        if cpart in ("++", "--"):
            charge = 2 if cpart == "++" else -2
        elif len(cpart) == 1:
            charge = 1 if cpart == "+" else -1
        else:
            charge = int(cpart[1:]) * (1 if cpart[0] == "+" else -1)
    return Atom(element=elem.capitalize(), charge=charge, aromatic=aromatic,
                explicit_h=hcount if hpart else None)


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a SMILES string into a MolecularGraph.

    Raises ParseError for anything outside the supported subset; the message
    names the offending construct and position.
    """
    PARSE_COUNTER.value += 1
    if not text:
        raise ParseError("empty SMILES string")
    if not text.isascii():
        raise ParseError("SMILES must be ASCII")

    g = MolecularGraph()
    anchor: int | None = None
    pending: str | None = None  # explicit bond symbol awaiting its atom
    branch_stack: list[int] = []
    open_rings: dict[int, tuple[int, str | None]] = {}
    seen_bonds: set[tuple[int, int]] = set()

    def add_bond(i: int, j: int, order: str | None):
        if i == j:
            raise ParseError(f"ring closure bonds atom {i} to itself")
        key = (min(i, j), max(i, j))
        if key in seen_bonds:
            raise ParseError(f"duplicate bond between atoms {i} and {j}")
        seen_bonds.add(key)
        if order is None:
            both_aromatic = g.atoms[i].aromatic and g.atoms[j].aromatic
            order = "aromatic" if both_aromatic else "single"
        g.bonds.append(Bond(i, j, order))

    def add_atom(atom: Atom):
        nonlocal anchor, pending
        g.atoms.append(atom)
        idx = len(g.atoms) - 1
        if anchor is not None:
            add_bond(anchor, idx, pending)
        pending = None
        anchor = idx

    def close_ring(num: int, pos: int):
        nonlocal pending
        if anchor is None:
            raise ParseError(f"ring-closure digit before any atom at position {pos}")
        if num in open_rings:
            other, other_bond = open_rings.pop(num)
            order = pending if pending is not None else other_bond
            if pending is not None and other_bond is not None and pending != other_bond:
                raise ParseError(f"conflicting bond orders on ring closure {num}")
            add_bond(other, anchor, order)
        else:
            open_rings[num] = (anchor, pending)
        pending = None

    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in "/\\@":
            raise ParseError(f"unsupported feature: stereo marker '{c}' at position {i}")
        if c == ".":
            raise ParseError(f"multi-fragment SMILES ('.' at position {i}) not supported")
        if c == "[":
            end = text.find("]", i)
            if end < 0:
                raise ParseError(f"unterminated bracket atom at position {i}")
            add_atom(_parse_bracket(text[i + 1:end], i))
            i = end + 1
        elif text[i:i + 2] in ("Cl", "Br"):
            add_atom(Atom(element=text[i:i + 2]))
            i += 2
        elif c in "BCNOPSFI":
            add_atom(Atom(element=c))
            i += 1
        elif c in AROMATIC:
            add_atom(Atom(element=c.upper(), aromatic=True))
            i += 1
        elif c in BOND_SYMBOL:
            if pending is not None:
                raise ParseError(f"two consecutive bond symbols at position {i}")
            pending = BOND_SYMBOL[c]
            i += 1
        elif c == "(":
            if anchor is None:
                raise ParseError(f"branch before any atom at position {i}")
            branch_stack.append(anchor)
            i += 1
        elif c == ")":
            if not branch_stack:
                raise ParseError(f"unbalanced ')' at position {i}")
            anchor = branch_stack.pop()
            i += 1
        elif c.isdigit():
            close_ring(int(c), i)
            i += 1
        elif c == "%":
            if i + 2 >= n or not text[i + 1:i + 3].isdigit():
                raise ParseError(f"'%' ring closure needs two digits at position {i}")
            close_ring(int(text[i + 1:i + 3]), i)
            i += 3
        else:
            raise ParseError(f"unknown element or unexpected character '{c}' at position {i}")

    if branch_stack:
        raise ParseError("unbalanced '(' in SMILES")
    if open_rings:
        raise ParseError(f"unpaired ring closure(s): {sorted(open_rings)}")
    if pending is not None:
        raise ParseError("dangling bond symbol at end of SMILES")
    if not g.atoms:
        raise ParseError("SMILES contains no atoms")
    return g


def implicit_hydrogens(g: MolecularGraph, i: int) -> int:
    """Hydrogen count for atom i: explicit bracket count, or valence-derived.

    Valence-derived: standard valence adjusted by formal charge, minus the
    bond-order sum (aromatic counts 1.5), floored at zero.
    """
    atom = g.atoms[i]
    if atom.explicit_h is not None:
        return atom.explicit_h
    if atom.element not in VALENCE:
        raise DataError(f"element '{atom.element}' has no assigned valence")
    bond_sum = sum(BOND_VALUE[b.order] for _, b in g.neighbors(i))
    return max(0, int(math.floor(VALENCE[atom.element] + atom.charge - bond_sum + 1e-9)))


def molecular_weight(g: MolecularGraph) -> float:
    """Sum of heavy-atom masses plus implicit hydrogens, in daltons."""
    total = 0.0
    for i, atom in enumerate(g.atoms):
        if atom.element not in ATOMIC_MASS:
            raise DataError(f"element '{atom.element}' missing from mass table")
        total += ATOMIC_MASS[atom.element]
        total += implicit_hydrogens(g, i) * ATOMIC_MASS["H"]
    return total


def featurize(g: MolecularGraph, graph_id: str = "") -> FeaturizedGraph:
    """Build fixed-width one-hot node/edge feature matrices for a molecule."""
    n = len(g.atoms)
    node = np.zeros((n, NODE_FEATURE_DIM))
    degrees = np.zeros(n, dtype=np.int64)
    for i, atom in enumerate(g.atoms):
        if atom.element in ELEMENT_SLOTS:
            node[i, ELEMENT_SLOTS.index(atom.element)] = 1.0
        else:
            node[i, 11] = 1.0  # catch-all slot; unreachable via parse_smiles
        deg = g.degree(i)
        degrees[i] = deg
        node[i, 12 + min(max(deg, 1), 6) - 1] = 1.0
        node[i, 18 + min(max(atom.charge, -2), 2) + 2] = 1.0
        node[i, 23] = 1.0 if atom.aromatic else 0.0

    m = len(g.bonds)
    src = np.empty(2 * m, dtype=np.int64)
    dst = np.empty(2 * m, dtype=np.int64)
    efeat = np.zeros((2 * m, EDGE_FEATURE_DIM))
    for k, bond in enumerate(g.bonds):
        src[2 * k], dst[2 * k] = bond.a, bond.b
        src[2 * k + 1], dst[2 * k + 1] = bond.b, bond.a
        efeat[2 * k, _BOND_SLOT[bond.order]] = 1.0
        efeat[2 * k + 1, _BOND_SLOT[bond.order]] = 1.0
    order = np.lexsort((src, dst))
    return FeaturizedGraph(graph_id=graph_id, node_features=node,
                           edge_src=src[order], edge_dst=dst[order],
                           edge_features=efeat[order], degrees=degrees)


def write_smiles(g: MolecularGraph) -> str:
    """Serialize a molecular graph to a normalized SMILES string.

    Deterministic: depth-first from atom 0, neighbors in index order.
    Re-parsing the output yields an isomorphic graph.
    """
    n = len(g.atoms)
    adj: list[list[tuple[int, Bond]]] = [[] for _ in range(n)]
    for bond in g.bonds:
        adj[bond.a].append((bond.b, bond))
        adj[bond.b].append((bond.a, bond))
    for lst in adj:
        lst.sort(key=lambda t: t[0])

    visited = [False] * n
    tree_children: list[list[tuple[int, Bond]]] = [[] for _ in range(n)]
    ring_bonds: list[tuple[int, int, Bond]] = []  # (first_seen, second, bond)
    seen_edges: set[int] = set()
    stack = [0]
    visited[0] = True
    dfs_order = [0]
    while stack:
        u = stack.pop()
        for v, bond in adj[u]:
            if id(bond) in seen_edges:
                continue
            if visited[v]:
                seen_edges.add(id(bond))
                ring_bonds.append((u, v, bond))
            else:
                seen_edges.add(id(bond))
                visited[v] = True
                tree_children[u].append((v, bond))
                dfs_order.append(v)
                stack.append(v)
    if not all(visited):
        raise ParseError("cannot serialize a disconnected graph")

    # Ring-closure digit per ring bond, keyed at both endpoints.
    ring_at: list[list[tuple[int, Bond, bool]]] = [[] for _ in range(n)]
    pos_of = {a: k for k, a in enumerate(dfs_order)}
    for digit, (u, v, bond) in enumerate(sorted(ring_bonds,
                                                key=lambda t: (pos_of[t[0]], pos_of[t[1]])),
                                         start=1):
        first, second = (u, v) if pos_of[u] < pos_of[v] else (v, u)
        ring_at[first].append((digit, bond, True))
        ring_at[second].append((digit, bond, False))

    def bond_symbol(bond: Bond) -> str:
        a_arom = g.atoms[bond.a].aromatic and g.atoms[bond.b].aromatic
        if bond.order == "single":
            return "-" if a_arom else ""
        if bond.order == "aromatic":
            return "" if a_arom else ":"
        return {"double": "=", "triple": "#"}[bond.order]

    def atom_token(i: int) -> str:
        atom = g.atoms[i]
        sym = atom.element.lower() if atom.aromatic else atom.element
        if atom.charge == 0 and atom.explicit_h is None:
            return sym
        h = ""
        if atom.explicit_h is not None and atom.explicit_h > 0:
            h = "H" if atom.explicit_h == 1 else f"H{atom.explicit_h}"
        if atom.charge > 0:
            c = "+" if atom.charge == 1 else f"+{atom.charge}"
        elif atom.charge < 0:
            c = "-" if atom.charge == -1 else f"-{-atom.charge}"
        else:
            c = ""
        return f"[{sym}{h}{c}]"

    def ring_token(i: int) -> str:
        parts = []
        for digit, bond, is_first in ring_at[i]:
            sym = bond_symbol(bond) if is_first else ""
            parts.append(f"{sym}{digit}" if digit < 10 else f"{sym}%{digit:02d}")
        return "".join(parts)

    def emit(u: int) -> str:
        out = atom_token(u) + ring_token(u)
        children = tree_children[u]
        for k, (v, bond) in enumerate(children):
            frag = bond_symbol(bond) + emit(v)
            out += frag if k == len(children) - 1 else f"({frag})"
        return out

    return emit(0)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass
class DataRecord:
    id: str
    smiles: str
    score: float


@dataclass
class Dataset:
    records: list[DataRecord]
    provenance: str = ""

    def __len__(self):
        return len(self.records)

    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.records])


@dataclass
class Rejection:
    id: str
    reason: str


def load_dataset(path) -> tuple[Dataset, list[Rejection]]:
    """Read an `id,smiles,score` CSV; unparseable SMILES become rejections.

    Structural problems (missing columns, duplicate ids, non-numeric scores,
    empty file) raise DataError naming the row.
    """
    records: list[DataRecord] = []
    rejections: list[Rejection] = []
    seen_ids: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["id", "smiles", "score"]:
            raise DataError(f"{path}: header must be 'id,smiles,score', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            rid, smiles, score_text = (c.strip() for c in row)
            if rid in seen_ids:
                raise DataError(f"{path}:{lineno}: duplicate id '{rid}'")
            seen_ids.add(rid)
            try:
                score = float(score_text)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric score '{score_text}'") from None
            if not math.isfinite(score):
                raise DataError(f"{path}:{lineno}: non-finite score")
            try:
                parse_smiles(smiles)
            except ParseError as e:
                rejections.append(Rejection(rid, str(e)))
                continue
            records.append(DataRecord(rid, smiles, score))
    if not records and not rejections:
        raise DataError(f"{path}: no data rows")
    return Dataset(records, provenance=str(path)), rejections


def write_rejections(path, rejections: list[Rejection]):
    from .container import atomic_write
    with atomic_write(path, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "reason"])
        for r in rejections:
            writer.writerow([r.id, r.reason])
