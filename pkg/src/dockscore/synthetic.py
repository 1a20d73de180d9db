"""Synthetic molecules and a deterministic descriptor-based score oracle.

Stands in for a docking engine: molecules are assembled from a small
template grammar (chains, branches, aliphatic rings, aromatic fragments,
heteroatom substitution), and scores are a fixed linear function of graph
descriptors plus optional seeded Gaussian noise, landing in a docking-like
range of roughly [-14, 0] where lower means a stronger binder.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .chem import Atom, Bond, Dataset, DataRecord, MolecularGraph, VALENCE, parse_smiles, write_smiles
from .container import atomic_write
from .errors import DataError
from .numeric import SeededRng

DESCRIPTOR_NAMES = ("ring_count", "heteroatom_count", "aromatic_count",
                    "heavy_atom_count", "mean_degree")


def descriptors(g: MolecularGraph) -> np.ndarray:
    """Graph descriptor vector; ring count is the cycle rank."""
    n = len(g.atoms)
    m = len(g.bonds)
    return np.array([
        m - n + 1,
        sum(1 for a in g.atoms if a.element != "C"),
        sum(1 for a in g.atoms if a.aromatic),
        n,
        2.0 * m / n if n else 0.0,
    ], dtype=np.float64)


@dataclass
class SyntheticOracle:
    """Pure scoring function of (molecule, seed); noise is added separately."""

    seed: int = 0
    weights: np.ndarray = field(default_factory=lambda: np.array(
        [1.0, 0.6, 0.15, 0.35, 1.2]))
    bias: float = 0.8
    noise_scale: float = 0.0

    def clean_score(self, g: MolecularGraph) -> float:
        d = descriptors(g)
        d = d.copy()
        d[4] = max(d[4] - 1.5, 0.0)  # mean degree above a chain baseline
        return self.bias - float(self.weights @ d)

    def score(self, g: MolecularGraph, record_index: int) -> float:
        value = self.clean_score(g)
        if self.noise_scale > 0.0:
            noise = SeededRng(self.seed).child("noise", record_index).normal()
            value += self.noise_scale * float(noise)
        return value


_AROMATIC_FRAGMENTS = (
    ("C", "C", "C", "C", "C", "C"),   # benzene
    ("N", "C", "C", "C", "C", "C"),   # pyridine
    ("S", "C", "C", "C", "C"),        # thiophene
    ("O", "C", "C", "C", "C"),        # furan
)


def _free_valence(g: MolecularGraph, i: int) -> int:
    from .chem import BOND_VALUE
    used = sum(BOND_VALUE[b.order] for _, b in g.neighbors(i))
    return int(VALENCE[g.atoms[i].element] - used)


def random_molecule(rng: SeededRng, max_atoms: int = 26) -> MolecularGraph:
    """One random connected molecule within the heavy-atom budget."""
    g = MolecularGraph()
    length = int(rng.child("len").integers(3, 9))
    length = min(length, max_atoms)
    for i in range(length):
        g.atoms.append(Atom("C"))
        if i:
            g.bonds.append(Bond(i - 1, i, "single"))

    # close an aliphatic ring inside the backbone
    if length >= 4 and rng.child("ring?").uniform() < 0.4:
        size = int(rng.child("ringsz").integers(3, min(6, length) + 1))
        start = int(rng.child("ringat").integers(0, length - size + 1))
        g.bonds.append(Bond(start, start + size - 1, "single"))

    # attach a whole aromatic cycle by a single bond
    if rng.child("arom?").uniform() < 0.45:
        frag = _AROMATIC_FRAGMENTS[int(rng.child("fragpick").integers(
            0, len(_AROMATIC_FRAGMENTS)))]
        anchor_choices = [i for i in range(len(g.atoms)) if _free_valence(g, i) >= 1]
        if anchor_choices and len(g.atoms) + len(frag) <= max_atoms:
            anchor = anchor_choices[int(rng.child("anchor").integers(
                0, len(anchor_choices)))]
            base = len(g.atoms)
            for elem in frag:
                g.atoms.append(Atom(elem, aromatic=True))
            ring = len(frag)
            for j in range(ring):
                g.bonds.append(Bond(base + j, base + (j + 1) % ring, "aromatic"))
            attach = [base + j for j in range(ring)
                      if g.atoms[base + j].element == "C"]
            g.bonds.append(Bond(anchor, attach[int(rng.child("attach").integers(
                0, len(attach)))], "single"))

    # short branches
    n_branches = int(rng.child("nbr").integers(0, 3))
    for b in range(n_branches):
        hosts = [i for i in range(len(g.atoms))
                 if not g.atoms[i].aromatic and _free_valence(g, i) >= 1]
        if not hosts or len(g.atoms) >= max_atoms:
            break
        host = hosts[int(rng.child("host", b).integers(0, len(hosts)))]
        blen = int(rng.child("blen", b).integers(1, 3))
        for j in range(min(blen, max_atoms - len(g.atoms))):
            g.atoms.append(Atom("C"))
            g.bonds.append(Bond(host, len(g.atoms) - 1, "single"))
            host = len(g.atoms) - 1

    # a carbonyl, valence permitting
    if rng.child("c=o?").uniform() < 0.35 and len(g.atoms) < max_atoms:
        hosts = [i for i in range(len(g.atoms))
                 if g.atoms[i].element == "C" and not g.atoms[i].aromatic
                 and _free_valence(g, i) >= 2]
        if hosts:
            host = hosts[int(rng.child("cohost").integers(0, len(hosts)))]
            g.atoms.append(Atom("O"))
            g.bonds.append(Bond(host, len(g.atoms) - 1, "double"))

    # heteroatom substitution on saturated carbons
    for i in range(len(g.atoms)):
        atom = g.atoms[i]
        if atom.aromatic or atom.element != "C":
            continue
        if any(b.order != "single" for _, b in g.neighbors(i)):
            continue
        if rng.child("het", i).uniform() >= 0.22:
            continue
        candidates = [e for e in ("N", "O", "S") if g.degree(i) <= VALENCE[e]]
        if candidates:
            atom.element = candidates[int(rng.child("hetpick", i).integers(
                0, len(candidates)))]
    return g


def make_dataset(n: int, seed: int, noise_scale: float = 0.3,
                 max_atoms: int = 26) -> Dataset:
    """Generate n scored molecules; every SMILES is re-parsed as a self-check."""
    if n < 10:
        raise DataError(f"synthetic dataset needs n >= 10, got {n}")
    oracle = SyntheticOracle(seed=seed, noise_scale=noise_scale)
    root = SeededRng(seed)
    records = []
    for i in range(n):
        mol = random_molecule(root.child("mol", i), max_atoms=max_atoms)
        smiles = write_smiles(mol)
        reparsed = parse_smiles(smiles)  # self-check: emitted strings must parse
        if len(reparsed.atoms) != len(mol.atoms):
            raise DataError(f"self-check failed for generated SMILES '{smiles}'")
        records.append(DataRecord(id=f"m{i:06d}", smiles=smiles,
                                  score=oracle.score(mol, i)))
    return Dataset(records, provenance=f"synthetic:seed={seed}")


def write_dataset_csv(path, dataset: Dataset):
    with atomic_write(path, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "smiles", "score"])
        for r in dataset.records:
            writer.writerow([r.id, r.smiles, repr(r.score)])
