"""SMILES parsing and folded Morgan (circular) fingerprints.

The parser covers the organic subset, bracket atoms, branches, ring
closures (``0-9`` and ``%nn``), the bond symbols ``- = # :`` and aromatic
lowercase atoms. Stereo marks (``/ \\ @``), isotopes and atom classes are
accepted and dropped. Hydrogens written as bracket atoms (``[H]``) are
folded into their neighbour's hydrogen count so the graph only holds heavy
atoms.

Fingerprint scheme
------------------
Every atom starts from a 64-bit identifier hashed from the tuple
``(atomic number, heavy degree, formal charge, H count, aromatic, in ring)``.
At iteration ``r`` an atom's identifier becomes the hash of
``[r, previous id, bond_1, nbr_id_1, bond_2, nbr_id_2, ...]`` where the
``(bond code, neighbour id)`` pairs are sorted. Bond codes are 1, 2, 3 and 4
(aromatic). All identifiers from iterations ``0..radius`` are folded into
``nbits`` by ``id % nbits``.

``hash_sequence`` is the sequence hash used above::

    h = SEED
    for k, v in enumerate(values, 1):
        h = mix64(h ^ mix64((v + k * GOLDEN) mod 2**64))

with ``mix64`` the splitmix64 finalizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AROMATIC",
    "Atom",
    "Bond",
    "FingerprintBits",
    "MolecularGraph",
    "SmilesError",
    "fingerprint_from_hex",
    "fingerprint_to_hex",
    "hash_sequence",
    "morgan_fingerprint",
    "parse_smiles",
    "to_smiles",
]

AROMATIC = 4

_ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co "
    "Ni Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb "
    "Te I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re "
    "Os Ir Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es "
    "Fm Md No Lr"
).split()
ATOMIC_NUMBER = {sym: i + 1 for i, sym in enumerate(_ELEMENTS)}

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
# lowercase forms allowed inside brackets
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")

DEFAULT_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

_BOND_SYMBOLS = {"-": 1, "=": 2, "#": 3, ":": AROMATIC, "/": 1, "\\": 1}


class SmilesError(ValueError):
    """Malformed SMILES; ``offset`` is the 0-based character position."""

    def __init__(self, message: str, offset: int, smiles: str = ""):
        self.offset = offset
        self.smiles = smiles
        super().__init__(f"{message} at offset {offset}")


@dataclass(frozen=True)
class Atom:
    symbol: str
    charge: int = 0
    aromatic: bool = False
    hydrogens: int = 0
    degree: int = 0
    bracket: bool = False

    @property
    def atomic_number(self) -> int:
        return ATOMIC_NUMBER[self.symbol]


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: int  # 1, 2, 3 or AROMATIC


@dataclass(frozen=True)
class MolecularGraph:
    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]

    def __post_init__(self):
        n = len(self.atoms)
        seen = set()
        for b in self.bonds:
            if not (0 <= b.begin < n and 0 <= b.end < n) or b.begin == b.end:
                raise ValueError(f"invalid bond endpoints ({b.begin}, {b.end})")
            key = frozenset((b.begin, b.end))
            if key in seen:
                raise ValueError(f"duplicate bond between {b.begin} and {b.end}")
            seen.add(key)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def neighbors(self) -> list[list[tuple[int, int]]]:
        """Adjacency list of ``(neighbour index, bond order)`` per atom."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.begin].append((b.end, b.order))
            adj[b.end].append((b.begin, b.order))
        return adj

    def ring_atoms(self) -> list[bool]:
        """Flag atoms that sit on at least one cycle (non-bridge bond)."""
        flags = [False] * len(self.atoms)
        for b in _ring_bonds(self):
            flags[b.begin] = flags[b.end] = True
        return flags


def _ring_bonds(mol: MolecularGraph) -> list[Bond]:
    # Tarjan bridge finding; ring bonds are exactly the non-bridges.
    n = len(mol.atoms)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, b in enumerate(mol.bonds):
        adj[b.begin].append((b.end, k))
        adj[b.end].append((b.begin, k))
    disc = [-1] * n
    low = [0] * n
    bridges = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            node, via, it = stack[-1]
            advanced = False
            for nbr, k in it:
                if k == via:
                    continue
                if disc[nbr] == -1:
                    disc[nbr] = low[nbr] = timer
                    timer += 1
                    stack.append((nbr, k, iter(adj[nbr])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nbr])
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    bridges.add(via)
    return [b for k, b in enumerate(mol.bonds) if k not in bridges]


def implicit_hydrogens(symbol: str, aromatic: bool, bond_orders: list[int]) -> int:
    """Implicit H count for an organic-subset atom from its bond orders.

    Aromatic bonds count as 1; aromatic atoms spend one extra valence unit
    on the ring and only use their lowest normal valence, so a substituted
    ring nitrogen or a thiophene sulfur gets no hydrogen.
    """
    valences = DEFAULT_VALENCES.get(symbol)
    if valences is None:
        return 0
    used = sum(1 if o == AROMATIC else o for o in bond_orders)
    if aromatic:
        return max(valences[0] - used - 1, 0)
    for v in valences:
        if v >= used:
            return v - used
    return 0


# --------------------------------------------------------------------------
# parser


def _parse_bracket(text: str, start: int) -> tuple[dict, int]:
    end = text.find("]", start)
    if end == -1:
        raise SmilesError("unclosed bracket atom", start, text)
    body = text[start + 1 : end]
    i = 0
    while i < len(body) and body[i].isdigit():  # isotope, ignored
        i += 1
    symbol = None
    aromatic = False
    for cand in AROMATIC_BRACKET:
        if body.startswith(cand, i):
            symbol, aromatic = cand.capitalize(), True
            break
    if symbol is None:
        two, one = body[i : i + 2], body[i : i + 1]
        if len(two) == 2 and two[1].islower() and two in ATOMIC_NUMBER:
            symbol = two
        elif one in ATOMIC_NUMBER:
            symbol = one
        else:
            raise SmilesError(f"unknown atom symbol {body[i:i + 2]!r}", start + 1 + i, text)
    i += len(symbol)
    while i < len(body) and body[i] == "@":  # chirality, ignored
        i += 1
    for tag in ("TH", "AL", "SP", "TB", "OH"):
        if body.startswith(tag, i):
            i += 2
            while i < len(body) and body[i].isdigit():
                i += 1
    hydrogens = 0
    if i < len(body) and body[i] == "H":
        i += 1
        j = i
        while i < len(body) and body[i].isdigit():
            i += 1
        hydrogens = int(body[j:i]) if i > j else 1
    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        ch = body[i]
        i += 1
        j = i
        while i < len(body) and body[i].isdigit():
            i += 1
        if i > j:
            charge = sign * int(body[j:i])
        else:
            count = 1
            while i < len(body) and body[i] == ch:
                count += 1
                i += 1
            charge = sign * count
    if i < len(body) and body[i] == ":":  # atom class, ignored
        i += 1
        while i < len(body) and body[i].isdigit():
            i += 1
    if i != len(body):
        raise SmilesError(f"unexpected character {body[i]!r} in bracket atom", start + 1 + i, text)
    atom = {"symbol": symbol, "aromatic": aromatic, "hydrogens": hydrogens,
            "charge": charge, "bracket": True}
    return atom, end + 1


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a SMILES string into a heavy-atom :class:`MolecularGraph`.

    Raises :class:`SmilesError` (with the offending character offset) on
    empty input, unbalanced parentheses, unclosed ring digits, unknown atom
    symbols and other malformed constructs.
    """
    if not isinstance(text, str):
        raise TypeError("SMILES must be a string")
    text = text.strip()
    if not text:
        raise SmilesError("empty SMILES", 0, text)
    if not text.isascii():
        raise SmilesError("non-ASCII character", next(i for i, c in enumerate(text) if not c.isascii()), text)

    atoms: list[dict] = []
    bonds: dict[frozenset, list] = {}
    branch_stack: list[tuple[int, int]] = []  # (atom index, offset of '(')
    rings: dict[int, tuple[int, int | None, int]] = {}  # digit -> (atom, order, offset)
    prev: int | None = None
    pending: int | None = None
    pending_at = -1

    def add_bond(a: int, b: int, order: int | None, at: int):
        if a == b:
            raise SmilesError("ring closure onto the same atom", at, text)
        key = frozenset((a, b))
        if key in bonds:
            raise SmilesError("duplicate bond", at, text)
        bonds[key] = [a, b, order]

    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "(":
            if prev is None or pending is not None:
                raise SmilesError("branch without a preceding atom", i, text)
            branch_stack.append((prev, i))
            i += 1
        elif c == ")":
            if not branch_stack:
                raise SmilesError("unbalanced parenthesis", i, text)
            if pending is not None:
                raise SmilesError("bond symbol without a following atom", pending_at, text)
            if prev is not None and branch_stack[-1][0] == prev and text[i - 1] == "(":
                raise SmilesError("empty branch", i - 1, text)
            prev = branch_stack.pop()[0]
            i += 1
        elif c in _BOND_SYMBOLS:
            if pending is not None or prev is None:
                raise SmilesError(f"unexpected bond symbol {c!r}", i, text)
            pending, pending_at = _BOND_SYMBOLS[c], i
            i += 1
        elif c == ".":
            if pending is not None or prev is None:
                raise SmilesError("unexpected '.'", i, text)
            prev = None
            i += 1
        elif c.isdigit() or c == "%":
            at = i
            if c == "%":
                digits = text[i + 1 : i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesError("malformed %nn ring closure", i, text)
                label = int(digits)
                i += 3
            else:
                label = int(c)
                i += 1
            if prev is None:
                raise SmilesError("ring closure without a preceding atom", at, text)
            if label in rings:
                other, order, _ = rings.pop(label)
                if order is not None and pending is not None and order != pending:
                    raise SmilesError("conflicting ring-closure bond orders", at, text)
                add_bond(other, prev, pending if pending is not None else order, at)
            else:
                rings[label] = (prev, pending, at)
            pending = None
        elif c == "[":
            atom, nxt = _parse_bracket(text, i)
            atoms.append(atom)
            if prev is not None:
                add_bond(prev, len(atoms) - 1, pending, i)
            prev, pending = len(atoms) - 1, None
            i = nxt
        elif c == "@":
            raise SmilesError("chirality outside a bracket atom", i, text)
        else:
            sym = None
            for cand in ORGANIC_SUBSET:
                if text.startswith(cand, i):
                    sym, aromatic = cand, False
                    break
            if sym is None and c in AROMATIC_ORGANIC:
                sym, aromatic = c.upper(), True
            if sym is None:
                raise SmilesError(f"unknown atom symbol {c!r}", i, text)
            atoms.append({"symbol": sym, "aromatic": aromatic, "hydrogens": None,
                          "charge": 0, "bracket": False})
            if prev is not None:
                add_bond(prev, len(atoms) - 1, pending, i)
            prev, pending = len(atoms) - 1, None
            i += len(sym)

    if pending is not None:
        raise SmilesError("bond symbol without a following atom", pending_at, text)
    if branch_stack:
        raise SmilesError("unbalanced parenthesis", branch_stack[-1][1], text)
    if rings:
        label, (_, _, at) = min(rings.items(), key=lambda kv: kv[1][2])
        raise SmilesError(f"unclosed ring digit {label}", at, text)

    bond_list = []
    for a, b, order in bonds.values():
        if order is None:
            order = AROMATIC if atoms[a]["aromatic"] and atoms[b]["aromatic"] else 1
        bond_list.append((a, b, order))
    return _assemble(atoms, bond_list)


def _assemble(atoms: list[dict], bond_list: list[tuple[int, int, int]]) -> MolecularGraph:
    degree = [0] * len(atoms)
    for a, b, _ in bond_list:
        degree[a] += 1
        degree[b] += 1

    # fold neutral single-bonded [H] atoms into their neighbour
    drop = set()
    for k, atom in enumerate(atoms):
        if atom["symbol"] == "H" and atom["charge"] == 0 and degree[k] == 1 and atom["hydrogens"] == 0:
            (a, b, _), = [t for t in bond_list if k in (t[0], t[1])]
            other = b if a == k else a
            if atoms[other]["symbol"] == "H":
                continue
            drop.add(k)
            atoms[other]["extra_h"] = atoms[other].get("extra_h", 0) + 1
    remap = {}
    for k in range(len(atoms)):
        if k not in drop:
            remap[k] = len(remap)
    bond_list = [(remap[a], remap[b], o) for a, b, o in bond_list if a not in drop and b not in drop]
    atoms = [atoms[k] for k in range(len(atoms)) if k not in drop]

    orders: list[list[int]] = [[] for _ in atoms]
    for a, b, o in bond_list:
        orders[a].append(o)
        orders[b].append(o)
    out = []
    for k, atom in enumerate(atoms):
        extra = atom.get("extra_h", 0)
        h = atom["hydrogens"]
        if h is None:
            h = implicit_hydrogens(atom["symbol"], atom["aromatic"], orders[k] + [1] * extra)
        h += extra
        out.append(Atom(atom["symbol"], atom["charge"], atom["aromatic"], h,
                        len(orders[k]), atom["bracket"] or "extra_h" in atom))
    return MolecularGraph(tuple(out), tuple(Bond(a, b, o) for a, b, o in bond_list))


# --------------------------------------------------------------------------
# writer


def _atom_text(mol: MolecularGraph, k: int, orders: list[int]) -> str:
    atom = mol.atoms[k]
    sym = atom.symbol.lower() if atom.aromatic else atom.symbol
    organic = atom.symbol in DEFAULT_VALENCES and (not atom.aromatic or sym in AROMATIC_ORGANIC)
    if organic and atom.charge == 0 and atom.hydrogens == implicit_hydrogens(atom.symbol, atom.aromatic, orders):
        return sym
    text = "[" + sym
    if atom.hydrogens:
        text += "H" + (str(atom.hydrogens) if atom.hydrogens > 1 else "")
    if atom.charge:
        text += ("+" if atom.charge > 0 else "-") + (str(abs(atom.charge)) if abs(atom.charge) > 1 else "")
    return text + "]"


def _bond_text(mol: MolecularGraph, a: int, b: int, order: int) -> str:
    both_aromatic = mol.atoms[a].aromatic and mol.atoms[b].aromatic
    if order == AROMATIC:
        return "" if both_aromatic else ":"
    if order == 1:
        return "-" if both_aromatic else ""
    return "=" if order == 2 else "#"


def to_smiles(mol: MolecularGraph) -> str:
    """Emit a SMILES string by depth-first traversal in atom-index order.

    Not a canonical SMILES; re-parsing the output gives an isomorphic graph.
    """
    adj = mol.neighbors()
    for lst in adj:
        lst.sort()
    orders = [[o for _, o in lst] for lst in adj]
    n = mol.num_atoms
    visited = [False] * n
    # closures[atom] -> list of (partner, order, is_opening)
    closures: list[list[tuple[int, int, bool]]] = [[] for _ in range(n)]
    children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    used = set()

    def explore(root: int):
        stack = [root]
        visited[root] = True
        # iterative DFS keeping the recursive visiting order
        iters = {root: iter(adj[root])}
        while stack:
            node = stack[-1]
            for nbr, order in iters[node]:
                key = frozenset((node, nbr))
                if key in used:
                    continue
                used.add(key)
                if visited[nbr]:
                    closures[nbr].append((node, order, True))
                    closures[node].append((nbr, order, False))
                    continue
                visited[nbr] = True
                children[node].append((nbr, order))
                iters[nbr] = iter(adj[nbr])
                stack.append(nbr)
                break
            else:
                stack.pop()

    roots = []
    for k in range(n):
        if not visited[k]:
            roots.append(k)
            explore(k)

    free = list(range(1, 100))
    open_labels: dict[frozenset, int] = {}

    def ring_label(label: int) -> str:
        return str(label) if label < 10 else f"%{label:02d}"

    def write(root: int) -> str:
        out = []
        stack: list = [("atom", root)]
        while stack:
            kind, item = stack.pop()
            if kind == "text":
                out.append(item)
                continue
            node = item
            out.append(_atom_text(mol, node, orders[node]))
            # openings are recorded when the partner is explored, which is
            # after this atom is written; sort for a stable digit order
            for partner, order, opening in sorted(closures[node]):
                key = frozenset((node, partner))
                if key in open_labels:
                    label = open_labels.pop(key)
                    out.append(ring_label(label))
                    free.append(label)
                    free.sort()
                else:
                    label = free.pop(0)
                    open_labels[key] = label
                    out.append(_bond_text(mol, node, partner, order) + ring_label(label))
            kids = children[node]
            pushes = []
            for j, (child, order) in enumerate(kids):
                last = j == len(kids) - 1
                if not last:
                    pushes.append(("text", "("))
                pushes.append(("text", _bond_text(mol, node, child, order)))
                pushes.append(("atom", child))
                if not last:
                    pushes.append(("text", ")"))
            stack.extend(reversed(pushes))
        return "".join(out)

    return ".".join(write(r) for r in roots)


# --------------------------------------------------------------------------
# fingerprints

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_SEED = 0x2545F4914F6CDD1D


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def hash_sequence(values) -> int:
    """Order-sensitive 64-bit hash of a sequence of integers."""
    h = _SEED
    for k, v in enumerate(values, 1):
        h = _mix64(h ^ _mix64((v + k * _GOLDEN) & _MASK))
    return h


@dataclass(frozen=True)
class FingerprintBits:
    bits: np.ndarray
    nbits: int = 1024
    radius: int = 2

    def __post_init__(self):
        if self.bits.shape != (self.nbits,):
            raise ValueError(f"expected {self.nbits} bits, got shape {self.bits.shape}")
        self.bits.setflags(write=False)

    @property
    def on_bits(self) -> list[int]:
        return np.flatnonzero(self.bits).tolist()

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, FingerprintBits):
            return NotImplemented
        return self.nbits == other.nbits and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.nbits, self.bits.tobytes()))


def atom_invariants(mol: MolecularGraph) -> list[tuple[int, ...]]:
    in_ring = mol.ring_atoms()
    return [
        (a.atomic_number, a.degree, a.charge, a.hydrogens, int(a.aromatic), int(in_ring[k]))
        for k, a in enumerate(mol.atoms)
    ]


def environment_ids(mol: MolecularGraph, radius: int) -> list[list[int]]:
    """Per-iteration atom environment identifiers, ``ids[r][atom]``."""
    adj = mol.neighbors()
    current = [hash_sequence(inv) for inv in atom_invariants(mol)]
    layers = [current]
    for r in range(1, radius + 1):
        nxt = []
        for k, nbrs in enumerate(adj):
            pairs = sorted((order, current[j]) for j, order in nbrs)
            seq = [r, current[k]]
            for order, nid in pairs:
                seq.extend((order, nid))
            nxt.append(hash_sequence(seq))
        current = nxt
        layers.append(current)
    return layers


def morgan_fingerprint(mol: MolecularGraph, radius: int = 2, nbits: int = 1024) -> FingerprintBits:
    """Folded circular fingerprint; see the module docstring for the scheme."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if nbits < 1:
        raise ValueError("nbits must be >= 1")
    bits = np.zeros(nbits, dtype=np.uint8)
    for layer in environment_ids(mol, radius):
        for env in layer:
            bits[env % nbits] = 1
    return FingerprintBits(bits, nbits, radius)


def fingerprint_to_hex(fp: FingerprintBits) -> str:
    """Hex dump with bit 0 as the most significant bit of the first digit."""
    if fp.nbits % 4:
        raise ValueError("hex dump needs nbits divisible by 4")
    return np.packbits(fp.bits).tobytes().hex()[: fp.nbits // 4]


def fingerprint_from_hex(text: str, radius: int = 2) -> FingerprintBits:
    nbits = 4 * len(text)
    raw = bytes.fromhex(text + ("0" if len(text) % 2 else ""))
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:nbits].copy()
    return FingerprintBits(bits, nbits, radius)
