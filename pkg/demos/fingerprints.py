"""Parse a few SMILES strings and look at their circular fingerprints."""

from bridgedpi.chem import fingerprint_to_hex, morgan_fingerprint, parse_smiles, to_smiles
from bridgedpi.synthetic import marker_bits

drugs = {
    "ethanol": "CCO",
    "aspirin": "CC(=O)Oc1ccccc1C(=O)O",
    "caffeine": "Cn1cnc2c1c(=O)n(C)c(=O)n2C",
    "sulfanilamide": "Nc1ccc(cc1)S(=O)(=O)N",
}

# the parser gives a plain graph: atoms with implicit H counts, bonds with orders
mol = parse_smiles(drugs["aspirin"])
print(f"aspirin: {mol.num_atoms} heavy atoms, {mol.num_bonds} bonds")
for atom in mol.atoms[:4]:
    print(f"  {atom.symbol:<2} H={atom.hydrogens} aromatic={atom.aromatic}")
print("written back:", to_smiles(mol))

# radius 2, folded to 1024 bits
for name, smi in drugs.items():
    fp = morgan_fingerprint(parse_smiles(smi), radius=2, nbits=1024)
    print(f"{name:<14} {fp.popcount:>3} bits on, first bits {fp.on_bits[:6]}")

# a 64-bit fold is short enough to print in full
print(fingerprint_to_hex(morgan_fingerprint(parse_smiles(drugs["caffeine"]), nbits=64)))

# the synthetic data keys on one bit: the sulfonyl sulfur environment
(marker,) = marker_bits()
for name, smi in drugs.items():
    print(f"{name:<14} marker bit {marker} set: {marker in morgan_fingerprint(parse_smiles(smi)).on_bits}")
