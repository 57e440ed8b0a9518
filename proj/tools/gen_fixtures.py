#!/usr/bin/env python3
"""Regenerates the FCIDUMP fixtures under fixtures/ with PySCF.

Each fixture is written as <name>.fcidump plus a <name>.json sidecar holding
the geometry, nuclear charge, and reference energies computed by PySCF
(RHF, FCI, CCSD). The C++ test suites treat the sidecar values as external
reference data.

Usage: python3 tools/gen_fixtures.py [--out fixtures]
"""
import argparse
import json
import math
import os

import numpy as np
from pyscf import ao2mo, cc, fci, gto, scf


def write_fcidump(path, h1, eri, norb, nelec, ms2, e_core, mo_energy, tol=1e-12):
    with open(path, "w") as f:
        f.write(" &FCI NORB=%d,NELEC=%d,MS2=%d,\n" % (norb, nelec, ms2))
        f.write("  ORBSYM=%s,\n" % ",".join("1" for _ in range(norb)))
        f.write("  ISYM=1,\n &END\n")
        for i in range(norb):
            for j in range(i + 1):
                for k in range(norb):
                    for l in range(k + 1):
                        if i * (i + 1) // 2 + j < k * (k + 1) // 2 + l:
                            continue
                        v = eri[i, j, k, l]
                        if abs(v) > tol:
                            f.write("%23.16e %4d %4d %4d %4d\n" % (v, i + 1, j + 1, k + 1, l + 1))
        for i in range(norb):
            for j in range(i + 1):
                if abs(h1[i, j]) > tol:
                    f.write("%23.16e %4d %4d %4d %4d\n" % (h1[i, j], i + 1, j + 1, 0, 0))
        for i in range(norb):
            f.write("%23.16e %4d %4d %4d %4d\n" % (mo_energy[i], i + 1, 0, 0, 0))
        f.write("%23.16e %4d %4d %4d %4d\n" % (e_core, 0, 0, 0, 0))


def build(name, atoms, basis, out, bond_length=None, with_fci=True):
    mol = gto.M(atom=atoms, basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol).run()
    c = mf.mo_coeff
    norb = c.shape[1]
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), norb)
    path = os.path.join(out, name + ".fcidump")
    write_fcidump(path, h1, eri, norb, mol.nelectron, mol.spin, mol.energy_nuc(), mf.mo_energy)
    meta = {
        "name": name,
        "basis": basis,
        "geometry_angstrom": atoms,
        "bond_length": bond_length,
        "nuclear_charge": int(sum(mol.atom_charges())),
        "norb": int(norb),
        "nelec": int(mol.nelectron),
        "ms2": int(mol.spin),
        "e_core": float(mol.energy_nuc()),
        "h_11": float(h1[0, 0]),
        "eri_1111": float(eri[0, 0, 0, 0]),
        "e_hf_total": float(mf.e_tot),
        "generator": "pyscf RHF canonical orbitals",
    }
    if with_fci:
        meta["e_fci_total"] = float(fci.FCI(mf).kernel()[0])
        meta["e_ccsd_total"] = float(cc.CCSD(mf).run().e_tot)
    with open(os.path.join(out, name + ".json"), "w") as f:
        json.dump(meta, f, indent=2)
    print(name, norb, mol.nelectron, meta.get("e_fci_total"))
    return meta


def diatomic(a, b, r):
    return "%s 0 0 0; %s 0 0 %.6f" % (a, b, r)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "fixtures"))
    args = ap.parse_args()
    out = args.out
    os.makedirs(out, exist_ok=True)

    build("h2_sto6g", diatomic("H", "H", 0.7414), "sto-6g", out, 0.7414)
    build("lih_sto6g", diatomic("Li", "H", 1.5949), "sto-6g", out, 1.5949)
    build("hf_sto6g", diatomic("F", "H", 0.9168), "sto-6g", out, 0.9168)
    build("h2o_sto6g", "O 0 0 0; H 0 0.7571 0.5861; H 0 -0.7571 0.5861", "sto-6g", out)
    build("beh2_sto6g", "Be 0 0 0; H 0 0 1.3264; H 0 0 -1.3264", "sto-6g", out)

    large = os.path.join(out, "large")
    os.makedirs(large, exist_ok=True)
    build("lih_631g", diatomic("Li", "H", 1.5949), "6-31g", large, 1.5949)
    r, hnh = 1.012, math.radians(106.67)
    cb = math.sqrt((1 + 2 * math.cos(hnh)) / 3)
    sb = math.sqrt(1 - cb * cb)
    nh3 = "N 0 0 0;" + ";".join(
        "H %.6f %.6f %.6f" % (r * sb * math.cos(2 * math.pi * k / 3), r * sb * math.sin(2 * math.pi * k / 3), -r * cb)
        for k in range(3))
    build("nh3_sto6g", nh3, "sto-6g", large)
    rb = 1.19
    bh3 = "B 0 0 0;" + ";".join(
        "H %.6f %.6f 0" % (rb * math.cos(2 * math.pi * k / 3), rb * math.sin(2 * math.pi * k / 3)) for k in range(3))
    build("bh3_sto6g", bh3, "sto-6g", large)

    for mol, a, b, lengths in (
        ("hf", "F", "H", (0.70, 0.80, 0.9168, 1.10, 1.30, 1.60, 2.00, 2.50)),
        ("lih", "Li", "H", (1.20, 1.40, 1.5949, 1.90, 2.30, 2.80, 3.40)),
    ):
        sdir = os.path.join(out, "scan_" + mol)
        os.makedirs(sdir, exist_ok=True)
        with open(os.path.join(sdir, "scan.txt"), "w") as lst:
            lst.write("# label bond_length_angstrom fcidump\n")
            for r in lengths:
                label = "%s_%.4f" % (mol, r)
                build(label, diatomic(a, b, r), "sto-6g", sdir, r)
                lst.write("%s %.4f %s.fcidump\n" % (label, r, label))


if __name__ == "__main__":
    main()
