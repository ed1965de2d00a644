#!/usr/bin/env python3
"""Generate the reduced two-qubit H2 Hamiltonian coefficient table.

Minimal-basis (STO-3G) restricted Hartree-Fock molecular orbitals of H2,
second-quantized electronic Hamiltonian, Bravyi-Kitaev encoding of the four
spin-orbitals and removal of the two qubits that only ever carry Z terms.

Output: CSV with header R_angstrom,h0,h1,h2,h3,h4,h5 where the two-qubit
Hamiltonian is h0 II + h1 ZI + h2 IZ + h3 ZZ + h4 XX + h5 YY, the left label
acting on Q1 and the right label on Q2. The Hartree-Fock state is |01>.

Usage: python3 tools/h2_coefficients.py > crates/core/data/h2_sto3g_bk_reduced.csv
"""
import itertools
import math
import sys

import numpy as np
from scipy.special import erf

BOHR_PER_ANGSTROM = 1.0 / 0.529177210903

# STO-3G hydrogen 1s, zeta = 1.24
ZETA = 1.24
ALPHA = np.array([0.109818, 0.405771, 2.22766]) * ZETA**2
COEF = np.array([0.444635, 0.535328, 0.154329])


def boys0(t):
    if t < 1e-12:
        return 1.0 - t / 3.0
    return 0.5 * math.sqrt(math.pi / t) * erf(math.sqrt(t))


def norm(a):
    return (2.0 * a / math.pi) ** 0.75


def prim_overlap(a, b, rab2):
    return (math.pi / (a + b)) ** 1.5 * math.exp(-a * b / (a + b) * rab2)


def prim_kinetic(a, b, rab2):
    mu = a * b / (a + b)
    return mu * (3.0 - 2.0 * mu * rab2) * (math.pi / (a + b)) ** 1.5 * math.exp(-mu * rab2)


def prim_nuclear(a, b, rab2, rpc2, zc):
    p = a + b
    return -2.0 * math.pi / p * zc * math.exp(-a * b / p * rab2) * boys0(p * rpc2)


def prim_eri(a, b, c, d, rab2, rcd2, rpq2):
    p = a + b
    q = c + d
    return (
        2.0 * math.pi**2.5 / (p * q * math.sqrt(p + q))
        * math.exp(-a * b / p * rab2 - c * d / q * rcd2)
        * boys0(p * q / (p + q) * rpq2)
    )


def contracted(centers):
    """AO integrals for the two 1s functions at the given 1D positions."""
    n = len(centers)
    s = np.zeros((n, n))
    t = np.zeros((n, n))
    v = np.zeros((n, n))
    eri = np.zeros((n, n, n, n))
    prims = [(ALPHA[i], COEF[i] * norm(ALPHA[i])) for i in range(3)]
    for i, j in itertools.product(range(n), repeat=2):
        ra, rb = centers[i], centers[j]
        rab2 = (ra - rb) ** 2
        for (a, ca), (b, cb) in itertools.product(prims, repeat=2):
            rp = (a * ra + b * rb) / (a + b)
            s[i, j] += ca * cb * prim_overlap(a, b, rab2)
            t[i, j] += ca * cb * prim_kinetic(a, b, rab2)
            for rc in centers:
                v[i, j] += ca * cb * prim_nuclear(a, b, rab2, (rp - rc) ** 2, 1.0)
    for i, j, k, l in itertools.product(range(n), repeat=4):
        ra, rb, rc, rd = centers[i], centers[j], centers[k], centers[l]
        for (a, ca), (b, cb), (c, cc), (d, cd) in itertools.product(prims, repeat=4):
            rp = (a * ra + b * rb) / (a + b)
            rq = (c * rc + d * rd) / (c + d)
            eri[i, j, k, l] += ca * cb * cc * cd * prim_eri(
                a, b, c, d, (ra - rb) ** 2, (rc - rd) ** 2, (rp - rq) ** 2
            )
    return s, t + v, eri


def qubit_hamiltonian(r_angstrom):
    r = r_angstrom * BOHR_PER_ANGSTROM
    s, h_ao, eri_ao = contracted([0.0, r])
    s12 = s[0, 1]
    # symmetry-adapted RHF orbitals (exact in a minimal basis)
    c = np.array(
        [
            [1.0 / math.sqrt(2 * (1 + s12)), 1.0 / math.sqrt(2 * (1 - s12))],
            [1.0 / math.sqrt(2 * (1 + s12)), -1.0 / math.sqrt(2 * (1 - s12))],
        ]
    )
    h_mo = c.T @ h_ao @ c
    eri_mo = np.einsum("pi,qj,rk,sl,pqrs->ijkl", c, c, c, c, eri_ao)  # chemist (ij|kl)

    # spin orbitals: 2*p + spin, spin 0 = up
    nso = 4
    h1 = np.zeros((nso, nso))
    h2 = np.zeros((nso, nso, nso, nso))  # physicist <pq|rs>
    for p, q in itertools.product(range(nso), repeat=2):
        if p % 2 == q % 2:
            h1[p, q] = h_mo[p // 2, q // 2]
    for p, q, rr, ss in itertools.product(range(nso), repeat=4):
        if p % 2 == rr % 2 and q % 2 == ss % 2:
            h2[p, q, rr, ss] = eri_mo[p // 2, rr // 2, q // 2, ss // 2]

    # Jordan-Wigner matrices, qubit k <-> spin orbital k, occupation bit k of index
    dim = 2**nso

    def annihilate(k):
        a = np.zeros((dim, dim))
        for state in range(dim):
            if state >> k & 1:
                sign = (-1) ** bin(state & ((1 << k) - 1)).count("1")
                a[state ^ (1 << k), state] = sign
        return a

    ann = [annihilate(k) for k in range(nso)]
    cre = [x.T for x in ann]
    ham = np.eye(dim) * (1.0 / r)
    for p, q in itertools.product(range(nso), repeat=2):
        if h1[p, q] != 0.0:
            ham += h1[p, q] * cre[p] @ ann[q]
    for p, q, rr, ss in itertools.product(range(nso), repeat=4):
        if h2[p, q, rr, ss] != 0.0:
            ham += 0.5 * h2[p, q, rr, ss] * cre[p] @ cre[q] @ ann[ss] @ ann[rr]

    # Bravyi-Kitaev: b0 = n0, b1 = n0+n1, b2 = n2, b3 = n0+n1+n2+n3 (mod 2)
    def bk(state):
        n = [state >> k & 1 for k in range(nso)]
        b = [n[0], (n[0] + n[1]) % 2, n[2], sum(n) % 2]
        return sum(bit << k for k, bit in enumerate(b))

    perm = np.zeros((dim, dim))
    for state in range(dim):
        perm[bk(state), state] = 1.0
    ham_bk = perm @ ham @ perm.T

    # b1 and b3 are conserved; keep the Hartree-Fock sector b1 = b3 = 0.
    # Two-qubit register |q1 q2> with q1 = b2 and q2 = b0, index 2*q1 + q2.
    red = np.zeros((4, 4))
    for q1, q2, p1, p2 in itertools.product(range(2), repeat=4):
        red[2 * q1 + q2, 2 * p1 + p2] = ham_bk[(q1 << 2) | q2, (p1 << 2) | p2]
    leak = np.abs(ham_bk).sum() - np.abs(ham_bk[np.ix_([0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15], [0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15])]).sum()
    assert abs(leak) < 1e-12

    paulis = {
        "I": np.eye(2),
        "X": np.array([[0, 1], [1, 0]]),
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": np.diag([1.0, -1.0]),
    }
    coeffs = {}
    for a, b in itertools.product("IXYZ", repeat=2):
        coeffs[a + b] = np.real(np.trace(np.kron(paulis[a], paulis[b]) @ red)) / 4.0
    kept = ["II", "ZI", "IZ", "ZZ", "XX", "YY"]
    for label, value in coeffs.items():
        if label not in kept:
            assert abs(value) < 1e-12, (label, value)
    return [coeffs[k] for k in kept], np.linalg.eigvalsh(ham).min()


def main():
    grid = [round(0.30 + 0.05 * k, 4) for k in range(45)] + [0.7414]
    grid = sorted(set(grid))
    out = sys.stdout
    out.write("R_angstrom,h0,h1,h2,h3,h4,h5\n")
    for r in grid:
        h, _ = qubit_hamiltonian(r)
        out.write(",".join([f"{r:.4f}"] + [f"{x:.12f}" for x in h]) + "\n")


if __name__ == "__main__":
    main()
