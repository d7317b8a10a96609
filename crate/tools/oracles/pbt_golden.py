"""Independent brute-force oracle for standard port-based teleportation.

Builds the port states by explicit M-fold tensor product and partial trace,
forms the pretty good measurement by eigendecomposition, and sums
Tr[Pi_t sigma_t] / d^2. Also evaluates the standard qubit closed
form as a second check. Output values are frozen into the Rust tests.
"""
import itertools
import numpy as np
from math import comb, sqrt


def phi_plus(d):
    v = np.zeros(d * d, dtype=complex)
    for i in range(d):
        v[i * d + i] = 1 / np.sqrt(d)
    return np.outer(v, v.conj())


def ptrace(rho, dims, keep):
    n = len(dims)
    t = rho.reshape(dims + dims)
    trace_out = [i for i in range(n) if i not in keep]
    for k, ax in enumerate(sorted(trace_out, reverse=True)):
        cur = t.ndim // 2
        t = np.trace(t, axis1=ax, axis2=ax + cur)
    kd = [dims[i] for i in keep]
    D = int(np.prod(kd))
    return t.reshape(D, D)


def permute(rho, dims, perm):
    n = len(dims)
    t = rho.reshape(dims + dims)
    t = t.transpose(list(perm) + [p + n for p in perm])
    nd = [dims[p] for p in perm]
    D = int(np.prod(nd))
    return t.reshape(D, D)


def port_states(d, M, rho_pair):
    # subsystem order A1 B1 A2 B2 ... -> reorder to A1..AM B1..BM
    full = rho_pair
    for _ in range(M - 1):
        full = np.kron(full, rho_pair)
    dims = [d] * (2 * M)
    perm = [2 * i for i in range(M)] + [2 * i + 1 for i in range(M)]
    full = permute(full, dims, perm)
    sig = []
    for t in range(M):
        keep = list(range(M)) + [M + t]
        sig.append(ptrace(full, dims, keep))
    return sig


def port_states_factorwise(d, M, rho_pair):
    # Tr_{B_s} of each spectator pair, then tensor; reorder to A1..AM B
    red = ptrace(rho_pair, [d, d], [0])
    out = []
    for t in range(M):
        full = rho_pair
        for _ in range(M - 1):
            full = np.kron(full, red)
        # order now: A_t B A_others...; move to A1..AM B
        others = [s for s in range(M) if s != t]
        labels = [t, M] + others  # A index = port number, B = M
        perm = [labels.index(k) for k in list(range(M)) + [M]]
        out.append(permute(full, [d] * (M + 1), perm))
    return out


def pgm(etas):
    S = sum(etas)
    w, V = np.linalg.eigh(S)
    tol = len(w) * 1e-12 * w.max()
    inv = np.array([1 / np.sqrt(x) if x > tol else 0.0 for x in w])
    Sih = V @ np.diag(inv) @ V.conj().T
    P = V @ np.diag([1.0 if x > tol else 0.0 for x in w]) @ V.conj().T
    M = len(etas)
    I = np.eye(S.shape[0])
    return [Sih @ e @ Sih + (I - P) / M for e in etas]


def fidelity(d, povm, etas):
    return sum(np.trace(P @ e).real for P, e in zip(povm, etas)) / d ** 2


def isotropic(d, p):
    return p * phi_plus(d) + (1 - p) * np.eye(d * d) / d ** 2


def ih_closed_form(N):
    s = 0.0
    for k in range(N + 1):
        s += ((N - 2 * k - 1) / sqrt(k + 1) + (N - 2 * k + 1) / sqrt(N - k + 1)) ** 2 * comb(N, k)
    return s / 2 ** (N + 3)


if __name__ == "__main__":
    d = 2
    for M in range(1, 9):
        sig = port_states_factorwise(d, M, phi_plus(d))
        if M <= 4:
            bf = port_states(d, M, phi_plus(d))
            assert max(np.abs(a - b).max() for a, b in zip(sig, bf)) < 1e-14
        F = fidelity(d, pgm(sig), sig)
        print(f"M={M} F_bruteforce={F!r} F_closed={ih_closed_form(M)!r} gap={abs(F-(1-3/(4*M)))!r}")
    # fixed-measurement vs resource-adapted measurement for isotropic resources
    for M in (2, 3):
        sig1 = port_states(d, M, phi_plus(d))
        F1 = fidelity(d, pgm(sig1), sig1)
        for p in (0.3, 0.7):
            sp = port_states(d, M, isotropic(d, p))
            fixed = fidelity(d, pgm(sig1), sp)
            adapted = fidelity(d, pgm(sp), sp)
            print(f"M={M} p={p} thm1={p*F1+(1-p)/4!r} fixed={fixed!r} adapted={adapted!r}")
