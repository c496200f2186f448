#!/usr/bin/env python3
"""Independent computation of the golden constants embedded in the
`patchlens verify` command (crates/cli/src/verify.rs).

Run `python3 scripts/golden.py` and paste the printed constants into
verify.rs if any check definition changes. Uses plain numpy so the
values come from a toolchain unrelated to the Rust implementation.
"""

import numpy as np


def gd_run(K, y, eta, steps, w0=None):
    d = K.shape[1]
    w = np.zeros(d) if w0 is None else w0.astype(float).copy()
    for _ in range(steps):
        w = w - eta * K.T @ (K @ w - y)
    return w


def main():
    # Hand-iterated GD: K = I2, y = (1, 0), eta = 0.1.
    K = np.eye(2)
    y = np.array([1.0, 0.0])
    w2 = gd_run(K, y, 0.1, 2)
    print(f"GOLD_GD_I2_T2: [{float(w2[0])!r}, {float(w2[1])!r}]")

    # Geometric series g(lambda=1, eta=0.1, t=10) = 1 - 0.9^10.
    g10 = (1.0 - (1.0 - 0.1 * 1.0) ** 10) / 1.0
    print(f"GOLD_GEOM_L1_T10: {g10!r}")
    w10 = gd_run(K, y, 0.1, 10)
    print(f"GOLD_GD_I2_T10: [{float(w10[0])!r}, {float(w10[1])!r}]")

    # A/B diagonals at lambda=1, |mu|^2=1, eta=0.1, t=1.
    lam, m2, eta, t = 1.0, 1.0, 0.1, 1
    a = (1.0 - (1.0 - eta * lam) ** t) / lam
    b = (1.0 - (1.0 - eta * (lam + m2)) ** t) / (m2 * (lam + m2))
    print(f"GOLD_AB_L1_M1_T1: [{a!r}, {b!r}]")

    # Woodbury rank-one update, Sigma' = I2, mu = (1, 0):
    # (Sigma' + mu mu^T)^-1 mu, and the update form, must both be (0.5, 0).
    mu = np.array([1.0, 0.0])
    direct = np.linalg.solve(np.eye(2) + np.outer(mu, mu), mu)
    s = np.linalg.solve(np.eye(2), mu)
    update = s - s * (mu @ s) / (1.0 + mu @ s)
    assert np.allclose(direct, update, atol=1e-15)
    print(f"GOLD_WOODBURY_I2: [{float(direct[0])!r}, {float(direct[1])!r}]")


if __name__ == "__main__":
    main()
