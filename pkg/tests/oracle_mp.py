"""Arbitrary-precision re-evaluation of the certificate formulas.

Deliberately shares no code with ``langevin_cert``: every formula is typed
out again in mpmath at 50 significant digits.  Run as a script to print the
golden values frozen in the test-suite.
"""
from __future__ import annotations

import mpmath as mp

mp.mp.dps = 50
E4 = mp.e ** 4


def c_of_gamma(gamma):
    g = mp.mpf(gamma)
    return g / 2 + mp.sqrt(g ** 2 / 4 + 1)


def singular_growth(N, k, A, B, a, b, T):
    N, k, A, B, a, b, T = map(mp.mpf, (N, k, A, B, a, b, T))
    kappa2 = (
        N ** (5 - 8 / a) * A * a * (a - 1) * k * (128 * (a - 1) * k ** 2 * T / (A * a)) ** ((a - 2) / a)
        + N ** (10 + 16 / b) * 4 * B * b * (b + 3) * k * (512 * (b + 3) * k ** 2 * T / (B * b)) ** ((b + 2) / b)
        + A ** 2 * a ** 2 / (8 * N ** 2 * k * T)
        + B ** 2 * b ** 2 * N ** (2 * b + 4) / (8 * k * T)
    )
    c0 = N ** 3 * 4 * b ** 2 / B ** (2 / b)
    expo = (a - 1) * b / (a + b)
    d0 = N ** (1 - 2 * expo) * 2 * A ** 2 * a ** 2 * (A ** (2 / b) * b ** 2 / (B ** (2 / b) * a ** 2)) ** expo
    c_inf = A ** (2 / a) * a ** 2 / (2 ** (5 - 2 / a) * N ** (5 - 2 / a))
    d_inf = (
        N ** (b * (6 * a - 2) * (a - 1) / (a * (a + b)) + 2 / a - 1)
        * A ** (2 / a) * a ** 2 * B ** 2 / (8 * B ** (2 / a))
        * (A ** (2 / a) * a ** 2 / (B ** (2 / a) * b ** 2)) ** (b * (a - 1) / (a + b))
        + 2 * A ** 2 * a ** 2 / N
        + 2 * B ** 2 * b ** 2 * N ** (2 * b + 5)
    )
    return dict(kappa2=kappa2, c0=c0, d0=d0, c_inf=c_inf, d_inf=d_inf,
                eta0=b, eta_inf=a)


def villani(gamma, T, M2, rho):
    gamma, T, M2, rho = map(mp.mpf, (gamma, T, M2, rho))
    c = c_of_gamma(gamma)
    zeta2 = (2 + M2) / (gamma ** 2 * T) + c ** 2 / (2 * T) + 1 / (4 * T)
    sigma = gamma / 4 * min(mp.mpf(1), 1 / (rho * zeta2))
    return dict(zeta_sq=zeta2, sigma=sigma)


def double_well_m2(gamma, T, d):
    gamma, T, d = map(mp.mpf, (gamma, T, d))
    c = c_of_gamma(gamma)
    k0 = gamma / (2 * mp.sqrt(T + T * c ** 2))
    k0p = 27 / k0 ** 2 + 2
    m2 = 2 * gamma ** 2 * T * k0 * d / (4 * c ** 2) + mp.sqrt(2 * d) * k0p * gamma ** 2 / (4 * c ** 2) + k0p ** 2
    return dict(kappa0=k0, kappa0_prime=k0p, M_sq=m2)


def chain(gc, gamma, T, d, rho_K):
    """Full general-route certificate chain in arbitrary precision."""
    g = {key: mp.mpf(val) for key, val in gc.items()}
    gamma, T, d, rho_K = map(mp.mpf, (gamma, T, d, rho_K))
    c = c_of_gamma(gamma)
    kp = 1 / (16 * T * d)
    inner = max((40 * E4 + 4) * T * d * (g["kappa2"] + 1), 92 * gamma ** 2 * T * d)
    R1 = (g["d_inf"] / g["c_inf"] + inner / g["c_inf"]) ** (1 / (2 - 2 / g["eta_inf"]))
    R2 = R1 + 32 * T * d
    alpha = gamma * T * d / (4 * R2)
    beta = 5 * gamma * T * d / (4 * R2) * E4
    rho_p = (4 * c ** 2 + 4) * rho_K / gamma

    def D(r):
        return ((2 * (g["c0"] * kp) ** 2 * r ** (4 + 4 / g["eta0"]) + 2 * (g["d0"] * kp) ** 2
                 + g["kappa2"] ** 2 + 2) / (gamma ** 2 * T) + 1 / (2 * T))

    shift = R2 * mp.log(beta * rho_p + 1)

    def gap(r):
        return r - R2 * mp.log(D(r)) - shift

    lo = shift
    hi = max(2 * lo, mp.mpf(1))
    while gap(hi) < 0:
        hi *= 2
    if gap(lo) >= 0:
        lam0 = lo
    else:
        for _ in range(400):
            mid = (lo + hi) / 2
            if gap(mid) >= 0:
                hi = mid
            else:
                lo = mid
        lam0 = hi
    lam = (beta * rho_p + 1) * D(lam0)
    zeta2 = 2 / (1 + beta * rho_p)
    sigma = min(alpha / (2 * (1 + lam)), gamma / (1 + beta * rho_p))
    return dict(c_gamma=c, kappa_prime=kp, R1=R1, R2=R2, alpha=alpha, beta=beta,
                rho_K_prime=rho_p, lambda0=lam0, lambda_=lam, zeta_sq=zeta2, sigma=sigma)


if __name__ == "__main__":
    gc = singular_growth(2, 3, 1, 1, 2, 6, 1)
    for key, val in gc.items():
        print(f"{key} = {mp.nstr(val, 20)}")
    print(villani(2, 1, 1, 1))
    print(double_well_m2(2, 1, 1))
    for N in (2, 4, 8, 16):
        out = chain(singular_growth(N, 3, 1, 1, 2, 6, 1), 1, 1, 3 * N, 1)
        print(N, mp.nstr(out["sigma"], 20))
