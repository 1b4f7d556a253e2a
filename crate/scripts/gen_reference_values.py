#!/usr/bin/env python3
"""Generate high-precision reference constants for the Rust test suites.

All frozen numeric constants asserted by the unit and acceptance tests are
produced here with 50-digit arithmetic (mpmath) and printed as Rust-ready
literals. Nothing in the library links against this script; it exists so
that every pinned constant can be regenerated and audited instead of being
hand-typed.

Usage:  python3 scripts/gen_reference_values.py
"""

from mpmath import mp, mpf, gammainc, erfc, erfinv, log, sqrt, exp

mp.dps = 50

LN2 = log(2)
LOG2E = 1 / LN2


def gamma_p(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    return gammainc(a, 0, x, regularized=True)


def gauss_q(x):
    return erfc(x / sqrt(2)) / 2


def gauss_q_inv(p):
    return sqrt(2) * erfinv(1 - 2 * p)


def fb_rate(snr, h2, n, eps):
    v = snr * h2
    disp = sqrt((1 - (1 + v) ** -2) / n)
    return log(1 + v) / LN2 - disp * gauss_q_inv(eps) * LOG2E


def fb_error(snr, h2, n, r):
    v = snr * h2
    disp = sqrt((1 - (1 + v) ** -2) / n)
    return gauss_q((log(1 + v) / LN2 - r) / (disp * LOG2E))


def show(name, value, digits=17):
    print(f"{name} = {mp.nstr(mpf(value), digits)}")


# ---------------------------------------------------------------------------
# Default operating point
# ---------------------------------------------------------------------------
B = mpf(10000)
SN2 = mpf("0.05")
SS2 = mpf("0.12")
S = mpf("0.6")
Q = mpf("0.2")
P1 = mpf(1)          # 0 dB
P2 = mpf(10)         # 10 dB
LAM = mpf("0.1")
T = mpf("0.1")
N = mpf("0.001")
NBL = 990
NB = 10

SNR1 = P1 / (B * (SN2 + SS2))
SNR2 = P2 / (B * (SN2 + SS2))
SNR3 = P1 / (B * SN2)
SNR4 = P2 / (B * SN2)

print("// --- special functions ---")
show("GAMMA_P_10_20", gamma_p(10, 20))
show("GAMMA_P_HALF_1", gamma_p(mpf("0.5"), 1))
show("GAMMA_P_5_2P5", gamma_p(5, mpf("2.5")))
show("GAMMA_P_100_80", gamma_p(100, 80))
show("GAMMA_P_100_120", gamma_p(100, 120))
show("Q_AT_1", gauss_q(1))
show("Q_AT_3_0902", gauss_q(mpf("3.0902")))
show("Q_AT_5", gauss_q(5))
show("Q_AT_10", gauss_q(10))
show("Q_AT_20", gauss_q(20))
show("Q_AT_MINUS_2", gauss_q(-2))
show("QINV_1E3", gauss_q_inv(mpf("0.001")))
show("QINV_1E6", gauss_q_inv(mpf("0.000001")))
show("QINV_0P3", gauss_q_inv(mpf("0.3")))

print("// --- detector operating point ---")
show("P_FALSE_ALARM_DEFAULT", 1 - gamma_p(NB, NB * LAM / SN2))
show("P_DETECT_DEFAULT", 1 - gamma_p(NB, NB * LAM / (SN2 + SS2)))
show("P_DETECT_IF_IVAR_0P10", 1 - gamma_p(NB, NB * LAM / (SN2 + mpf("0.1"))))

print("// --- finite-blocklength coding ---")
show("FB_RATE_SNR3_N990_EPS1E3", fb_rate(3, 1, NBL, mpf("0.001")))
show("EPS2_DEFAULT_R2_0P02", fb_error(SNR2, 1, NBL, mpf("0.02")))
show("EPS2_DEFAULT_R2_2", fb_error(SNR2, 1, NBL, 2))
show("VRATE_SNR200_EPS1E3", fb_rate(200, 1, NBL, mpf("0.001")))


def eps_missdetect(h2, eps):
    num = log((1 + SNR2 * h2) / (1 + SNR4 * h2)) / LN2 + sqrt(
        (1 - (1 + SNR4 * h2) ** -2) / NBL
    ) * gauss_q_inv(eps) * LOG2E
    den = sqrt((1 - (1 + SNR2 * h2) ** -2) / NBL) * LOG2E
    return gauss_q(num / den)


def eps_falsealarm(h2, eps):
    num = log((1 + SNR3 * h2) / (1 + SNR1 * h2)) / LN2 + sqrt(
        (1 - (1 + SNR1 * h2) ** -2) / NBL
    ) * gauss_q_inv(eps) * LOG2E
    den = sqrt((1 - (1 + SNR3 * h2) ** -2) / NBL) * LOG2E
    return gauss_q(num / den)


show("EPS_MISSDETECT_H1_DEFAULT", eps_missdetect(1, mpf("0.001")))
show("EPS_FALSEALARM_H1_DEFAULT", eps_falsealarm(1, mpf("0.001")))

print("// --- eight-state transition rows, defaults, h2 = 1 ---")
PD = 1 - gamma_p(NB, NB * LAM / (SN2 + SS2))
PF = 1 - gamma_p(NB, NB * LAM / SN2)


def rows_fixed(r1, r2, h2):
    e1 = fb_error(SNR1, h2, NBL, r1)
    e2 = fb_error(SNR2, h2, NBL, r2)
    e3 = fb_error(SNR3, h2, NBL, r1)
    e4 = fb_error(SNR4, h2, NBL, r2)
    factors = [
        PD * (1 - e1), PD * e1,
        (1 - PD) * (1 - e2), (1 - PD) * e2,
        PF * (1 - e3), PF * e3,
        (1 - PF) * (1 - e4), (1 - PF) * e4,
    ]
    # busy row uses (1-s) on the busy-truth block and s on the idle-truth block
    busy = [(1 - S) * f for f in factors[:4]] + [S * f for f in factors[4:]]
    idle = [Q * f for f in factors[:4]] + [(1 - Q) * f for f in factors[4:]]
    return busy, idle


def rows_variable(eps, h2):
    edd = eps_missdetect(h2, eps)
    ed = eps_falsealarm(h2, eps)
    factors = [
        PD * (1 - eps), PD * eps,
        (1 - PD) * (1 - edd), (1 - PD) * edd,
        PF * (1 - ed), PF * ed,
        (1 - PF) * (1 - eps), (1 - PF) * eps,
    ]
    busy = [(1 - S) * f for f in factors[:4]] + [S * f for f in factors[4:]]
    idle = [Q * f for f in factors[:4]] + [(1 - Q) * f for f in factors[4:]]
    return busy, idle


def print_rows(tag, busy, idle):
    print(f"ROWS_{tag}_BUSY = [")
    for v in busy:
        print(f"    {mp.nstr(v, 17)},")
    print("]")
    print(f"ROWS_{tag}_IDLE = [")
    for v in idle:
        print(f"    {mp.nstr(v, 17)},")
    print("]")


b, i = rows_fixed(mpf("0.005"), mpf("0.02"), 1)
print_rows("FIXED_R1_0P005_R2_0P02", b, i)
b, i = rows_variable(mpf("0.001"), 1)
print_rows("VARIABLE_EPS1E3", b, i)

print("// --- misc ---")
show("EXP_MINUS_0P99", exp(mpf("-0.99")))
show("SENSED_BUSY_SPEC_PERF", (Q * mpf("0.863") + S * mpf("0.005")) / (Q + S))
