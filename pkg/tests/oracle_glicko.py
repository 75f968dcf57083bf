"""Straight-from-the-formulas Glicko-1 reference, independent of the package.

Written directly from the update equations with no shared helpers, so that a
transcription slip in either side shows up as a mismatch.
"""

import math

LN10 = 2.302585092994046


def ref_update(r, rd, r_o, rd_o, s, min_rd=50.0):
    """Return (r', rd') for one game against (r_o, rd_o) with score s."""
    q = LN10 / 400.0
    g_o = (1.0 + 3.0 * (q ** 2) * (rd_o ** 2) / (math.pi ** 2)) ** -0.5
    e = 1.0 / (1.0 + math.pow(10.0, -g_o * (r - r_o) / 400.0))
    d2 = 1.0 / ((q ** 2) * (g_o ** 2) * e * (1.0 - e))
    inv = rd ** -2 + 1.0 / d2
    r_new = r + (q / inv) * g_o * (s - e)
    rd_new = math.sqrt(1.0 / inv)
    return r_new, max(min_rd, rd_new)


def ref_g(rd):
    q = LN10 / 400.0
    return (1.0 + 3.0 * (q ** 2) * (rd ** 2) / (math.pi ** 2)) ** -0.5


def ref_expected(r, r_o, rd_o):
    return 1.0 / (1.0 + math.pow(10.0, -ref_g(rd_o) * (r - r_o) / 400.0))


def ref_d_squared(r, r_o, rd_o):
    q = LN10 / 400.0
    e = ref_expected(r, r_o, rd_o)
    return 1.0 / ((q ** 2) * (ref_g(rd_o) ** 2) * e * (1.0 - e))


def ref_pairing_score(r_i, rd_i, r_j, rd_j):
    e_i = ref_expected(r_i, r_j, rd_j)
    return e_i * (1.0 - e_i) * (ref_g(rd_i) ** 2 + ref_g(rd_j) ** 2)
