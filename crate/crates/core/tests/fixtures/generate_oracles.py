#!/usr/bin/env python3
"""Regenerates the extended-precision oracle fixtures in this directory.

Every expected value is evaluated with mpmath at 200 bits (or more) directly
from the textbook definition, then rounded once to the storage format. The
Rust implementation is never consulted.

    python3 generate_oracles.py
"""

import json
import os
import random
import struct

from mpmath import mp, mpf, sqrt, log, sin, cos, pi, exp, ncdf, erfinv, nsum, inf

mp.prec = 200
HERE = os.path.dirname(os.path.abspath(__file__))


def dump(name, payload):
    with open(os.path.join(HERE, name), "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def f64(x):
    return float(x)


def f32_bits(x):
    """Round an mpf to the nearest binary32 (normal range) and return its bits."""
    with mp.workprec(24):
        r = +x
    v = float(r)
    return struct.unpack("<I", struct.pack("<f", v))[0]


def bits_to_f32(b):
    return struct.unpack("<f", struct.pack("<I", b))[0]


def transform_pairs(rng):
    rows = []
    two32 = mpf(2) ** 32
    for _ in range(1000):
        w1 = rng.randrange(1, 2**32)
        w2 = rng.randrange(1, 2**32)
        u1 = mpf(w1) / two32
        u2 = mpf(w2) / two32
        radius = sqrt(-2 * log(u1))
        bm_alpha = radius * sin(2 * pi * u2)
        bm_beta = radius * cos(2 * pi * u2)
        v1 = 2 * u1 - 1
        v2 = 2 * u2 - 1
        s = v1 * v1 + v2 * v2
        row = {
            "w1": w1,
            "w2": w2,
            "box_muller": [f64(bm_alpha), f64(bm_beta)],
        }
        if 0 < s < 1:
            factor = sqrt(-2 * log(s) / s)
            row["polar"] = [f64(v1 * factor), f64(v2 * factor)]
        else:
            row["polar"] = None
        rows.append(row)
    dump("transform_pairs.json", rows)


def phi(x):
    return ncdf(mpf(x))


def chi_square(rng):
    samples = []
    bins = 8
    edges = [erfinv(mpf(2 * j) / bins - 1) * sqrt(2) for j in range(1, bins)]
    while len(samples) < 200:
        x = rng.gauss(0.0, 1.1)
        # stay clear of bin boundaries so the bin assignment is unambiguous
        if min(abs(mpf(x) - e) for e in edges) < mpf("1e-9"):
            continue
        samples.append(x)
    counts = [0] * bins
    for x in samples:
        p = phi(x)
        counts[min(int(p * bins), bins - 1)] += 1
    expected = mpf(len(samples)) / bins
    stat = sum((mpf(c) - expected) ** 2 / expected for c in counts)
    dump(
        "chi_square_200.json",
        {"bins": bins, "samples": samples, "counts": counts, "statistic": f64(stat)},
    )


def anderson_darling(rng):
    samples = [rng.gauss(0.2, 1.3) for _ in range(10)]
    xs = sorted(mpf(x) for x in samples)
    n = len(xs)
    acc = mpf(0)
    for i in range(1, n + 1):
        acc += (2 * i - 1) * (log(phi(xs[i - 1])) + log(1 - phi(xs[n - i])))
    a2 = -n - acc / n
    dump("anderson_darling_10.json", {"samples": samples, "statistic": f64(a2)})


def ks_survival(lam):
    return 2 * nsum(lambda j: (-1) ** (j - 1) * exp(-2 * j * j * lam * lam), [1, inf])


def kolmogorov_smirnov(rng):
    samples = [rng.gauss(-0.1, 0.9) for _ in range(20)]
    xs = sorted(mpf(x) for x in samples)
    n = len(xs)
    d = max(
        max(mpf(i) / n - phi(x), phi(x) - mpf(i - 1) / n)
        for i, x in enumerate(xs, start=1)
    )
    rn = sqrt(n)
    p = ks_survival((rn + mpf("0.12") + mpf("0.11") / rn) * d)
    dump(
        "kolmogorov_smirnov_20.json",
        {"samples": samples, "statistic": f64(d), "p_value": f64(p)},
    )

    n = 64
    equi = [f64(erfinv(2 * (mpf(i) - mpf("0.5")) / n - 1) * sqrt(2)) for i in range(1, n + 1)]
    # D of the stored (rounded) quantiles; 1/(2n) up to that rounding.
    d = max(
        max(mpf(i) / n - phi(x), phi(x) - mpf(i - 1) / n)
        for i, x in enumerate(equi, start=1)
    )
    dump("ks_equioscillating_64.json", {"samples": equi, "statistic": f64(d)})


def moments(rng):
    samples = [rng.uniform(-3, 5) ** 3 / 7 for _ in range(100)]
    xs = [mpf(x) for x in samples]
    n = mpf(len(xs))
    mean = sum(xs) / n
    m2 = sum((x - mean) ** 2 for x in xs)
    m3 = sum((x - mean) ** 3 for x in xs)
    m4 = sum((x - mean) ** 4 for x in xs)
    pm2 = m2 / n
    dump(
        "moments_100.json",
        {
            "samples": samples,
            "mean": f64(mean),
            "variance": f64(m2 / (n - 1)),
            "skewness": f64((m3 / n) / pm2 ** mpf("1.5")),
            "excess_kurtosis": f64((m4 / n) / pm2**2 - 3),
        },
    )


def f32_cores(rng):
    rows = {"log": [], "sin": [], "cos": []}
    e_bits = f32_bits(mp.e)
    log_inputs = [e_bits]
    while len(log_inputs) < 2000:
        # positive normal binary32 values across the exponent range
        b = rng.randrange(0x00800000, 0x7F800000)
        if b != 0x3F800000:
            log_inputs.append(b)
    for b in log_inputs:
        rows["log"].append([b, f32_bits(log(mpf(bits_to_f32(b))))])
    for _ in range(2000):
        b = rng.randrange(0, 2**31)
        x = mpf(bits_to_f32(b))
        if not (mpf("1e-3") < x < 8):
            x = mpf(bits_to_f32(struct.unpack("<I", struct.pack("<f", rng.uniform(1e-3, 8)))[0]))
        b = f32_bits(x)
        s, c = sin(x), cos(x)
        if abs(s) > mpf("1e-30"):
            rows["sin"].append([b, f32_bits(s)])
        if abs(c) > mpf("1e-30"):
            rows["cos"].append([b, f32_bits(c)])
    dump("f32_cores.json", rows)


def main():
    rng = random.Random(20190718)
    transform_pairs(rng)
    chi_square(rng)
    anderson_darling(rng)
    kolmogorov_smirnov(rng)
    moments(rng)
    f32_cores(rng)


if __name__ == "__main__":
    main()
