"""Smoke test for the pyhkf extension module.

Build and install first:

    pip install --no-build-isolation ./crates/hkf-python
    python python/smoke_test.py
"""

import json
import math
import sys

import pyhkf


def close(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(abs(a), abs(b), 1e-300)


def check(name, ok):
    print(f"{'ok  ' if ok else 'FAIL'} {name}")
    return ok


def main():
    results = []

    ev = sorted(pyhkf.gram_eigenvalues(1.0, 1))
    results.append(check("2x2 Gram spectrum", close(ev[0], 1 / 24, 1e-10) and close(ev[1], 1 / 8, 1e-10)))

    n = 8
    m1 = pyhkf.periodized_symbol([1], 3, 1.0)
    results.append(check("periodized symbol closed form", close(m1, math.pi**2 / (n * n * math.sin(math.pi / n) ** 2), 1e-10)))
    results.append(check("periodized symbol periodicity", pyhkf.periodized_symbol([9], 3, 1.7) == pyhkf.periodized_symbol([1], 3, 1.7)))

    q = 6
    x = pyhkf.lattice_points(q)
    y = pyhkf.kl_sample(2.5, q, seed=0, instance=0, half_width=512)
    results.append(check("kl_sample is reproducible", y == pyhkf.kl_sample(2.5, q, seed=0, instance=0, half_width=512)))

    k = pyhkf.SpectralKernel(2.5, q=q)
    eb = k.eb_loss(x, y)
    tq = pyhkf.dft_alias(y, q)
    eb_spec = pyhkf.eb_loss_spectral(2.5, tq)
    results.append(check("EB matrix vs spectral", close(eb, eb_spec, 1e-6)))

    kf = k.kf_loss(x, y)
    kf_spec = pyhkf.kf_loss_spectral(2.5, tq, tq.fold(q - 1))
    results.append(check("KF matrix vs spectral", close(kf, kf_spec, 1e-6) and 0.0 <= kf <= 1.0))

    # Dense Gram route: agreement is limited by the Gram condition number.
    scaled = pyhkf.SpectralKernel(2.5, sigma=10.0, q=q)
    results.append(check("KF invariant under amplitude", close(scaled.kf_loss(x, y), kf, 1e-8)))
    spec_scaled = pyhkf.kf_loss_spectral(2.5, pyhkf.dft_alias([10.0 * v for v in y], q), pyhkf.dft_alias([10.0 * v for v in y], q).fold(q - 1))
    results.append(check("KF invariant under data scaling", close(spec_scaled, kf_spec, 1e-12)))

    mean = k.conditional_mean(x, y, x[:4])
    results.append(check("conditional mean interpolates", all(abs(a - b) < 1e-8 for a, b in zip(mean, y[:4]))))

    r = pyhkf.minimize_scalar(lambda t: (t - 1.3) ** 2, 0.0, 3.0)
    results.append(check("minimize_scalar", abs(r["argmin"][0] - 1.3) < 1e-4 and not r["hit_boundary"][0]))

    r = pyhkf.minimize_simplex(lambda p: (p[0] - 0.4) ** 2 + 2 * (p[1] + 0.2) ** 2, [0.5, 0.5], [(-1, 1), (-1, 1)])
    results.append(check("minimize_simplex", abs(r["argmin"][0] - 0.4) < 1e-2 and abs(r["argmin"][1] + 0.2) < 1e-2))

    try:
        pyhkf.SpectralKernel(0.4)
        results.append(check("divergent exponent rejected", False))
    except ValueError:
        results.append(check("divergent exponent rejected", True))

    cfg = json.loads(pyhkf.default_config("oracle-check"))
    cfg["q"] = [3, 4]
    cfg["instances"] = 2
    report = json.loads(pyhkf.run_experiment(json.dumps(cfg)))
    d = report["derived"]
    results.append(check("oracle-check experiment", d["failed_cases"] == 0 and d["max_rel_eb"] < 1e-6))

    g = pyhkf.green_truth(1.0, 0.5, 63)
    results.append(check("Green function peaks at the source", max(range(63), key=lambda i: g[i]) == 31))

    print(f"{sum(results)}/{len(results)} checks passed")
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())
