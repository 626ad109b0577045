"""Acceptance suite: ten end-to-end criteria, one pass/fail line each.

Each test prints its verdict directly to the terminal (bypassing capture) so
a full run shows ten explicit PASS/FAIL lines in addition to the usual pytest
report.  Runtime budgets are asserted where the criterion carries one.
"""

import itertools
import math
import time
import warnings

import numpy as np
import pytest
from scipy.optimize import minimize

from codedmask.cli import main, read_aperture_file
from codedmask.flatseq import (ResidueFamily, find_residue_lengths,
                               residue_sequence, worst_case_penalty)
from codedmask.model import (Aperture, ImagingConfig, ScenePrior,
                             best_random_onoff, lmmse, sample_prior)
from codedmask.nazarov import design_aperture
from codedmask.spectra import beta, m_bound
from codedmask.waterfill import optimal_rho, waterfill
from codedmask.flatseq import flat_design


@pytest.fixture
def verdict(capsys):
    """Print one explicit PASS/FAIL line per criterion, bypassing capture."""
    def _verdict(ok: bool, num: int, text: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {text}"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line
    return _verdict


def test_criterion_01_quadratic_flatness(verdict):
    start = time.monotonic()
    fams = find_residue_lengths(2, 997)
    ok = len(fams) > 0
    for fam in fams:
        power = np.abs(residue_sequence(fam).spectrum()) ** 2
        level = (fam.p + 1) / 4
        ok = ok and np.allclose(power[1:], level, rtol=1e-6, atol=0.0)
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 10.0
    verdict(ok, 1,
            f"all {len(fams)} quadratic masks with p <= 997 are flat at "
            f"(p+1)/4 within 1e-6 ({elapsed:.1f}s < 10s)")


def test_criterion_02_residue_lengths(verdict):
    start = time.monotonic()
    octic = sorted(f.p for f in find_residue_lengths(8, 10 ** 6))
    # Direct validity check of the larger octic length, independent of the
    # search: parameter identities plus full construction with spectral
    # verification.
    assert 26041 == 8 * 57 ** 2 + 49 == 64 * 20 ** 2 + 441
    big = ResidueFamily(26041, 8, include_zero=True)
    residue_sequence(big)  # raises if the spectrum is not flat
    quartic = find_residue_lengths(4, 10 ** 7)
    plain_quartic = sum(1 for f in quartic if not f.include_zero)
    elapsed = time.monotonic() - start
    ok = (octic == [73, 26041] and plain_quartic > 150 and elapsed < 120.0)
    verdict(ok, 2,
            f"octic lengths to 1e6 = {octic}, 26041 verified flat directly, "
            f"{plain_quartic} quartic lengths below 1e7 (> 150) "
            f"({elapsed:.1f}s < 120s)")


def test_criterion_03_penalty_constants(verdict):
    got = (worst_case_penalty({0.5}),
           worst_case_penalty({0.25, 0.5}),
           worst_case_penalty({0.125, 0.25, 0.5}))
    want = (2.0, 4 / 3, 8 / 7)
    ok = all(abs(g - w) < 1e-4 for g, w in zip(got, want))
    verdict(ok, 3,
            "worst-case exposure penalties "
            f"{tuple(round(g, 6) for g in got)} match (2, 4/3, 8/7) "
            "within 1e-4")


def test_criterion_04_beta_and_m_constants(verdict):
    ok = all(abs(beta(n) - 1 / math.sqrt(2)) < 1e-12 for n in (4, 8, 1024))
    ok = ok and abs(beta(10007) - 2 * math.sqrt(2) / math.pi) < 2e-3
    tested = list(range(100, 2049, 53)) + [128, 677, 997, 1024, 2048]
    ms = [m_bound(n) for n in tested]
    ok = ok and all(5.76 <= m <= 9.48 for m in ms)
    db = 10 * math.log10(2 * m_bound(10007) ** 2)
    ok = ok and abs(db - 18.30) < 0.1
    verdict(ok, 4,
            f"beta = 1/sqrt(2) at multiples of 4; beta(10007) within 2e-3 of "
            f"2*sqrt(2)/pi; M(n) in [5.76, 9.48] on {len(tested)} lengths; "
            f"2M^2 = {db:.3f} dB within 0.1 of 18.30")


def test_criterion_05_design_certificates(verdict):
    start = time.monotonic()
    ok = True
    total = 0
    for n in (16, 64, 677):
        cfg = ImagingConfig(n, 50.0 * n, 1e-3, 1e-3)
        M = m_bound(n)
        rng = np.random.default_rng(n)
        for trial in range(100):
            d = rng.random(n) + 1e-3
            d /= d.sum()
            aperture, cert = design_aperture(cfg, d, seed=[n, trial])
            total += 1
            ok = ok and cert.passed and cert.restarts <= 16
            ok = ok and cert.b_sup_norm <= M * (1 + 1e-9)
            ahat2 = np.abs(aperture.spectrum()) ** 2
            ok = ok and bool(np.all(
                ahat2[1:] >= cert.required[1:] * (1 - 1e-9) - 1e-300))
            _, bound = optimal_rho(cfg, d)
            ok = ok and lmmse(cfg.with_t(cfg.t * 2 * M * M), d, aperture) <= \
                bound * (1 + 1e-9)
            if not ok:
                break
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 300.0
    verdict(ok, 5,
            f"{total} random-prior designs at n in (16, 64, 677) all "
            f"certified (sup-norm, spectral, penalized-exposure) "
            f"({elapsed:.0f}s < 300s)")


def test_criterion_06_waterfill_oracle(verdict):
    rng = np.random.default_rng(2024)
    ok = True
    for trial in range(50):
        n = int(rng.integers(2, 7))
        d = rng.random(n) + 0.01
        gamma = float(rng.random() + 0.05)
        P = float(rng.random() * 20 + 0.1)
        alloc = waterfill(d, gamma, P)

        def f(x, d=d[1:], g=gamma):
            return float(np.sum(1.0 / (1.0 / d + g * x)))

        mine = f(alloc.targets[1:])
        k = n - 1
        res = minimize(f, np.full(k, P / k), bounds=[(0, None)] * k,
                       constraints=[{"type": "eq",
                                     "fun": lambda x: x.sum() - P}],
                       method="SLSQP",
                       options={"maxiter": 500, "ftol": 1e-14})
        ok = ok and mine <= res.fun + 1e-6 * max(1.0, abs(res.fun))
    verdict(ok, 6,
            "50 small waterfilling instances match the constrained-solver "
            "oracle within 1e-6 in objective value")


def test_criterion_07_exhaustive_small_mask(verdict):
    start = time.monotonic()
    n, ones = 13, 6
    cfg = ImagingConfig(n, 130.0, 1e-3, 1e-3)
    d = np.full(n, 0.01 / n)
    stated = (1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0, 0)

    best_val = math.inf
    count = 0
    for idx in itertools.combinations(range(n), ones):
        mask = np.zeros(n)
        mask[list(idx)] = 1.0
        count += 1
        best_val = min(best_val, lmmse(cfg, d, Aperture(mask)))
    stated_val = lmmse(cfg, d, Aperture(np.array(stated, dtype=float)))
    attains = stated_val <= best_val * (1 + 1e-12)

    improves = True
    qr = sorted({(i * i) % n for i in range(1, n)})
    for eps in (0.26, 0.30, 0.34):
        a = np.zeros(n)
        a[0] = eps
        a[qr] = 1.0 - eps / ones
        improves = improves and lmmse(cfg, d, Aperture(a)) < best_val
    elapsed = time.monotonic() - start
    ok = attains and improves and count == 1716 and elapsed < 5.0
    verdict(ok, 7,
            f"stated binary mask attains the exhaustive minimum over "
            f"{count} masks ({best_val:.6g}); biased continuous family "
            f"strictly improves at eps in (0.26, 0.30, 0.34) "
            f"({elapsed:.1f}s < 5s)")


def test_criterion_08_sweep_ordering(verdict):
    n = 677
    top_decade = (1e6, 1e7)
    priors = {
        "iid": np.full(n, 1.0 / n),
        "bandlimited": sample_prior(ScenePrior.bandlimited(1.0, 0.02, 0.005),
                                    n),
    }
    results = {}
    sound = True
    for name, d in priors.items():
        cfg0 = ImagingConfig(n, 100.0, 1e-3, 1e-3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            flat_ap, _ = flat_design(cfg0, d)
        for ti, t in enumerate((1e4,) + top_decade):
            cfg = cfg0.with_t(t)
            _, lb = optimal_rho(cfg, d)
            fl = lmmse(cfg, d, flat_ap)
            ap, _ = design_aperture(cfg, d, seed=[0, ti])
            nz = lmmse(cfg, d, ap)
            _, rnd = best_random_onoff(cfg, d, np.linspace(0, 1, 11), 3,
                                       [0, ti])
            sound = sound and lb <= min(fl, nz, rnd) + 1e-9
            results[(name, t)] = (fl, nz)
    iid_order = all(results[("iid", t)][0] <= results[("iid", t)][1]
                    for t in top_decade)
    bl_order = all(results[("bandlimited", t)][1] <=
                   results[("bandlimited", t)][0] for t in top_decade)
    ok = iid_order and bl_order and sound
    verdict(ok, 8,
            "at the top exposure decade the flat mask beats the synthesized "
            "one on the iid prior and vice versa on the bandlimited prior; "
            "the lower bound is below every method column")


def test_criterion_09_greedy_performance(verdict):
    n = 2000
    cfg = ImagingConfig(n, 1e4, 1e-3, 1e-3)
    d = np.full(n, 1.0 / n)
    start = time.monotonic()
    _, cert = design_aperture(cfg, d, seed=0)
    elapsed = time.monotonic() - start
    ok = cert.passed and elapsed < 60.0
    verdict(ok, 9,
            f"n=2000 iid design completes with a passing certificate in "
            f"{elapsed:.1f}s (< 60s)")


def test_criterion_10_determinism(verdict, tmp_path, capsys):
    masks, csvs = [], []
    for run in range(2):
        mask = tmp_path / f"mask{run}.txt"
        code = main(["design", "--n", "64", "--t", "500", "--W", "0.001",
                     "--J", "0.001", "--prior", "prior iid theta=1",
                     "--method", "nazarov", "--seed", "9",
                     "--out", str(mask)])
        assert code == 0
        masks.append(mask.read_bytes())
        csv = tmp_path / f"sweep{run}.csv"
        code = main(["sweep", "--n", "11", "--W", "0.001", "--J", "0.001",
                     "--prior", "prior iid theta=1", "--t-min", "100",
                     "--t-max", "10000", "--t-count", "3", "--trials", "2",
                     "--random-grid", "5", "--seed", "9", "--out", str(csv)])
        assert code == 0
        csvs.append(csv.read_bytes())
    capsys.readouterr()
    ok = masks[0] == masks[1] and csvs[0] == csvs[1]
    verdict(ok, 10,
            "repeated runs with identical seeds produce byte-identical "
            "aperture files and sweep CSVs")
