"""Command-line surface: design, evaluate, sweep, brute force, tables.

Exit codes: 0 on success with passing certificates, 2 on validation errors,
3 on certificate failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import flatseq, nazarov, spectra
from .waterfill import lower_bound, optimal_rho
from .model import (
    Aperture,
    ImagingConfig,
    best_random_onoff,
    lmmse,
    parse_prior_record,
    random_onoff,
    sample_prior,
)

__all__ = ["main", "write_aperture_file", "read_aperture_file"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CERTIFICATE = 3


def write_aperture_file(path, aperture: Aperture) -> None:
    """Serialize a mask: one header line, then 17-significant-digit values."""
    v = aperture.values
    kind = "binary" if np.all((v == 0) | (v == 1)) else "continuous"
    lines = [f"n={v.shape[0]} dims={v.ndim} kind={kind}"]
    flat = v.ravel()
    lines.extend(f"{x:.17g}" for x in flat)
    Path(path).write_text("\n".join(lines) + "\n")


def read_aperture_file(path) -> Aperture:
    text = Path(path).read_text().split()
    header: dict[str, str] = {}
    idx = 0
    while idx < len(text) and "=" in text[idx]:
        key, val = text[idx].split("=", 1)
        header[key] = val
        idx += 1
    try:
        n = int(header["n"])
        dims = int(header["dims"])
        kind = header["kind"]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed aperture file header in {path}") from exc
    if dims not in (1, 2) or kind not in ("binary", "continuous"):
        raise ValueError(f"malformed aperture file header in {path}")
    values = [float(x) for x in text[idx:]]
    expect = n if dims == 1 else n * n
    if len(values) != expect:
        raise ValueError(
            f"aperture file {path} holds {len(values)} values, header "
            f"promises {expect}")
    v = np.array(values)
    if dims == 2:
        v = v.reshape(n, n)
    return Aperture(v)


def _load_prior(args, n: int):
    """Prior from --prior (inline record or file containing one record)."""
    text = args.prior
    path = Path(text)
    base = None
    if not text.startswith("prior ") and path.is_file():
        base = path.parent
        text = path.read_text().strip()
    prior = parse_prior_record(text, base_dir=base)
    return prior, sample_prior(prior, n)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--W", type=float, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--prior", required=True,
                   help="inline prior record or path to a prior file")


def cmd_design(args) -> int:
    config = ImagingConfig(args.n, args.t, args.W, args.J)
    _, d = _load_prior(args, args.n)
    if args.method == "flat":
        aperture, cert = flatseq.flat_design(config, d)
    else:
        try:
            aperture, cert = nazarov.design_aperture(config, d, seed=args.seed)
        except nazarov.DesignError as exc:
            print(f"certificate failure: {exc}", file=sys.stderr)
            return EXIT_CERTIFICATE
    if args.out:
        write_aperture_file(args.out, aperture)
    report = {
        "method": args.method,
        "n": args.n,
        "rho": aperture.rho,
        "penalty": cert.penalty,
        "passed": bool(cert.passed),
        "seed": cert.seed,
        "restarts": cert.restarts,
        "b_sup_norm": cert.b_sup_norm,
        "min_spectral_margin": float(
            np.min(cert.achieved[1:] - cert.required[1:]))
        if len(cert.achieved) > 1 else 0.0,
        "detail": {k: v for k, v in cert.detail.items()
                   if k != "potential_trace"},
    }
    text = json.dumps(report, indent=2, default=float)
    if args.report:
        Path(args.report).write_text(text + "\n")
    print(f"design method={args.method} n={args.n} rho={aperture.rho:.6g} "
          f"penalty={cert.penalty:.6g} passed={cert.passed}")
    print(text)
    return EXIT_OK if cert.passed else EXIT_CERTIFICATE


def cmd_evaluate(args) -> int:
    if not args.ideal_lens and not args.aperture:
        raise ValueError("evaluate needs --aperture or --ideal-lens")
    aperture = (Aperture.ideal_lens(args.n) if args.ideal_lens
                else read_aperture_file(args.aperture))
    if aperture.n != args.n:
        raise ValueError(
            f"aperture length {aperture.n} does not match --n {args.n}")
    dims = aperture.dims
    config = ImagingConfig(args.n, args.t, args.W, args.J, dims=dims)
    _, d = _load_prior(args, args.n)
    if dims == 2:
        # Separable product prior, normalized to keep the total variance.
        d = (np.outer(d, d) / d.sum()).ravel()
    value = lmmse(config, d, aperture)
    bound = lower_bound(config, d, aperture.rho)
    print(f"lmmse {value:.12g}")
    print(f"lowerbound_at_rho {bound:.12g}")
    return EXIT_OK


_SWEEP_COLUMNS = ("t", "lmmse_lowerbound", "lmmse_flat", "lmmse_nazarov",
                  "lmmse_random_mean", "rho_star", "rho_random_star", "seed")


def cmd_sweep(args) -> int:
    methods = args.methods.split(",")
    valid = {"lowerbound", "flat", "nazarov", "random"}
    if not methods or not set(methods) <= valid:
        raise ValueError(f"methods must be a nonempty subset of {valid}")
    if args.t_min <= 0 or args.t_count < 2:
        raise ValueError("need t-min > 0 and t-count >= 2")
    config0 = ImagingConfig(args.n, args.t_min, args.W, args.J)
    prior, d = _load_prior(args, args.n)
    ts = np.geomspace(args.t_min, args.t_max, args.t_count)

    flat_aperture = None
    if "flat" in methods:
        flat_aperture, _ = flatseq.flat_design(config0, d)
    rho_grid = np.linspace(0.0, 1.0, args.random_grid)

    lines = [
        f"# codedmask sweep n={args.n} W={args.W} J={args.J}",
        f"# prior: {args.prior}",
        f"# t grid: geomspace({args.t_min}, {args.t_max}, {args.t_count})",
        f"# methods: {','.join(methods)}",
        f"# random: trials={args.trials} grid={args.random_grid} "
        f"seed={args.seed} (mean over trials)",
        ",".join(_SWEEP_COLUMNS),
    ]
    for ti, t in enumerate(ts):
        config = config0.with_t(float(t))
        row = {"t": f"{t:.12g}", "seed": str(args.seed)}
        rho_star, bound = optimal_rho(config, d)
        row["rho_star"] = f"{rho_star:.12g}"
        if "lowerbound" in methods:
            row["lmmse_lowerbound"] = f"{bound:.12g}"
        if "flat" in methods:
            row["lmmse_flat"] = f"{lmmse(config, d, flat_aperture):.12g}"
        if "nazarov" in methods:
            aperture, _ = nazarov.design_aperture(config, d,
                                                  seed=[args.seed, ti])
            row["lmmse_nazarov"] = f"{lmmse(config, d, aperture):.12g}"
        if "random" in methods:
            rho_rand, mean = best_random_onoff(config, d, rho_grid,
                                               args.trials, [args.seed, ti])
            row["lmmse_random_mean"] = f"{mean:.12g}"
            row["rho_random_star"] = f"{rho_rand:.12g}"
        lines.append(",".join(row.get(c, "") for c in _SWEEP_COLUMNS))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _canonical_cyclic(mask: tuple[int, ...]) -> tuple[int, ...]:
    """Lexicographic minimum over cyclic shifts and reflection."""
    n = len(mask)
    best = None
    for start in range(n):
        rot = tuple(mask[(i + start) % n] for i in range(n))
        for cand in (rot, rot[::-1]):
            if best is None or cand < best:
                best = cand
    return best


def cmd_bruteforce(args) -> int:
    n = args.n
    if n > 24:
        raise ValueError(f"n={n} exceeds the enumeration guard (24)")
    if not 0 <= args.ones <= n:
        raise ValueError("ones must lie in [0, n]")
    config = ImagingConfig(n, args.t, args.W, args.J)
    d = np.full(n, args.theta / n)

    seen: dict[tuple[int, ...], float] = {}
    for idx in itertools.combinations(range(n), args.ones):
        mask = [0] * n
        for i in idx:
            mask[i] = 1
        canon = _canonical_cyclic(tuple(mask))
        if canon in seen:
            continue
        seen[canon] = lmmse(config, d, Aperture(np.array(canon, dtype=float)))
    best_mask = min(seen, key=seen.get)
    best_val = seen[best_mask]
    ties = sorted(m for m, v in seen.items()
                  if v <= best_val * (1.0 + 1e-12))
    print(f"classes {len(seen)}")
    print(f"best_lmmse {best_val:.12g}")
    print(f"best_mask {''.join(map(str, best_mask))}")
    for m in ties:
        print(f"tied_minimizer {''.join(map(str, m))}")

    if args.epsilon_family:
        qr = sorted({(i * i) % n for i in range(1, n)} - {0})
        for eps in np.linspace(args.eps_min, args.eps_max, args.eps_count):
            a = np.zeros(n)
            a[0] = eps
            for j in qr:
                a[j] = 1.0 - eps / args.ones
            val = lmmse(config, d, Aperture(a))
            marker = "improves" if val < best_val else "worse"
            print(f"epsilon {eps:.6g} lmmse {val:.12g} {marker}")
    return EXIT_OK


def cmd_beta(args) -> int:
    ns = [args.n] if args.n else range(1, args.n_max + 1)
    print("n,beta,M,two_M_sq_dB")
    for n in ns:
        b = spectra.beta(n)
        M = spectra.m_bound(n)
        db = 10.0 * np.log10(2.0 * M * M)
        print(f"{n},{b:.12g},{M:.12g},{db:.12g}")
    return EXIT_OK


def cmd_residues(args) -> int:
    fams = flatseq.find_residue_lengths(args.e, args.n_max)
    print("p,e,include_zero,k,rho")
    for f in fams:
        print(f"{f.p},{f.e},{int(f.include_zero)},{f.k},{f.rho:.12g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codedmask",
        description="Coded-aperture design and evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="synthesize a mask with a certificate")
    _add_common(p)
    p.add_argument("--method", choices=("nazarov", "flat"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="aperture file to write")
    p.add_argument("--report", help="JSON certificate report to write")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("evaluate", help="LMMSE of a stored mask")
    _add_common(p)
    p.add_argument("--aperture", help="aperture file to evaluate")
    p.add_argument("--ideal-lens", action="store_true",
                   help="evaluate the perfectly focused lens instead")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="exposure sweep to CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--W", type=float, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--prior", required=True)
    p.add_argument("--t-min", type=float, default=1e2)
    p.add_argument("--t-max", type=float, default=1e7)
    p.add_argument("--t-count", type=int, default=11)
    p.add_argument("--methods",
                   default="lowerbound,flat,nazarov,random")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--random-grid", type=int, default=21)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bruteforce",
                       help="exhaustive binary-mask study at small n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ones", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--W", type=float, required=True)
    p.add_argument("--J", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--epsilon-family", action="store_true",
                   help="also scan the biased continuous family")
    p.add_argument("--eps-min", type=float, default=0.2)
    p.add_argument("--eps-max", type=float, default=0.4)
    p.add_argument("--eps-count", type=int, default=11)
    p.set_defaults(func=cmd_bruteforce)

    p = sub.add_parser("beta", help="table of beta(n) and M(n)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--n", type=int)
    group.add_argument("--n-max", type=int)
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("residues", help="valid residue sequence lengths")
    p.add_argument("--e", type=int, choices=(2, 4, 8), required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.set_defaults(func=cmd_residues)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeError as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE


if __name__ == "__main__":
    sys.exit(main())
