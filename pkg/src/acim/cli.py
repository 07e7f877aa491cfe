"""Command-line runs that write a JSON summary plus CSV data into ``--out``.

Exit codes: 0 pass, 2 verification failed, 3 bad configuration,
4 series or witness did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import ergodicity, interval_maps, markov_shift, wandering
from .core import DomainError, GridDensity, TruncationPolicy, format_rational, parse_rational

EXIT_PASS, EXIT_FAILED, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 2, 3, 4

COMMANDS = (
    "markov-verify", "markov-remark1", "markov-annihilate", "engel-density",
    "engel-witness", "euclid-invariance", "decay", "simulate",
)

DEFAULT_RECTANGLES = "1,e,1,e;0.1,0.2,5,10;0.5,2,0.25,4"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="acim", description=__doc__.splitlines()[0])
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--q", default="1/2", help='jump parameter as "num/den"')
    p.add_argument("--cells", type=int, default=4096)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-terms", type=int, default=200)
    p.add_argument("--max-len", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="acim-out")
    p.add_argument("--letters", default="-3,3", help="letter window lo,hi")
    p.add_argument("--f", default="indicator:0.5,1", help="seed density, indicator:a,b or constant:c")
    p.add_argument("--pattern", default="-1,0,1", help="wandering cylinder word")
    p.add_argument("--horizon", type=int, default=64, help="decay steps")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--rectangles", default=DEFAULT_RECTANGLES,
                   help="x_lo,x_hi,y_lo,y_hi;... ('e' allowed)")
    return p


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _jump(text: str) -> markov_shift.JumpParameter:
    try:
        return markov_shift.JumpParameter(parse_rational(text))
    except ValueError as exc:
        raise ConfigError(f"--q: {exc}") from None


def _letters(text: str) -> tuple[int, int]:
    lims = _int_list(text)
    if len(lims) != 2 or lims[0] > lims[1]:
        raise ConfigError(f"--letters must be lo,hi with lo <= hi, got {text!r}")
    return lims


def _seed_density(text: str, cells: int) -> GridDensity:
    kind, _, args = text.partition(":")
    try:
        vals = [float(v) for v in args.split(",")]
        if kind == "indicator" and len(vals) == 2:
            return GridDensity.indicator(vals[0], vals[1], cells)
        if kind == "constant" and len(vals) == 1:
            g = GridDensity.constant(vals[0], cells)
            g.values[0] = 0.0
            return g
    except ValueError:
        pass
    raise ConfigError(f"--f must be indicator:a,b or constant:c, got {text!r}")


def _rectangles(text: str):
    rects = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        try:
            vals = [np.e if v.strip() == "e" else float(v) for v in parts]
            if len(vals) != 4:
                raise ValueError
            rects.append(interval_maps.PlanarRectangle(*vals))
        except (ValueError, DomainError) as exc:
            raise ConfigError(f"bad rectangle {chunk!r}: {exc}") from None
    return rects


def _threads() -> int:
    raw = os.environ.get("ACIM_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ConfigError(f"ACIM_THREADS must be a positive integer, got {raw!r}")
    return n


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return format_rational(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, tuple):
        return json.dumps(list(v))
    return v


# ---------------------------------------------------------------------------
# commands; each returns (status, results, files)


def _markov_verify(args, out):
    jp, letters = _jump(args.q), _letters(args.letters)
    if args.max_len < 1:
        raise ConfigError("--max-len must be at least 1")
    rep = markov_shift.invariance_check(args.max_len, letters, jp)
    dens = markov_shift.F_density(jp)
    rows = []
    for a in markov_shift.valid_words(letters[0], letters[1], args.max_len):
        pull = dens.measure((a[0] - 1,) + a) + dens.measure((a[0],) + a)
        rows.append((a, pull, dens.measure(a)))
    _write_csv(out / "cylinders.csv", ["word", "mu_preimage", "mu_direct"], rows)
    results = {**rep.as_dict(), "verdict": "all exact" if rep.ok else "defects found"}
    return ("pass" if rep.ok else "fail"), results, ["cylinders.csv"]


def _markov_remark1(args, out):
    jp, letters = _jump(args.q), _letters(args.letters)
    rows, bad = [], 0
    for w in markov_shift.valid_words(letters[0], letters[1], args.max_len):
        lhs, rhs = markov_shift.remark1_identity(w, jp)
        bad += lhs != rhs
        rows.append((w, lhs, rhs))
    _write_csv(out / "remark1.csv", ["word", "lhs", "rhs"], rows)
    return ("pass" if not bad else "fail"), {"checked": len(rows), "mismatches": bad}, ["remark1.csv"]


def _markov_annihilate(args, out):
    jp, letters = _jump(args.q), _letters(args.letters)
    w = _int_list(args.pattern)
    if not w:
        raise ConfigError("--pattern must be a nonempty word")
    cert = wandering.certify_wandering_cylinder(w, jp)
    results = {"certificate": cert.as_dict()}
    with open(out / "certificate.json", "w") as fh:
        json.dump(cert.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not cert.verified:
        return "fail", results, ["certificate.json"]
    pd = wandering.annihilating_density(w, jp)
    rep = wandering.verify_annihilation_and_invariance(pd, args.max_len, letters)
    witness = wandering.non_proportionality_witness(pd.occurrence(), pd, args.max_len, letters)
    results["annihilation"] = rep.as_dict()
    if witness:
        A, B = witness
        results["non_proportionality"] = {
            "A": list(A), "B": list(B),
            "occurrence_measures": [pd.occurrence().measure(A), pd.occurrence().measure(B)],
            "avoidance_measures": [pd.measure(A), pd.measure(B)],
        }
    else:
        results["non_proportionality"] = None
    rows = [(a, pd.expectation(a), pd.measure(a))
            for a in markov_shift.valid_words(letters[0], letters[1], args.max_len)]
    _write_csv(out / "annihilating_density.csv", ["word", "conditional_mean", "mu"], rows)
    ok = rep.ok and witness is not None
    return ("pass" if ok else "fail"), results, ["annihilating_density.csv", "certificate.json"]


def _policy(args) -> TruncationPolicy:
    try:
        return TruncationPolicy(args.max_terms, args.tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _cells(args) -> int:
    if args.cells < 2:
        raise ConfigError("--cells must be at least 2")
    return args.cells


def _engel_density(args, out):
    policy, f = _policy(args), _seed_density(args.f, _cells(args))
    res = interval_maps.invariant_density_series(f, policy)
    interval_maps.export_density(res.density, out / "density.csv", out / "density.json")
    _write_csv(out / "tail.csv", ["n", "term_norm"], list(enumerate(res.tail.term_norms)))
    status = "pass" if res.tail.converged else "nonconvergence"
    return status, res.summary(), ["density.csv", "density.json", "tail.csv"]


def _engel_witness(args, out):
    policy, f = _policy(args), _seed_density(args.f, _cells(args))
    rep = interval_maps.dissipativity_witness(f, policy)
    _write_csv(out / "witness.csv", ["n", "restricted_norm", "mass_defect"],
               [(n, b, rep.mass_defects[n - 1] if n else 0.0)
                for n, b in enumerate(rep.restricted_norms)])
    results = {**rep.summary(), "probes": rep.probes,
               "probe_partial_sums": rep.probe_partial_sums[-1]}
    if not rep.success:
        return "nonconvergence", results, ["witness.csv"]
    ok = max(rep.mass_defects, default=0.0) <= 1e-12
    return ("pass" if ok else "fail"), results, ["witness.csv"]


def _euclid(args, out):
    rows, ok = [], True
    for A in _rectangles(args.rectangles):
        try:
            d = interval_maps.euclid_invariance_defect(A)
        except interval_maps.QuadratureError as exc:
            rows.append((A.x_lo, A.x_hi, A.y_lo, A.y_hi, interval_maps.euclid_rect_measure(A),
                         float("nan"), str(exc)))
            ok = False
            continue
        rows.append((A.x_lo, A.x_hi, A.y_lo, A.y_hi, interval_maps.euclid_rect_measure(A), d, ""))
        ok &= d <= args.tol
    _write_csv(out / "euclid.csv", ["x_lo", "x_hi", "y_lo", "y_hi", "mu", "relative_defect",
                                    "error"], rows)
    finite = [r[5] for r in rows if not math.isnan(r[5])]
    worst = max(finite) if len(finite) == len(rows) else None
    return ("pass" if ok else "fail"), {"rectangles": len(rows), "max_relative_defect": worst,
                                        "tolerance": args.tol}, ["euclid.csv"]


def _decay(args, out):
    jp = _jump(args.q)
    if args.horizon < 1:
        raise ConfigError("--horizon must be at least 1")
    p = markov_shift.F_density(jp)
    u = ergodicity.markov_mean_zero_example(p)
    plain = ergodicity.exactness_decay(u, p, args.horizon)
    ces = ergodicity.ergodic_average_decay(u, p, args.horizon)
    plain.to_csv(out / "exactness_decay.csv")
    ces.to_csv(out / "ergodic_average_decay.csv")
    b0, bN = plain.norms[0], plain.norms[-1]
    results = {
        "u": {str(list(w)): c for w, c in u},
        "b_0": b0, f"b_{args.horizon}": bN,
        "non_increasing": plain.is_non_increasing(),
        "halved": bN <= b0 / 2,
    }
    ok = results["non_increasing"]
    return ("pass" if ok else "fail"), results, ["exactness_decay.csv", "ergodic_average_decay.csv"]


def _simulate(args, out):
    jp = _jump(args.q)
    if args.length < 1:
        raise ConfigError("--length must be at least 1")
    path = markov_shift.simulate_trajectory(jp, args.start, args.length, args.seed)
    with open(out / "trajectory.json", "w") as fh:
        json.dump(list(path.letters), fh)
        fh.write("\n")
    ups = path.letters[-1] - path.letters[0]
    return "pass", {"length": len(path), "increments": ups}, ["trajectory.json"]


HANDLERS = {
    "markov-verify": _markov_verify,
    "markov-remark1": _markov_remark1,
    "markov-annihilate": _markov_annihilate,
    "engel-density": _engel_density,
    "engel-witness": _engel_witness,
    "euclid-invariance": _euclid,
    "decay": _decay,
    "simulate": _simulate,
}

STATUS_CODES = {"pass": EXIT_PASS, "fail": EXIT_FAILED, "nonconvergence": EXIT_NONCONVERGENCE}


def _config_record(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        threads = _threads()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        status, results, files = HANDLERS[args.command](args, out)
    except ConfigError as exc:
        err = {"error": {"type": "config", "message": str(exc)}, "exit_code": EXIT_CONFIG}
        print(json.dumps(err, sort_keys=True))
        return EXIT_CONFIG
    code = STATUS_CODES[status]
    summary = {
        "command": args.command,
        "status": status,
        "exit_code": code,
        "config": _config_record(args),
        "threads": {"cap": threads, "used": 1},
        "results": _jsonable(results),
        "files": sorted(files),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps({"command": args.command, "status": status, "exit_code": code,
                      "summary": str(out / "summary.json")}, sort_keys=True))
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
