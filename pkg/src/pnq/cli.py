"""Command-line entry point: one subcommand per computation, JSON documents on stdout or --out."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CapacityError, DomainError, IdentityError, StateError

THREADS_ENV = "PNQ_THREADS"
EXIT_OK, EXIT_VALIDATION, EXIT_CAPACITY, EXIT_IDENTITY = 0, 2, 3, 4
_NOT_CONFIG = {"command", "threads", "out", "format", "config"}


class ConfigError(DomainError):
    pass


# ---------------------------------------------------------------- plumbing


def jsonable(obj):
    """Recursively convert to plain JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [jsonable(v) for v in items]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def read_config(path: str) -> dict[str, str]:
    """``key = value`` per line; ``#`` starts a comment; blank lines ignored; keys use dashes or underscores."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[k.replace("-", "_")] = v
    return out


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
    return os.cpu_count() or 1


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def _require_n_mod6(n: int) -> None:
    if n % 6 not in (0, 4):
        raise DomainError("n must be 0 or 4 mod 6 for this subcommand")


def _int_list(s: str) -> list[int]:
    return [int(t) for t in s.replace(" ", "").split(",") if t]


def _number(s: str) -> int:
    """Integers written plainly or as ``1e8``."""
    v = float(s)
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"{s} is not an integer")
    return int(s) if s.lstrip("-").isdigit() else int(v)


def _function_from(args, rng_tag: int):
    from .gowers import ArithFunction

    if getattr(args, "csv", None):
        return ArithFunction.from_csv(args.csv)
    if getattr(args, "interval", None):
        return ArithFunction.interval(args.interval)
    L = args.random
    if not L or L < 1:
        raise DomainError("give --csv, --interval or --random L")
    rng = np.random.default_rng([args.seed, rng_tag])
    return ArithFunction(0, rng.normal(size=L) + 1j * rng.normal(size=L))


def _weight(name: str, X: int):
    from .gowers import ArithFunction
    from .typesums import difference_weight, lambda_prime_weight, weight_by_name

    if name == "gap":
        return difference_weight(lambda_prime_weight, weight_by_name("cramer", X))
    if name.startswith("csv:"):
        return weight_by_name("csv", X, ArithFunction.from_csv(name[4:]))
    return weight_by_name(name, X)


# ---------------------------------------------------------------- subcommands


def cmd_kappa(args) -> dict:
    from .constants import kappa_direct, kappa_regularized
    from .quadfield import field_invariants

    _require_n_mod6(args.n)
    inv = field_invariants(args.n)
    out: dict = {"n": args.n}
    if args.method in ("direct", "both"):
        out["direct"] = kappa_direct(inv, args.prime_limit or 10**7).as_dict()
    if args.method in ("regularized", "both"):
        P = args.prime_limit if args.method == "regularized" else None
        out["regularized"] = kappa_regularized(inv, P, args.tol, trace=args.trace).as_dict()
    if args.method == "both":
        out["route_diff"] = abs(out["direct"]["value"] - out["regularized"]["value"])
    return out


def _sum_report(args, value: complex, weights: list[str], main_term: float, ratio: float) -> dict:
    return {
        "n": args.n,
        "X": args.X,
        "ell": args.ell,
        "weight_ids": weights,
        "value_re": value.real,
        "value_im": value.imag,
        "main_term": main_term,
        "ratio": ratio,
    }


def cmd_count(args) -> dict:
    from .acceptance import kappa_value
    from .quadfield import field_invariants
    from .typesums import headline_sum, predicted_main_term

    _require_n_mod6(args.n)
    inv = field_invariants(args.n)
    v = headline_sum(inv, args.X, args.ell, _weight(args.wx, args.X), _weight(args.wy, args.X), args.threads)
    main = predicted_main_term(inv, args.X, kappa_value(args.n)) if args.ell == 0 else 0.0
    ratio = v.real * math.log(args.X) / main if main else None
    return _sum_report(args, v, [args.wx, args.wy], main, ratio)


def cmd_mainterm(args) -> dict:
    from .acceptance import kappa_value
    from .quadfield import field_invariants
    from .typesums import main_term_sum, predicted_main_term

    _require_n_mod6(args.n)
    inv = field_invariants(args.n)
    v = main_term_sum(inv, args.X, args.ell, args.threads)
    main = predicted_main_term(inv, args.X, kappa_value(args.n)) if args.ell == 0 else 0.0
    return _sum_report(args, v, ["sharp", "sharp"], main, v.real / main if main else None)


def cmd_gowers(args) -> dict:
    from .gowers import uk_norm_normalized, uk_norm_power

    f = _function_from(args, 1)
    power = uk_norm_power(f, args.k, args.threads)
    out = {"k": args.k, "support": f.support_span(), "power": power, "norm": power ** (1.0 / 2**args.k)}
    if args.N:
        out["normalized"] = uk_norm_normalized(f, args.k, args.N, args.threads)
        out["N"] = args.N
    return out


def _parse_measure(spec: str):
    from .gowers import SymmetricMeasure

    atoms = {}
    for part in spec.split(","):
        h, m = part.split(":")
        atoms[Fraction(h)] = float(Fraction(m))
    return SymmetricMeasure.from_atoms(atoms)


def cmd_gpnorm(args) -> dict:
    from .gowers import SymmetricMeasure, gp_evaluate

    f = _function_from(args, 2)
    mus = [_parse_measure(s) for s in args.measure or []]
    mus += [SymmetricMeasure.from_csv(p) for p in args.measure_csv or []]
    if not mus:
        raise DomainError("give at least one --measure or --measure-csv")
    ev = gp_evaluate(f, args.N, mus, sampling=args.sampling, seed=args.seed, samples=args.samples)
    return {
        "N": args.N,
        "k": len(mus),
        "measures": [[[str(h), m] for h, m in mu.atoms()] for mu in mus],
        "pair_value": ev.pair_value,
        "conv_value": ev.conv_value,
        "rel_diff": ev.rel_diff,
        "sampled": ev.sampled,
        "stderr": ev.stderr,
    }


def cmd_buchstab(args) -> dict:
    from .idealmach import IdealTable, buchstab_check, dfi_decomposition
    from .quadfield import field_invariants

    inv = field_invariants(args.n)
    table = IdealTable(inv, args.X)
    rng = np.random.default_rng([args.seed, 3])
    rows = []
    for _ in range(args.trials):
        w = rng.normal(size=len(table)) + 1j * rng.normal(size=len(table))
        rep = buchstab_check(inv, args.X, args.u, args.z, w, table)
        row = {"two_step_residual": rep.two_buchs_residual, "sieved_sum_residual": rep.sieved_sum_residual}
        if args.dfi:
            d = dfi_decomposition(inv, args.X, w, table=table)
            row["dfi_residuals"] = d.residuals
            row["dfi_passed"] = d.passed
        rows.append(row)
        if not rep.passed:
            raise IdentityError(f"Buchstab identity failed: {row}")
    return {"n": args.n, "X": args.X, "u": args.u, "z": args.z, "ideals": len(table), "trials": rows}


def cmd_typesum(args) -> dict:
    from .idealmach import principal_index_cached
    from .quadfield import field_invariants
    from .typesums import ProductWeight, coefficient_source, support_index, type_i_sum, type_ii_sum

    inv = field_invariants(args.n)
    w = ProductWeight(_weight(args.f, args.X), _weight(args.fp, args.X), args.ell, inv)
    index = principal_index_cached(inv, args.X, args.cache) if args.cache else support_index(w, args.X)
    out = {"kind": args.kind, "n": args.n, "X": args.X, "L": args.L, "ell": args.ell, "weight_ids": [args.f, args.fp]}
    if args.kind == "I":
        out.update(type_i_sum(w, args.L, args.X, index))
    else:
        a = coefficient_source(args.alpha, args.seed)
        b = coefficient_source(args.beta, args.seed + 1)
        v = type_ii_sum(w, args.L, args.X, a, b, index)
        out.update({"alpha": args.alpha, "beta": args.beta, "value_re": v.real, "value_im": v.imag})
    return out


def cmd_sigma(args) -> dict:
    from .quadfield import field_invariants
    from .typesums import SigmaInstance, sigma_bruteforce, sigma_formula

    inst = SigmaInstance(field_invariants(args.n), frozenset(_int_list(args.s1)), frozenset(_int_list(args.s2)))
    formula = sigma_formula(inst)
    count, units, brute = sigma_bruteforce(inst)
    if formula != brute:
        raise IdentityError(f"sigma formula {formula} != brute force {brute}")
    return {
        "n": args.n,
        "S1": sorted(inst.S1),
        "S2": sorted(inst.S2),
        "D": inst.D,
        "sigma": float(brute),
        "sigma_exact": str(brute),
        "formula": str(formula),
        "brute_count": count,
        "unit_group_order": units,
        "agree": True,
    }


def cmd_largesieve(args) -> dict:
    from .largesieve import (
        SieveSystem,
        farey_check,
        prop_c1_check,
        random_sieve_system,
        random_spaced_points,
        rankin_lower_bound_check,
        sieve_bound,
        sifted_count,
    )

    rng = np.random.default_rng([args.seed, 8])
    if args.system:
        sys_ = SieveSystem.from_json(json.loads(Path(args.system).read_text()))
    else:
        sys_ = random_sieve_system(rng)
    checks = ("c1", "farey", "sieve", "rankin") if args.check == "all" else (args.check,)
    out: dict = {"k": sys_.k, "N": sys_.N, "W": sys_.W, "alphas": {p: str(sys_.alpha(p)) for p in sorted(sys_.omega)}}
    if "sieve" in checks:
        bound, h = sieve_bound(sys_)
        count = sifted_count(sys_)
        out["sieve"] = {"bound": float(bound), "count": count, "margin": float(bound) - count, "holds": bound >= count}
    if "rankin" in checks:
        out["rankin"] = rankin_lower_bound_check(sys_)
    N = args.coeff_N
    a = rng.normal(size=(N,) * sys_.k) + 1j * rng.normal(size=(N,) * sys_.k)
    if "c1" in checks:
        pts = random_spaced_points(rng, 50, args.delta, sys_.k)
        lhs, rhs, ok = prop_c1_check(a, pts, args.delta)
        out["c1"] = {"points": len(pts), "delta": args.delta, "lhs": lhs, "rhs": rhs, "holds": ok}
    if "farey" in checks:
        Q = math.isqrt(N)
        lhs, rhs, ok = farey_check(a, Q)
        out["farey"] = {"Q": Q, "lhs": lhs, "rhs": rhs, "holds": ok}
    return out


def cmd_idealstats(args) -> dict:
    from .idealmach import psi_prime_sum
    from .quadfield import field_invariants, ideal_count, prime_ideal_reciprocal_sum

    inv = field_invariants(args.n)
    count, density = ideal_count(inv, args.X)
    psi = [psi_prime_sum(inv, args.X, c) for c in range(len(inv.character_table))]
    return {
        "n": args.n,
        "X": args.X,
        "class_number": inv.class_number,
        "discriminant": inv.delta,
        "ideal_count": count,
        "ideal_density": density,
        "psi_over_X": [[p.real / args.X, p.imag / args.X] for p in psi],
        "reciprocal_prime_sum": prime_ideal_reciprocal_sum(inv, args.X),
        "loglog_X": math.log(math.log(args.X)),
    }


def cmd_cramer(args) -> dict:
    from .cramer import CramerParams, flat_magnitude_report, mean_value

    params = CramerParams.from_scale(args.X)
    out = {
        "X": args.X,
        "Q": params.Q,
        "t": params.t,
        "primes": list(params.primes),
        "normalizer": params.normalizer,
        "flat": flat_magnitude_report(args.X, params),
    }
    if args.Y:
        out["mean_value"] = {"Y": args.Y, "value": mean_value(args.Y, params)}
    return out


def cmd_report(args) -> dict:
    from .acceptance import run_suite

    numbers = _int_list(args.criteria) if args.criteria else None
    results = run_suite(numbers, args.threads, args.seed)
    doc = {"suite": args.suite, "criteria": [r.as_dict() for r in results], "all_passed": all(r.passed for r in results)}
    if args.suite == "full":
        doc["extras"] = _full_extras(args)
    return doc


def _full_extras(args) -> dict:
    from .cramer import flat_magnitude_report
    from .quadfield import field_invariants
    from .typesums import ProductWeight, support_index, type_i_sum

    X = 10**5
    inv = field_invariants(4)
    g = _weight("gap", X)
    w = ProductWeight(g, g, 0, inv)
    return {"type_i_gap_weight": type_i_sum(w, 100, X, support_index(w, X)), "flat_magnitude": flat_magnitude_report(10**8)}


COMMANDS = {
    "kappa": cmd_kappa,
    "count": cmd_count,
    "mainterm": cmd_mainterm,
    "gowers": cmd_gowers,
    "gpnorm": cmd_gpnorm,
    "buchstab": cmd_buchstab,
    "typesum": cmd_typesum,
    "sigma": cmd_sigma,
    "largesieve": cmd_largesieve,
    "idealstats": cmd_idealstats,
    "cramer": cmd_cramer,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--config", default=None)

    p = argparse.ArgumentParser(prog="pnq", description="Primes of the form x^2 + n y^2: desk-scale experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("kappa", parents=[common])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--method", choices=("direct", "regularized", "both"), default="both")
    s.add_argument("--prime-limit", type=_number, default=None)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--trace", action="store_true")

    for name in ("count", "mainterm"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--n", type=int, required=True)
        s.add_argument("--X", type=_number, required=True)
        s.add_argument("--ell", type=int, default=0)
        if name == "count":
            s.add_argument("--wx", default="lambda_prime")
            s.add_argument("--wy", default="lambda_prime")

    def fn_source(s):
        s.add_argument("--csv", default=None)
        s.add_argument("--random", type=int, default=None)
        s.add_argument("--interval", type=int, default=None)

    s = sub.add_parser("gowers", parents=[common])
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--N", type=int, default=None)
    fn_source(s)

    s = sub.add_parser("gpnorm", parents=[common])
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--measure", action="append", help="atoms as h:mass,h:mass,...")
    s.add_argument("--measure-csv", action="append")
    s.add_argument("--sampling", action="store_true")
    s.add_argument("--samples", type=int, default=2000)
    fn_source(s)

    s = sub.add_parser("buchstab", parents=[common])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--X", type=_number, required=True)
    s.add_argument("--u", type=float, required=True)
    s.add_argument("--z", type=float, required=True)
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--dfi", action="store_true")

    s = sub.add_parser("typesum", parents=[common])
    s.add_argument("--kind", choices=("I", "II"), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--X", type=_number, required=True)
    s.add_argument("--L", type=float, required=True)
    s.add_argument("--ell", type=int, default=0)
    s.add_argument("--f", default="gap")
    s.add_argument("--fp", default="gap")
    s.add_argument("--alpha", choices=("random", "mobius", "constant"), default="random")
    s.add_argument("--beta", choices=("random", "mobius", "constant"), default="random")
    s.add_argument("--cache", default=None)

    s = sub.add_parser("sigma", parents=[common])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--s1", default="")
    s.add_argument("--s2", default="")

    s = sub.add_parser("largesieve", parents=[common])
    s.add_argument("--system", default=None)
    s.add_argument("--random", action="store_true")
    s.add_argument("--check", choices=("c1", "farey", "sieve", "rankin", "all"), default="all")
    s.add_argument("--coeff-N", type=int, default=64)
    s.add_argument("--delta", type=float, default=0.05)

    s = sub.add_parser("idealstats", parents=[common])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--X", type=_number, required=True)

    s = sub.add_parser("cramer", parents=[common])
    s.add_argument("--X", type=_number, required=True)
    s.add_argument("--Y", type=_number, default=None)

    s = sub.add_parser("report", parents=[common])
    s.add_argument("--suite", choices=("acceptance", "full"), default="acceptance")
    s.add_argument("--criteria", default=None)
    return p


def parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in read_config(args.config).items():
            if k not in known or k in _NOT_CONFIG - {"threads"}:
                raise ConfigError(f"unknown config key {k!r} for {args.command}")
            act = known[k]
            if isinstance(act, argparse._StoreTrueAction):
                defaults[k] = v.lower() in ("1", "true", "yes", "on")
            elif isinstance(act, argparse._AppendAction):
                defaults[k] = [s.strip() for s in v.split(";") if s.strip()]
            else:
                defaults[k] = act.type(v) if act.type else v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    args.threads = resolve_threads(args.threads)
    return args


def run_command(argv: list[str]) -> tuple[int, dict]:
    """Run one subcommand; returns the exit code and the JSON document."""
    code, doc, _ = _execute(argv)
    return code, doc


def _execute(argv: list[str]) -> tuple[int, dict, argparse.Namespace | None]:
    t0 = time.perf_counter()
    try:
        args = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0), {"error": "usage", "exit_code": int(exc.code or 0)}, None
    except (DomainError, OSError) as exc:
        return EXIT_VALIDATION, {"error": str(exc), "exit_code": EXIT_VALIDATION}, None
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}
    doc = {
        "command": args.command,
        "version": __version__,
        "config": jsonable(config),
        "config_hash": config_hash(jsonable(config)),
    }
    code = EXIT_OK
    try:
        doc["result"] = jsonable(COMMANDS[args.command](args))
        if args.command == "report" and not doc["result"]["all_passed"]:
            code = EXIT_IDENTITY
    except (StateError, OSError, ValueError) as exc:
        code, doc["error"] = EXIT_VALIDATION, str(exc)
    except CapacityError as exc:
        code, doc["error"] = EXIT_CAPACITY, str(exc)
    except IdentityError as exc:
        code, doc["error"] = EXIT_IDENTITY, str(exc)
    doc["exit_code"] = code
    doc["threads"] = args.threads
    doc["runtime_ms"] = round((time.perf_counter() - t0) * 1000.0, 3)
    return code, doc, args


def _csv_rows(obj, prefix: str = ""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _csv_rows(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            yield from _csv_rows(v, f"{prefix}[{i}]")
    else:
        yield prefix, json.dumps(obj) if isinstance(obj, list) else obj


def render(doc: dict, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in _csv_rows(doc):
            w.writerow([k, v])
        return buf.getvalue()
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    code, doc, args = _execute(argv)
    if args is None and doc.get("error") == "usage":
        return code
    text = render(doc, args.format if args else "json")
    if args and args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if "error" in doc:
        print(f"error: {doc['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
