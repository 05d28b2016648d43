"""``corrlab`` command line: decompose, verify, experiment, audit.

stdout carries exactly one JSON document (or CSV with ``--format csv``);
the human-readable summary goes to stderr. Exit codes: 0 ok, 1 violation,
2 malformed input.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import gaussian as gs
from . import power_series as ps
from . import solid_cube as sc
from . import zoo
from .correlation import (
    DEFAULT_RHO_GRID, LevelProfile, bound_ratio, binary_entropy, clip_unit,
    pair_sweep, phi, psi, verify_bound,
)
from .finite_product import (
    FiniteSpace, TabulatedFunction, build_basis, efron_stein, fourier, parse_space,
)

EXPERIMENTS = ("enumerate-monotone", "talagrand-tightness", "gaussian-balls", "keller",
               "hadamard-witness", "hu", "quasiconcave", "cube-cont")
EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # pragma: no cover
        return "0+unknown"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, frozenset):
        return sorted(x)
    return x


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        keys = list(rows[0])
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _csv_cell(r.get(k)) for k in keys})
    return buf.getvalue()


def _csv_cell(v):
    v = _jsonable(v)
    if isinstance(v, float):
        return repr(v)  # always '.' decimals
    if isinstance(v, list):
        return json.dumps(v)
    return "" if v is None else v


def parse_samples(text: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad sample count {text!r}") from None
    if not (v >= 2 and v == int(v)):
        raise argparse.ArgumentTypeError(f"sample count must be an integer >= 2, got {text!r}")
    return int(v)


def parse_rho_grid(text: str) -> list[float]:
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"rho grid must be a:b:step, got {text!r}") from None
    if step <= 0 or not 0 <= a <= b <= 1:
        raise argparse.ArgumentTypeError(f"invalid rho grid {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 12) for i in range(count)]


def parse_int_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer range {text!r}") from None


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def load_function(spec: str, space: FiniteSpace) -> TabulatedFunction:
    """``builtin:...``, ``table:v1,v2,...`` or a JSON file with ``values``."""
    if spec.startswith("builtin:"):
        return zoo.generate(spec, space)
    if spec.startswith("table:"):
        vals = [float(v) for v in spec[len("table:"):].split(",")]
    elif os.path.exists(spec):
        with open(spec) as fh:
            data = json.load(fh)
        vals = data["values"] if isinstance(data, dict) else data
    else:
        raise InputError(f"unknown function spec {spec!r}")
    vals = np.asarray(vals, dtype=float)
    if vals.size != space.size:
        raise InputError(f"function has {vals.size} values, space has {space.size} points")
    return TabulatedFunction(space, vals)


# ---------------------------------------------------------------- commands


def cmd_decompose(args) -> tuple[dict, list[dict], int]:
    space = parse_space(args.space)
    f = load_function(args.function, space)
    basis = build_basis(space)
    fe = fourier(f, basis)
    es = efron_stein(f, basis)
    coeffs = [{"alpha": list(a.entries), "value": v} for a, v in fe.items()]
    comps = [{"S": sorted(S), "norm": c.norm()}
             for S, c in sorted(es.components.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))]
    doc = {"command": "decompose", "space": space.to_dict(), "function": args.function,
           "mean": f.mean(), "norm": f.norm(), "coefficients": coeffs,
           "nonzero_count": sum(abs(c["value"]) > 1e-12 for c in coeffs),
           "efron_stein": comps}
    return doc, coeffs, EXIT_OK


def _corrupt(prof: LevelProfile) -> LevelProfile:
    a = dict(prof.a)
    a[prof.j_star] = -abs(a.get(prof.j_star, 0.0)) - 1.0
    return replace(prof, a=a)


def _space_kind(spec: str):
    kind, _, rest = spec.partition(":")
    if kind in ("gauss", "cube"):
        params = dict(p.split("=", 1) for p in rest.split(",") if p)
        try:
            return kind, int(params["n"])
        except (KeyError, ValueError):
            raise InputError(f"malformed space spec {spec!r}") from None
    return "finite", None


def cmd_verify(args) -> tuple[dict, list[dict], int]:
    kind, n = _space_kind(args.space)
    f_spec, g_spec = args.f or args.function, args.g or args.f or args.function
    if f_spec is None:
        raise InputError("verify needs --f (and optionally --g)")
    grid = args.rho_grid
    if kind == "finite":
        space = parse_space(args.space)
        f, g = load_function(f_spec, space), load_function(g_spec, space)
        rep = verify_bound(f, g, build_basis(space), args.jstar or 1, args.normalize,
                           grid or DEFAULT_RHO_GRID,
                           tamper=_corrupt if args.corrupt_coefficients else None)
    elif kind == "gauss":
        K, L = gs.parse_body(f_spec, n), gs.parse_body(g_spec, n)
        if (args.jstar or 2) != 2:
            raise InputError("Gaussian verification uses j* = 2")
        rep = gs.verify_robust_gci(K, L, grid or tuple(np.round(np.linspace(0, 1, 11), 10)),
                                   args.samples, args.seed, args.threads)
    else:
        f, g = sc.parse_oracle(f_spec, n), sc.parse_oracle(g_spec, n)
        rep = sc.verify_cont_bound(f, g, args.basis, args.degree, args.quad,
                                   args.jstar or 1, args.normalize, grid, args.seed)
    doc = {"command": "verify", "space": args.space, "f": f_spec, "g": g_spec,
           "report": rep.to_dict()}
    rows = [{"rho": r, "q": q} for r, q in rep.sweep]
    return doc, rows, EXIT_VIOLATION if rep.verdict == "violation" else EXIT_OK


def cmd_audit(args) -> tuple[dict, list[dict], int]:
    with open(args.coeffs) as fh:
        p = ps.PowerSeries.from_json(fh.read())
    try:
        a = ps.audit_main_lemma(p)
    except ps.LemmaPreconditionError as exc:
        raise InputError(f"{exc.reason}: {exc}") from None
    doc = dict(a.to_dict(), command="audit")
    return doc, [a.to_dict()], EXIT_VIOLATION if a.verdict == "VIOLATION" else EXIT_OK


# ------------------------------------------------------------- experiments


def exp_enumerate_monotone(args):
    ns = args.n or [1, 2, 3, 4]
    rows, per_n, verdicts = [], [], {}
    for n in ns:
        funcs = zoo.enumerate_monotone(n)
        basis = build_basis(FiniteSpace.uniform(2, n))
        sw = pair_sweep(funcs, basis, args.rho_grid or DEFAULT_RHO_GRID)
        tol = 1e-12
        gap_ok = bool(np.all(sw.gap >= -tol))
        a1_ok = bool(np.all(sw.a1 >= -tol))
        equiv = bool(np.all((np.abs(sw.gap) <= tol) == (np.abs(sw.a1) <= tol)))
        mono = bool(np.all(sw.monotone(1e-12)))
        pos = sw.a1 > tol
        ratios = np.array([bound_ratio(float(gp), phi(clip_unit(float(a))))
                           for gp, a in zip(sw.gap[pos], sw.a1[pos])])
        min_ratio = float(ratios.min()) if ratios.size else None
        count_ok = len(funcs) == zoo.DEDEKIND[n]
        per_n.append({"n": n, "count": len(funcs), "dedekind": zoo.DEDEKIND[n],
                      "pairs": len(funcs) ** 2, "min_ratio": min_ratio,
                      "gap_nonneg": gap_ok, "a1_nonneg": a1_ok, "zero_equivalence": equiv,
                      "sweeps_monotone": mono})
        verdicts[f"n{n}"] = gap_ok and a1_ok and equiv and mono and count_ok
        for i in range(len(funcs)):
            for j in range(len(funcs)):
                a = float(sw.a1[i, j])
                rows.append({"n": n, "i": i, "j": j, "gap": float(sw.gap[i, j]), "a1": a,
                             "ratio": bound_ratio(float(sw.gap[i, j]), phi(clip_unit(a)))
                             if a > tol else None})
    mins = [r["min_ratio"] for r in per_n if r["min_ratio"] is not None]
    return {"per_n": per_n, "min_ratio": min(mins) if mins else None}, rows, verdicts


def talagrand_sweep(ns, eps_lo=0.01, eps_hi=0.2):
    rows = []
    for n in ns:
        for k in range(0, (n + 1) // 2):
            st = zoo.talagrand_pair_stats(n, k)
            if not eps_lo <= st.eps <= eps_hi:
                continue
            rows.append({"n": n, "k": k, "eps": st.eps, "gap": st.gap,
                         "gap_minus_eps2": st.gap - st.eps**2, "cross": st.cross,
                         "psi": psi(clip_unit(st.cross)),
                         "ratio": st.gap / psi(clip_unit(st.cross))})
    return rows


def exp_talagrand(args):
    rows = talagrand_sweep(args.n or [20, 50, 100])
    ratios = [r["ratio"] for r in rows]
    band = max(ratios) / min(ratios)
    res = {"c_low": min(ratios), "c_up": max(ratios), "band": band, "points": len(rows),
           "max_abs_gap_minus_eps2": max(abs(r["gap_minus_eps2"]) for r in rows)}
    verdicts = {"gap_is_eps2": res["max_abs_gap_minus_eps2"] <= 1e-12, "band_within_4": band <= 4}
    return res, rows, verdicts


def keller_row(p: float) -> dict:
    n = int(math.ceil(100 / p - 1e-9))
    st = zoo.threshold_stats(n, p=p)
    hpsi = binary_entropy(p) * psi(min(st.a1, 1.0))
    bound = 3 * p * math.log(1 / p) + 0.1
    return {"p": p, "n": n, "mean": st.mean, "gap": st.gap, "degree1_sum": st.degree1_sum,
            "degree1_over_sqrt_n": st.degree1_sum / math.sqrt(n), "a1": st.a1,
            "h_psi": hpsi, "bound": bound,
            "ok": st.gap >= 0.5 and st.degree1_sum >= 0.2 * math.sqrt(n)
            and abs(st.mean) <= 0.1 and hpsi <= bound}


def exp_keller(args):
    rows = [keller_row(p) for p in (args.p or [0.5, 0.1, 0.01])]
    return {"rows": rows}, rows, {f"p{r['p']}": r["ok"] for r in rows}


def witness_row(k: int) -> dict:
    w = ps.build_hadamard_witness(k)
    s = ps.sup_unit_interval(w)
    L = ps.length(w)
    log2M = 4.0**k
    return {"k": k, "degree": w.degree, "log2M": log2M, "M": math.exp(2.0**k),
            "length": L, "log_length_over_log_M": math.log(L) / 2.0**k,
            "sup": s.value, "argmax": s.argmax_t, "sup_log2M": s.value * log2M,
            "sup_log2_length": s.value * math.log(L) ** 2}


def factor_bounds_ok(k_max: int, points: int = 1000, slack: float = 1e-9) -> bool:
    t = np.linspace(0.0, 1.0, points)
    for j in range(k_max + 1):
        d = 4**j
        v = ps.a_d_value(d, t)
        if np.max(np.abs(v)) > 1 + slack:
            return False
        if d >= 4:
            tt = np.linspace(0.0, 1.0 - 3.0 / d, points)
            if np.max(np.abs(ps.a_d_value(d, tt))) > 0.25 + slack:
                return False
    return True


def exp_hadamard(args):
    ks = args.k or list(range(1, 7))
    rows = [witness_row(k) for k in ks]
    vals = [r["sup_log2M"] for r in rows]
    res = {"c_low": min(vals), "c_up": max(vals), "band": max(vals) / min(vals)}
    verdicts = {"band_below_100": res["band"] < 100, "factor_bounds": factor_bounds_ok(max(ks))}
    return res, rows, verdicts


def exp_balls(args):
    eps = (args.eps or [0.1])[0]
    dim = args.dim or 100
    b = gs.balls_tightness(eps, dim, args.samples, args.seed, args.threads)
    row = b.to_dict()
    flat = {k: v for k, v in row.items() if k != "a2"}
    flat.update(a2=b.a2.value, a2_stderr=b.a2.stderr)
    return row, [flat], {"a2_lower_bound": b.a2_lower_ok,
                         "gap_exact": abs(b.gap - eps * eps) <= 1e-15}


def _gci_rows(pairs, args):
    rows, verdicts = [], {}
    for name, K, L in pairs:
        rep = gs.verify_robust_gci(K, L, samples=args.samples, seed=args.seed,
                                   threads=args.threads)
        ex = rep.extras
        ok = (ex["gap"]["value"] >= -gs.MC_SIGMA * ex["gap"]["stderr"]
              and ex["a2"]["value"] >= -gs.MC_SIGMA * ex["a2"]["stderr"])
        rows.append({"pair": name, "gap": rep.gap, "gap_stderr": ex["gap"]["stderr"],
                     "a2": rep.a_jstar, "a2_stderr": ex["a2"]["stderr"], "phi": rep.phi_value,
                     "sweep_monotone": rep.sweep_monotone, "verdict": rep.verdict})
        verdicts[name] = ok and rep.verdict != "violation"
    return rows, verdicts


def hu_pairs(n: int = 4):
    a1 = gs.abs_coordinate(1)
    x1, x2 = gs.abs_coordinate(n, 0), gs.abs_coordinate(n, 1)
    nrm, mx = gs.scaled_norm(n), gs.max_abs2(n)
    return [("abs1|abs1", a1, a1), ("abs1|abs2", x1, x2), ("norm|norm", nrm, nrm),
            ("maxabs2|maxabs2", mx, mx), ("abs1|maxabs2", x1, mx)]


def exp_hu(args):
    rows, verdicts = _gci_rows(hu_pairs(args.dim or 4), args)
    self_pair = rows[0]
    target = 1 - 2 / math.pi
    verdicts["abs1_gap_closed_form"] = abs(self_pair["gap"] - target) <= gs.MC_SIGMA * self_pair["gap_stderr"]
    return {"rows": rows, "abs1_gap_target": target}, rows, verdicts


def quasi_pairs(n: int = 2):
    bump = gs.gauss_bump(n)
    ballq = replace(gs.ball(1.0, n), kind="quasiconcave_nonneg")
    return [("bump|bump", bump, bump), ("bump|ball1", bump, ballq)]


def exp_quasi(args):
    n = args.dim or 2
    rows, verdicts = _gci_rows(quasi_pairs(n), args)
    target = 3.0 ** (-n / 2) - 2.0 ** (-n)  # E[f^2] - E[f]^2 for the bump
    return {"rows": rows, "bump_gap_target": target}, rows, verdicts


def cube_cont_results(seed: int = 0, pairs: int = 50, samples: int = 10**5):
    x1 = sc.coord_oracle(0, 2)
    leg = sc.verify_cont_bound(x1, x1, "legendre")
    cb = sc.cosbump(1)
    cos = sc.verify_cont_bound(cb, cb, "cosine")
    e = sc.spectral_transform(sc.SmoothFunctionOracle(1, lambda X: np.cos(np.pi * X[:, 0])
                                                      + 0.3 * np.cos(2 * np.pi * X[:, 0])), "cosine")
    semi = float(np.max(np.abs(sc.reflected_heat(sc.reflected_heat(e, 0.2), 0.3).coeffs
                               - sc.reflected_heat(e, 0.5).coeffs)))
    path = []
    for k in (1, 2, 3):
        for t in (0.1, 0.5):
            for x0 in (0.1, 0.3, 0.5, 0.7, 0.9):
                m, se = sc.path_expectation([k], [x0], t, samples, seed + 100 * k + int(10 * t))
                ref = sc.heat_spectral_value([k], [x0], t)
                path.append({"k": k, "t": t, "x0": x0, "mc": m, "stderr": se, "spectral": ref,
                             "ok": abs(m - ref) <= gs.MC_SIGMA * se})
    rearr = all(sc.rearrangement_check(sc.random_monotone_1d(seed + 2 * i),
                                       sc.random_monotone_1d(seed + 2 * i + 1))
                for i in range(pairs))
    return {
        "legendre": {"gap": leg.gap, "a1": leg.a_jstar, "verdict": leg.verdict},
        "cosine": {"gap": cos.gap, "a1": cos.a_jstar, "verdict": cos.verdict},
        "semigroup_max_dev": semi, "path": path, "rearrangement_ok": rearr,
    }


def exp_cube(args):
    res = cube_cont_results(args.seed, samples=min(args.samples, 10**5))
    v = {
        "legendre_x1": abs(res["legendre"]["gap"] - 1 / 3) <= 1e-10
        and abs(res["legendre"]["a1"] - 1 / 3) <= 1e-10,
        "cosine_bump": abs(res["cosine"]["gap"] - 1 / 3) <= 1e-8
        and abs(res["cosine"]["a1"] - 1 / 3) <= 1e-8,
        "semigroup": res["semigroup_max_dev"] <= 1e-12,
        "path_spectral": all(r["ok"] for r in res["path"]),
        "rearrangement": res["rearrangement_ok"],
    }
    return res, res["path"], v


_EXPERIMENTS = {
    "enumerate-monotone": exp_enumerate_monotone, "talagrand-tightness": exp_talagrand,
    "gaussian-balls": exp_balls, "keller": exp_keller, "hadamard-witness": exp_hadamard,
    "hu": exp_hu, "quasiconcave": exp_quasi, "cube-cont": exp_cube,
}


def cmd_experiment(args) -> tuple[dict, list[dict], int]:
    res, rows, verdicts = _EXPERIMENTS[args.name](args)
    params = {k: getattr(args, k) for k in ("n", "k", "eps", "dim", "p", "samples", "seed")}
    doc = {"command": "experiment", "experiment": args.name, "params": params,
           "seed": args.seed, "results": res, "verdicts": verdicts}
    return doc, rows, EXIT_OK if all(verdicts.values()) else EXIT_VIOLATION


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="corrlab", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="directory for report, CSV and manifest")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=parse_samples, default=10**6)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--rho-grid", type=parse_rho_grid, default=None)
    sub = top.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", parents=[common])
    d.add_argument("--space", required=True)
    d.add_argument("--function", required=True)

    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--space", required=True,
                   help="finite space spec, gauss:n=<n> or cube:n=<n>")
    v.add_argument("--function")
    v.add_argument("--f")
    v.add_argument("--g")
    v.add_argument("--jstar", type=int, default=None)
    v.add_argument("--normalize", action="store_true")
    v.add_argument("--basis", choices=sc.BASES, default="legendre")
    v.add_argument("--degree", type=int, default=sc.DEFAULT_DEGREE)
    v.add_argument("--quad", type=int, default=sc.DEFAULT_QUAD)
    v.add_argument("--corrupt-coefficients", action="store_true",
                   help="self-test: corrupt a_j* before the verdict (must exit 1)")

    e = sub.add_parser("experiment", parents=[common])
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--n", type=parse_int_range, default=None)
    e.add_argument("--k", type=parse_int_range, default=None)
    e.add_argument("--eps", type=parse_float_list, default=None)
    e.add_argument("--p", type=parse_float_list, default=None)
    e.add_argument("--dim", type=int, default=None)

    a = sub.add_parser("audit", parents=[common])
    a.add_argument("--coeffs", required=True, help="JSON array, index 0 = degree 1")
    return top


COMMANDS = {"decompose": cmd_decompose, "verify": cmd_verify,
            "experiment": cmd_experiment, "audit": cmd_audit}


def _summary(doc: dict) -> str:
    lines = [f"corrlab {doc.get('command')}"]
    for key in ("verdicts", "report"):
        if key in doc:
            block = doc[key]
            if key == "report":
                block = {k: block[k] for k in ("gap", "a_jstar", "phi", "ratio", "verdict")}
            for k, val in block.items():
                lines.append(f"  {k:<24} {val}")
    return "\n".join(lines)


def write_outputs(out: str, doc: dict, rows: list[dict], argv: list[str], t0: float,
                  report_text: str):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(report_text + "\n")
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        fh.write(to_csv(rows))
    manifest = {
        "argv": argv, "seed": doc.get("seed"), "tool_version": tool_version(),
        "specs": {k: doc.get(k) for k in ("space", "f", "g", "function", "experiment") if k in doc},
        "samples": (doc.get("params") or {}).get("samples"),
        "wall_clock_seconds": time.time() - t0,
        "output_digest": hashlib.sha256(report_text.encode()).hexdigest(),
    }
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        fh.write(dumps(manifest) + "\n")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.time()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        doc, rows, code = COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"corrlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    text = dumps(doc)
    if args.out:
        write_outputs(args.out, doc, rows, argv, t0, text)
    sys.stdout.write(text + "\n" if args.format == "json" else to_csv(rows))
    print(_summary(doc), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
