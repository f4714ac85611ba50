"""Command-line driver: build-class, construct, evaluate, verify, lower-bound.

Exit codes: 0 success (all rows pass), 1 some verification row failed,
2 input error, 3 enumeration budget exceeded, 4 inconsistent artifacts.
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
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .adversary import (
    geometric_dirac_prior,
    single_delta_prior,
    theta_curve,
    uniform_dirac_prior,
)
from .bounds import reports_to_csv, verify_theorem1
from .errors import ConsistencyError, EnumerationBudgetError, InputError
from .loss import DEFAULT_BUDGET, cumulative_kl, mc_loss
from .measures import ModelClass, ProcessMeasure, build_class, measure_from_dict
from .mixture import DiscretePrior
from .prior import build_construction, first_over_budget

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET, EXIT_CONSISTENCY = 0, 1, 2, 3, 4
FAIR_COIN_SPEC = {"type": "bernoulli", "p": 0.5}


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_atomic(path: str | Path, text: str) -> str:
    """Write via temp file + rename; returns the sha256 of the content."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return sha256_text(text)


def read_json(source: str):
    """JSON from a file path, or the argument itself if it parses as JSON."""
    if source is None:
        raise InputError("missing JSON input")
    if source.lstrip().startswith(("{", "[")):
        text = source
    else:
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {source!r}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {source!r}: {exc}") from exc


def json_safe(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class ExperimentSpec:
    class_spec: dict | None = None
    rho: dict = field(default_factory=lambda: dict(FAIR_COIN_SPEC))
    N: int | None = None
    budget: int = DEFAULT_BUDGET
    seed: int = 0
    samples: int = 100_000
    mc_fallback: bool = True
    outputs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        if not isinstance(d, dict):
            raise InputError("experiment spec must be a JSON object")
        spec = cls()
        if "class" in d:
            spec.class_spec = d["class"] if isinstance(d["class"], dict) else read_json(d["class"])
        for key in ("rho", "N", "budget", "seed", "samples", "mc_fallback", "outputs"):
            if key in d:
                setattr(spec, key, d[key])
        return spec

    def validate(self, size: int) -> None:
        if self.N is None or int(self.N) < 3:
            raise InputError(f"N must be >= 3, got {self.N}")
        bad = first_over_budget(size, int(self.N), int(self.budget))
        if bad is not None and not self.mc_fallback:
            raise EnumerationBudgetError(bad, size, int(self.budget))


def load_class(source) -> ModelClass:
    d = read_json(source) if isinstance(source, str) else source
    if isinstance(d, dict) and "measures" in d and isinstance(d["measures"], list) and "spec" in d:
        return ModelClass.from_dict(d)
    return build_class(d)


def load_rho(source) -> ProcessMeasure:
    d = read_json(source) if isinstance(source, str) else source
    return measure_from_dict(d)


def _experiment(args) -> ExperimentSpec:
    spec = ExperimentSpec.from_dict(read_json(args.spec)) if getattr(args, "spec", None) else ExperimentSpec()
    if getattr(args, "class_file", None):
        spec.class_spec = read_json(args.class_file)
    if getattr(args, "rho", None):
        spec.rho = read_json(args.rho)
    for attr in ("N", "budget", "seed", "samples"):
        if getattr(args, attr, None) is not None:
            setattr(spec, attr, getattr(args, attr))
    return spec


def _class_of(spec: ExperimentSpec) -> ModelClass:
    if spec.class_spec is None:
        raise InputError("no model class given (use --class or 'class' in --spec)")
    return load_class(spec.class_spec)


def cmd_build_class(args) -> int:
    C = build_class(read_json(args.spec))
    text = json.dumps(C.to_dict(), indent=1, sort_keys=True) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"{len(C)} measures", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def manifest_path(prior_path: str | Path) -> Path:
    return Path(str(prior_path) + ".manifest.json")


def cmd_construct(args) -> int:
    spec = _experiment(args)
    C = _class_of(spec)
    spec.mc_fallback = False
    spec.validate(C.alphabet_size)
    rho = load_rho(spec.rho)
    con = build_construction(C, rho, int(spec.N), int(spec.budget))
    out = args.out or spec.outputs.get("prior")
    if not out:
        raise InputError("no output path (use --out)")
    text = json.dumps(con.prior.to_dump(), indent=1) + "\n"
    digest = write_atomic(out, text)
    manifest = {
        "tool_version": __version__,
        "spec_sha256": sha256_text(canonical({"class": C.to_dict(), "rho": rho.to_dict(), "N": int(spec.N)})),
        "class_sha256": sha256_text(C.canonical_json()),
        "rho": rho.to_dict(),
        "N": int(spec.N),
        "created": datetime.now(timezone.utc).isoformat(),
        "outputs": {Path(out).name: digest},
    }
    write_atomic(manifest_path(out), json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"prior with {len(con.prior.components)} components over {len(con.prior.support)} measures "
          f"(covering mass {con.cover_mass!r}) -> {out}")
    return EXIT_OK


def _load_prior(path: str) -> tuple[DiscretePrior, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed prior dump {path!r}: {exc}") from exc
    return DiscretePrior.from_dump(entries), sha256_text(text)


def _check_manifest(prior_path: str, digest: str, C: ModelClass, rho: ProcessMeasure, N: int | None) -> None:
    mpath = manifest_path(prior_path)
    if not mpath.exists():
        print(f"warning: no manifest at {mpath}; skipping hash checks", file=sys.stderr)
        return
    manifest = json.loads(mpath.read_text())
    recorded = manifest.get("outputs", {}).get(Path(prior_path).name)
    if recorded is not None and recorded != digest:
        raise ConsistencyError(f"prior dump {prior_path} does not match its manifest digest")
    if manifest.get("class_sha256") != sha256_text(C.canonical_json()):
        raise ConsistencyError("class file does not match the class the prior was built from")
    if canonical(manifest.get("rho")) != canonical(rho.to_dict()):
        raise ConsistencyError("reference predictor differs from the one the prior was built for")
    if N is not None and int(N) > int(manifest.get("N", N)):
        raise ConsistencyError(f"prior was built for N={manifest.get('N')}, cannot verify up to N={N}")


def cmd_verify(args) -> int:
    spec = _experiment(args)
    C = _class_of(spec)
    rho = load_rho(spec.rho)
    prior, digest = _load_prior(args.prior)
    if spec.N is None:
        mpath = manifest_path(args.prior)
        spec.N = json.loads(mpath.read_text())["N"] if mpath.exists() else None
    spec.mc_fallback = False
    spec.validate(C.alphabet_size)
    _check_manifest(args.prior, digest, C, rho, spec.N)
    total = prior.total_weight
    if abs(total - 1.0) > 1e-9:
        raise ConsistencyError(f"prior weights sum to {total!r}, not 1")
    member_ids = {m.identity for m in C}
    strays = [m.identity for m in prior.measures if m.identity not in member_ids]
    if strays:
        raise ConsistencyError(f"prior uses measures outside the class: {strays[:3]}")
    reports = verify_theorem1(C, rho, int(spec.N), prior=prior, budget=int(spec.budget))
    text = reports_to_csv(reports)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    failed = sum(not r.passed for r in reports)
    print(f"{len(reports) - failed}/{len(reports)} rows pass", file=sys.stderr)
    return EXIT_OK if failed == 0 else EXIT_FAIL


def cmd_evaluate(args) -> int:
    """Per-(mu, n) losses of a predictor (a reference measure or a prior dump)."""
    spec = _experiment(args)
    C = _class_of(spec)
    spec.validate(C.alphabet_size)
    predictor = _load_prior(args.prior)[0] if args.prior else load_rho(spec.rho)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["measure_id", "n", "loss_bits", "std_error_bits", "method", "seed"])
    for mu in C:
        for n in range(1, int(spec.N) + 1):
            if C.alphabet_size**n <= spec.budget:
                writer.writerow([mu.identity, n, repr(cumulative_kl(mu, predictor, n, spec.budget)), "0.0", "exact", ""])
            else:
                est = mc_loss(mu, predictor, n, int(spec.samples), int(spec.seed))
                writer.writerow([mu.identity, n, repr(est.mean), repr(est.std_error), "monte-carlo", spec.seed])
    if args.out:
        write_atomic(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


BUILTIN_PRIORS = {
    "uniform": uniform_dirac_prior,
    "geometric": geometric_dirac_prior,
    "single": lambda K: single_delta_prior(),
}


def cmd_lower_bound(args) -> int:
    spec = read_json(args.spec) if args.spec else {}
    K = args.K if args.K is not None else spec.get("K")
    if K is None or int(K) < 2:
        raise InputError("K must be >= 2")
    K = int(K)
    builtin = args.builtin or spec.get("builtin")
    if args.prior:
        prior = _load_prior(args.prior)[0]
    elif builtin in BUILTIN_PRIORS:
        prior = BUILTIN_PRIORS[builtin](K)
    else:
        raise InputError("give --prior or --builtin {uniform,geometric,single}")
    curve = theta_curve(prior, K)
    rows = [{k: json_safe(v) for k, v in w.to_dict().items()} for w in curve]
    text = json.dumps(rows, indent=1) + "\n"
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    if args.plot_data:
        lines = ["n\tregret_bits"] + [f"{w.n}\t{json_safe(w.actual_regret_bits)}" for w in curve]
        write_atomic(args.plot_data, "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bayes-regret", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-class", help="expand a class description into a canonical class file")
    b.add_argument("--spec", required=True, help="class description JSON (file or inline)")
    b.add_argument("--out")
    b.set_defaults(func=cmd_build_class)

    def experiment_flags(sp):
        sp.add_argument("--spec", help="experiment spec JSON (class, rho, N, budget, seed, samples)")
        sp.add_argument("--class", dest="class_file", help="class file or class description")
        sp.add_argument("--rho", help="reference predictor JSON, default fair coin")
        sp.add_argument("-N", type=int, help="largest horizon")
        sp.add_argument("--budget", type=int, help=f"max |X|^n to enumerate (default {DEFAULT_BUDGET})")
        sp.add_argument("--out")

    c = sub.add_parser("construct", help="build the discrete prior and write its dump")
    experiment_flags(c)
    c.set_defaults(func=cmd_construct)

    e = sub.add_parser("evaluate", help="tabulate L_n(mu, predictor) for the class")
    experiment_flags(e)
    e.add_argument("--prior", help="evaluate a prior dump instead of --rho")
    e.add_argument("--seed", type=int)
    e.add_argument("--samples", type=int)
    e.set_defaults(func=cmd_evaluate)

    v = sub.add_parser("verify", help="check the regret bound for every class measure and horizon")
    experiment_flags(v)
    v.add_argument("--prior", required=True)
    v.set_defaults(func=cmd_verify)

    lb = sub.add_parser("lower-bound", help="adversarial witnesses against a prior over point masses")
    lb.add_argument("--spec", help="JSON with K and optionally builtin")
    lb.add_argument("--prior", help="prior dump over the dirac-upto-K class")
    lb.add_argument("--builtin", choices=sorted(BUILTIN_PRIORS))
    lb.add_argument("-K", type=int)
    lb.add_argument("--out")
    lb.add_argument("--plot-data", help="also write a two-column TSV (n, regret bits)")
    lb.set_defaults(func=cmd_lower_bound)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EnumerationBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
