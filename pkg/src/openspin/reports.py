"""Run configurations, verification pipelines and machine-readable reports.

A run is described by a JSON document validated against
``config.schema.json`` (shipped with the package).  :func:`run` executes one
task and returns a :class:`Report`; :func:`write_outputs` serializes it as
JSON (plus CSV tables for spectra and Bethe roots).

Serialization rules: complex numbers are ``{"re": ..., "im": ...}`` pairs of
decimal strings (``repr`` of the float, which round-trips exactly); exact
rationals are ``"p/q"`` strings; other floats are decimal strings too.  All
wall-clock data lives in the single top-level ``timestamp`` field, so two
runs of the same configuration produce identical reports apart from it.
"""

from __future__ import annotations

import copy
import csv
import datetime as _dt
import json
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .bethe import (
    Case,
    DEFAULT_SELF_TERM_POLICY,
    PoleError,
    SelfTermPolicy,
    SolverSettings,
    bethe_residuals,
    case_of,
    exceptional_values,
    lambda0,
    levels_count,
    match_spectrum,
    residue_cancellation,
    solve_bethe,
)
from .chain import (
    ChainMode,
    ChainSpec,
    DimensionCapError,
    KPlusChoice,
    commutator_norm,
    commutes_exactly,
    pseudo_vacuum,
    spectral_curves,
    transfer,
    transfer_exact,
)
from .exact import ExactMatrix, ExactScalar, gauss, poly, scalar_parts
from .graded import GradingSignature
from .reflection import (
    BoundaryKind,
    BoundarySpec,
    SPClass,
    brute_force_sp_solutions,
    build_snp_k,
    build_sp_k,
    classify_sp,
    family_from_samples,
    snp_re_residual,
    sp_re_residual,
)
from .yang_baxter import (
    crossing_unitarity_check,
    rbar_consistency_residual,
    unitarity_residual,
    ybe_residual,
)

SCHEMA_VERSION = "1"
TASKS = (
    "verify-ybe",
    "verify-re",
    "classify-k",
    "commutation",
    "vacuum-check",
    "spectrum",
    "bethe-solve",
    "full-report",
)
DEFAULT_TOLERANCES = {
    "commutation": 1e-10,
    "vacuum": 1e-12,
    "match": 1e-8,
    "residue": 1e-8,
    "analyticity": 1e-12,
}
DEFAULT_SAMPLES = {"count": 8, "seed": 0}
# exact transfer matrices are built on d**(sites+1) dimensional spaces
EXACT_SIZE_CAP = 256


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration (CLI exit status 2)."""


# --------------------------------------------------------------------------
# parsing helpers


def load_schema() -> dict:
    return json.loads(resources.files("openspin").joinpath("config.schema.json").read_text())


def parse_scalar(value):
    """Exact scalar from a config entry: int, decimal, ``"p/q"``,
    ``"a+b*I"`` or ``{"re": ..., "im": ...}``."""
    if isinstance(value, bool):
        raise ConfigError("booleans are not scalars")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, dict):
        return (Fraction(str(value["re"])), Fraction(str(value["im"])))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            pass
        import sympy

        try:
            expr = sympy.sympify(value, locals={"i": sympy.I, "I": sympy.I})
            re, im = (sympy.nsimplify(part) for part in expr.as_real_imag())
        except (sympy.SympifyError, TypeError) as exc:
            raise ConfigError(f"cannot parse scalar {value!r}") from exc
        if not (re.is_Rational and im.is_Rational):
            raise ConfigError(f"scalar {value!r} is not a Gaussian rational")
        return (Fraction(int(re.p), int(re.q)), Fraction(int(im.p), int(im.q)))
    raise ConfigError(f"cannot parse scalar {value!r}")


def _matrix(rows) -> list:
    return [[parse_scalar(x) for x in row] for row in rows]


def parse_boundary(data: dict | None, mode: ChainMode) -> BoundarySpec | None:
    if data is None:
        return None
    default_kind = "SNP" if mode is ChainMode.OPEN_SNP else "SP"
    kind = BoundaryKind(data.get("kind", default_kind))
    if kind is BoundaryKind.SNP:
        if "k_diag" in data and "k_matrix" in data:
            raise ConfigError("give either k_diag or k_matrix")
        return BoundarySpec(
            kind=kind,
            epsilon=data.get("epsilon", 1),
            k_diag=tuple(parse_scalar(x) for x in data["k_diag"]) if "k_diag" in data else None,
            k_matrix=tuple(tuple(r) for r in _matrix(data["k_matrix"])) if "k_matrix" in data else None,
        )
    affine = None
    if "affine" in data:
        affine = tuple(tuple(tuple(r) for r in _matrix(data["affine"][key])) for key in ("A", "B"))
    return BoundarySpec(
        kind=kind,
        xi=parse_scalar(data.get("xi", 0)),
        blocks=tuple(data["blocks"]) if "blocks" in data else None,
        nilpotent=tuple(tuple(r) for r in _matrix(data["nilpotent"])) if "nilpotent" in data else None,
        conjugator=tuple(tuple(r) for r in _matrix(data["conjugator"])) if "conjugator" in data else None,
        affine=affine,
    )


def set_override(config: dict, assignment: str) -> None:
    """Apply ``key.sub=value`` in place; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.strip().split(".")
    for part in parts[:-1]:
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set {key}: {part!r} is not an object")
        node = nxt
    node[parts[-1]] = value


def random_rational_points(count: int, seed: int) -> list[tuple[Fraction, Fraction]]:
    """Random Gaussian rationals with non-zero real part (so never on the
    imaginary axis, where all poles of the closed-form eigenvalues sit)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        # |Re|, |Im| <= 10/7: the commutator norm is an absolute max-entry
        # measure, and float roundoff grows with |lambda|^(2L+2)
        re = Fraction(int(rng.integers(-10, 11)), int(rng.integers(7, 14)))
        im = Fraction(int(rng.integers(-10, 11)), int(rng.integers(7, 14)))
        if re != 0 and (re, im) not in out:
            out.append((re, im))
    return out


# --------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Validated run configuration; ``data`` is the normalized JSON echo."""

    task: str
    data: dict

    @classmethod
    def from_dict(cls, raw: dict, task: str | None = None, overrides=()) -> "RunConfig":
        import jsonschema

        data = copy.deepcopy(raw)
        for item in overrides:
            set_override(data, item)
        if task is not None:
            data["task"] = task
        try:
            jsonschema.validate(data, load_schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid configuration at {where}: {exc.message}") from exc
        data.setdefault("schema_version", SCHEMA_VERSION)
        if "task" not in data:
            raise ConfigError("no task given (command line or config)")
        data.setdefault("seed", 0)
        chain = data["chain"]
        chain.setdefault("mode", "open-sp")
        default_basis = "symmetric" if chain["mode"] == "open-snp" and chain["n"] else "distinguished"
        chain.setdefault("basis", default_basis)
        chain.setdefault("theta0", 1)
        chain.setdefault("k_plus", KPlusChoice.IDENTITY.value)
        data.setdefault("lambda_samples", dict(DEFAULT_SAMPLES, seed=data["seed"]))
        if isinstance(data["lambda_samples"], dict):
            data["lambda_samples"].setdefault("seed", data["seed"])
        data["tolerances"] = {**DEFAULT_TOLERANCES, **data.get("tolerances", {})}
        solver = data.setdefault("solver", {})
        solver.setdefault("policy", DEFAULT_SELF_TERM_POLICY.value)
        solver.setdefault("seed", data["seed"])
        solver.setdefault("require_complete", False)
        data.setdefault("classify", {})
        out = data.setdefault("output", {})
        out.setdefault("path", None)
        out.setdefault("format", "json")
        out.setdefault("csv", True)
        order = ["schema_version", "task", "seed", "chain", "boundary", "boundary_plus", "lambda_samples",
                 "tolerances", "solver", "classify", "output"]
        data = {k: data[k] for k in order if k in data}
        cfg = cls(data["task"], data)
        cfg.chain  # build eagerly: surfaces dimension / boundary errors now
        cfg.lambdas
        return cfg

    @classmethod
    def load(cls, path, task: str | None = None, overrides=()) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{p}: top level must be an object")
        return cls.from_dict(raw, task, overrides)

    # derived objects -------------------------------------------------------
    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def tolerances(self) -> dict:
        return self.data["tolerances"]

    @cached_property
    def sig(self) -> GradingSignature:
        c = self.data["chain"]
        try:
            return GradingSignature(c["m"], c["n"], c["basis"], c["theta0"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @cached_property
    def chain(self) -> ChainSpec:
        c = self.data["chain"]
        mode = ChainMode(c["mode"])
        try:
            bminus = parse_boundary(self.data.get("boundary"), mode)
            bplus = parse_boundary(self.data.get("boundary_plus"), mode)
            kwargs = {"dimension_cap": c["dimension_cap"]} if "dimension_cap" in c else {}
            return ChainSpec(self.sig, c["sites"], mode, bminus, bplus, KPlusChoice(c["k_plus"]), **kwargs)
        except DimensionCapError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @cached_property
    def exact_lambdas(self) -> list[tuple[Fraction, Fraction]]:
        spec = self.data["lambda_samples"]
        if isinstance(spec, dict):
            return random_rational_points(spec["count"], spec["seed"])
        pts = []
        for x in spec:
            v = parse_scalar(x)
            pts.append(v if isinstance(v, tuple) else (Fraction(v), Fraction(0)))
        return pts

    @cached_property
    def lambdas(self) -> list[complex]:
        return [complex(float(re), float(im)) for re, im in self.exact_lambdas]

    def solver_settings(self) -> SolverSettings:
        s = self.data["solver"]
        keys = ("seeds", "max_iter", "seed", "max_exceptional")
        return SolverSettings(**{k: s[k] for k in keys if k in s})

    def counts(self) -> list[tuple]:
        given = self.data["solver"].get("counts")
        K = levels_count(case_of(self.chain), self.sig)
        if given is not None:
            return [tuple(c) + (0,) * (K - len(c)) for c in given]
        # every sector with at most `sites` roots in total
        out = [()]
        for _ in range(K):
            out = [c + (k,) for c in out for k in range(self.chain.sites + 1)]
        return sorted((c for c in out if sum(c) <= self.chain.sites), key=lambda c: (sum(c), c))


# --------------------------------------------------------------------------
# report model


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    tolerance: object = None
    detail: str = ""

    def to_dict(self) -> dict:
        out = {"name": self.name, "passed": bool(self.passed)}
        if self.value is not None:
            out["value"] = self.value
        if self.tolerance is not None:
            out["tolerance"] = self.tolerance
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class Report:
    config: RunConfig
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    spectrum_rows: list = field(default_factory=list)
    root_rows: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    started: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_dict(self) -> dict:
        return jsonable(
            {
                "schema_version": SCHEMA_VERSION,
                "tool": {"name": "openspin", "version": __version__},
                "task": self.config.task,
                "passed": self.passed,
                "config": self.config.data,
                "chain": self.config.chain.describe(),
                "calibration": self.calibration,
                "checks": [c.to_dict() for c in self.checks],
                "results": self.results,
                "timestamp": {"started_utc": self.started, "elapsed_seconds": self.timing},
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def jsonable(obj):
    """Recursively convert to JSON-safe values following the serialization rules."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return repr(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return {"re": repr(z.real), "im": repr(z.imag)}
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, ExactScalar):
        re, im = scalar_parts(obj)
        return re if im == "0" else {"re": re, "im": im}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _exact_point(p: tuple[Fraction, Fraction]) -> dict:
    return {"re": str(p[0]), "im": str(p[1])}


def _exact_norm(m: ExactMatrix):
    """``0`` (exact) for the zero matrix, else the largest coefficient modulus."""
    return 0 if m.is_zero() else m.max_abs_coefficient()


def _exact_summary(m: ExactMatrix) -> dict:
    return {"exact_zero": m.is_zero(), "nonzero_coefficients": len(m.coefficients()), "max_abs_coefficient": _exact_norm(m)}


# --------------------------------------------------------------------------
# task pipelines


def _task_verify_ybe(cfg: RunConfig, rep: Report, exact: bool) -> None:
    sig = cfg.sig
    out = {"signature": sig.label(), "backend": "exact"}
    ybe = ybe_residual(sig)
    out["ybe"] = _exact_summary(ybe)
    rep.checks.append(Check("ybe", ybe.is_zero(), _exact_norm(ybe), "exact"))
    uni = unitarity_residual(sig)
    out["unitarity"] = _exact_summary(uni)
    rep.checks.append(Check("unitarity", uni.is_zero(), _exact_norm(uni), "exact"))
    if sig.crossing_compatible:
        rb = rbar_consistency_residual(sig)
        out["rbar_consistency"] = _exact_summary(rb)
        rep.checks.append(Check("rbar_consistency", rb.is_zero(), _exact_norm(rb), "exact"))
        cr = crossing_unitarity_check(sig)
        out["crossing_unitarity"] = {
            "holds": cr.holds,
            "shift": cr.shift,
            "scalar": cr.scalar_text,
            "detail": cr.detail,
        }
    else:
        out["rbar_consistency"] = {"skipped": "conjugation by V does not preserve this grading"}
    rep.results["verify-ybe"] = out


def _boundaries(cfg: RunConfig) -> list[tuple[str, BoundarySpec]]:
    chain = cfg.chain
    kind = "SNP" if chain.mode is ChainMode.OPEN_SNP else "SP"
    out = [("minus", chain.boundary_minus or BoundarySpec.identity(kind))]
    if chain.boundary_plus is not None:
        out.append(("plus", chain.boundary_plus))
    return out


def _task_verify_re(cfg: RunConfig, rep: Report, exact: bool) -> None:
    sig = cfg.sig
    res = {}
    for end, b in _boundaries(cfg):
        if b.kind is BoundaryKind.SP:
            m = sp_re_residual(sig, build_sp_k(sig, b))
        else:
            m = snp_re_residual(sig, build_snp_k(sig, b))
        res[end] = {"kind": b.kind.value, **_exact_summary(m)}
        rep.checks.append(Check(f"reflection_equation[{end}]", m.is_zero(), _exact_norm(m), "exact"))
    rep.results["verify-re"] = {"backend": "exact", "boundaries": res}


def _task_classify_k(cfg: RunConfig, rep: Report, exact: bool) -> None:
    sig, opts = cfg.sig, cfg.data["classify"]
    res: dict = {}
    samples = opts.get("family_samples")
    if samples:
        fam = family_from_samples([(parse_scalar(s["lambda"]), _matrix(s["K"])) for s in samples])
        targets = [("samples", fam)]
    else:
        targets = []
        for end, b in _boundaries(cfg):
            if b.kind is BoundaryKind.SP:
                targets.append((end, build_sp_k(sig, b)))
            else:
                res[end] = _snp_classification(sig, b)
                rep.checks.append(Check(f"classified[{end}]", res[end]["re_exact_zero"], detail=res[end]["class"]))
    for end, fam in targets:
        c = classify_sp(sig, fam)
        res[end] = c.to_dict()
        ok = c.kind in (SPClass.DIAGONALIZABLE, SPClass.NILPOTENT)
        rep.checks.append(Check(f"classified[{end}]", ok, detail=c.kind.value))
    if opts.get("brute_force"):
        kwargs = {}
        if "alphabet" in opts:
            kwargs["alphabet"] = tuple(
                "i" if p == (0, 1) else p for p in (parse_scalar(a) for a in opts["alphabet"])
            )
        if "samples_per_branch" in opts:
            kwargs["samples_per_branch"] = opts["samples_per_branch"]
        fams = brute_force_sp_solutions(sig, seed=cfg.seed, **kwargs)
        res["brute_force"] = [f.to_dict() for f in fams]
        labels = {lab.kind for f in fams for lab in f.labels}
        ok = all(f.certified for f in fams) and labels <= {SPClass.DIAGONALIZABLE, SPClass.NILPOTENT}
        rep.checks.append(Check("brute_force_complete", ok, detail=f"{len(fams)} families"))
    rep.results["classify-k"] = res


def _snp_classification(sig: GradingSignature, b: BoundarySpec) -> dict:
    from .graded import twisted_transpose

    K = build_snp_k(sig, b)
    Kt = twisted_transpose(sig, K, 0, 1)
    cls = "symmetric" if (Kt - K).is_zero() else "antisymmetric" if (Kt + K).is_zero() else "neither"
    res = snp_re_residual(sig, K)
    return {"class": f"SNP-{cls}", "re_exact_zero": res.is_zero()}


def _pairs(lams: list) -> list[tuple]:
    if len(lams) == 1:
        return [(lams[0], lams[0] + 0.5 + 0.25j)]
    return [(lams[k], lams[(k + 1) % len(lams)]) for k in range(len(lams))]


def _task_commutation(cfg: RunConfig, rep: Report, exact: bool) -> None:
    chain, tol = cfg.chain, cfg.tolerances["commutation"]
    norms = [commutator_norm(chain, a, b) for a, b in _pairs(cfg.lambdas)]
    worst = max(norms)
    out = {"pairs": len(norms), "max_norm": worst, "backend": "float"}
    rep.checks.append(Check("commutation", worst < tol, worst, tol))
    if exact:
        size = chain.sig.dim ** (chain.sites + 1)
        if size <= EXACT_SIZE_CAP:
            ok = commutes_exactly(chain)
            out["exact"] = {"commutes": ok}
            rep.checks.append(Check("commutation_exact", ok, tolerance="exact"))
        else:
            out["exact"] = {"skipped": f"exact backend limited to {EXACT_SIZE_CAP}-dimensional products"}
    rep.results["commutation"] = out


def _vacuum_deviation(chain: ChainSpec, lam: complex) -> float:
    t = transfer(chain, lam)
    w = pseudo_vacuum(chain)
    tw = t @ w
    return float(np.linalg.norm(tw - complex(lambda0(chain, lam)) * w) / (np.linalg.norm(tw) or 1.0))


def k_plus_evidence(chain: ChainSpec, lambdas: list) -> dict:
    """Pseudo-vacuum deviation for every default-K+ candidate."""
    out = {}
    for choice in KPlusChoice:
        trial = replace(chain, k_plus_choice=choice)
        try:
            out[choice.value] = max(_vacuum_deviation(trial, lam) for lam in lambdas)
        except (PoleError, ValueError) as exc:
            out[choice.value] = f"unavailable: {exc}"
    return out


def _calibration(cfg: RunConfig, with_evidence: bool) -> dict:
    chain = cfg.chain
    out: dict = {}
    if chain.is_open:
        kp = {"choice": "explicit" if chain.boundary_plus is not None else chain.k_plus_choice.value}
        if with_evidence and chain.boundary_plus is None:
            kp["evidence"] = {"max_vacuum_deviation": k_plus_evidence(chain, cfg.lambdas[:3])}
        out["k_plus"] = kp
        out["self_term_policy"] = {
            "policy": cfg.data["solver"]["policy"],
            "default": DEFAULT_SELF_TERM_POLICY.value,
            "evidence": "default frozen by the exact-diagonalization calibration on the open sl(2) chain "
            "with two sites (tests/test_bethe.py); see results.bethe-solve.match for this run's coverage",
        }
        if case_of(chain) is Case.SNP:
            out["exceptional_roots"] = list(exceptional_values(chain))
    return out


def _require_closed_form(cfg: RunConfig, task: str) -> None:
    chain = cfg.chain
    if not chain.is_open:
        raise ConfigError(f"{task} needs an open chain (mode open-sp or open-snp)")
    b = chain.boundary_minus
    if b is not None and any(x is not None for x in (b.nilpotent, b.conjugator, b.affine, b.k_matrix)):
        raise ConfigError(f"{task} needs a diagonal boundary (blocks / k_diag)")


def _task_vacuum_check(cfg: RunConfig, rep: Report, exact: bool) -> None:
    _require_closed_form(cfg, "vacuum-check")
    chain, tol = cfg.chain, cfg.tolerances["vacuum"]
    rows = []
    worst = 0.0
    for p, lam in zip(cfg.exact_lambdas, cfg.lambdas):
        dev = _vacuum_deviation(chain, lam)
        worst = max(worst, dev)
        rows.append({"lambda": _exact_point(p), "lambda0": complex(lambda0(chain, lam)), "deviation": dev})
    out = {"samples": rows, "max_deviation": worst, "backend": "float"}
    rep.checks.append(Check("pseudo_vacuum", worst < tol, worst, tol))
    if exact:
        size = chain.sig.dim ** (chain.sites + 1)
        if size <= EXACT_SIZE_CAP:
            ok = True
            for p in cfg.exact_lambdas[:3]:
                x = gauss(p)
                t = transfer_exact(chain, x)  # constant entries at a rational point
                ok &= not (t[(0, 0)] - poly(lambda0(chain, x))) and all(not t[(r, 0)] for r in range(1, t.n))
            out["exact"] = {"points": min(3, len(cfg.exact_lambdas)), "identity_holds": bool(ok)}
            rep.checks.append(Check("pseudo_vacuum_exact", bool(ok), tolerance="exact"))
        else:
            out["exact"] = {"skipped": f"exact backend limited to {EXACT_SIZE_CAP}-dimensional products"}
    rep.results["vacuum-check"] = out


def _spectrum(cfg: RunConfig):
    return spectral_curves(cfg.chain, cfg.lambdas, seed=cfg.seed)


def _task_spectrum(cfg: RunConfig, rep: Report, exact: bool) -> None:
    try:
        curves = _spectrum(cfg)
    except np.linalg.LinAlgError as exc:
        rep.checks.append(Check("joint_diagonalization", False, detail=str(exc)))
        rep.results["spectrum"] = {"error": str(exc)}
        return
    rep.checks.append(Check("joint_diagonalization", True, detail=f"{curves.count} curves"))
    rows = []
    for c in range(curves.count):
        for s, lam in enumerate(curves.lambdas):
            rows.append((lam, curves.values[c, s], c))
    rep.spectrum_rows = rows
    rep.results["spectrum"] = {
        "curves": curves.count,
        "lambdas": [_exact_point(p) for p in cfg.exact_lambdas],
        "values": [[complex(v) for v in curves.values[c]] for c in range(curves.count)],
    }


def _task_bethe_solve(cfg: RunConfig, rep: Report, exact: bool) -> None:
    _require_closed_form(cfg, "bethe-solve")
    chain, tol = cfg.chain, cfg.tolerances
    policy = SelfTermPolicy(cfg.data["solver"]["policy"])
    settings = cfg.solver_settings()
    rootsets, sectors = [], []
    for counts in cfg.counts():
        found = solve_bethe(chain, counts, settings, policy)
        sectors.append({"counts": list(counts), "solutions": len(found)})
        rootsets.extend(found)
    residuals, cancellations = [], []
    for rs in rootsets:
        try:
            r = bethe_residuals(chain, rs, policy)
            residuals.append(float(np.abs(r).max()) if r.size else 0.0)
        except (PoleError, ValueError):
            residuals.append(float("inf"))
        try:
            cancellations.append(residue_cancellation(chain, rs))
        except (PoleError, ValueError):
            cancellations.append(float("inf"))
    worst_res = max(residuals, default=0.0)
    worst_can = max(cancellations, default=0.0)
    rep.checks.append(Check("solver_residuals", worst_res < settings.accept, worst_res, settings.accept))
    rep.checks.append(Check("residue_cancellation", worst_can < tol["residue"], worst_can, tol["residue"]))
    try:
        match = match_spectrum(chain, rootsets, cfg.lambdas, tolerance=tol["match"], seed=cfg.seed)
    except np.linalg.LinAlgError as exc:
        rep.checks.append(Check("joint_diagonalization", False, detail=str(exc)))
        rep.results["bethe-solve"] = {"error": str(exc)}
        return
    used = {idx for idx, dev in match.assignments if idx is not None and dev < tol["match"]}
    spurious = [k for k in range(len(rootsets)) if k not in used]
    rep.checks.append(Check("no_spurious_rootsets", not spurious, len(spurious), detail="root sets matching no curve"))
    if cfg.data["solver"]["require_complete"]:
        rep.checks.append(Check("complete_coverage", match.complete, f"{match.matched}/{match.total}"))
    table = []
    for k, rs in enumerate(rootsets):
        d = rs.to_dict()
        d.update({"id": k, "max_residual": residuals[k], "residue_cancellation": cancellations[k]})
        table.append(d)
        for level, roots in enumerate(rs.canonical().roots, start=1):
            for idx, z in enumerate(roots):
                rep.root_rows.append((k, level, idx, z))
    m = match.to_dict()
    m.pop("rootsets")
    rep.results["bethe-solve"] = {
        "policy": policy.value,
        "sectors": sectors,
        "rootsets": table,
        "match": {**m, "complete": match.complete},
    }


def _task_full_report(cfg: RunConfig, rep: Report, exact: bool) -> None:
    chain = cfg.chain
    plan = ["verify-ybe"]
    if chain.is_open:
        plan += ["verify-re", "classify-k"]
    plan += ["commutation"]
    diagonal = True
    try:
        if chain.is_open:
            _require_closed_form(cfg, "full-report")
    except ConfigError:
        diagonal = False
    if chain.is_open and diagonal:
        plan += ["vacuum-check"]
    plan += ["spectrum"]
    if chain.is_open and diagonal:
        plan += ["bethe-solve"]
    for name in plan:
        _timed(name, cfg, rep, exact)


PIPELINES = {
    "verify-ybe": _task_verify_ybe,
    "verify-re": _task_verify_re,
    "classify-k": _task_classify_k,
    "commutation": _task_commutation,
    "vacuum-check": _task_vacuum_check,
    "spectrum": _task_spectrum,
    "bethe-solve": _task_bethe_solve,
    "full-report": _task_full_report,
}


def _timed(name: str, cfg: RunConfig, rep: Report, exact: bool) -> None:
    t0 = time.perf_counter()
    PIPELINES[name](cfg, rep, exact)
    if name != "full-report":
        rep.timing[name] = round(time.perf_counter() - t0, 3)


def run(cfg: RunConfig, exact: bool = False) -> Report:
    """Execute ``cfg.task``; checks that fail are recorded, not raised."""
    rep = Report(cfg, started=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))
    if cfg.task in ("verify-re", "classify-k") and not cfg.chain.is_open and cfg.data.get("boundary") is None:
        raise ConfigError(f"{cfg.task} needs a boundary or an open chain")
    needs_evidence = cfg.task in ("vacuum-check", "full-report")
    if needs_evidence and cfg.chain.is_open:
        try:
            _require_closed_form(cfg, cfg.task)
        except ConfigError:
            needs_evidence = False
    rep.calibration = _calibration(cfg, with_evidence=needs_evidence)
    rep.results["backend"] = "exact+float" if exact else "float (symbolic checks are always exact)"
    _timed(cfg.task, cfg, rep, exact)
    return rep


# --------------------------------------------------------------------------
# output files


def _csv_value(x: float) -> str:
    return repr(float(x))


def write_outputs(rep: Report, path: str | Path | None) -> list[Path]:
    """Write the JSON report (and CSV tables) and return the files written.

    With ``path=None`` the JSON goes to standard output and no CSV is written.
    """
    text = rep.to_json()
    if path is None:
        import sys

        sys.stdout.write(text)
        return []
    path = Path(path)
    path.write_text(text)
    written = [path]
    if rep.config.data["output"]["csv"]:
        stem = path.with_suffix("")
        if rep.spectrum_rows:
            p = stem.with_name(stem.name + ".spectrum.csv")
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["lambda_re", "lambda_im", "eigenvalue_re", "eigenvalue_im", "curve_id"])
                for lam, val, cid in rep.spectrum_rows:
                    w.writerow([_csv_value(lam.real), _csv_value(lam.imag), _csv_value(val.real), _csv_value(val.imag), cid])
            written.append(p)
        if rep.root_rows:
            p = stem.with_name(stem.name + ".roots.csv")
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["rootset", "level", "index", "re", "im"])
                for k, level, idx, z in rep.root_rows:
                    w.writerow([k, level, idx, _csv_value(z.real), _csv_value(z.imag)])
            written.append(p)
    return written
