"""warpdecay command line: construct | verify | spectrum | rayleigh | decay-fit.

Every run reads one TOML config. Sections:

    [run]      out, tol, rmax
    [profile]  constructor = "prop12" | "prop13" | "remark61" | "euclidean" | "hypothesis"
               plus its parameters, or path = "profile.toml"
    [case]     variant, c, lam and the variant's constants        (verify)
    [verify]   span, anchor, solution, bracket, fit_window         (verify)
    [spectrum] method, c, bracket, counts = {threshold, r_max}     (spectrum)
    [rayleigh] R, c, delta, k_start, k_max                         (rayleigh)
    [decay_fit] lam, bc, span, window                              (decay-fit)

Exit status: 0 pass, 1 verdict fail, 2 hypothesis violation,
3 numerical failure, 4 bad configuration.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import barriers as br
from . import expr as ex
from .io import fmt, write_csv, write_json
from .models import build_prop12, build_prop13, build_remark61
from .ode import StepSizeError
from .profiles import (ProfileError, distance_mean_curvature, dump_profile, ess_spectrum_bottom,
                       euclidean, load_profile)
from .radial import FitError, decay_exponent_fit, integrate_radial
from .spectral import (BracketError, count_eigenvalues_below, ground_state_search, majorant_threshold,
                       rayleigh_onset, spectral_report)

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2, 3, 4
ENV_OUT = "WARPDECAY_OUT"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

SECTIONS = {
    "run": {"out", "tol", "rmax"},
    "profile": {"constructor", "path", "n", "kappa", "lambda0", "c", "lam", "epsilon", "c1",
                "delta", "r0_switch", "r_switch"},
    "case": None,  # validated by the case registry
    "verify": {"span", "anchor", "solution", "bracket", "fit_window"},
    "spectrum": {"method", "c", "bracket", "counts"},
    "rayleigh": {"R", "c", "delta", "k_start", "k_max"},
    "decay_fit": {"lam", "bc", "span", "window", "data"},
}

CONSTRUCTOR_KEYS = {
    "prop12": {"n", "kappa", "lambda0"},
    "prop13": {"c", "lam", "epsilon", "n", "c1"},
    "remark61": {"n", "c", "delta", "r0_switch"},
    "euclidean": {"n"},
    "hypothesis": {"n", "r_switch"},
}


@dataclass
class ExperimentConfig:
    sections: dict
    out: Path
    tol: float = 1e-10
    rmax: float = 40.0
    source: str = ""

    def get(self, name):
        return self.sections.get(name, {})


def load_config(path, out=None, tol=None, rmax=None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config is not valid TOML: {e}") from e
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    for name, body in data.items():
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table")
        allowed = SECTIONS[name]
        if allowed is not None and set(body) - allowed:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(set(body) - allowed)}")
    run = data.get("run", {})
    tol = float(tol if tol is not None else run.get("tol", 1e-10))
    rmax = float(rmax if rmax is not None else run.get("rmax", 40.0))
    if not tol > 0 or not rmax > 0:
        raise ConfigError("tol and rmax must be positive")
    # precedence: --out, then the environment override, then the config
    out_dir = out or os.environ.get(ENV_OUT) or run.get("out", "warpdecay-out")
    base = Path(path).resolve().parent
    out_path = Path(out_dir) if os.path.isabs(out_dir) or out or os.environ.get(ENV_OUT) else base / out_dir
    return ExperimentConfig(data, out_path, tol, rmax, str(path))


def build_profile(cfg: ExperimentConfig):
    """Returns (profile, manifest dict)."""
    p = dict(cfg.get("profile"))
    if "path" in p:
        if len(p) > 1:
            raise ConfigError("[profile] path excludes constructor parameters")
        path = Path(p["path"])
        if not path.is_absolute():
            path = Path(cfg.source).resolve().parent / path
        prof = load_profile(path)
        return prof, {"constructor": "file", "path": str(p["path"])}
    name = p.pop("constructor", None)
    if name not in CONSTRUCTOR_KEYS:
        raise ConfigError(f"[profile] constructor must be one of {sorted(CONSTRUCTOR_KEYS)}")
    extra = set(p) - CONSTRUCTOR_KEYS[name]
    if extra:
        raise ConfigError(f"constructor {name} does not take {sorted(extra)}")
    if name == "prop12":
        c = build_prop12(**p)
        return c.f, c.manifest()
    if name == "prop13":
        c = build_prop13(**p)
        return c.f, c.manifest()
    if name == "remark61":
        prof = build_remark61(**p)
        return prof, remark61_manifest(prof, p)
    if name == "euclidean":
        return euclidean(int(p.get("n", 3))), {"constructor": "euclidean", "n": int(p.get("n", 3))}
    case = build_case(cfg)
    prof = br.hypothesis_profile(case, **p)
    return prof, {"constructor": "hypothesis", "variant": case.variant, "n": prof.n}


def remark61_manifest(prof, params):
    c = float(params.get("c", 2.0))
    delta = float(params.get("delta", 1.0))
    r0 = float(params.get("r0_switch", 2.0))
    x = np.geomspace(max(r0, 1.0), 1e4, 200)
    exact = c - (1 + delta) / (2 * c * x * x)
    err = float(np.max(np.abs(distance_mean_curvature(prof, x) - exact)))
    return {"constructor": "remark61", "n": prof.n, "c": c, "delta": delta, "r0_switch": r0,
            "ess_bottom": ess_spectrum_bottom(c), "mean_curvature_max_err": err,
            "majorant_negative_beyond_k": majorant_threshold(delta)}


def build_case(cfg: ExperimentConfig) -> br.GrowthRateCase:
    body = dict(cfg.get("case"))
    if "variant" not in body:
        raise ConfigError("[case] needs a variant")
    variant = body.pop("variant")
    c = body.pop("c", 2.0)
    lam = body.pop("lam", 0.75)
    return br.make_case(variant, c, lam, **body)


def _pair(v, name):
    if not (isinstance(v, list) and len(v) == 2):
        raise ConfigError(f"{name} must be a two-element list")
    a, b = float(v[0]), float(v[1])
    if not a < b:
        raise ConfigError(f"{name} must be increasing")
    return a, b


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class DecayReport:
    r: np.ndarray
    u: np.ndarray
    bound: np.ndarray
    direction: str
    fit: object
    case: dict
    verdict: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def ratio(self):
        return self.u / self.bound

    def write(self, out: Path):
        header = [f"direction={self.direction}", f"verdict={'pass' if self.verdict else 'fail'}"]
        write_csv(out / "report.csv", header, ["r", "u", "bound", "ratio"],
                  zip(self.r, self.u, self.bound, self.ratio))
        fit = None
        if self.fit is not None:
            fit = {"gamma": self.fit.gamma, "log_prefactor_power": self.fit.log_prefactor_power,
                   "r_window": list(self.fit.r_window), "residual_norm": self.fit.residual_norm}
        write_json(out / "report.json", {"case": self.case, "verdict": "pass" if self.verdict else "fail",
                                         "direction": self.direction, "fit": fit,
                                         "diagnostics": self.diagnostics})


def _solution(cfg, profile, case, span):
    v = cfg.get("verify")
    how = v.get("solution", "robin")
    if how == "ground-state":
        lo, hi = _pair(v.get("bracket", [0.5 * case.lam, min(0.999 * ess_spectrum_bottom(case.c), 1.5 * case.lam)]),
                       "bracket")
        lam, sol = ground_state_search(profile, (lo, hi), cfg.rmax, tol=cfg.tol, verify=False)
        return sol, lam
    if how == "robin":
        return integrate_radial(profile, case.lam, "robin-decay", (cfg.rmax, span[0]), tol=cfg.tol), case.lam
    raise ConfigError("[verify] solution is 'robin' or 'ground-state'")


def run_verify(cfg: ExperimentConfig) -> DecayReport:
    profile, _ = build_profile(cfg)
    case = build_case(cfg)
    v = cfg.get("verify")
    span = _pair(v.get("span", [5.0, cfg.rmax]), "[verify] span")
    if span[1] > cfg.rmax:
        raise ConfigError("[verify] span exceeds rmax")
    br.check_hypothesis(profile, case, span)
    w = br.barrier_candidate(case)
    kind = br.barrier_kind(case)
    check = br.supersolution_check if kind == "super" else br.subsolution_check
    rep = check(profile, case.lam, w, span)
    sol, lam = _solution(cfg, profile, case, span)
    anchor = float(v.get("anchor", span[0]))
    direction = "upper" if kind == "super" else "lower"
    diag = {"barrier": str(w), "barrier_check": {"verdict": rep.verdict, "min_residual": rep.min_residual,
                                                 "first_failure": rep.first_failure, "points": rep.points},
            "lambda": lam, "anchor": anchor}
    verdict = bool(rep.verdict)
    bound = None
    if verdict:
        try:
            bound = br.comparison_envelope(sol, w, anchor, direction=direction, r_max=span[1], rtol=1e-9)
            diag["log_constant"] = bound.log_constant
        except br.DominationError as e:
            verdict = False
            diag["domination_failure"] = e.radius
    A = ex.log_of(w)
    logC = bound.log_constant if bound is not None else float(sol.log_abs(np.array([anchor]))[0] - A(anchor))
    mask = (sol.r >= anchor) & (sol.r <= span[1])
    r = sol.r[mask]
    u = np.exp(sol.log_abs(r))
    B = np.exp(logC + A(r))
    fit = None
    window = v.get("fit_window")
    try:
        if window is not None:
            fit = decay_exponent_fit(sol, _pair(window, "fit_window"))
        elif anchor > 1:
            fit = decay_exponent_fit(sol, (max(anchor, span[1] / 10), span[1]))
    except FitError as e:
        diag["fit_error"] = str(e)
    casedict = {"variant": case.variant, "c": case.c, "lam": case.lam, **case.params}
    return DecayReport(r, u, B, direction, fit, casedict, verdict, diag)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_construct(cfg):
    profile, manifest = build_profile(cfg)
    manifest["validation_ok"] = True
    cfg.out.mkdir(parents=True, exist_ok=True)
    dump_profile(profile, cfg.out / "profile.toml")
    write_json(cfg.out / "manifest.json", manifest)
    print(f"wrote {cfg.out / 'profile.toml'} and manifest.json")
    return EXIT_OK


def cmd_verify(cfg):
    report = run_verify(cfg)
    report.write(cfg.out)
    v = "pass" if report.verdict else "fail"
    print(f"verify {report.case['variant']}: {v} ({len(report.r)} rows, max ratio {fmt(np.max(report.ratio))})")
    return EXIT_OK if report.verdict else EXIT_FAIL


def cmd_spectrum(cfg):
    profile, _ = build_profile(cfg)
    s = cfg.get("spectrum")
    method = s.get("method", "shooting")
    out = {}
    if "counts" in s:
        cs = s["counts"]
        if not isinstance(cs, dict) or set(cs) - {"threshold", "r_max"}:
            raise ConfigError("[spectrum] counts = {threshold, r_max}")
        thr = float(cs.get("threshold", 1.0 - 1e-9))
        radii = [float(x) for x in cs.get("r_max", [100.0, 1000.0])]
        counts = [count_eigenvalues_below(profile, thr, R) for R in radii]
        out["counts"] = {"threshold": thr, "r_max": radii, "count": counts,
                         "increasing": all(b > a for a, b in zip(counts, counts[1:]))}
        print("counts below", fmt(thr), dict(zip(radii, counts)))
    c = s.get("c")
    if c is not None or "counts" not in s:
        if c is None:
            raise ConfigError("[spectrum] needs c (end mean curvature)")
        rep = spectral_report(profile, float(c), cfg.rmax, cfg.tol, method)
        out.update(rep.to_dict())
        if rep.ground_state is not None:
            rep.ground_state.to_csv(cfg.out / "ground_state.csv")
        print("discrete spectrum:", [fmt(x) for x in rep.discrete], "ess_bottom:", fmt(rep.ess_bottom))
    write_json(cfg.out / "spectrum.json", out)
    return EXIT_OK


def cmd_rayleigh(cfg):
    profile, _ = build_profile(cfg)
    s = cfg.get("rayleigh")
    c = float(s.get("c", 2.0))
    delta = s.get("delta")
    R = float(s.get("R", 50.0))
    k_star, sweep = rayleigh_onset(profile, c, R, delta=None if delta is None else float(delta),
                                   k0=float(s.get("k_start", 4.0)), k_max=float(s.get("k_max", 2.0 ** 48)))
    rows = [(t.k, t.value, t.majorant if t.majorant is not None else math.nan) for t in sweep]
    write_csv(cfg.out / "rayleigh.csv", [f"R={fmt(R)}", f"c={fmt(c)}"], ["k", "value", "majorant"], rows)
    summary = {"R": R, "c": c, "delta": delta, "k_star": k_star, "value_at_k_star": sweep[-1].value}
    if delta is not None:
        summary["majorant_negative_beyond_k"] = majorant_threshold(float(delta))
    write_json(cfg.out / "rayleigh.json", summary)
    print(f"first negative quadratic form at k = {fmt(k_star)}")
    return EXIT_OK


def cmd_decay_fit(cfg):
    profile, _ = build_profile(cfg)
    s = cfg.get("decay_fit")
    if "lam" not in s:
        raise ConfigError("[decay_fit] needs lam")
    lam = float(s["lam"])
    bc = s.get("bc", "robin-decay")
    span = s.get("span", [cfg.rmax, 1.0] if bc == "robin-decay" else [0.0, cfg.rmax])
    if not (isinstance(span, list) and len(span) == 2):
        raise ConfigError("[decay_fit] span must be a two-element list")
    data = tuple(float(x) for x in s.get("data", [1.0, 0.0]))
    sol = integrate_radial(profile, lam, bc, (float(span[0]), float(span[1])), tol=cfg.tol, data=data)
    window = s.get("window")
    fit = decay_exponent_fit(sol, None if window is None else _pair(window, "window"))
    sol.to_csv(cfg.out / "solution.csv")
    write_json(cfg.out / "fit.json", {"gamma": fit.gamma, "log_prefactor_power": fit.log_prefactor_power,
                                      "r_window": list(fit.r_window), "residual_norm": fit.residual_norm,
                                      "lambda": lam, "bc": bc})
    print(f"gamma = {fmt(fit.gamma)}, p = {fmt(fit.log_prefactor_power)}")
    return EXIT_OK


COMMANDS = {"construct": cmd_construct, "verify": cmd_verify, "spectrum": cmd_spectrum,
            "rayleigh": cmd_rayleigh, "decay-fit": cmd_decay_fit}


def make_parser():
    ap = argparse.ArgumentParser(prog="warpdecay", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--tol", type=float, metavar="X")
        p.add_argument("--rmax", type=float, metavar="X")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.out, args.tol, args.rmax)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg)
    except (ConfigError, br.CaseParameterError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except br.HypothesisViolation as e:
        print(f"hypothesis violation: {e}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ProfileError as e:
        print(f"construction failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (StepSizeError, BracketError, FitError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, TypeError) as e:
        # constructor parameter errors
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
