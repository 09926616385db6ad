"""Suite runner, counterexample search, and witness replay.

A run executes a configured set of checks over seeded random ensembles and
emits a schema-stable report.  Trials are keyed by (seed, check, trial)
through a counter-based generator, so serial and parallel executions
produce identical reports.
"""

from __future__ import annotations

import itertools
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .catalog import C2, C3, OUTSIDE_CLASS, ScalarFunction, from_spec
from .channels import KrausChannel, monotonicity_gap, check_monotonicity, random_unital_channel
from .characterizations import (
    BivariateFunctional,
    CONDITION_E_TOL,
    condition_a_check,
    condition_a_slack,
    condition_e_check,
    condition_e_margin,
    conditional_jensen_check,
    conditional_jensen_gap,
    convexity_lemma_margin,
    convexity_slack_at,
    joint_convexity_test,
)
from .entropy import (
    MatrixEnsemble,
    ProductEnsemble,
    SPECTRAL_FLOOR,
    check_operator_efron_stein,
    check_polynomial_efron_stein,
    check_subadditivity,
    dual_representation_gap,
    dual_value,
    efron_stein_quantity,
    interpolation_derivative_scan,
    matrix_phi_entropy,
    operator_phi_entropy,
    subadditivity_gap,
    variance,
)
from .errors import ConfigError, PhiLabError
from .frechet import finite_diff_oracle, frechet_d1, frechet_d2, frechet_d3
from .reports import VerificationReport
from .sampling import (
    rng_for,
    sample_coupled_ensembles,
    sample_ensemble,
    sample_hermitian_unit,
    sample_product,
    sample_psd,
)
from .spectral import (
    frobenius,
    hermitian_part,
    matrix_from_json,
    matrix_to_json,
    normalized_trace,
    relative_error,
)

CHECK_NAMES = (
    "frechet_oracle",
    "subadditivity",
    "efron_stein",
    "poly_efron_stein",
    "dual_representation",
    "characterizations",
    "condition_a",
    "condition_e",
    "monotonicity",
    "jensen",
)

ORACLE_TOLS = {1: 1e-6, 2: 1e-4, 3: 1e-3}

SEARCHABLE_CHECKS = ("bregman_A", "map_B", "map_C", "gap_F_t", "condition_a", "condition_e")


@dataclass(frozen=True)
class RunConfig:
    """Configuration of a suite run."""

    seed: int = 0
    dims: tuple = (2, 3, 4)
    trials: int = 200
    phi_list: tuple = ("square", "xlogx")
    variant: str = "trace"
    checks: tuple = CHECK_NAMES
    tolerances: dict = field(default_factory=dict)
    n_factors: int = 2
    support: int = 2
    allow_outside_class: bool = False
    output_path: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 or d > 16 for d in dims):
            raise ConfigError(f"dims must be a non-empty subset of [1, 16], got {dims}")
        if not self.phi_list:
            raise ConfigError("phi_list must not be empty")
        if self.variant not in ("trace", "operator", "both"):
            raise ConfigError(f"variant must be trace|operator|both, got '{self.variant}'")
        checks = tuple(self.checks)
        unknown = [c for c in checks if c not in CHECK_NAMES]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; valid names: {CHECK_NAMES}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "phi_list", tuple(self.phi_list))
        object.__setattr__(self, "checks", checks)

    def variants(self) -> tuple:
        return ("trace", "operator") if self.variant == "both" else (self.variant,)

    def tolerance_for(self, check: str) -> float | None:
        return self.tolerances.get(check)

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "dims": list(self.dims),
            "trials": self.trials,
            "phi_list": list(self.phi_list),
            "variant": self.variant,
            "checks": list(self.checks),
            "tolerances": dict(self.tolerances),
            "n_factors": self.n_factors,
            "support": self.support,
            "allow_outside_class": self.allow_outside_class,
            "output_path": self.output_path,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunConfig":
        kwargs = {}
        for key in ("seed", "trials", "variant", "n_factors", "support",
                    "allow_outside_class", "output_path"):
            if key in data:
                kwargs[key] = data[key]
        if "dims" in data:
            kwargs["dims"] = tuple(data["dims"])
        if "phi_list" in data:
            kwargs["phi_list"] = tuple(data["phi_list"])
        if "checks" in data:
            kwargs["checks"] = tuple(data["checks"])
        if "tolerances" in data:
            kwargs["tolerances"] = dict(data["tolerances"])
        extra = set(data) - {"seed", "dims", "trials", "phi_list", "variant", "checks",
                             "tolerances", "n_factors", "support", "allow_outside_class",
                             "output_path"}
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class SuiteReport:
    """Aggregated outcome of a run: one entry per configured check."""

    config: dict
    entries: tuple  # of (VerificationReport, in_class: bool, seconds: float)
    skipped: tuple  # of {"check_name":…, "reason":…}

    @property
    def summary(self) -> dict:
        passed = sum(1 for r, _, _ in self.entries if r.holds)
        failed = sum(1 for r, _, _ in self.entries if not r.holds)
        return {"pass": passed, "fail": failed, "skip": len(self.skipped)}

    def exit_code(self) -> int:
        """0 iff no in-class check failed."""
        for report, in_class, _ in self.entries:
            if in_class and not report.holds:
                return 1
        return 0

    def to_json_dict(self) -> dict:
        return {
            "artifact_version": __version__,
            "config": self.config,
            "summary": self.summary,
            "reports": [
                {**report.to_json_dict(), "in_class": in_class, "seconds": seconds}
                for report, in_class, seconds in self.entries
            ],
            "skipped": list(self.skipped),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SuiteReport":
        entries = tuple(
            (VerificationReport.from_json_dict(entry), bool(entry["in_class"]),
             float(entry["seconds"]))
            for entry in data["reports"]
        )
        return cls(config=data["config"], entries=entries, skipped=tuple(data["skipped"]))


def _pd_pair_sampler(d: int):
    def sample(rng):
        u = sample_psd(d, SPECTRAL_FLOOR, rng)
        v = sample_psd(d, SPECTRAL_FLOOR, rng)
        return u, v
    return sample


def _condition_a_sampler(d: int):
    def sample(rng):
        A1 = sample_psd(d, SPECTRAL_FLOOR, rng)
        A2 = sample_psd(d, SPECTRAL_FLOOR, rng)
        h = sample_hermitian_unit(d, rng)
        return A1, A2, h
    return sample


def _in_class(f: ScalarFunction, variant: str) -> bool:
    if f.has_tag(OUTSIDE_CLASS):
        return False
    return f.has_tag({"trace": C2, "operator": C3}[variant])


# --- per-check task runners -----------------------------------------------------


def _run_frechet_oracle(config: RunConfig, f: ScalarFunction, d: int):
    out = []
    for order in (1, 2, 3):
        tol = config.tolerance_for("frechet_oracle") or ORACLE_TOLS[order]
        worst = np.inf
        witness = None
        for trial in range(config.trials):
            rng = rng_for(config.seed, "frechet_oracle", f.spec_string(), d, order, trial)
            A = sample_psd(d, 0.5, rng, spectral_cap=4.0)
            X = sample_hermitian_unit(d, rng)
            if order == 1:
                exact = frechet_d1(f, A, X)
            elif order == 2:
                exact = frechet_d2(f, A, X, X)
            else:
                exact = frechet_d3(f, A, X, X, X)
            approx = finite_diff_oracle(f, A, X, order)
            margin = -relative_error(exact, approx)
            if margin < worst:
                worst = margin
                witness = {"kind": "frechet_oracle", "phi": f.spec_string(),
                           "order": order, "A": matrix_to_json(A), "X": matrix_to_json(X)}
        report = VerificationReport.from_margin(
            f"frechet_oracle[{f.spec_string()},d={d},order={order}]",
            worst, tol, trials=config.trials, witness=witness)
        out.append((report, True))
    return out


def _sweep_min(reports_margin_witness, name, tol, trials):
    margin = np.inf
    witness = None
    for m, w in reports_margin_witness:
        if m < margin:
            margin, witness = m, w
    return VerificationReport.from_margin(name, margin, tol, trials=trials, witness=witness)


def _run_subadditivity(config: RunConfig, f: ScalarFunction, variant: str, d: int):
    results = []
    tol_override = config.tolerance_for("subadditivity")
    for trial in range(config.trials):
        rng = rng_for(config.seed, "subadditivity", f.spec_string(), variant, d, trial)
        P = sample_product(d, config.n_factors, config.support, rng)
        gap = subadditivity_gap(f, P, variant)
        if variant == "trace":
            margin = normalized_trace(gap)
        else:
            margin = float(np.linalg.eigvalsh(gap)[0])
        witness = {"kind": "subadditivity", "phi": f.spec_string(), "variant": variant,
                   "product": P.to_json_dict()}
        results.append((margin, witness))
    tol = tol_override if tol_override is not None else 1e-10
    report = _sweep_min(results, f"subadditivity[{f.spec_string()},{variant},d={d},n={config.n_factors}]",
                        tol, config.trials)
    return [(report, _in_class(f, variant))]


def _run_efron_stein(config: RunConfig, d: int):
    tol = config.tolerance_for("efron_stein")
    results = []
    for trial in range(config.trials):
        rng = rng_for(config.seed, "efron_stein", d, trial)
        P = sample_product(d, config.n_factors, config.support, rng)
        es = efron_stein_quantity(P)
        var = variance(P.flatten())
        margin = float(np.linalg.eigvalsh(hermitian_part(es - var))[0])
        results.append((margin, {"kind": "efron_stein", "product": P.to_json_dict()}))
    report = _sweep_min(results, f"efron_stein[d={d},n={config.n_factors}]",
                        tol if tol is not None else 1e-10, config.trials)
    return [(report, True)]


def _run_poly_efron_stein(config: RunConfig, d: int):
    tol = config.tolerance_for("poly_efron_stein")
    out = []
    for p in (1, 2, 3):
        results = []
        for trial in range(config.trials):
            rng = rng_for(config.seed, "poly_efron_stein", d, p, trial)
            P = sample_product(d, config.n_factors, config.support, rng)
            from .spectral import schatten_norm

            lhs = schatten_norm(variance(P.flatten()), p) ** p
            rhs = schatten_norm(efron_stein_quantity(P), p) ** p
            margin = rhs - lhs
            results.append((margin, {"kind": "poly_efron_stein", "p": p,
                                     "product": P.to_json_dict()}))
        report = _sweep_min(results, f"poly_efron_stein[d={d},p={p}]",
                            tol if tol is not None else 1e-10, config.trials)
        out.append((report, True))
    return out


def _run_dual_representation(config: RunConfig, f: ScalarFunction, variant: str, d: int):
    tol = config.tolerance_for("dual_representation")
    results = []
    for trial in range(config.trials):
        rng = rng_for(config.seed, "dual_representation", f.spec_string(), variant, d, trial)
        Z, T = sample_coupled_ensembles(d, 3, rng, spectral_floor=SPECTRAL_FLOOR)
        gap = operator_phi_entropy(f, Z) - dual_value(f, Z, T)
        if variant == "trace":
            margin = normalized_trace(gap)
        else:
            margin = float(np.linalg.eigvalsh(hermitian_part(gap))[0])
        results.append((margin, {"kind": "dual_representation", "phi": f.spec_string(),
                                 "variant": variant, "Z": Z.to_json_dict(),
                                 "T": T.to_json_dict()}))
    report = _sweep_min(results, f"dual_representation[{f.spec_string()},{variant},d={d}]",
                        tol if tol is not None else 1e-9, config.trials)
    return [(report, _in_class(f, variant))]


_ITEM_FUNCTIONALS = {"b": "bregman_A", "c": "map_B", "d": "map_C", "f": "gap_F_t"}


def _run_characterizations(config: RunConfig, f: ScalarFunction, variant: str, d: int):
    out = []
    tol = config.tolerance_for("characterizations")
    in_class = _in_class(f, variant)
    for item in ("b", "c", "d", "f"):
        fname = _ITEM_FUNCTIONALS[item]
        results = []
        for trial in range(config.trials):
            rng = rng_for(config.seed, "characterizations", item, f.spec_string(),
                          variant, d, trial)
            sampler = _pd_pair_sampler(d)
            pair1, pair2 = sampler(rng), sampler(rng)
            t = float(rng.uniform(0.0, 1.0)) if fname == "gap_F_t" else None
            F = BivariateFunctional(fname, f, variant, t=t)
            lams = [0.25, 0.5, 0.75, float(rng.uniform()), float(rng.uniform())]
            for lam in lams:
                slack = convexity_slack_at(F, pair1[0], pair1[1], pair2[0], pair2[1], lam)
                results.append((slack, {
                    "kind": "joint_convexity", "functional": fname,
                    "phi": f.spec_string(), "variant": variant, "t": t, "lambda": lam,
                    "u1": matrix_to_json(pair1[0]), "v1": matrix_to_json(pair1[1]),
                    "u2": matrix_to_json(pair2[0]), "v2": matrix_to_json(pair2[1])}))
        scale = 1.0 + max(abs(m) for m, _ in results)
        report = _sweep_min(
            results, f"characterizations[{item},{f.spec_string()},{variant},d={d}]",
            tol if tol is not None else 1e-9 * scale, config.trials)
        out.append((report, in_class))
    # item (g): conditional Jensen over random two-factor products
    results = []
    for trial in range(config.trials):
        rng = rng_for(config.seed, "characterizations", "g", f.spec_string(),
                      variant, d, trial)
        P = sample_product(d, 2, config.support, rng)
        gap = conditional_jensen_gap(f, P)
        margin = normalized_trace(gap) if variant == "trace" else float(np.linalg.eigvalsh(gap)[0])
        results.append((margin, {"kind": "conditional_jensen", "phi": f.spec_string(),
                                 "variant": variant, "product": P.to_json_dict()}))
    report = _sweep_min(results, f"characterizations[g,{f.spec_string()},{variant},d={d}]",
                        tol if tol is not None else 1e-10, config.trials)
    out.append((report, in_class))
    return out


def _run_condition_a(config: RunConfig, f: ScalarFunction, d: int):
    tol = config.tolerance_for("condition_a")
    results = []
    scale = 1.0
    for trial in range(config.trials):
        rng = rng_for(config.seed, "condition_a", f.spec_string(), d, trial)
        A1, A2, h = _condition_a_sampler(d)(rng)
        lams = [0.25, 0.5, 0.75, float(rng.uniform()), float(rng.uniform())]
        for lam in lams:
            slack = condition_a_slack(f, A1, A2, h, lam)
            scale = max(scale, abs(slack))
            results.append((slack, {"kind": "condition_a", "phi": f.spec_string(),
                                    "lambda": lam, "A1": matrix_to_json(A1),
                                    "A2": matrix_to_json(A2), "h": matrix_to_json(h)}))
    report = _sweep_min(results, f"condition_a[{f.spec_string()},d={d}]",
                        tol if tol is not None else 1e-9 * scale, config.trials)
    return [(report, _in_class(f, "trace"))]


def _run_condition_e(config: RunConfig, f: ScalarFunction, d: int):
    tol = config.tolerance_for("condition_e")
    results = []
    for trial in range(config.trials):
        rng = rng_for(config.seed, "condition_e", f.spec_string(), d, trial)
        A = sample_psd(d, 0.5, rng, spectral_cap=4.0)
        h = sample_hermitian_unit(d, rng)
        k = sample_hermitian_unit(d, rng)
        margin = condition_e_margin(f, A, h, k)
        results.append((margin, {"kind": "condition_e", "phi": f.spec_string(),
                                 "method": "hybrid", "A": matrix_to_json(A),
                                 "h": matrix_to_json(h), "k": matrix_to_json(k)}))
    report = _sweep_min(results, f"condition_e[{f.spec_string()},d={d}]",
                        tol if tol is not None else CONDITION_E_TOL, config.trials)
    return [(report, _in_class(f, "trace"))]


def _run_monotonicity(config: RunConfig, f: ScalarFunction, variant: str, d: int):
    tol = config.tolerance_for("monotonicity")
    results = []
    for trial in range(config.trials):
        rng = rng_for(config.seed, "monotonicity", f.spec_string(), variant, d, trial)
        k = int(rng.integers(1, 5))
        N = random_unital_channel(d, k, rng)
        E = sample_ensemble(d, 3, rng, spectral_floor=0.0)
        margin = monotonicity_gap(f, N, E, variant)
        results.append((margin, {"kind": "monotonicity", "phi": f.spec_string(),
                                 "variant": variant, "channel": N.to_json_dict(),
                                 "ensemble": E.to_json_dict()}))
    report = _sweep_min(results, f"monotonicity[{f.spec_string()},{variant},d={d}]",
                        tol if tol is not None else 1e-10, config.trials)
    return [(report, _in_class(f, variant))]


def _run_jensen(config: RunConfig, f: ScalarFunction, variant: str, d: int):
    tol = config.tolerance_for("jensen")
    results = []
    for trial in range(config.trials):
        rng = rng_for(config.seed, "jensen", f.spec_string(), variant, d, trial)
        P = sample_product(d, 2, config.support, rng)
        gap = conditional_jensen_gap(f, P)
        margin = normalized_trace(gap) if variant == "trace" else float(np.linalg.eigvalsh(gap)[0])
        results.append((margin, {"kind": "conditional_jensen", "phi": f.spec_string(),
                                 "variant": variant, "product": P.to_json_dict()}))
    report = _sweep_min(results, f"jensen[{f.spec_string()},{variant},d={d}]",
                        tol if tol is not None else 1e-10, config.trials)
    return [(report, _in_class(f, variant))]


def _build_tasks(config: RunConfig, funcs: dict):
    """Yield (sort_key, callable) pairs; each callable returns [(report, in_class)]."""
    tasks = []
    skipped = []

    def add(key, fn):
        tasks.append((key, fn))

    for name, f in funcs.items():
        outside = f.has_tag(OUTSIDE_CLASS)
        for d in config.dims:
            if outside:
                # Outside-class functions get falsification searches instead of sweeps.
                if d == min(config.dims) and "characterizations" in config.checks:
                    budget = min(config.trials * 50, 10_000)
                    add(f"search[map_C,{name}]",
                        lambda f=f, b=budget: [(counterexample_search(
                            f, "map_C", b, config.seed, dim=1), False)])
                if d == min(config.dims) and "condition_a" in config.checks:
                    budget = min(config.trials * 50, 10_000)
                    add(f"search[condition_a,{name}]",
                        lambda f=f, b=budget: [(counterexample_search(
                            f, "condition_a", b, config.seed, dim=1), False)])
                continue
            if "frechet_oracle" in config.checks:
                add(f"frechet_oracle[{name},d={d}]",
                    lambda f=f, d=d: _run_frechet_oracle(config, f, d))
            for variant in config.variants():
                if variant == "operator" and not f.has_tag(C3):
                    skipped.append({
                        "check_name": f"operator-checks[{name},d={d}]",
                        "reason": f"'{name}' is not tagged {C3}; operator-order checks "
                                  "are certified only for that class",
                    })
                    continue
                if "subadditivity" in config.checks:
                    add(f"subadditivity[{name},{variant},d={d}]",
                        lambda f=f, v=variant, d=d: _run_subadditivity(config, f, v, d))
                if "dual_representation" in config.checks:
                    add(f"dual_representation[{name},{variant},d={d}]",
                        lambda f=f, v=variant, d=d: _run_dual_representation(config, f, v, d))
                if "characterizations" in config.checks:
                    add(f"characterizations[{name},{variant},d={d}]",
                        lambda f=f, v=variant, d=d: _run_characterizations(config, f, v, d))
                if "monotonicity" in config.checks:
                    add(f"monotonicity[{name},{variant},d={d}]",
                        lambda f=f, v=variant, d=d: _run_monotonicity(config, f, v, d))
                if "jensen" in config.checks:
                    add(f"jensen[{name},{variant},d={d}]",
                        lambda f=f, v=variant, d=d: _run_jensen(config, f, v, d))
            if "condition_a" in config.checks:
                add(f"condition_a[{name},d={d}]",
                    lambda f=f, d=d: _run_condition_a(config, f, d))
            if "condition_e" in config.checks and d <= 4:
                add(f"condition_e[{name},d={d}]",
                    lambda f=f, d=d: _run_condition_e(config, f, d))
    for d in config.dims:
        if "efron_stein" in config.checks:
            add(f"efron_stein[d={d}]", lambda d=d: _run_efron_stein(config, d))
        if "poly_efron_stein" in config.checks:
            add(f"poly_efron_stein[d={d}]", lambda d=d: _run_poly_efron_stein(config, d))
    return tasks, skipped


def worker_count() -> int:
    raw = os.environ.get("PHI_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"PHI_LAB_THREADS must be an integer, got '{raw}'")


def run_suite(config: RunConfig) -> SuiteReport:
    """Run every configured check; deterministic for a fixed config and seed."""
    funcs = {}
    for name in config.phi_list:
        try:
            f = from_spec(name, allow_outside_class=config.allow_outside_class)
        except PhiLabError as exc:
            raise ConfigError(f"cannot resolve function '{name}': {exc}") from exc
        if f.has_tag(OUTSIDE_CLASS) and not config.allow_outside_class:
            raise ConfigError(
                f"'{name}' is outside the subadditive classes; set "
                "allow_outside_class to include it in a run"
            )
        funcs[name] = f

    tasks, skipped = _build_tasks(config, funcs)

    def execute(task):
        key, fn = task
        start = time.perf_counter()
        results = fn()
        seconds = time.perf_counter() - start
        return key, [(report, in_class, seconds / max(1, len(results)))
                     for report, in_class in results]

    threads = worker_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(execute, tasks))
    else:
        raw = [execute(t) for t in tasks]

    entries = []
    for _, result in sorted(raw, key=lambda kv: kv[0]):
        entries.extend(result)
    entries.sort(key=lambda e: e[0].check_name)
    names = [e[0].check_name for e in entries]
    if len(set(names)) != len(names):
        raise ConfigError("internal error: duplicate check names in suite report")
    return SuiteReport(config=config.to_json_dict(), entries=tuple(entries),
                       skipped=tuple(skipped))


# --- counterexample search --------------------------------------------------------


def _herm_from_params(p: np.ndarray, d: int) -> np.ndarray:
    """Dense Hermitian matrix from d^2 real parameters."""
    M = np.zeros((d, d), dtype=complex)
    idx = 0
    for i in range(d):
        M[i, i] = p[idx]
        idx += 1
    for i in range(d):
        for j in range(i + 1, d):
            M[i, j] = p[idx] + 1j * p[idx + 1]
            M[j, i] = p[idx] - 1j * p[idx + 1]
            idx += 2
    return M


def _params_per_matrix(d: int) -> int:
    return d * d


class _SearchSpace:
    """Random points plus margin evaluation for one searchable check."""

    def __init__(self, f: ScalarFunction, check: str, dim: int):
        self.f = f
        self.check = check
        self.dim = dim
        self.n_mats = {"condition_a": 3, "condition_e": 3}.get(check, 4)

    def sample(self, rng) -> np.ndarray:
        d = self.dim
        mats = []
        for _ in range(self.n_mats):
            if self.check == "condition_e":
                base = sample_psd(d, 0.6, rng, spectral_cap=3.8)
            else:
                base = sample_psd(d, SPECTRAL_FLOOR + 0.05, rng)
            mats.append(base)
        point = [self._mat_params(m) for m in mats]
        point.append(np.array([rng.uniform(0.05, 0.95)]))
        return np.concatenate(point)

    def _mat_params(self, M: np.ndarray) -> np.ndarray:
        d = self.dim
        p = [float(M[i, i].real) for i in range(d)]
        for i in range(d):
            for j in range(i + 1, d):
                p.extend([float(M[i, j].real), float(M[i, j].imag)])
        return np.asarray(p)

    def _unpack(self, point: np.ndarray):
        d = self.dim
        k = _params_per_matrix(d)
        mats = [_herm_from_params(point[i * k:(i + 1) * k], d) for i in range(self.n_mats)]
        lam = float(np.clip(point[self.n_mats * k], 0.01, 0.99))
        return mats, lam

    def margin(self, point: np.ndarray) -> float:
        mats, lam = self._unpack(point)
        try:
            if self.check == "condition_a":
                A1, A2, h = mats
                return condition_a_slack(self.f, A1, A2, h, lam)
            if self.check == "condition_e":
                A, h, k = mats
                return condition_e_margin(self.f, A, h, k)
            t = lam if self.check == "gap_F_t" else None
            F = BivariateFunctional(self.check, self.f, "trace", t=t)
            u1, v1, u2, v2 = mats
            return convexity_slack_at(F, u1, v1, u2, v2, lam)
        except PhiLabError:
            return np.inf  # out-of-domain proposal; treat as non-violating

    def witness(self, point: np.ndarray, margin: float) -> dict:
        mats, lam = self._unpack(point)
        base = {"phi": self.f.spec_string(), "dim": self.dim, "margin": margin}
        if self.check == "condition_a":
            base.update({"kind": "condition_a", "lambda": lam,
                         "A1": matrix_to_json(mats[0]), "A2": matrix_to_json(mats[1]),
                         "h": matrix_to_json(mats[2])})
        elif self.check == "condition_e":
            base.update({"kind": "condition_e", "method": "hybrid",
                         "A": matrix_to_json(mats[0]), "h": matrix_to_json(mats[1]),
                         "k": matrix_to_json(mats[2])})
        else:
            base.update({"kind": "joint_convexity", "functional": self.check,
                         "variant": "trace", "lambda": lam,
                         "t": lam if self.check == "gap_F_t" else None,
                         "u1": matrix_to_json(mats[0]), "v1": matrix_to_json(mats[1]),
                         "u2": matrix_to_json(mats[2]), "v2": matrix_to_json(mats[3])})
        return base


def counterexample_search(f: ScalarFunction, check_name: str, budget: int, seed: int,
                          dim: int = 1, tol: float = 1e-9) -> VerificationReport:
    """Random search, then coordinate perturbation, for a check violation.

    A success is a point whose slack falls below -10*tol; the refined point
    is stored as a replayable witness.  Budget exhaustion reports
    holds=True with the trial count; that is evidence, not a proof.
    """
    if check_name not in SEARCHABLE_CHECKS:
        raise ConfigError(
            f"'{check_name}' is not searchable; choose from {SEARCHABLE_CHECKS}")
    space = _SearchSpace(f, check_name, dim)
    threshold = -10.0 * tol
    best_margin = np.inf
    best_point = None
    trials_used = 0
    for trial in range(budget):
        trials_used = trial + 1
        rng = rng_for(seed, "search", check_name, f.spec_string(), dim, trial)
        point = space.sample(rng)
        margin = space.margin(point)
        if margin < best_margin:
            best_margin, best_point = margin, point
        if margin < threshold:
            point, margin = _refine(space, point, margin, rng)
            return VerificationReport.from_margin(
                f"counterexample_search[{check_name},{f.spec_string()},d={dim}]",
                margin, 10.0 * tol, trials=trials_used,
                witness=space.witness(point, margin))
    witness = space.witness(best_point, best_margin) if best_point is not None else None
    return VerificationReport.from_margin(
        f"counterexample_search[{check_name},{f.spec_string()},d={dim}]",
        best_margin, 10.0 * tol, trials=trials_used, witness=witness)


def _refine(space: _SearchSpace, point: np.ndarray, margin: float, rng,
            sweeps: int = 8) -> tuple:
    """Greedy coordinate descent pushing the slack further negative."""
    step = 0.25
    for _ in range(sweeps):
        improved = False
        for i in range(point.size):
            for sign in (1.0, -1.0):
                trial = point.copy()
                trial[i] += sign * step * (1.0 + abs(trial[i]))
                m = space.margin(trial)
                if m < margin:
                    point, margin = trial, m
                    improved = True
        if not improved:
            step *= 0.5
    return point, margin


# --- witness replay ----------------------------------------------------------------


def replay_witness(witness: dict) -> float:
    """Recompute the margin a stored witness claims; must match to 1e-12."""
    kind = witness["kind"]
    if kind in ("subadditivity", "conditional_jensen"):
        f = from_spec(witness["phi"], allow_outside_class=True)
        P = ProductEnsemble.from_json_dict(witness["product"])
        gap = (subadditivity_gap(f, P, witness["variant"]) if kind == "subadditivity"
               else conditional_jensen_gap(f, P))
        if witness["variant"] == "trace":
            return normalized_trace(gap)
        return float(np.linalg.eigvalsh(gap)[0])
    if kind == "efron_stein":
        P = ProductEnsemble.from_json_dict(witness["product"])
        diff = efron_stein_quantity(P) - variance(P.flatten())
        return float(np.linalg.eigvalsh(hermitian_part(diff))[0])
    if kind == "poly_efron_stein":
        from .spectral import schatten_norm

        P = ProductEnsemble.from_json_dict(witness["product"])
        p = int(witness["p"])
        return (schatten_norm(efron_stein_quantity(P), p) ** p
                - schatten_norm(variance(P.flatten()), p) ** p)
    if kind == "dual_representation":
        f = from_spec(witness["phi"], allow_outside_class=True)
        Z = MatrixEnsemble.from_json_dict(witness["Z"])
        T = MatrixEnsemble.from_json_dict(witness["T"])
        gap = operator_phi_entropy(f, Z) - dual_value(f, Z, T)
        if witness["variant"] == "trace":
            return normalized_trace(gap)
        return float(np.linalg.eigvalsh(hermitian_part(gap))[0])
    if kind == "joint_convexity":
        f = from_spec(witness["phi"], allow_outside_class=True)
        F = BivariateFunctional(witness["functional"], f, witness["variant"],
                                t=witness.get("t"))
        return convexity_slack_at(
            F, matrix_from_json(witness["u1"]), matrix_from_json(witness["v1"]),
            matrix_from_json(witness["u2"]), matrix_from_json(witness["v2"]),
            float(witness["lambda"]))
    if kind == "condition_a":
        f = from_spec(witness["phi"], allow_outside_class=True)
        return condition_a_slack(
            f, matrix_from_json(witness["A1"]), matrix_from_json(witness["A2"]),
            matrix_from_json(witness["h"]), float(witness["lambda"]))
    if kind == "condition_e":
        f = from_spec(witness["phi"], allow_outside_class=True)
        return condition_e_margin(
            f, matrix_from_json(witness["A"]), matrix_from_json(witness["h"]),
            matrix_from_json(witness["k"]), method=witness.get("method", "hybrid"))
    if kind == "monotonicity":
        f = from_spec(witness["phi"], allow_outside_class=True)
        N = KrausChannel.from_json_dict(witness["channel"])
        E = MatrixEnsemble.from_json_dict(witness["ensemble"])
        return monotonicity_gap(f, N, E, witness["variant"])
    if kind == "convexity_lemma":
        f = from_spec(witness["phi"], allow_outside_class=True)
        A = [matrix_from_json(a) for a in witness["A"]]
        X = [matrix_from_json(x) for x in witness["X"]]
        return convexity_lemma_margin(f, witness["weights"], A, X)
    if kind == "frechet_oracle":
        f = from_spec(witness["phi"], allow_outside_class=True)
        A = matrix_from_json(witness["A"])
        X = matrix_from_json(witness["X"])
        order = int(witness["order"])
        if order == 1:
            exact = frechet_d1(f, A, X)
        elif order == 2:
            exact = frechet_d2(f, A, X, X)
        else:
            exact = frechet_d3(f, A, X, X, X)
        return -relative_error(exact, finite_diff_oracle(f, A, X, order))
    raise ConfigError(f"cannot replay witness of kind '{kind}'")
