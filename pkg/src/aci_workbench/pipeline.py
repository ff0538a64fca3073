"""Stage-by-stage analysis runs producing a single report per system."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np

from aci_workbench import divisor, dynamics, painleve, prym, riemann
from aci_workbench.algebra import CompiledPolys, MultiPoly, as_exact, format_scalar, to_complex
from aci_workbench.config import PipelineConfig, Tolerances
from aci_workbench.errors import ConfigError, CurveError, ParameterError, WorkbenchError
from aci_workbench.systems import HamiltonianSystem, get_system, henon_heiles_curve, kowalewski_curve

logger = logging.getLogger(__name__)

# x_i of the random initial state is scaled by DYNAMICS_SCALE**nu_i; escape times grow like 1/DYNAMICS_SCALE
DYNAMICS_SCALE = 0.05


class Severity(Enum):
    """Stage issue severity levels."""

    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class StageIssue:
    """A failed check or an exception raised inside a stage."""

    stage: str
    message: str
    severity: Severity = Severity.ERROR


@dataclass
class StageResult:
    """Outcome of one stage: passed, failed or skipped, with its data."""

    name: str
    status: str
    data: dict[str, Any] = field(default_factory=dict)


@dataclass
class PipelineReport:
    """Everything a run produced, plus CSV side tables keyed by file stem."""

    system: str
    stages: list[StageResult] = field(default_factory=list)
    issues: list[StageIssue] = field(default_factory=list)
    config: dict[str, Any] | None = None
    tables: dict[str, tuple[list[str], np.ndarray]] = field(default_factory=dict)

    @property
    def is_valid(self) -> bool:
        """Return True if no errors were found."""
        return not any(issue.severity == Severity.ERROR for issue in self.issues)

    @property
    def error_count(self) -> int:
        return sum(1 for issue in self.issues if issue.severity == Severity.ERROR)

    @property
    def warning_count(self) -> int:
        return sum(1 for issue in self.issues if issue.severity == Severity.WARNING)

    def stage(self, name: str) -> StageResult | None:
        return next((s for s in self.stages if s.name == name), None)


@dataclass
class _Run:
    system: HamiltonianSystem
    config: PipelineConfig
    report: PipelineReport
    stage: str = ""
    weights: tuple[int, ...] = ()
    balances: list[painleve.Balance] = field(default_factory=list)
    principal: list[tuple[painleve.Balance, painleve.KowalewskiSpectrum]] = field(default_factory=list)
    families: list[painleve.LaurentFamily] = field(default_factory=list)
    reductions: list[divisor.LevelReduction] = field(default_factory=list)
    level_sets: list[list[divisor.DivisorSample]] = field(default_factory=list)
    curve: MultiPoly | None = None
    basis: riemann.DifferentialBasis | None = None
    periods: riemann.PeriodMatrix | None = None
    canonical: prym.CanonicalForm | None = None

    @property
    def levels(self) -> tuple[Any, ...]:
        if self.config.levels is None:
            return self.system.levels
        try:
            return tuple(as_exact(c) for c in self.config.levels)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"levels must be exact ('p/q' strings, ints or [re, im] pairs): {exc}") from exc

    def printed_levels(self) -> tuple[str, ...]:
        """Levels as 'p/q' strings for the printed curve builders."""
        values = tuple(format_scalar(c) for c in self.levels)
        if not all(isinstance(v, str) for v in values):
            raise ParameterError("printed curves are tabulated for rational levels only")
        return values

    def check(self, condition: bool, message: str, severity: Severity = Severity.ERROR) -> bool:
        if not condition:
            self.report.issues.append(StageIssue(self.stage, message, severity))
        return condition


def _pairs(values: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.ravel(values)]


def _complex_columns(names: Sequence[str], rows: np.ndarray) -> tuple[list[str], np.ndarray]:
    header = [f"{n}_{part}" for n in names for part in ("re", "im")]
    columns = []
    for j in range(rows.shape[1]):
        columns += [rows[:, j].real, rows[:, j].imag]
    return header, np.column_stack(columns) if columns else np.zeros((0, 0))


def relative_membership(poly: MultiPoly, points: np.ndarray) -> float:
    """max |p(x)| / (sum |c| |x|^e) over the points."""
    value = CompiledPolys([poly])
    bound = CompiledPolys([poly])
    bound.coefficients = np.abs(bound.coefficients)
    worst = 0.0
    for x in points:
        scale = max(1.0, float(abs(bound(np.abs(x))[0])))
        worst = max(worst, float(abs(value(x)[0])) / scale)
    return worst


# ---------------------------------------------------------------------------
# Common stages
# ---------------------------------------------------------------------------


def _weights(run: _Run) -> dict[str, Any]:
    run.weights = painleve.detect_weights(run.system)
    return {"weights": list(run.weights)}


def _balances(run: _Run) -> dict[str, Any]:
    run.balances = painleve.solve_balances(
        run.system,
        run.weights,
        random_starts=run.config.random_starts,
        seed=run.config.seed,
        tolerances=run.config.tolerances,
    )
    return {"count": len(run.balances), "balances": [b.to_json() for b in run.balances]}


def _spectrum(run: _Run) -> dict[str, Any]:
    run.principal = painleve.principal_balances(run.system, run.balances, run.config.tolerances)
    run.check(bool(run.principal), "no principal balance: no family with dim - 1 free parameters")
    return {
        "principal_balances": len(run.principal),
        "spectra": [s.to_json() for _, s in run.principal],
    }


def _families(run: _Run) -> dict[str, Any]:
    entries = []
    for balance, spectrum in run.principal:
        family = painleve.expand_family(
            run.system, balance, spectrum, run.config.order, tolerances=run.config.tolerances
        )
        defect = divisor.invariance_defect(family, run.system.invariants)
        limit = 0.0 if family.exact else 1e-6
        run.check(defect <= limit, f"invariants vary along the family: largest t^k coefficient {defect:.3g}")
        ode_defect = max(painleve.max_series_coefficient(r) for r in painleve.ode_residuals(run.system, family))
        run.check(ode_defect <= limit, f"series does not solve the ODE: largest residual coefficient {ode_defect:.3g}")
        run.families.append(family)
        entries.append(
            {
                "balance": balance.to_json()["kind"],
                "exact": family.exact,
                "parameters": list(family.parameters),
                "parameter_orders": family.parameter_orders,
                "free_parameter_count": spectrum.free_parameter_count,
                "resonances": spectrum.resonances,
                "invariance_defect": defect,
                "ode_defect": ode_defect,
            }
        )
    return {"families": entries}


def _levels(run: _Run) -> dict[str, Any]:
    entries = []
    for family in run.families:
        reduction = divisor.impose_levels(family, run.system.invariants, run.levels)
        run.check(not reduction.degenerate, "level equations are all constant on this family")
        run.check(len(reduction.relations) == 1, f"expected one relation, found {len(reduction.relations)}")
        run.reductions.append(reduction)
        entries.append(reduction.to_json())
    return {"reductions": entries}


def _dynamics(run: _Run) -> dict[str, Any]:
    tolerances = run.config.tolerances
    rng = np.random.default_rng(run.config.seed)
    x0 = rng.uniform(-1.0, 1.0, run.system.dimension) * DYNAMICS_SCALE ** np.asarray(run.weights, dtype=float)
    trajectory = dynamics.integrate(
        run.system, x0, run.config.t_end, run.config.step, drift_tolerance=tolerances.drift, weights=run.weights
    )
    run.check(not trajectory.flagged, f"invariant drift {trajectory.max_drift:.3g} exceeds {tolerances.drift:g}")
    run.check(not trajectory.truncated, f"trajectory blew up near t={trajectory.blow_up_time}", Severity.WARNING)
    order = dynamics.estimate_order(run.system, x0, 2.0, 0.25)
    run.check(order >= 4, f"empirical integrator order {order:.2f} is below 4", Severity.WARNING)
    header = ["t"] + [f"{v}_{p}" for v in run.system.phase_variables for p in ("re", "im")]
    header += [f"drift_{n}" for n in run.system.invariant_names]
    run.report.tables["trajectory"] = (header, trajectory.to_rows())

    data: dict[str, Any] = {"x0": x0.tolist(), "trajectory": trajectory.to_json(), "empirical_order": order}
    if run.families:
        family = run.families[0]
        point = rng.uniform(-0.5, 0.5, len(family.parameters))
        seed = dynamics.seed_cross_check(run.system, family, point, tol=tolerances.seed_agreement)
        run.check(seed["passed"], f"Laurent seed and integrator disagree ({seed['relative_error']:.3g})")
        data["seed_check"] = {"point": point.tolist(), **seed}
    return data


# ---------------------------------------------------------------------------
# Henon-Heiles
# ---------------------------------------------------------------------------


def _hh_divisor(run: _Run) -> dict[str, Any]:
    """Eliminated relation, its fit from samples, and the comparison with the printed curve.

    The printed octic does not follow from the series; only its shape (beta^2
    against an even octic in alpha) is required and coefficient differences
    are reported as warnings.
    """
    tolerances = run.config.tolerances
    a, b = (str(run.system.parameters[k]) for k in ("a", "b"))
    printed = henon_heiles_curve(a, b, *run.printed_levels())
    reduction = run.reductions[0]
    relation = reduction.relation
    data: dict[str, Any] = {"printed": str(printed)}
    derived = None
    if relation.exact and (0, 2) in relation.terms:
        derived = divisor.normalize_relation(relation, (0, 2))
        data["eliminated_relation"] = str(derived)
        run.check(
            divisor.is_even_hyperelliptic(derived, 8),
            f"eliminated level relation {derived} is not beta^2 = P8(alpha) with P8 even",
        )
        difference = derived - printed
        data["printed_difference"] = str(difference)
        powers = sorted({k[0] for k in difference.terms}, reverse=True)
        run.check(
            difference.is_zero(),
            f"eliminated relation differs from the printed curve at alpha powers {powers}",
            Severity.WARNING,
        )
    else:
        run.check(False, "eliminated level relation is not exact in beta^2")

    samples = divisor.sample_level_set(reduction, run.config.samples, seed=run.config.seed, tolerances=tolerances)
    fitted = divisor.fit_curve(samples, 8, ("alpha", "beta"), tolerances=tolerances)
    run.check(fitted.exact, "fitted relation did not rationalize")
    if derived is not None:
        run.check(fitted.relation == derived, "fitted relation differs from the eliminated one")
        membership = divisor.verify_membership(derived, samples)
        run.check(membership <= tolerances.membership, f"eliminated relation misses the samples by {membership:.3g}")
        data["membership"] = membership
    printed_membership = divisor.verify_membership(printed, samples)
    run.check(
        printed_membership <= tolerances.membership,
        f"printed curve misses the samples by {printed_membership:.3g}",
        Severity.WARNING,
    )
    run.curve = fitted.relation if fitted.exact else derived
    rows = np.vstack([s.coordinates(("alpha", "beta")) for s in samples])
    run.report.tables["divisor_samples"] = _complex_columns(("alpha", "beta"), rows)
    data.update({"fit": fitted.to_json(), "printed_membership": printed_membership, "samples": len(samples)})
    return data


def _hh_periods(run: _Run) -> dict[str, Any]:
    assert run.curve is not None
    polynomial = divisor.solve_for_square(run.curve, "beta")
    model = riemann.HyperellipticModel.from_polynomial(polynomial)
    run.basis = riemann.DifferentialBasis.from_exponents(
        run.system.metadata["differential_exponents"], "alpha", "beta"
    )
    cover = run.system.metadata["cover"]
    expected = riemann.hurwitz_genus(cover["g0"], cover["n"])
    run.check(model.genus == expected, f"curve has genus {model.genus}, the cover predicts {expected}")
    run.periods, cycles = riemann.period_matrix(model, run.basis, bilinear_tol=run.config.tolerances.bilinear)
    z = run.periods.riemann_matrix()
    return {
        "model": model.to_json(),
        "cycles": cycles.to_json(),
        "periods": run.periods.to_json(),
        "riemann_matrix": [_pairs(row) for row in z],
    }


def _hh_prym(run: _Run) -> dict[str, Any]:
    assert run.periods is not None and run.basis is not None and run.curve is not None
    tolerances = run.config.tolerances
    action = run.system.metadata["involution"]
    involution = prym.involution_on_homology(
        run.periods, run.basis.involution_signs(), variable_action=action, tol=tolerances.involution
    )
    cover = run.system.metadata["cover"]
    run.check(
        (involution.g0, involution.n) == (cover["g0"], cover["n"]),
        f"involution gives (g0, n) = ({involution.g0}, {involution.n}), expected ({cover['g0']}, {cover['n']})",
    )
    g0, n = involution.g0, involution.n
    adapted = prym.adapt_basis(involution, run.periods)
    split = prym.split_periods(adapted, g0, n, tol=tolerances.block)
    run.canonical = prym.canonical_form(split.gamma, g0, n, tol=tolerances.symmetry)
    dual = prym.canonical_form(split.gamma_star, g0, n, dual=True, tol=tolerances.symmetry)
    count = prym.lattice_intersection_count(split.gamma, split.delta, adapted.omega, g0)
    run.check(count == 4**g0, f"sub-tori meet in {count} points, expected {4 ** g0}")
    run.check(
        np.array_equal(split.gamma[:, :g0], 2 * split.gamma_star[:, :g0]),
        "Gamma and Gamma* do not differ by the factor 2 columns",
    )

    quotient = divisor.quotient_curve(run.curve, action)
    base = riemann.HyperellipticModel.from_polynomial(divisor.solve_for_square(quotient, "beta"))
    cross = prym.elliptic_cross_check(split, base)
    run.check(cross["equivalent"], "period ratio of Delta is not SL(2,Z)-equivalent to that of the quotient")
    return {
        "involution": involution.to_json(),
        "adapted": adapted.to_json(),
        "block_residuals": prym.block_residuals(adapted.omega, g0, n),
        "split": split.to_json(),
        "canonical_form": run.canonical.to_json(),
        "dual_canonical_form": dual.to_json(),
        "polarization_type": list(run.canonical.polarization_type),
        "intersection_count": count,
        "elliptic_cross_check": cross,
    }


def _polarization(run: _Run) -> dict[str, Any]:
    """Type of the base divisor and of its double, checked against the genus ledger.

    For Clebsch the base divisor is the genus-3 curve C of the quotient
    cover C -> C0; the genus-9 divisor is its double.
    """
    metadata = run.system.metadata
    cover = metadata.get("quotient_cover", metadata["cover"])
    ledger = riemann.CoverData(cover["g0"], cover["n"])
    kind = prym.polarization_from_divisor(ledger.genus)
    expected = tuple(sorted(prym.prym_polarization(ledger.g0, ledger.n)))
    run.check(kind == expected, f"divisor genus gives type {kind}, the cover gives {expected}")
    if run.canonical is not None:
        run.check(
            tuple(run.canonical.polarization_type) == kind,
            f"canonical form gives type {run.canonical.polarization_type}, divisor genus gives {kind}",
        )
    doubled_genus = prym.multiple_divisor_genus(ledger.genus, 2)
    doubled = prym.polarization_from_divisor(doubled_genus, base=kind)
    run.check(doubled == prym.scale_polarization(kind, 2), f"doubled divisor has type {doubled}, expected twice {kind}")
    data: dict[str, Any] = {
        "cover": ledger.to_json(),
        "divisor_genus": ledger.genus,
        "polarization": list(kind),
        "doubled_divisor": {
            "genus": doubled_genus,
            "polarization": list(doubled),
            "projective_dimension": prym.embedding_space_dimension(doubled),
        },
    }

    if run.system.name == "kowalewski":
        component = metadata["component_genus"]
        run.check(ledger.genus == component, f"Hurwitz genus {ledger.genus} != component genus {component}")
        union = riemann.nodal_union_genus([component, component], metadata["component_intersections"])
        run.check(union == doubled_genus, f"two-component divisor has genus {union}, expected {doubled_genus}")
        data["union_genus"] = union
    if run.system.name == "clebsch":
        outer = riemann.CoverData(metadata["cover"]["g0"], metadata["cover"]["n"])
        unramified = riemann.unramified_cover_genus(metadata["quotient_genus"], metadata["unramified_sheets"])
        run.check(outer.genus == unramified, f"Hurwitz genus {outer.genus} != unramified count {unramified}")
        run.check(outer.genus == doubled_genus, f"divisor genus {outer.genus}, doubled divisor has {doubled_genus}")
        data["unramified_genus"] = unramified

    functions = metadata.get("embedding_functions")
    if functions is not None:
        run.check(
            len(functions) == int(np.prod(doubled)),
            f"{len(functions)} embedding functions, expected {int(np.prod(doubled))}",
        )
    return data


# ---------------------------------------------------------------------------
# Kowalewski
# ---------------------------------------------------------------------------


KOWALEWSKI_BASIS = (4, 2)


def _kowalewski_divisor(run: _Run) -> dict[str, Any]:
    tolerances = run.config.tolerances
    names = tuple(run.system.metadata["divisor_variables"])
    c1, c2, _, c4 = run.printed_levels()
    printed = {eps: kowalewski_curve(eps, c1, c2, c4) for eps in (1, -1)}
    entries = []
    matched: set[int] = set()
    for index, reduction in enumerate(run.reductions):
        samples = divisor.sample_level_set(
            reduction, run.config.samples, seed=run.config.seed + index, tolerances=tolerances
        )
        fitted = divisor.fit_curve(
            samples,
            divisor.bidegree_basis(KOWALEWSKI_BASIS),
            names,
            normalize_by=KOWALEWSKI_BASIS,
            tolerances=tolerances,
        )
        residuals = {eps: divisor.verify_membership(curve, samples) for eps, curve in printed.items()}
        epsilon = min(residuals, key=residuals.get)
        run.check(
            residuals[epsilon] <= tolerances.membership,
            f"family {index + 1}: printed curve misses the samples by {residuals[epsilon]:.3g}",
        )
        matched.add(epsilon)
        rows = np.vstack([s.coordinates(names) for s in samples])
        run.report.tables[f"divisor_samples_{index + 1}"] = _complex_columns(names, rows)
        entries.append(
            {"fit": fitted.to_json(), "epsilon": epsilon, "printed_membership": residuals[epsilon]}
        )
    run.check(matched == {1, -1}, f"families match curve signs {sorted(matched)}, expected both")

    quotient = divisor.quotient_curve(printed[1], {names[0]: -1})
    elliptic = divisor.quadratic_discriminant(quotient, "zeta")
    try:
        model = riemann.HyperellipticModel.from_polynomial(elliptic)
        base = {"polynomial": str(elliptic), "genus": model.genus}
        run.check(model.genus == 1, f"discriminant model has genus {model.genus}, expected 1")
    except WorkbenchError as exc:
        base = {"polynomial": str(elliptic), "error": str(exc)}
        run.check(False, f"discriminant model: {exc}")
    return {"components": entries, "discriminant_model": base}


# ---------------------------------------------------------------------------
# Clebsch
# ---------------------------------------------------------------------------


def _proportionality(a: Sequence[complex], b: Sequence[complex]) -> float:
    """Sine of the angle between two complex vectors: zero when one is a multiple of the other."""
    u, v = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 1.0
    return float(np.sqrt(max(0.0, 1.0 - abs(np.vdot(u, v)) ** 2 / (nu * nv) ** 2)))


def _continuum_levels(run: _Run) -> dict[str, Any]:
    """Divisor samples of each family, moving its base point along the continuum of balances."""
    needed = 2 * len(divisor.CLEBSCH_DIVISOR_BASIS)
    entries = []
    for index, family in enumerate(run.families):
        if not run.check(family.balance.on_continuum, f"family {index + 1} is not over a curved continuum"):
            continue
        samples = divisor.sample_continuum_level_set(
            run.system,
            family,
            run.levels,
            run.config.samples,
            seed=run.config.seed + index,
            tolerances=run.config.tolerances,
        )
        run.check(len(samples) >= needed, f"family {index + 1}: {len(samples)} divisor samples, need {needed}")
        sheets = divisor.sheet_counts(samples, divisor.chart_parameter(family))
        most = max(sheets, default=0)
        run.check(
            most <= 2,
            f"family {index + 1}: up to {most} level-set points over one base point, expected 2",
            Severity.WARNING,
        )
        run.level_sets.append(samples)
        entries.append({"samples": len(samples), "points_per_base_point": {str(k): v for k, v in sheets.items()}})
    return {"level_sets": entries}


def _clebsch_divisor(run: _Run) -> dict[str, Any]:
    """Fit E and D through the level-set samples, then test the chain built from the fit.

    The base coordinates are the leading coefficients x^(0) of (l1, l2, l3),
    brought to the normal form of E; theta is whichever x^(1) coordinate
    satisfies a relation of the divisor's shape. The configured (d1^2, d2^2)
    and the levels are compared with the fit as warnings, the levels only up
    to a common factor and the sign of c4.
    """
    tolerances = run.config.tolerances
    metadata = run.system.metadata
    base_names = [divisor.coefficient_name(v, 0) for v in metadata["base_variables"]]
    theta_names = [divisor.coefficient_name(v, 1) for v in run.system.phase_variables]
    printed = divisor.clebsch_curves(replace(run.system, levels=run.levels))
    configured_d = np.asarray([to_complex(d) for d in printed.d_squared])
    configured_c = np.asarray([to_complex(c) for c in printed.coefficients])
    expected = metadata["branch_points_over_base"]
    cover = metadata["cover"]
    entries = []
    for index, samples in enumerate(run.level_sets):
        label = f"family {index + 1}"
        raw = np.vstack([s.coordinates(base_names) for s in samples])
        base = divisor.fit_elliptic_base(raw, tolerances=tolerances)
        normal = base.normalize(raw)
        thetas = np.vstack([s.coordinates(theta_names) for s in samples])
        column, fitted = divisor.fit_clebsch_divisor(normal, thetas, tolerances=tolerances)
        coefficients = divisor.divisor_coefficients(fitted.relation)
        curves = divisor.clebsch_chain(coefficients, base.d_squared)

        rows = np.column_stack([normal, thetas[:, column], normal[:, 0] ** 2, np.zeros(len(samples))])
        eta = CompiledPolys([curves.eta])
        rows[:, 5] = [eta(r)[0] for r in rows]
        checks = {
            "divisor": curves.divisor,
            "base_1": curves.base[0],
            "base_2": curves.base[1],
            "genus_three": curves.genus_three,
            "quotient": curves.quotient,
        }
        residuals = {name: relative_membership(poly, rows) for name, poly in checks.items()}
        for name, value in residuals.items():
            run.check(value <= tolerances.membership, f"{label}: {name} curve misses the samples by {value:.3g}")
        run.report.tables[f"divisor_samples_{index + 1}"] = _complex_columns(divisor.CLEBSCH_VARIABLES, rows)

        branch = divisor.clebsch_branch_points(curves)
        run.check(len(branch) == expected, f"{label}: {len(branch)} branch points over E, expected {expected}")
        run.check(
            2 * cover["n"] == len(branch),
            f"{label}: {len(branch)} branch points do not match the cover with n={cover['n']}",
        )

        d_error = float(np.abs(np.asarray(base.d_squared) - configured_d).max())
        run.check(
            d_error <= 1e-6 * max(1.0, float(np.abs(configured_d).max())),
            f"{label}: fitted (d1^2, d2^2) differ from the configured ones by {d_error:.3g}",
            Severity.WARNING,
        )
        flipped = np.asarray(coefficients) * np.asarray([1, 1, 1, -1])
        angle = min(_proportionality(coefficients, configured_c), _proportionality(flipped, configured_c))
        run.check(
            angle <= 1e-6,
            f"{label}: fitted divisor coefficients are not proportional to the levels ({angle:.3g})",
            Severity.WARNING,
        )
        entries.append(
            {
                "base": base.to_json(),
                "theta": theta_names[column],
                "fit": fitted.to_json(),
                "membership": residuals,
                "branch_points": [_pairs(p) for p in branch],
                "level_proportionality": angle,
            }
        )

    quotient_cover = metadata["quotient_cover"]
    quotient_genus = riemann.hurwitz_genus(quotient_cover["g0"], quotient_cover["n"])
    run.check(quotient_genus == metadata["quotient_genus"], "quotient genus ledger fails")
    return {"components": entries, "quotient_genus": quotient_genus}


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

Stage = Callable[[_Run], dict[str, Any]]

COMMON_STAGES: list[tuple[str, Stage]] = [
    ("weights", _weights),
    ("balances", _balances),
    ("spectrum", _spectrum),
    ("families", _families),
]

SYSTEM_STAGES: dict[str, list[tuple[str, Stage]]] = {
    "henon-heiles": [
        ("levels", _levels),
        ("divisor", _hh_divisor),
        ("periods", _hh_periods),
        ("prym", _hh_prym),
        ("polarization", _polarization),
        ("dynamics", _dynamics),
    ],
    "kowalewski": [
        ("levels", _levels),
        ("divisor", _kowalewski_divisor),
        ("polarization", _polarization),
        ("dynamics", _dynamics),
    ],
    "clebsch": [
        ("levels", _continuum_levels),
        ("divisor", _clebsch_divisor),
        ("polarization", _polarization),
        ("dynamics", _dynamics),
    ],
}


def _execute(report: PipelineReport, run: _Run | None, stages: Sequence[tuple[str, Stage]]) -> None:
    failed = False
    for name, stage in stages:
        if failed or run is None:
            report.stages.append(StageResult(name, "skipped"))
            continue
        run.stage = name
        before = report.error_count
        try:
            data = stage(run)
        except (WorkbenchError, ValueError) as exc:
            logger.error("%s: stage %s failed: %s", report.system, name, exc)
            report.issues.append(StageIssue(name, str(exc)))
            report.stages.append(StageResult(name, "failed"))
            failed = True
            continue
        status = "passed" if report.error_count == before else "failed"
        failed = status == "failed"
        report.stages.append(StageResult(name, status, data))
        logger.info("%s: stage %s %s", report.system, name, status)


def run_pipeline(system: str, config: PipelineConfig | None = None) -> PipelineReport:
    """Run every stage for a registry system and collect the results.

    A stage that raises or fails a check is recorded as an ERROR issue and
    the stages after it are skipped.
    """
    config = config or PipelineConfig(system=system)
    report = PipelineReport(system=system, config=config.to_dict())
    stages = COMMON_STAGES + SYSTEM_STAGES.get(system, [])
    run = None
    try:
        built = get_system(system, config.params)
        run = _Run(built, config, report)
    except WorkbenchError as exc:
        report.issues.append(StageIssue("system", str(exc)))
    _execute(report, run, stages)
    return report


# ---------------------------------------------------------------------------
# Single-purpose runs used by the CLI
# ---------------------------------------------------------------------------


def run_periods(
    polynomial: MultiPoly, exponents: Sequence[int] | None = None, tolerances: Tolerances | None = None
) -> tuple[PipelineReport, riemann.PeriodMatrix | None]:
    """Period matrix of y^2 = P for a univariate P as a one-stage report."""
    report = PipelineReport(system="curve")
    holder: dict[str, Any] = {}

    def stage(run: _Run) -> dict[str, Any]:
        model = riemann.HyperellipticModel.from_polynomial(polynomial)
        variable = polynomial.variables[0]
        basis = (
            riemann.DifferentialBasis.from_exponents(exponents, variable)
            if exponents is not None
            else riemann.DifferentialBasis.standard(model.genus, variable)
        )
        bilinear = tolerances.bilinear if tolerances is not None else 1e-9
        periods, cycles = riemann.period_matrix(model, basis, bilinear_tol=bilinear)
        holder["periods"] = periods
        return {
            "model": model.to_json(),
            "exponents": list(basis.exponents),
            "cycles": cycles.to_json(),
            "periods": periods.to_json(),
        }

    _execute(report, _bare_run(report), [("periods", stage)])
    return report, holder.get("periods")


def _bare_run(report: PipelineReport) -> _Run:
    return _Run(system=None, config=PipelineConfig(system=report.system), report=report)  # type: ignore[arg-type]


def run_prym(
    periods: riemann.PeriodMatrix,
    signs: Sequence[int],
    variable_action: dict[str, int] | None = None,
) -> PipelineReport:
    """Involution, adapted basis, split and canonical form for a stored period matrix."""
    report = PipelineReport(system="periods")

    def stage(run: _Run) -> dict[str, Any]:
        involution = prym.involution_on_homology(periods, signs, variable_action=variable_action)
        g0, n = involution.g0, involution.n
        adapted = prym.adapt_basis(involution, periods)
        split = prym.split_periods(adapted, g0, n)
        data: dict[str, Any] = {
            "involution": involution.to_json(),
            "adapted": adapted.to_json(),
            "split": split.to_json(),
            "intersection_count": prym.lattice_intersection_count(split.gamma, split.delta, adapted.omega, g0),
        }
        if split.prym_dimension:
            form = prym.canonical_form(split.gamma, g0, n)
            data["canonical_form"] = form.to_json()
            data["polarization_type"] = list(form.polarization_type)
            data["dual_canonical_form"] = prym.canonical_form(split.gamma_star, g0, n, dual=True).to_json()
        return data

    _execute(report, _bare_run(report), [("prym", stage)])
    return report


def run_fit(
    rows: np.ndarray,
    variables: Sequence[str],
    basis: int | Sequence[tuple[int, ...]],
    tolerances: Tolerances | None = None,
) -> PipelineReport:
    """Fit a relation through sampled points read from a CSV side file."""
    report = PipelineReport(system="samples")

    def stage(run: _Run) -> dict[str, Any]:
        kwargs = {"tolerances": tolerances} if tolerances is not None else {}
        fitted = divisor.fit_curve(rows, basis, variables, **kwargs)
        return {"fit": fitted.to_json(), "samples": int(rows.shape[0])}

    _execute(report, _bare_run(report), [("fit", stage)])
    return report


def run_integrate(
    system_name: str, x0: Sequence[complex], t_end: float, step: float, params: dict[str, Any] | None = None
) -> PipelineReport:
    """Integrate a registry system from x0 and monitor its invariants."""
    report = PipelineReport(system=system_name)

    def stage(run: _Run) -> dict[str, Any]:
        system = get_system(system_name, params)
        trajectory = dynamics.integrate(system, x0, t_end, step)
        run.check(
            not trajectory.flagged,
            f"invariant drift {trajectory.max_drift:.3g} exceeds {trajectory.drift_tolerance:g}",
        )
        header = ["t"] + [f"{v}_{p}" for v in system.phase_variables for p in ("re", "im")]
        header += [f"drift_{n}" for n in system.invariant_names]
        report.tables["trajectory"] = (header, trajectory.to_rows())
        return {"x0": _pairs(np.asarray(x0, dtype=complex)), "trajectory": trajectory.to_json()}

    _execute(report, _bare_run(report), [("integrate", stage)])
    return report


def parse_involution(text: str, exponents: Sequence[int] | None) -> tuple[list[int], dict[str, int]]:
    """'alpha=-1' (needs differential exponents) or 'signs=-1,-1,1'."""
    key, _, value = text.partition("=")
    key = key.strip()
    if not value:
        raise CurveError(f"involution {text!r} must look like 'x=-1' or 'signs=-1,1'")
    if key == "signs":
        try:
            return [int(v) for v in value.split(",")], {}
        except ValueError as exc:
            raise CurveError(f"bad sign list {value!r}") from exc
    if value.strip() != "-1":
        raise CurveError(f"only the reflection {key}=-1 is supported")
    if exponents is None:
        raise CurveError("a variable reflection needs the differential exponents of the period matrix")
    basis = riemann.DifferentialBasis.from_exponents(exponents, key)
    return basis.involution_signs().tolist(), {key: -1}


def scalar_list(text: str) -> list[complex]:
    """Parse '0.1,0.2,1+2j' into complex numbers."""
    try:
        return [complex(part.replace(" ", "")) for part in text.split(",")]
    except ValueError as exc:
        raise CurveError(f"cannot parse numbers from {text!r}") from exc
