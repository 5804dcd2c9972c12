"""Ensemble studies: covariance agreement, divergence and Cauchy rates, Hoelder
moduli, the multilinear-smoothing ladder, and coupled solver convergence.

Every verdict cites its tolerance and every estimate carries a Monte Carlo
standard error.  Rate verdicts test exponents, never constants.  Wherever a
difference of truncations appears, realizations are coupled through a shared
noise stream for variance reduction.

Estimating the renormalization growth exponent: c_n behaves like A n^{d-2alpha} + B
with an order-one B at desk-scale n, which contaminates a plain least-squares
log-log slope (measured ~0.48 for d=1, alpha=0.3 on the ladder 8..128 against the
true 0.4).  The dyadic-increment slope, fitted to log(c_{2n} - c_n), cancels B
and recovers the exponent; both estimators are reported, the increment slope
carries the verdict.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Iterable

import numpy as np

from . import __version__
from .grid import CutoffRho, GridError, SpectralGrid, hs_norm_sq, l2_norm
from .noise import increment_values, mode_increment_variance
from .reference import PaperParams, covariance_oracle, renorm_constant
from .solver import StepInputs, step_values
from .stochastic import PathEnsemble, uniform_times

STUDY_KINDS = (
    "covariance",
    "renorm_rate",
    "cauchy_rate",
    "smoothing",
    "hoelder",
    "solver_convergence",
)

_ONE_SIDED_Z = {0.9: 1.2816, 0.95: 1.6449, 0.975: 1.96, 0.99: 2.3263}


def one_sided_z(confidence: float) -> float:
    try:
        return _ONE_SIDED_Z[round(confidence, 4)]
    except KeyError:
        raise GridError(
            f"confidence {confidence} not in the supported set {sorted(_ONE_SIDED_Z)}"
        ) from None


@dataclass
class RegressionResult:
    slope: float
    stderr: float
    r2: float
    npoints: int


def loglog_ols(n_values: Iterable[float], y_values: Iterable[float]) -> RegressionResult:
    """Ordinary least squares of log(y) against log(n), with slope stderr and R^2."""
    x = np.log(np.asarray(list(n_values), dtype=np.float64))
    y = np.log(np.asarray(list(y_values), dtype=np.float64))
    m = len(x)
    if m < 3:
        raise GridError(f"regression needs >= 3 points, got {m}")
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    stderr = float(np.sqrt(ss_res / (m - 2) / np.dot(xc, xc))) if m > 2 else float("nan")
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RegressionResult(slope, stderr, r2, m)


def increment_slope(n_values: Iterable[float], y_values: Iterable[float]) -> RegressionResult:
    """Slope of log(y_{2n} - y_n) vs log(n): immune to an additive constant in y."""
    n = np.asarray(list(n_values), dtype=np.float64)
    y = np.asarray(list(y_values), dtype=np.float64)
    inc = np.diff(y)
    if np.any(inc <= 0):
        raise GridError("increment slope needs strictly increasing values")
    return loglog_ols(n[:-1], inc)


@dataclass
class Verdict:
    name: str
    passed: bool
    value: float
    tolerance: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: value={self.value:.6g} tolerance[{self.tolerance}]"


@dataclass
class StudyConfig:
    kind: str
    d: int = 1
    alpha: float = 0.3
    eps: float = 0.01
    eta: float | None = None
    L: float = 2.0 * np.pi
    N: int = 256
    T: float = 0.5
    K: int = 256
    n: float = 32.0
    ladder: tuple[float, ...] = (8.0, 16.0, 32.0, 64.0)
    sigmas: tuple[float, ...] = ()
    sigmas_wick: tuple[float, ...] = ()
    lags: tuple[float, ...] = ()
    M: int = 1000
    seed: int = 2024
    confidence: float = 0.95
    chunk: int = 500
    threads: int = 1
    dealias: bool = True
    picard_tol: float = 1e-10
    picard_max: int = 50
    slope_tol: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in STUDY_KINDS:
            raise GridError(f"unknown study kind {self.kind!r}; choose from {STUDY_KINDS}")
        ladder = tuple(float(v) for v in self.ladder)
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise GridError("truncation ladder must be strictly increasing")
        object.__setattr__(self, "ladder", ladder)
        if self.kind != "renorm_rate" and self.M < 100:
            raise GridError("M >= 100 is required for any statistical verdict")
        grid = self.grid()
        if self.kind in ("cauchy_rate", "solver_convergence"):
            top = 2.0 * max(ladder)
        elif self.kind in ("smoothing", "renorm_rate"):
            top = max(ladder)
        else:
            top = self.n
        grid.check_radius(top)

    def grid(self) -> SpectralGrid:
        return SpectralGrid(self.d, self.L, self.N)

    def params(self, n: float | None = None) -> PaperParams:
        return PaperParams(
            d=self.d, alpha=self.alpha, eps=self.eps, n=self.n if n is None else n, eta=self.eta
        )

    def provenance(self) -> dict[str, object]:
        return {
            "package_version": __version__,
            "kind": self.kind,
            "seed": self.seed,
            "d": self.d,
            "alpha": self.alpha,
            "eps": self.eps,
            "L": self.L,
            "N": self.N,
            "T": self.T,
            "K": self.K,
            "n": self.n,
            "ladder": ",".join(repr(v) for v in self.ladder),
            "M": self.M,
            "confidence": self.confidence,
        }


@dataclass
class StudyResult:
    study: str
    config: StudyConfig | None
    columns: list[str]
    rows: list[list[object]]
    slopes: dict[str, RegressionResult] = dc_field(default_factory=dict)
    verdicts: list[Verdict] = dc_field(default_factory=list)
    notes: list[str] = dc_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict_lines(self) -> list[str]:
        return [v.line() for v in self.verdicts]


def default_config(kind: str, **overrides) -> StudyConfig:
    """Per-kind defaults at the scales the acceptance criteria pin."""
    base: dict[str, object] = {"kind": kind}
    if kind == "covariance":
        base.update(M=4000, n=32.0, K=256)
    elif kind == "renorm_rate":
        base.update(M=1, ladder=(8.0, 16.0, 32.0, 64.0, 128.0), N=512)
    elif kind == "cauchy_rate":
        # The Cauchy decay exponent is exactly 2*eps; eps = 0.04 (still inside the
        # parameter window for d=1, alpha=0.3) makes the adjacent-gap test
        # resolvable at the pinned M = 2000.
        base.update(M=2000, eps=0.04, ladder=(8.0, 16.0, 32.0, 64.0), K=1, T=0.5)
    elif kind == "smoothing":
        # dt * max resonance rate = (T/K) * 5 n_max^2 must stay below pi, or the
        # trapezoid aliases the oscillations the gain relies on
        base.update(M=2000, ladder=(8.0, 16.0, 32.0, 64.0, 128.0), T=1.0 / 32.0, K=1024)
    elif kind == "hoelder":
        base.update(M=1000, n=32.0, lags=(0.5 / 32, 0.5 / 16, 0.5 / 8, 0.5 / 4))
    elif kind == "solver_convergence":
        # finer frequency lattice (L = 8 pi): more modes per dyadic shell, which
        # suppresses the small-shell median bias that otherwise masks the decay
        base.update(
            M=200,
            eps=0.045,
            ladder=(8.0, 16.0, 32.0, 64.0),
            T=0.25,
            K=128,
            L=8.0 * np.pi,
            N=1024,
            chunk=100,
        )
    else:
        raise GridError(f"unknown study kind {kind!r}")
    base.update(overrides)
    cfg = StudyConfig(**base)
    if kind == "smoothing" and not cfg.sigmas:
        p = cfg.params()
        object.__setattr__(cfg, "sigmas", (-2 * p.s + p.kappa - 0.05, 0.03))
        object.__setattr__(cfg, "sigmas_wick", (-2 * p.s + 0.1, 0.0))
    return cfg


def run_study(config: StudyConfig) -> StudyResult:
    runner = {
        "covariance": run_covariance_study,
        "renorm_rate": lambda c: run_rate_study("renorm_rate", c),
        "cauchy_rate": lambda c: run_rate_study("cauchy_rate", c),
        "smoothing": run_smoothing_study,
        "hoelder": run_hoelder_study,
        "solver_convergence": run_solver_convergence_study,
    }[config.kind]
    return runner(config)


# ---------------------------------------------------------------------------
# chunked ensemble execution
# ---------------------------------------------------------------------------

def _chunk_ranges(M: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, M)) for lo in range(0, M, chunk)]


def _map_chunks(config: StudyConfig, fn) -> list[object]:
    """Run fn(lo, hi) over member ranges; merge in index order for determinism."""
    ranges = _chunk_ranges(config.M, config.chunk)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(lambda r: fn(*r), ranges))
    return [fn(lo, hi) for lo, hi in ranges]


class MeanAccumulator:
    """Streaming mean and standard error for a vector of statistics."""

    def __init__(self, width: int) -> None:
        self.count = 0
        self.total = np.zeros(width)
        self.total_sq = np.zeros(width)

    def add(self, block: np.ndarray) -> None:
        block = np.asarray(block)
        if block.ndim != 2:
            raise GridError("MeanAccumulator expects (members, width) blocks")
        self.count += block.shape[0]
        self.total += block.sum(axis=0)
        self.total_sq += (block**2).sum(axis=0)

    @property
    def mean(self) -> np.ndarray:
        return self.total / self.count

    @property
    def stderr(self) -> np.ndarray:
        m = self.mean
        var = (self.total_sq - self.count * m**2) / (self.count - 1)
        return np.sqrt(np.maximum(var, 0.0) / self.count)


# ---------------------------------------------------------------------------
# white-noise identity
# ---------------------------------------------------------------------------

def white_noise_variance_check(
    grid: SpectralGrid,
    dt: float,
    M: int,
    seed: int,
    test_functions: list[np.ndarray],
    rel_tol: float = 0.05,
) -> StudyResult:
    """Var[<increment, f>] against dt * ||f||_{L2}^2 for each test function."""
    pairings = np.zeros((M, len(test_functions)))
    vol = grid.cell_volume
    for m in range(M):
        inc = increment_values(grid, dt, seed, m, 0)
        for j, f in enumerate(test_functions):
            pairings[m, j] = vol * float(np.sum(f * inc))
    rows: list[list[object]] = []
    verdicts: list[Verdict] = []
    for j, f in enumerate(test_functions):
        target = dt * l2_norm(grid, f) ** 2
        est = float(np.var(pairings[:, j], ddof=1))
        rel = abs(est - target) / target
        rows.append([j, target, est, rel])
        verdicts.append(
            Verdict(
                name=f"white_noise_variance_f{j}",
                passed=rel <= rel_tol,
                value=rel,
                tolerance=f"relative error <= {rel_tol} at M={M}",
            )
        )
    return StudyResult(
        study="white_noise",
        config=None,
        columns=["function", "dt_l2_sq", "empirical_var", "rel_error"],
        rows=rows,
        verdicts=verdicts,
    )


# ---------------------------------------------------------------------------
# covariance study
# ---------------------------------------------------------------------------

def run_covariance_study(config: StudyConfig) -> StudyResult:
    grid = config.grid()
    alpha, n = config.alpha, config.n
    times = uniform_times(config.T, config.K)
    probe_ks = [config.K // 4, config.K // 2, config.K]
    probe_times = [float(times[k]) for k in probe_ks]
    base_idx = grid.N // 3
    shifts = [0, grid.N // 8, grid.N // 4]

    n_probe = len(probe_ks)
    width = n_probe * n_probe * len(shifts)
    acc = {
        name: MeanAccumulator(width)
        for name in ("conj_re", "conj_im", "plain_re", "plain_im")
    }

    def chunk(lo: int, hi: int) -> dict[str, np.ndarray]:
        ens = PathEnsemble(
            grid, alpha, [n], times, seed=config.seed, size=hi - lo, stream_offset=lo
        )
        snaps = {}
        if 0 in probe_ks:
            snaps[0] = grid.inverse_values(ens.psi_values(n))
        while ens.k + 1 < len(times):
            ens.advance()
            if ens.k in probe_ks:
                snaps[ens.k] = grid.inverse_values(ens.psi_values(n))
        out = {name: [] for name in acc}
        base_sel = (base_idx,) * grid.d
        for ks in probe_ks:
            for kt in probe_ks:
                a = snaps[ks][(slice(None),) + base_sel]
                for shift in shifts:
                    yi = (base_idx - shift) % grid.N
                    b = snaps[kt][(slice(None),) + base_sel[:-1] + (yi,)]
                    conj_prod = a * np.conj(b)
                    plain_prod = a * b
                    out["conj_re"].append(conj_prod.real)
                    out["conj_im"].append(conj_prod.imag)
                    out["plain_re"].append(plain_prod.real)
                    out["plain_im"].append(plain_prod.imag)
        return {name: np.stack(vals, axis=-1) for name, vals in out.items()}

    for block in _map_chunks(config, chunk):
        for name in acc:
            acc[name].add(block[name])

    z_bound = 5.0
    rows: list[list[object]] = []
    all_ok = True
    worst = 0.0
    idx = 0
    for ks in probe_ks:
        for kt in probe_ks:
            for shift in shifts:
                s_t, t_t = float(times[ks]), float(times[kt])
                x = np.array([grid.x[base_idx]] * grid.d)
                y = x.copy()
                y[-1] = grid.x[(base_idx - shift) % grid.N]
                oc, op = covariance_oracle(grid, n, alpha, s_t, t_t, x, y)
                zs = []
                for name, target in (
                    ("conj_re", oc.real),
                    ("conj_im", oc.imag),
                    ("plain_re", op.real),
                    ("plain_im", op.imag),
                ):
                    se = float(acc[name].stderr[idx])
                    est = float(acc[name].mean[idx])
                    zs.append(abs(est - target) / se if se > 0 else 0.0)
                z = max(zs)
                worst = max(worst, z)
                ok = z <= z_bound
                all_ok = all_ok and ok
                rows.append(
                    [
                        s_t,
                        t_t,
                        shift * grid.dx,
                        float(acc["conj_re"].mean[idx]),
                        float(acc["conj_im"].mean[idx]),
                        oc.real,
                        oc.imag,
                        float(acc["plain_re"].mean[idx]),
                        float(acc["plain_im"].mean[idx]),
                        op.real,
                        op.imag,
                        z,
                        ok,
                    ]
                )
                idx += 1
    verdict = Verdict(
        name="covariance_within_5_se",
        passed=all_ok,
        value=worst,
        tolerance=f"max |z| <= {z_bound} Monte Carlo standard errors at M={config.M}",
    )
    return StudyResult(
        study="covariance",
        config=config,
        columns=[
            "s_time",
            "t_time",
            "displacement",
            "emp_conj_re",
            "emp_conj_im",
            "oracle_conj_re",
            "oracle_conj_im",
            "emp_plain_re",
            "emp_plain_im",
            "oracle_plain_re",
            "oracle_plain_im",
            "max_z",
            "pass",
        ],
        rows=rows,
        verdicts=[verdict],
        notes=[f"probe times {probe_times}, base x index {base_idx}, shifts {shifts}"],
    )


# ---------------------------------------------------------------------------
# rate studies (renormalization divergence, Cauchy-in-n decay)
# ---------------------------------------------------------------------------

def run_rate_study(kind: str, config: StudyConfig) -> StudyResult:
    if kind == "renorm_rate":
        return _run_renorm_rate(config)
    if kind == "cauchy_rate":
        return _run_cauchy_rate(config)
    raise GridError(f"unknown rate study {kind!r}")


def _run_renorm_rate(config: StudyConfig) -> StudyResult:
    grid = config.grid()
    target = config.d - 2.0 * config.alpha
    c_values = [renorm_constant(grid, n, config.alpha, config.T) for n in config.ladder]
    ols = loglog_ols(config.ladder, c_values)
    inc = increment_slope(config.ladder, c_values)
    rows: list[list[object]] = [
        ["point", n, c, "", ""] for n, c in zip(config.ladder, c_values)
    ]
    rows.append(["slope_increment", "", "", inc.slope, inc.stderr])
    rows.append(["slope_ols", "", "", ols.slope, ols.stderr])
    verdict = Verdict(
        name="renorm_divergence_exponent",
        passed=abs(inc.slope - target) <= config.slope_tol,
        value=inc.slope,
        tolerance=f"dyadic-increment slope within {target} +/- {config.slope_tol}",
    )
    return StudyResult(
        study="renorm_rate",
        config=config,
        columns=["record", "n", "c_n", "slope", "slope_stderr"],
        rows=rows,
        slopes={"increment": inc, "ols": ols},
        verdicts=[verdict],
        notes=[
            "plain OLS slope is contaminated by the additive constant in c_n at "
            "desk-scale n; the increment slope carries the verdict"
        ],
    )


def _run_cauchy_rate(config: StudyConfig) -> StudyResult:
    grid = config.grid()
    params = config.params()
    s = params.s
    rho_vals = CutoffRho.for_grid(grid).evaluate(grid)
    ladder = list(config.ladder)
    radii = sorted({r for n in ladder for r in (n, 2 * n)})
    times = np.array([0.0, config.T])

    acc = MeanAccumulator(len(ladder))
    diff_acc = MeanAccumulator(len(ladder) - 1)

    def chunk(lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        ens = PathEnsemble(
            grid, config.alpha, radii, times, seed=config.seed, size=hi - lo, stream_offset=lo
        )
        ens.run()
        cols = []
        for n in ladder:
            diff_hat = ens.psi_values(2 * n) - ens.psi_values(n)
            loc = rho_vals * grid.inverse_values(diff_hat)
            cols.append(hs_norm_sq(grid, loc, -s))
        block = np.stack(cols, axis=-1)
        return block, block[:, :-1] - block[:, 1:]

    for block, diffs in _map_chunks(config, chunk):
        acc.add(block)
        diff_acc.add(diffs)

    z = one_sided_z(config.confidence)
    rows: list[list[object]] = []
    for j, n in enumerate(ladder):
        rows.append(["point", n, float(acc.mean[j]), float(acc.stderr[j]), ""])
    for j in range(len(ladder) - 1):
        gap = float(diff_acc.mean[j])
        se = float(diff_acc.stderr[j])
        rows.append(["decrement", ladder[j], gap, se, gap > z * se])
    ols = loglog_ols(ladder, acc.mean)
    rows.append(["slope_ols", "", "", ols.slope, ols.stderr])
    monotone = bool(np.all(np.diff(acc.mean) < 0.0))
    slope_neg = ols.slope + z * ols.stderr < 0.0
    verdicts = [
        Verdict(
            name="cauchy_means_strictly_decreasing",
            passed=monotone,
            value=float(np.max(np.diff(acc.mean))),
            tolerance=f"sample means strictly decreasing across the ladder at M={config.M}",
        ),
        Verdict(
            name="cauchy_slope_negative",
            passed=slope_neg,
            value=ols.slope,
            tolerance=f"OLS slope + {z}*stderr < 0 (confidence {config.confidence})",
        ),
    ]
    return StudyResult(
        study="cauchy_rate",
        config=config,
        columns=["record", "n", "value", "stderr", "pass"],
        rows=rows,
        slopes={"ols": ols},
        verdicts=verdicts,
        notes=[f"coupled noise; E||rho(Psi_2n - Psi_n)(T)||^2 in H^{{-s}}, s={s:.4g}"],
    )


# ---------------------------------------------------------------------------
# multilinear smoothing ladder (the centerpiece)
# ---------------------------------------------------------------------------

def run_smoothing_study(config: StudyConfig) -> StudyResult:
    grid = config.grid()
    params = config.params()
    sigmas = list(config.sigmas) or [-2 * params.s + params.kappa - 0.05]
    sigmas_wick = list(config.sigmas_wick) or [-2 * params.s + 0.1]
    rho_vals = CutoffRho.for_grid(grid).evaluate(grid)
    rho2 = rho_vals * rho_vals
    ladder = list(config.ladder)
    times = uniform_times(config.T, config.K)

    width = len(ladder)
    acc_i = {sg: MeanAccumulator(width) for sg in sigmas}
    acc_w = {sg: MeanAccumulator(width) for sg in sigmas_wick}

    def chunk(lo: int, hi: int) -> dict:
        ens = PathEnsemble(
            grid,
            config.alpha,
            ladder,
            times,
            seed=config.seed,
            size=hi - lo,
            stream_offset=lo,
            track_wick=True,
            track_ipsi2=True,
        )
        ens.run()
        out_i = {sg: [] for sg in sigmas}
        out_w = {sg: [] for sg in sigmas_wick}
        for n in ladder:
            wick_loc = rho2 * ens.wick_values(n)
            ipsi2_loc = rho2 * grid.inverse_values(ens.ipsi2[n])
            for sg in sigmas:
                out_i[sg].append(hs_norm_sq(grid, ipsi2_loc, sg))
            for sg in sigmas_wick:
                out_w[sg].append(hs_norm_sq(grid, wick_loc, sg))
        return {
            "i": {sg: np.stack(v, axis=-1) for sg, v in out_i.items()},
            "w": {sg: np.stack(v, axis=-1) for sg, v in out_w.items()},
        }

    for block in _map_chunks(config, chunk):
        for sg in sigmas:
            acc_i[sg].add(block["i"][sg])
        for sg in sigmas_wick:
            acc_w[sg].add(block["w"][sg])

    rows: list[list[object]] = []
    slopes: dict[str, RegressionResult] = {}
    for sg in sigmas:
        for j, n in enumerate(ladder):
            rows.append(["ipsi2", sg, n, float(acc_i[sg].mean[j]), float(acc_i[sg].stderr[j])])
        slopes[f"ipsi2_sigma{sg:.4g}"] = loglog_ols(ladder, acc_i[sg].mean)
    for sg in sigmas_wick:
        for j, n in enumerate(ladder):
            rows.append(["wick", sg, n, float(acc_w[sg].mean[j]), float(acc_w[sg].stderr[j])])
        slopes[f"wick_sigma{sg:.4g}"] = loglog_ols(ladder, acc_w[sg].mean)

    notes = [
        f"kappa = {params.kappa:.4g}, s = {params.s:.4g}; gain probe straddles "
        f"-2s = {-2*params.s:.4g} and -2s+kappa = {-2*params.s+params.kappa:.4g}"
    ]
    if config.d == 1:
        # Exact Wick-pairing expectations (unlocalized), full object and with the
        # lattice zero mode removed: evidence that the gain is present modulo the
        # finite-box resonance atom (the (xi2=0, xi1=beta) pairing has kappa = 0).
        from .secondmoment import ipsi2_norm_sq_expectation

        sg = sigmas[0]
        exact_full = [
            ipsi2_norm_sq_expectation(grid, n, config.alpha, config.T, sg) for n in ladder
        ]
        exact_nodc = [
            ipsi2_norm_sq_expectation(grid, n, config.alpha, config.T, sg, drop_zero_mode=True)
            for n in ladder
        ]
        for j, n in enumerate(ladder):
            rows.append(["exact_ipsi2", sg, n, exact_full[j], 0.0])
            rows.append(["exact_ipsi2_no_zero_mode", sg, n, exact_nodc[j], 0.0])
        slopes["exact_ipsi2"] = loglog_ols(ladder, exact_full)
        slopes["exact_ipsi2_no_zero_mode"] = loglog_ols(ladder, exact_nodc)
        notes.append(
            "exact rows: deterministic pair-sum expectations; the zero-mode-free "
            "series isolates the finite-box resonance atom"
        )
    for name, reg in slopes.items():
        rows.append(["slope", name, "", reg.slope, reg.stderr])

    bounded_slope = slopes[f"ipsi2_sigma{sigmas[0]:.4g}"].slope
    diverging_slope = slopes[f"wick_sigma{sigmas_wick[0]:.4g}"].slope
    verdicts = [
        Verdict(
            name="ipsi2_bounded_at_gain_probe",
            passed=bounded_slope <= 0.05,
            value=bounded_slope,
            tolerance=f"log-log slope <= 0.05 at sigma = {sigmas[0]:.4g} (= -2s+kappa-0.05)",
        ),
        Verdict(
            name="wick_diverging_below_gain",
            passed=diverging_slope >= 0.1,
            value=diverging_slope,
            tolerance=f"log-log slope >= 0.1 at sigma = {sigmas_wick[0]:.4g} (= -2s+0.1)",
        ),
    ]
    return StudyResult(
        study="smoothing",
        config=config,
        columns=["object", "sigma", "n", "mean_sq_norm", "stderr"],
        rows=rows,
        slopes=slopes,
        verdicts=verdicts,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Hoelder-in-time study
# ---------------------------------------------------------------------------

def run_hoelder_study(config: StudyConfig) -> StudyResult:
    grid = config.grid()
    params = config.params()
    s = params.s
    lags = sorted(float(h) for h in config.lags)
    if not lags or lags[0] <= 0:
        raise GridError("hoelder study needs positive lags")
    t0 = config.T / 2.0
    if t0 + lags[-1] > config.T + 1e-12:
        raise GridError("largest lag exceeds T/2 window")
    rho_vals = CutoffRho.for_grid(grid).evaluate(grid)
    times = np.array([0.0, t0] + [t0 + h for h in lags])

    acc = MeanAccumulator(len(lags))
    acc_ctrl = MeanAccumulator(len(lags))
    zero_mode = (0,) * grid.d

    def chunk(lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        ens = PathEnsemble(
            grid, config.alpha, [config.n], times, seed=config.seed, size=hi - lo, stream_offset=lo
        )
        ens.advance()  # reach t0
        base = ens.psi_values(config.n).copy()
        base_zero = base[(slice(None),) + zero_mode].copy()
        cols, ctrl = [], []
        for _ in lags:
            ens.advance()
            diff = ens.psi_values(config.n) - base
            loc = rho_vals * grid.inverse_values(diff)
            cols.append(hs_norm_sq(grid, loc, -s))
            dz = ens.psi[(slice(None),) + zero_mode] - base_zero
            ctrl.append(np.abs(dz) ** 2)
        return np.stack(cols, axis=-1), np.stack(ctrl, axis=-1)

    for block, ctrl in _map_chunks(config, chunk):
        acc.add(block)
        acc_ctrl.add(ctrl)

    z = one_sided_z(config.confidence)
    rows: list[list[object]] = []
    for j, h in enumerate(lags):
        rows.append(["field", h, float(acc.mean[j]), float(acc.stderr[j])])
    for j, h in enumerate(lags):
        rows.append(["control", h, float(acc_ctrl.mean[j]), float(acc_ctrl.stderr[j])])
    reg = loglog_ols(lags, acc.mean)
    reg_ctrl = loglog_ols(lags, acc_ctrl.mean)
    rows.append(["slope", "field", reg.slope, reg.stderr])
    rows.append(["slope", "control", reg_ctrl.slope, reg_ctrl.stderr])
    verdicts = [
        Verdict(
            name="hoelder_slope_positive",
            passed=reg.slope - z * reg.stderr > 0.0,
            value=reg.slope,
            tolerance=f"slope - {z}*stderr > 0 (confidence {config.confidence}) at M={config.M}",
        ),
        Verdict(
            name="brownian_control_slope",
            passed=abs(reg_ctrl.slope - 1.0) <= 0.1,
            value=reg_ctrl.slope,
            tolerance="zero-mode increment variance slope within 1.0 +/- 0.1",
        ),
    ]
    return StudyResult(
        study="hoelder",
        config=config,
        columns=["record", "lag", "value", "stderr"],
        rows=rows,
        slopes={"field": reg, "control": reg_ctrl},
        verdicts=verdicts,
        notes=[f"base time t0 = {t0}, E||rho(Psi(t0+h)-Psi(t0))||^2 in H^{{-s}}, s={s:.4g}"],
    )


# ---------------------------------------------------------------------------
# coupled solver convergence (Theorem-analogue study)
# ---------------------------------------------------------------------------

def run_solver_convergence_study(config: StudyConfig) -> StudyResult:
    grid = config.grid()
    params = config.params()
    s = params.s
    rho = CutoffRho.for_grid(grid)
    rho_vals = rho.evaluate(grid)
    rho2 = rho_vals * rho_vals
    ladder = list(config.ladder)
    radii = sorted({r for n in ladder for r in (n, 2 * n)})
    times = uniform_times(config.T, config.K)
    dealias_mask = None
    if config.dealias:
        from .grid import two_thirds_mask

        dealias_mask = two_thirds_mask(grid)

    per_member: list[np.ndarray] = []
    failed_total = 0

    def solver_inputs(ens: PathEnsemble, r: float) -> tuple[np.ndarray, np.ndarray]:
        rp = rho_vals * grid.inverse_values(ens.psi_values(r))
        rh = grid.forward_values(rho2 * grid.inverse_values(ens.ipsi2[r]))
        return rp, rh

    def chunk(lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        size = hi - lo
        ens = PathEnsemble(
            grid,
            config.alpha,
            radii,
            times,
            seed=config.seed,
            size=size,
            stream_offset=lo,
            track_wick=True,
            track_ipsi2=True,
        )
        v_hat = {r: np.zeros((size,) + grid.shape, dtype=np.complex128) for r in radii}
        prev = {r: solver_inputs(ens, r) for r in radii}
        failed = np.zeros(size, dtype=bool)
        for k in range(config.K):
            dt = float(times[k + 1] - times[k])
            ens.advance()
            for r in radii:
                rp_next, rh_next = solver_inputs(ens, r)
                rp_prev, rh_prev = prev[r]
                inputs = StepInputs(rp_prev, rp_next, rh_prev, rh_next)
                v_hat[r], _, _, _, _, bad = step_values(
                    grid,
                    v_hat[r],
                    inputs,
                    dt,
                    s,
                    rho_vals,
                    config.picard_tol,
                    config.picard_max,
                    dealias_mask,
                    float(times[k + 1]),
                    k,
                    strict=False,
                )
                failed |= bad
                prev[r] = (rp_next, rh_next)
        cols = []
        for n in ladder:
            u_n = v_hat[n] + ens.psi_values(n)
            u_2n = v_hat[2 * n] + ens.psi_values(2 * n)
            loc = rho_vals * grid.inverse_values(u_n - u_2n)
            cols.append(np.sqrt(hs_norm_sq(grid, loc, -s)))
        return np.stack(cols, axis=-1), failed

    blocks = _map_chunks(config, chunk)
    for block, failed in blocks:
        per_member.append(block[~failed])
        failed_total += int(failed.sum())

    samples = np.concatenate(per_member, axis=0)
    medians = np.median(samples, axis=0)
    acc = MeanAccumulator(len(ladder))
    acc.add(samples)

    rows: list[list[object]] = []
    for j, n in enumerate(ladder):
        rows.append(["point", n, float(medians[j]), float(acc.mean[j]), float(acc.stderr[j])])
    decreasing = bool(np.all(np.diff(medians) < 0.0))
    rows.append(["excluded", "", float(failed_total), "", ""])
    verdict = Verdict(
        name="solver_convergence_median_decreasing",
        passed=decreasing and failed_total == 0,
        value=float(np.max(np.diff(medians))) if len(medians) > 1 else float("nan"),
        tolerance=f"median ||chi(u_n - u_2n)(T)||_H^-s strictly decreasing over ladder, M={config.M}",
    )
    return StudyResult(
        study="solver_convergence",
        config=config,
        columns=["record", "n", "median", "mean", "stderr"],
        rows=rows,
        verdicts=[verdict],
        notes=[
            f"coupled solves, chi = rho, excluded realizations: {failed_total}",
            f"s = {s:.4g}, T = {config.T}, K = {config.K}",
        ],
    )


# ---------------------------------------------------------------------------
# Wick centering check (acceptance support; also exercised by unit tests)
# ---------------------------------------------------------------------------

def wick_centering_check(
    config: StudyConfig, probe_ks: list[int] | None = None, z_bound: float = 4.0
) -> StudyResult:
    """Per-cell 4-sigma zero test of the ensemble mean of the Wick square."""
    grid = config.grid()
    times = uniform_times(config.T, config.K)
    probe_ks = probe_ks or [config.K // 4, config.K // 2, 3 * config.K // 4, config.K]
    cells = int(np.prod(grid.shape))
    acc = {k: MeanAccumulator(cells) for k in probe_ks}

    def chunk(lo: int, hi: int) -> dict[int, np.ndarray]:
        ens = PathEnsemble(
            grid, config.alpha, [config.n], times, seed=config.seed, size=hi - lo, stream_offset=lo
        )
        out = {}
        while ens.k + 1 < len(times):
            ens.advance()
            if ens.k in probe_ks:
                out[ens.k] = ens.wick_values(config.n).reshape(hi - lo, cells)
        return out

    for block in _map_chunks(config, chunk):
        for k, vals in block.items():
            acc[k].add(vals)

    rows: list[list[object]] = []
    worst = 0.0
    for k in probe_ks:
        z = np.abs(acc[k].mean) / acc[k].stderr
        worst = max(worst, float(z.max()))
        rows.append([float(times[k]), float(np.abs(acc[k].mean).max()), float(z.max())])
    verdict = Verdict(
        name="wick_mean_zero_4sigma",
        passed=worst <= z_bound,
        value=worst,
        tolerance=f"per-cell |mean|/SE <= {z_bound} at all probed times, M={config.M}",
    )
    return StudyResult(
        study="wick_centering",
        config=config,
        columns=["t", "max_abs_mean", "max_z"],
        rows=rows,
        verdicts=[verdict],
    )
