"""Exponential Duhamel time stepping for the remainder equation.

One step advances v by

    v_{k+1} = e^{-i dt Lap} v_k
              - i (dt/2) [ e^{-i dt Lap} N(t_k) + N(t_{k+1}) ]
              + [ R(t_{k+1}) - e^{-i dt Lap} R(t_k) ]

with N = rho^2 |v|^2 + (rho conj(v))(rho Psi) + (rho v) conj(rho Psi) evaluated
pointwise in physical space, R = rho^2 <I Psi^2> (cutoff applied before the
propagator), and the implicit endpoint resolved by Picard iteration from the
initial guess e^{-i dt Lap} v_k.  Residuals are successive-iterate distances in
the discrete H^{-s} norm.

Loss of regularity (norm above BLOWUP_NORM, or non-finite values) is a
first-class outcome: solve() returns the partial trajectory and a failure
record, never crashes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import (
    CutoffRho,
    Field,
    GridError,
    SpectralGrid,
    bessel_weight,
    propagator_phase,
    two_thirds_mask,
)
from .reference import PaperParams
from .stochastic import StochasticPath

BLOWUP_NORM = 1e8


@dataclass
class StepFailure(Exception):
    """A time step could not be accepted."""

    kind: str  # "picard" or "blowup"
    time: float
    step_index: int
    residual: float
    iterations: int

    def __str__(self) -> str:
        return (
            f"{self.kind} failure at t = {self.time:.6g} (step {self.step_index}): "
            f"residual {self.residual:.3e} after {self.iterations} iterations"
        )


@dataclass
class SolverConfig:
    params: PaperParams
    rho: CutoffRho | None
    phi: Field | None = None
    dt: float = 0.5 / 256
    T: float = 0.5
    picard_tol: float = 1e-10
    picard_max: int = 50
    dealias: bool = True
    mode: str = "step-local"  # or "global"
    forcing: Callable[[float], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise GridError(f"dt must be > 0, got {self.dt}")
        if not 0 < self.T <= 1.0:
            raise GridError(f"T must lie in (0, 1], got {self.T}")
        if self.picard_max < 1:
            raise GridError("picard_max must be >= 1")
        if self.mode not in ("step-local", "global"):
            raise GridError(f"unknown solver mode {self.mode!r}")


@dataclass
class StepInputs:
    """Stochastic data for one step [t_k, t_{k+1}], already localized.

    rho_psi_*: physical-space values of rho * Psi; r_hat_*: frequency-space
    transforms of rho^2 * <I Psi^2>.
    """

    rho_psi_prev: np.ndarray
    rho_psi_next: np.ndarray
    r_hat_prev: np.ndarray
    r_hat_next: np.ndarray
    forcing_prev: np.ndarray | None = None
    forcing_next: np.ndarray | None = None


@dataclass
class PicardRecord:
    iterations: int
    residual: float
    history: list[float]

    @property
    def monotone_after_second(self) -> bool:
        tail = self.history[1:]
        return all(b <= a for a, b in zip(tail, tail[1:]))


@dataclass
class SolverOutput:
    config: SolverConfig
    times: np.ndarray
    v: list[Field]
    u: list[Field]
    picard_iterations: np.ndarray
    residuals: np.ndarray
    monotone_flags: np.ndarray
    trace_h: np.ndarray
    trace_wq: np.ndarray
    trace_localized: np.ndarray
    y_norms: dict[str, float]
    failure: StepFailure | None = None

    @property
    def completed(self) -> bool:
        return self.failure is None


def quadratic_nonlinearity(v: Field, rho: CutoffRho | None, dealias: bool = False) -> Field:
    """rho^2 |v|^2 as a physical-space field, optionally 2/3-rule dealiased."""
    if v.space != "physical":
        raise GridError("quadratic_nonlinearity expects a physical-space field")
    grid = v.grid
    if rho is None:
        return Field(grid, np.zeros(grid.shape), "physical")
    w = rho.evaluate(grid) * v.values
    prod = np.abs(w) ** 2
    if dealias:
        prod = grid.inverse_values(two_thirds_mask(grid) * grid.forward_values(prod))
    return Field(grid, prod, "physical")


def cross_nonlinearity(
    v: Field, rho_psi: Field, rho: CutoffRho | None, dealias: bool = False
) -> Field:
    """(rho conj v)(rho Psi) + (rho v) conj(rho Psi); rho_psi is already localized."""
    if v.space != "physical" or rho_psi.space != "physical":
        raise GridError("cross_nonlinearity expects physical-space fields")
    grid = v.grid
    if rho is None:
        return Field(grid, np.zeros(grid.shape), "physical")
    w = rho.evaluate(grid) * v.values
    prod = 2.0 * np.real(np.conj(w) * rho_psi.values)
    if dealias:
        prod = grid.inverse_values(two_thirds_mask(grid) * grid.forward_values(prod))
    return Field(grid, prod, "physical")


def _nonlinearity_values(
    grid: SpectralGrid,
    v_hat: np.ndarray,
    rho_vals: np.ndarray | None,
    rho_psi_phys: np.ndarray | None,
    forcing: np.ndarray | None,
    dealias_mask: np.ndarray | None,
) -> np.ndarray:
    """Transform of N(v) + forcing; batched over leading axes of v_hat."""
    total = None
    if rho_vals is not None:
        w = rho_vals * grid.inverse_values(v_hat)
        total = np.abs(w) ** 2
        if rho_psi_phys is not None:
            total = total + 2.0 * np.real(np.conj(w) * rho_psi_phys)
    if forcing is not None:
        total = forcing if total is None else total + forcing
    if total is None:
        return np.zeros(np.shape(v_hat), dtype=np.complex128)
    n_hat = grid.forward_values(total)
    if dealias_mask is not None:
        n_hat = n_hat * dealias_mask
    return n_hat


def _h_norm(grid: SpectralGrid, v_hat: np.ndarray, weight: np.ndarray) -> np.ndarray:
    axes = tuple(range(-grid.d, 0))
    # overflow to inf is fine here: it is exactly what the blow-up check looks for
    with np.errstate(over="ignore", invalid="ignore"):
        return np.sqrt(np.sum(weight * np.abs(v_hat) ** 2, axis=axes) / grid.L**grid.d)


def step_values(
    grid: SpectralGrid,
    v_hat: np.ndarray,
    inputs: StepInputs,
    dt: float,
    s: float,
    rho_vals: np.ndarray | None,
    picard_tol: float,
    picard_max: int,
    dealias_mask: np.ndarray | None,
    t_next: float,
    step_index: int,
    collect_history: bool = False,
    strict: bool = True,
):
    """One Picard-resolved Duhamel step on raw arrays (leading batch axes allowed).

    Returns (v_next, iterations, residuals, monotone_ok, history, failed).
    In batched mode iteration continues until every healthy member's residual
    clears picard_tol.  With strict=True any failure raises StepFailure; with
    strict=False failed members are zeroed and flagged in the returned mask so
    ensemble studies can exclude them and keep going.
    """
    phase = propagator_phase(grid, dt)
    h_weight = bessel_weight(grid, -2.0 * s)
    n_prev = _nonlinearity_values(
        grid, v_hat, rho_vals, inputs.rho_psi_prev, inputs.forcing_prev, dealias_mask
    )
    fixed = (
        phase * v_hat
        + (-0.5j * dt) * phase * n_prev
        + (inputs.r_hat_next - phase * inputs.r_hat_prev)
    )
    v_iter = phase * v_hat
    batch_shape = np.shape(v_hat)[: np.ndim(v_hat) - grid.d]
    failed = np.zeros(batch_shape, dtype=bool)
    residuals = np.zeros(batch_shape)
    history: list[float] = []
    monotone_ok = True
    iterations = 0
    for m in range(1, picard_max + 1):
        n_next = _nonlinearity_values(
            grid, v_iter, rho_vals, inputs.rho_psi_next, inputs.forcing_next, dealias_mask
        )
        v_new = fixed + (-0.5j * dt) * n_next
        residuals = _h_norm(grid, v_new - v_iter, h_weight)
        failed = failed | ~np.isfinite(residuals)
        if strict and failed.any():
            raise StepFailure("blowup", t_next, step_index, float("nan"), m)
        healthy = residuals[~failed]
        worst = float(np.max(healthy)) if healthy.size else 0.0
        if collect_history:
            history.append(worst)
            if len(history) >= 3 and history[-1] > history[-2]:
                monotone_ok = False
        v_iter = v_new
        iterations = m
        if worst <= picard_tol:
            break
    else:
        if strict:
            raise StepFailure(
                "picard", t_next, step_index, float(np.max(residuals)), iterations
            )
        failed = failed | (residuals > picard_tol)
    norms = _h_norm(grid, v_iter, h_weight)
    big = ~np.isfinite(norms) | (norms > BLOWUP_NORM)
    if strict and big.any():
        raise StepFailure(
            "blowup", t_next, step_index, float(np.max(residuals)), iterations
        )
    failed = failed | big
    if failed.any():
        v_iter = np.where(failed.reshape(failed.shape + (1,) * grid.d), 0.0, v_iter)
    return v_iter, iterations, residuals, monotone_ok, history, failed


def gamma_step(
    v_k: Field, inputs: StepInputs, config: SolverConfig, t_next: float, step_index: int = 0
) -> tuple[Field, PicardRecord]:
    """Public one-step map; raises StepFailure on Picard non-convergence or blow-up."""
    if v_k.space != "frequency":
        raise GridError("gamma_step expects a frequency-space remainder field")
    grid = v_k.grid
    rho_vals = None if config.rho is None else config.rho.evaluate(grid)
    dealias_mask = two_thirds_mask(grid) if config.dealias else None
    v_next, iters, _, _, hist, _ = step_values(
        grid,
        v_k.values,
        inputs,
        config.dt,
        config.params.s,
        rho_vals,
        config.picard_tol,
        config.picard_max,
        dealias_mask,
        t_next,
        step_index,
        collect_history=True,
    )
    return Field(grid, v_next, "frequency"), PicardRecord(iters, hist[-1], hist)


def _path_step_inputs(
    grid: SpectralGrid,
    path: StochasticPath,
    rho_vals: np.ndarray | None,
    config: SolverConfig,
    k: int,
) -> StepInputs:
    if rho_vals is None:
        zero_p = np.zeros(grid.shape)
        zero_f = np.zeros(grid.shape, dtype=np.complex128)
        rp_prev = rp_next = zero_p
        r_prev = r_next = zero_f
    else:
        rho2 = rho_vals * rho_vals
        rp_prev = rho_vals * grid.inverse_values(path.psi[k].values)
        rp_next = rho_vals * grid.inverse_values(path.psi[k + 1].values)
        r_prev = grid.forward_values(rho2 * grid.inverse_values(path.ipsi2[k].values))
        r_next = grid.forward_values(rho2 * grid.inverse_values(path.ipsi2[k + 1].values))
    f_prev = f_next = None
    if config.forcing is not None:
        f_prev = config.forcing(float(path.times[k]))
        f_next = config.forcing(float(path.times[k + 1]))
    return StepInputs(rp_prev, rp_next, r_prev, r_next, f_prev, f_next)


def _make_traces(
    grid: SpectralGrid, params: PaperParams, rho_vals: np.ndarray | None
) -> Callable[[np.ndarray], tuple[float, float, float]]:
    s, eta = params.s, params.eta
    q = params.pair[1]
    w_h = bessel_weight(grid, -2.0 * s)
    w_q = bessel_weight(grid, -s)
    w_loc = bessel_weight(grid, -s + eta)

    def traces(v_hat: np.ndarray) -> tuple[float, float, float]:
        h = float(_h_norm(grid, v_hat, w_h))
        g = grid.inverse_values(w_q * v_hat)
        wq = float((grid.cell_volume * np.sum(np.abs(g) ** q)) ** (1.0 / q))
        if rho_vals is None:
            loc = 0.0
        else:
            gl = grid.inverse_values(w_loc * v_hat)
            loc = float(np.sqrt(grid.cell_volume * np.sum(np.abs(rho_vals * gl) ** 2)))
        return h, wq, loc

    return traces


def _y_summary(
    times: np.ndarray,
    trace_h: np.ndarray,
    trace_wq: np.ndarray,
    trace_loc: np.ndarray,
    params: PaperParams,
) -> dict[str, float]:
    """Y(T) norms from traces; L^p-in-time by left-endpoint quadrature."""
    k = len(trace_h)
    dt = np.diff(times[:k])
    p = params.pair[0]
    sup_h = float(np.max(trace_h)) if k else float("nan")
    if not np.isfinite(p):
        lp_wq = float(np.max(trace_wq)) if k else float("nan")
    else:
        lp_wq = float(np.sum(dt * trace_wq[:-1] ** p) ** (1.0 / p)) if k > 1 else 0.0
    inv_eta = 1.0 / params.eta
    l_loc = float(np.sum(dt * trace_loc[:-1] ** inv_eta) ** params.eta) if k > 1 else 0.0
    return {"sup_H_minus_s": sup_h, "Lp_W_minus_s_q": lp_wq, "Leta_localized": l_loc}


def solve(config: SolverConfig, path: StochasticPath) -> SolverOutput:
    """March gamma_step over the path's time grid and assemble u = v + Psi."""
    grid = path.grid
    times = path.times
    steps = len(times) - 1
    if abs(float(times[-1]) - config.T) > 1e-12 or abs(float(times[1] - times[0]) - config.dt) > 1e-12:
        raise GridError("config (dt, T) must match the path time grid")
    if config.phi is not None and config.phi.grid != grid:
        raise GridError("phi lives on a different grid than the path")
    rho_vals = None if config.rho is None else config.rho.evaluate(grid)

    if config.mode == "global":
        return _solve_global(config, path, rho_vals)

    phi_hat = (
        grid.zeros()
        if config.phi is None
        else (config.phi.values if config.phi.space == "frequency" else grid.forward_values(config.phi.values))
    )
    traces = _make_traces(grid, config.params, rho_vals)
    dealias_mask = two_thirds_mask(grid) if config.dealias else None

    v_hats = [phi_hat.copy()]
    iters = np.zeros(steps, dtype=int)
    residuals = np.full(steps, np.nan)
    monotone = np.ones(steps, dtype=bool)
    failure: StepFailure | None = None
    for k in range(steps):
        inputs = _path_step_inputs(grid, path, rho_vals, config, k)
        try:
            v_next, it, res, mono, hist, _ = step_values(
                grid,
                v_hats[-1],
                inputs,
                float(times[k + 1] - times[k]),
                config.params.s,
                rho_vals,
                config.picard_tol,
                config.picard_max,
                dealias_mask,
                float(times[k + 1]),
                k,
                collect_history=True,
            )
        except StepFailure as exc:
            failure = exc
            break
        v_hats.append(v_next)
        iters[k] = it
        residuals[k] = float(np.max(res))
        monotone[k] = mono

    done = len(v_hats)
    trace_triplets = [traces(vh) for vh in v_hats]
    trace_h = np.array([t[0] for t in trace_triplets])
    trace_wq = np.array([t[1] for t in trace_triplets])
    trace_loc = np.array([t[2] for t in trace_triplets])
    v_fields = [Field(grid, vh, "frequency") for vh in v_hats]
    u_fields = [
        Field(grid, vh + path.psi[k].values, "frequency") for k, vh in enumerate(v_hats)
    ]
    return SolverOutput(
        config=config,
        times=times[:done],
        v=v_fields,
        u=u_fields,
        picard_iterations=iters[: done - 1],
        residuals=residuals[: done - 1],
        monotone_flags=monotone[: done - 1],
        trace_h=trace_h,
        trace_wq=trace_wq,
        trace_localized=trace_loc,
        y_norms=_y_summary(times, trace_h, trace_wq, trace_loc, config.params),
        failure=failure,
    )


def _solve_global(
    config: SolverConfig, path: StochasticPath, rho_vals: np.ndarray | None
) -> SolverOutput:
    """Whole-trajectory fixed-point iteration of the contraction map."""
    grid = path.grid
    times = path.times
    steps = len(times) - 1
    params = config.params
    traces = _make_traces(grid, params, rho_vals)
    dealias_mask = two_thirds_mask(grid) if config.dealias else None
    phi_hat = (
        grid.zeros()
        if config.phi is None
        else (config.phi.values if config.phi.space == "frequency" else grid.forward_values(config.phi.values))
    )
    free = [phi_hat.copy()]
    for k in range(steps):
        free.append(propagator_phase(grid, float(times[k + 1] - times[k])) * free[-1])
    r_hats = [
        (
            grid.zeros()
            if rho_vals is None
            else grid.forward_values(
                rho_vals * rho_vals * grid.inverse_values(path.ipsi2[k].values)
            )
        )
        for k in range(steps + 1)
    ]
    rho_psis = [
        (None if rho_vals is None else rho_vals * grid.inverse_values(path.psi[k].values))
        for k in range(steps + 1)
    ]
    forc = [
        (config.forcing(float(t)) if config.forcing is not None else None) for t in times
    ]

    current = [free[k] + r_hats[k] for k in range(steps + 1)]
    iterations = 0
    distance = np.inf
    for m in range(1, config.picard_max + 1):
        n_hats = [
            _nonlinearity_values(grid, current[k], rho_vals, rho_psis[k], forc[k], dealias_mask)
            for k in range(steps + 1)
        ]
        duhamel = grid.zeros()
        new = [free[0] + r_hats[0]]
        for k in range(steps):
            dt = float(times[k + 1] - times[k])
            phase = propagator_phase(grid, dt)
            duhamel = phase * duhamel + (-0.5j * dt) * (phase * n_hats[k] + n_hats[k + 1])
            new.append(free[k + 1] + duhamel + r_hats[k + 1])
        diffs = [traces(new[k] - current[k]) for k in range(steps + 1)]
        dh = np.array([d[0] for d in diffs])
        dq = np.array([d[1] for d in diffs])
        dl = np.array([d[2] for d in diffs])
        y = _y_summary(times, dh, dq, dl, params)
        distance = y["sup_H_minus_s"] + y["Lp_W_minus_s_q"] + y["Leta_localized"]
        current = new
        iterations = m
        if not np.isfinite(distance):
            break
        if distance <= config.picard_tol:
            break

    failure = None
    if not np.isfinite(distance) or distance > config.picard_tol:
        failure = StepFailure(
            "blowup" if not np.isfinite(distance) else "picard",
            float(times[-1]),
            steps - 1,
            float(distance),
            iterations,
        )
    trace_triplets = [traces(vh) for vh in current]
    trace_h = np.array([t[0] for t in trace_triplets])
    trace_wq = np.array([t[1] for t in trace_triplets])
    trace_loc = np.array([t[2] for t in trace_triplets])
    return SolverOutput(
        config=config,
        times=times,
        v=[Field(grid, vh, "frequency") for vh in current],
        u=[Field(grid, vh + path.psi[k].values, "frequency") for k, vh in enumerate(current)],
        picard_iterations=np.full(steps, iterations, dtype=int),
        residuals=np.full(steps, distance),
        monotone_flags=np.ones(steps, dtype=bool),
        trace_h=trace_h,
        trace_wq=trace_wq,
        trace_localized=trace_loc,
        y_norms=_y_summary(times, trace_h, trace_wq, trace_loc, params),
        failure=failure,
    )
