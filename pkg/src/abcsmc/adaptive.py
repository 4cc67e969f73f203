"""The self-calibrated SMC sampler.

The scheme has two stages.  Initialization repeatedly adds prior-predictive
batches of ``n`` particles, keeping the best ``n``, until either the
particle cloud has concentrated (determinant of its parameter variance
fell below ``shrink_factor`` times the first batch's) or the realized
tolerance already beats the target, in which case the whole scheme stops
right there.  Each sequential iteration then co-calibrates the survivor
fraction ``alpha`` and the move probability ``rho`` on a 1/grid lattice:
proposals are generated incrementally while ``alpha`` grows, and every
cached proposal is re-judged against each candidate tolerance at zero
simulation cost, stopping at the smallest ``alpha`` with
``alpha + rho >= 1``.  The cached proposals then double as the first
block of kernel moves, so an iteration costs exactly ``n`` simulations:
``floor(alpha*n)`` during calibration plus ``n - floor(alpha*n)`` fresh
ones after resampling.  The run stops once the estimated move
probability drops to ``rho_stop``, and a final rejection step trims the
output to the target tolerance when possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import ess_of_thetas
from .errors import BudgetExceededError, DegenerateArrayError
from .model import ModelSpec, ParticleArray, distance, simulate
from .resampling import residual_resample
from .rng import RngKey, StreamCursor
from .samplers import _draw_proposal, prior_predictive, proposal_factor, proposal_scale
from .trace import IterationRecord, RunTrace, SimCounter

PHASE_INIT = "init"
PHASE_ITERATION = "iteration"

# top-level stream channels of a run
_CH_INIT = 0
_CH_ITER = 1
# sub-channels within one iteration
_SUB_CALIBRATE = 0
_SUB_RESAMPLE = 1
_SUB_FRESH = 2

DEFAULT_ALPHA_GRID = 100  # candidate alphas are a/grid for a = 1..grid


@dataclass
class InitResult:
    """Output of the initialization stage.

    ``array`` holds the ``n`` smallest-distance particles among all
    ``batches_used * n`` simulated, sorted ascending by distance, and
    ``epsilon0`` is its worst distance.  ``terminal`` is true when the
    stage already reached the target tolerance, in which case ``array``
    is the final output of the whole scheme.
    """

    array: ParticleArray
    epsilon0: float
    batches_used: int
    v_prior: float
    v_final: float
    terminal: bool


@dataclass
class CalibrationOutcome:
    """Result of the alpha/rho co-calibration, including the cached
    proposals (one per survivor slot) that the iteration reuses as its
    first block of kernel moves."""

    alpha: float
    epsilon: float
    rho_hat: float
    n_block: int
    prop_thetas: np.ndarray
    prop_zs: np.ndarray
    prop_dists: np.ndarray
    prop_in_box: np.ndarray


def _det_var(thetas: np.ndarray) -> float:
    """Determinant of the unbiased empirical covariance of parameter rows."""
    return float(np.linalg.det(np.atleast_2d(np.cov(thetas, rowvar=False, ddof=1))))


def init_stage(
    model: ModelSpec,
    n: int,
    epsilon_target: float,
    key: RngKey,
    shrink_factor: float = 0.5,
    max_batches: int = 10_000,
    counter: SimCounter | None = None,
) -> InitResult:
    """Prior-predictive warm start that decides whether to run at all.

    Batch K is drawn from streams ``key.child(K)``.  After each batch the
    pooled particles are sorted, ``v_K`` is the variance determinant of
    the best ``n`` parameter vectors, and the realized tolerance is their
    worst distance.  The loop runs while that tolerance is still at or
    above the target and ``v_K >= shrink_factor * v_1``; at least one
    pass always runs, so at least two batches are simulated.
    """
    if n < 2:
        raise ValueError("need at least two particles")
    if not np.isfinite(epsilon_target) or epsilon_target < 0:
        raise ValueError("target tolerance must be finite and non-negative")
    if not 0.0 < shrink_factor:
        raise ValueError("shrink factor must be positive")
    if max_batches < 2:
        raise ValueError("batch cap must allow at least two batches")
    counter = counter if counter is not None else SimCounter()

    pool = prior_predictive(model, n, key.child(1), counter, PHASE_INIT).sorted_by_dist()
    v1 = _det_var(pool.thetas)
    if v1 <= 0.0:
        raise DegenerateArrayError(
            "first prior-predictive batch has a singular parameter variance"
        )
    k = 1
    vk = v1
    eps0 = np.inf
    while eps0 >= epsilon_target and vk >= shrink_factor * v1:
        k += 1
        if k > max_batches:
            partial = InitResult(
                array=pool.take(np.arange(n)),
                epsilon0=float(pool.dists[n - 1]),
                batches_used=k - 1,
                v_prior=v1,
                v_final=vk,
                terminal=False,
            )
            raise BudgetExceededError(
                f"initialization did not converge within {max_batches} batches",
                partial=partial,
            )
        batch = prior_predictive(model, n, key.child(k), counter, PHASE_INIT)
        pool = ParticleArray(
            np.concatenate([pool.thetas, batch.thetas]),
            np.concatenate([pool.zs, batch.zs]),
            np.concatenate([pool.dists, batch.dists]),
        ).sorted_by_dist()
        vk = _det_var(pool.thetas[:n])
        eps0 = float(pool.dists[n - 1])

    return InitResult(
        array=pool.take(np.arange(n)),
        epsilon0=eps0,
        batches_used=k,
        v_prior=v1,
        v_final=vk,
        terminal=bool(eps0 < epsilon_target),
    )


def calibrate_alpha(
    sorted_array: ParticleArray,
    sigma: np.ndarray,
    model: ModelSpec,
    key: RngKey,
    counter: SimCounter | None = None,
    phase: str = PHASE_ITERATION,
    grid: int = DEFAULT_ALPHA_GRID,
) -> CalibrationOutcome:
    """Find the smallest survivor fraction with ``alpha + rho >= 1``.

    Walks ``alpha`` up the 1/grid lattice.  Each step sets the candidate
    tolerance to the ``floor(alpha*n)``-th order statistic of the input
    distances, draws proposals only for the newly covered slots (one
    Gaussian step from the slot's particle plus one simulation each,
    stream ``key.child(i)`` for slot i), and recounts *all* cached
    proposals against the candidate tolerance, since an accept decision
    is free to revise once the proposal exists.  Consumes exactly
    ``floor(alpha*n)`` simulations.  Grid points covering zero slots
    (possible when ``n < grid``) carry no tolerance and are skipped.
    """
    n = len(sorted_array)
    if n < 2:
        raise ValueError("need at least two particles")
    if np.any(np.diff(sorted_array.dists) < 0):
        raise ValueError("input array must be sorted ascending by distance")
    if grid < 1:
        raise ValueError("alpha grid must have at least one point")
    counter = counter if counter is not None else SimCounter()
    factor = proposal_factor(sigma)

    prop_thetas = np.empty((n, model.param_dim))
    prop_zs = np.empty((n, model.summary_dim))
    prop_dists = np.empty(n)
    prop_in_box = np.zeros(n, dtype=bool)
    keys = key.slot_keys(n)
    cursor = StreamCursor()

    a = 0
    hi = 0
    eps_prime = float(sorted_array.dists[-1])
    n_move = 0
    while True:
        a += 1
        new_hi = (a * n) // grid
        if new_hi == 0:
            continue
        eps_prime = float(sorted_array.dists[new_hi - 1])
        for i in range(hi, new_hi):
            g = cursor.seek(keys[i])
            theta_star = _draw_proposal(sorted_array.thetas[i], factor, g)
            z_star = simulate(model, theta_star, g, counter, phase)
            prop_thetas[i] = theta_star
            prop_zs[i] = z_star
            prop_dists[i] = distance(model, z_star)
            prop_in_box[i] = model.in_box(theta_star)
        hi = new_hi
        n_move = int(
            np.count_nonzero(prop_in_box[:hi] & (prop_dists[:hi] <= eps_prime))
        )
        # a/grid + n_move/hi >= 1, tested in exact integer arithmetic
        if a * hi + n_move * grid >= grid * hi:
            break

    return CalibrationOutcome(
        alpha=a / grid,
        epsilon=eps_prime,
        rho_hat=n_move / hi,
        n_block=hi,
        prop_thetas=prop_thetas[:hi].copy(),
        prop_zs=prop_zs[:hi].copy(),
        prop_dists=prop_dists[:hi].copy(),
        prop_in_box=prop_in_box[:hi].copy(),
    )


def smc_iteration(
    array: ParticleArray,
    sigma: np.ndarray,
    model: ModelSpec,
    key: RngKey,
    t: int,
    counter: SimCounter | None = None,
    literal_first_block: bool = False,
    grid: int = DEFAULT_ALPHA_GRID,
    phase: str = PHASE_ITERATION,
) -> tuple[ParticleArray, IterationRecord]:
    """One calibrated iteration; costs exactly ``len(array)`` simulations.

    After calibration, the first ``floor(alpha*n)`` output slots are the
    survivors (their own first resampling copy, by the resampler's
    layout guarantee), each replaced by its cached proposal when that
    proposal is in the box and within the calibrated tolerance.  The
    remaining slots resample a survivor and try one fresh kernel move at
    the same proposal scale, keeping the resampled source on rejection.

    ``literal_first_block`` switches the first-block accept test to the
    current particle's distance instead of the proposal's.  Since every
    survivor already satisfies the calibrated tolerance, that reading
    accepts on the box test alone and can let over-tolerance proposals
    into the output; it exists for comparison runs only.
    """
    n = len(array)
    counter = counter if counter is not None else SimCounter()
    sims_before = counter.total
    srt = array.sorted_by_dist()

    cal = calibrate_alpha(
        srt, sigma, model, key.child(_SUB_CALIBRATE), counter, phase, grid
    )
    m = cal.n_block
    eps_t = cal.epsilon
    if literal_first_block:
        accept = cal.prop_in_box
    else:
        accept = cal.prop_in_box & (cal.prop_dists <= eps_t)

    head_thetas = srt.thetas[:m].copy()
    head_zs = srt.zs[:m].copy()
    head_dists = srt.dists[:m].copy()
    idx = np.flatnonzero(accept)
    head_thetas[idx] = cal.prop_thetas[idx]
    head_zs[idx] = cal.prop_zs[idx]
    head_dists[idx] = cal.prop_dists[idx]

    plan = residual_resample(
        np.full(m, 1.0 / m), n, key.child(_SUB_RESAMPLE).generator()
    )
    if not np.array_equal(plan.assignment[:m], np.arange(m)):
        raise AssertionError("resampling lost its leading-copy layout")
    tail_src = plan.assignment[m:]
    tail_thetas = srt.thetas[tail_src].copy()
    tail_zs = srt.zs[tail_src].copy()
    tail_dists = srt.dists[tail_src].copy()

    factor = proposal_factor(sigma)
    fresh_keys = key.child(_SUB_FRESH).slot_keys(n)
    cursor = StreamCursor()
    for j in range(m, n):
        g = cursor.seek(fresh_keys[j])
        theta_star = _draw_proposal(tail_thetas[j - m], factor, g)
        z_star = simulate(model, theta_star, g, counter, phase)
        d_star = distance(model, z_star)
        if model.in_box(theta_star) and d_star <= eps_t:
            tail_thetas[j - m] = theta_star
            tail_zs[j - m] = z_star
            tail_dists[j - m] = d_star

    new_array = ParticleArray(
        np.concatenate([head_thetas, tail_thetas]),
        np.concatenate([head_zs, tail_zs]),
        np.concatenate([head_dists, tail_dists]),
    )
    record = IterationRecord(
        t=t,
        epsilon=eps_t,
        alpha=cal.alpha,
        rho_hat=cal.rho_hat,
        sims_used=counter.total - sims_before,
        distinct_count=new_array.distinct_count(),
        ess=ess_of_thetas(new_array.thetas),
    )
    return new_array, record


def run_self_calibrated(
    model: ModelSpec,
    n: int,
    epsilon_target: float,
    key: RngKey,
    rho_stop: float = 0.1,
    shrink_factor: float = 0.5,
    max_iters: int = 200,
    max_init_batches: int = 10_000,
    counter: SimCounter | None = None,
    literal_first_block: bool = False,
    grid: int = DEFAULT_ALPHA_GRID,
) -> tuple[ParticleArray, RunTrace]:
    """Full pipeline: initialization, calibrated iterations, final trim.

    Iterations stop at the first estimated move probability at or below
    ``rho_stop``, or once the calibrated tolerance reaches the target,
    or at ``max_iters``.  Post-processing keeps the particles within the
    target tolerance when any exist (zero extra simulations); otherwise
    the full array is returned at its achieved tolerance and the trace
    carries ``target_reached=False``.  The trace's ``stop_iter`` is the
    iteration whose move probability tripped the stop rule, 0 when the
    run ended at initialization, and None when another rule ended it.

    Reproducibility: every simulation's stream is derived from ``key``
    plus the (stage, iteration, slot) coordinates, never from execution
    order, so results are bit-identical for any worker count.
    """
    if not 0.0 < rho_stop <= 1.0:
        raise ValueError("rho_stop must be in (0, 1]")
    if max_iters < 0:
        raise ValueError("max_iters must be non-negative")
    counter = counter if counter is not None else SimCounter()
    init_before = counter.count(PHASE_INIT)
    iter_before = counter.count(PHASE_ITERATION)

    trace = RunTrace(
        config={
            "sampler": "self-calibrated",
            "model": model.name,
            "n": n,
            "epsilon_target": epsilon_target,
            "rho_stop": rho_stop,
            "shrink_factor": shrink_factor,
            "max_iters": max_iters,
            "max_init_batches": max_init_batches,
            "literal_first_block": literal_first_block,
            "alpha_grid": grid,
        }
    )

    init = init_stage(
        model, n, epsilon_target, key.child(_CH_INIT),
        shrink_factor, max_init_batches, counter,
    )
    trace.init = {
        "batches_used": init.batches_used,
        "epsilon0": init.epsilon0,
        "v_prior": init.v_prior,
        "v_final": init.v_final,
        "terminal": init.terminal,
        "ess": ess_of_thetas(init.array.thetas),
    }

    current = init.array
    eps_last = init.epsilon0
    rho_last = 1.0  # before any iteration, every resampled copy counts as movable
    t = 0
    stop_iter: int | None = None

    if init.terminal:
        stop_iter = 0
    else:
        while t < max_iters:
            if rho_last <= rho_stop:
                stop_iter = t
                break
            if eps_last <= epsilon_target:
                break
            t += 1
            sigma = proposal_scale(current.thetas)
            current, record = smc_iteration(
                current, sigma, model, key.child(_CH_ITER, t), t,
                counter, literal_first_block, grid,
            )
            if record.sims_used != n:
                raise AssertionError(
                    f"iteration {t} used {record.sims_used} simulations, expected {n}"
                )
            if not literal_first_block and record.epsilon > eps_last:
                raise AssertionError(
                    f"tolerance increased at iteration {t}: "
                    f"{eps_last} -> {record.epsilon}"
                )
            trace.iterations.append(record)
            rho_last = record.rho_hat
            eps_last = record.epsilon

    init_used = counter.count(PHASE_INIT) - init_before
    iter_used = counter.count(PHASE_ITERATION) - iter_before
    if init_used != init.batches_used * n or iter_used != n * len(trace.iterations):
        raise AssertionError(
            "simulation budget identity violated: "
            f"init {init_used} != {init.batches_used}*{n} or "
            f"iterations {iter_used} != {len(trace.iterations)}*{n}"
        )

    final = current.sorted_by_dist()
    k = int(np.searchsorted(final.dists, epsilon_target, side="right"))
    if k > 0:
        final = final.take(np.arange(k))
        trace.target_reached = True
        trace.final_epsilon = float(min(eps_last, epsilon_target))
    else:
        trace.target_reached = False
        trace.final_epsilon = float(eps_last)

    trace.stop_iter = stop_iter
    trace.n_final = len(final)
    trace.final_ess = ess_of_thetas(final.thetas)
    trace.sim_counts = counter.snapshot()
    return final, trace
