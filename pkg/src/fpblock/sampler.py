"""Euler-Maruyama sampling of long trajectories into cell-count histograms.

Chains are advanced in lockstep as one (n_chains, dim) array, but every
chain draws noise from its own generator seeded from (seed, chain_id), so
the resulting histogram is bit-identical for a fixed (seed, n_chains) no
matter how the work is chunked or ordered. States that land outside the
grid are retained in the total but binned nowhere, which keeps the density
estimate unbiased on the box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    DivergenceError,
    EmptyHistogramError,
)
from .grids import DensityField, Grid, flat_bin_indices
from .models import ModelSpec

_CHUNK_STEPS = 4096

_DEFAULT_INITIAL = {
    "ring": (0.0, 0.0),
    "rossler": (0.0, -5.0, 0.0),
    "mmo": (-1.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class SamplerConfig:
    """How to run the chains.

    n_samples counts retained post-burn-in states over all chains; it is
    split as evenly as possible, the first n_samples mod n_chains chains
    taking one extra state. safety_factor scales the domain about its
    center into the box whose violation ends the run. on_escape decides
    what a violation means: "error" raises immediately, "restart" puts the
    offending chain back at the initial point with a fresh burn-in and
    keeps going, which is the only workable choice for systems whose
    attractor is not globally stable (noise eventually kicks a chain over
    the basin rim no matter how small dt is). Restarted chains still
    deliver their full sample quota; a run needing more than 64 restarts
    per chain on average is treated as divergent.
    """

    n_samples: int
    dt: float = 0.002
    burn_in: int = 100_000
    n_chains: int = 16
    seed: int = 0
    initial: tuple[float, ...] | None = None
    safety_factor: float = 100.0
    on_escape: str = "error"

    def __post_init__(self):
        if self.n_samples < 0:
            raise ConfigurationError("n_samples cannot be negative")
        if not self.dt > 0.0:
            raise ConfigurationError(f"time step must be positive, got {self.dt}")
        if self.burn_in < 0:
            raise ConfigurationError("burn_in cannot be negative")
        if self.n_chains < 1:
            raise ConfigurationError("need at least one chain")
        if not self.safety_factor >= 1.0:
            raise ConfigurationError("safety_factor must be at least 1")
        if self.on_escape not in ("error", "restart"):
            raise ConfigurationError(
                f"on_escape must be 'error' or 'restart', got {self.on_escape!r}"
            )


@dataclass(frozen=True, eq=False)
class Histogram:
    """Integer cell counts plus the retained-state total behind them.

    restarts reports how many times a chain was sent back to its initial
    point during the run; it is a diagnostic and is not stored when the
    histogram is written to disk.
    """

    grid: Grid
    counts: np.ndarray
    total_retained: int
    restarts: int = 0

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.uint64).ravel()
        if counts.size != self.grid.num_cells:
            raise DimensionError(
                f"{counts.size} counts on a grid of {self.grid.num_cells} cells"
            )
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        if self.total_retained < 0:
            raise ConfigurationError("total_retained cannot be negative")
        if int(counts.sum()) > self.total_retained:
            raise ConfigurationError("more binned counts than retained states")
        if self.restarts < 0:
            raise ConfigurationError("restarts cannot be negative")

    @property
    def in_domain(self) -> int:
        return int(self.counts.sum())


def euler_maruyama_step(
    state: np.ndarray,
    model: ModelSpec,
    dt: float,
    noise: np.ndarray,
    step: int | None = None,
) -> np.ndarray:
    """One explicit step x + f(x) dt + eps sqrt(dt) xi for standard normal xi."""
    state = np.asarray(state, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if state.shape != noise.shape or state.shape[-1] != model.dim:
        raise DimensionError(
            f"state {state.shape} and noise {noise.shape} must both end in {model.dim}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        out = state + model.drift(state) * dt + model.epsilon * np.sqrt(dt) * noise
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite state after step", step=step)
    return out


def _safety_bounds(grid: Grid, factor: float) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array(grid.lo)
    hi = np.array(grid.hi)
    center = 0.5 * (lo + hi)
    half = 0.5 * factor * (hi - lo)
    return center - half, center + half


def _escape_steps(positions, box_lo, box_hi):
    """Per chain, the first step index outside the box, or span if none."""
    bad = ~np.isfinite(positions)
    bad |= (positions < box_lo) | (positions > box_hi)
    bad_any = bad.any(axis=2)
    span = positions.shape[1]
    first = np.where(bad_any.any(axis=1), np.argmax(bad_any, axis=1), span)
    return first.astype(np.int64)


def _check_positions(positions, box_lo, box_hi, first_step):
    """Raise DivergenceError pointing at the first offending chain and step."""
    bad = ~np.isfinite(positions)
    bad |= (positions < box_lo) | (positions > box_hi)
    bad_any = bad.any(axis=2)
    if not bad_any.any():
        return
    chain, step = np.unravel_index(int(np.argmax(bad_any)), bad_any.shape)
    raise DivergenceError(
        f"chain {chain} left the safety box at step {first_step + step}",
        chain=int(chain),
        step=int(first_step + step),
    )


def accumulate_histogram(
    model: ModelSpec, grid: Grid, cfg: SamplerConfig
) -> Histogram:
    """Simulate, discard burn-in, and bin the retained states on the grid."""
    if model.dim != grid.dim:
        raise DimensionError(f"{model.dim}-d model binned on a {grid.dim}-d grid")
    n_chains = cfg.n_chains
    initial = cfg.initial
    if initial is None:
        initial = _DEFAULT_INITIAL.get(model.name, (0.0,) * model.dim)
    if len(initial) != model.dim:
        raise DimensionError(
            f"initial point of length {len(initial)} for a {model.dim}-d model"
        )
    if cfg.n_samples == 0:
        return Histogram(
            grid=grid,
            counts=np.zeros(grid.num_cells, dtype=np.uint64),
            total_retained=0,
        )
    quotas = np.full(n_chains, cfg.n_samples // n_chains, dtype=np.int64)
    quotas[: cfg.n_samples % n_chains] += 1
    rngs = [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, chain))))
        for chain in range(n_chains)
    ]
    initial_point = np.asarray(initial, dtype=float)
    states = np.tile(initial_point, (n_chains, 1))
    box_lo, box_hi = _safety_bounds(grid, cfg.safety_factor)
    amp = model.epsilon * np.sqrt(cfg.dt)
    dt = cfg.dt
    counts = np.zeros(grid.num_cells, dtype=np.int64)

    # Every chain carries its own burn and quota balance, so the binned set
    # never depends on how the run is cut into chunks. Noise is drawn for
    # all chains each chunk whether or not they still owe samples, which
    # pins every chain to one fixed point in its generator stream per step.
    remaining_burn = np.full(n_chains, cfg.burn_in, dtype=np.int64)
    remaining = quotas.copy()
    restarts = 0
    max_restarts = 64 * n_chains
    step_done = 0
    while (remaining > 0).any():
        span = int(min(_CHUNK_STEPS, (remaining_burn + remaining).max()))
        noise = np.stack([rng.standard_normal((span, model.dim)) for rng in rngs])
        positions = np.empty((n_chains, span, model.dim))
        with np.errstate(over="ignore", invalid="ignore"):
            for t in range(span):
                states = states + model.drift(states) * dt + amp * noise[:, t, :]
                positions[:, t, :] = states
        if cfg.on_escape == "error":
            _check_positions(positions, box_lo, box_hi, step_done)
            usable = np.full(n_chains, span, dtype=np.int64)
        else:
            usable = _escape_steps(positions, box_lo, box_hi)
        for chain in range(n_chains):
            seg_start = 0
            esc = int(usable[chain])
            end_state = None
            while True:
                n_ok = esc - seg_start
                burn = int(min(remaining_burn[chain], n_ok))
                take = int(min(remaining[chain], n_ok - burn))
                if take > 0:
                    lo = seg_start + burn
                    flat = flat_bin_indices(grid, positions[chain, lo : lo + take])
                    flat = flat[flat >= 0]
                    if flat.size:
                        counts += np.bincount(flat, minlength=grid.num_cells)
                remaining_burn[chain] -= burn
                remaining[chain] -= take
                if esc >= span:
                    break
                if remaining[chain] <= 0:
                    # Quota already met; park the runaway somewhere finite so
                    # later chunks stay clean. It keeps drawing noise either
                    # way, so the other chains never notice.
                    end_state = initial_point.copy()
                    break
                restarts += 1
                if restarts > max_restarts:
                    raise DivergenceError(
                        f"gave up after {restarts} chain restarts",
                        chain=chain,
                        step=step_done + esc,
                    )
                remaining_burn[chain] = cfg.burn_in
                # Replay the rest of the chunk from the initial point. Noise
                # values stay tied to their global step, so the restarted
                # path does not depend on where chunk boundaries fall.
                cur = initial_point[None, :].copy()
                with np.errstate(over="ignore", invalid="ignore"):
                    for t in range(esc + 1, span):
                        cur = cur + model.drift(cur) * dt + amp * noise[chain, t][None, :]
                        positions[chain, t] = cur[0]
                end_state = cur[0].copy()
                seg_start = esc + 1
                if seg_start >= span:
                    esc = span
                else:
                    esc = seg_start + int(
                        _escape_steps(
                            positions[chain : chain + 1, seg_start:], box_lo, box_hi
                        )[0]
                    )
            if end_state is not None:
                states[chain] = end_state
        step_done += span
    return Histogram(
        grid=grid,
        counts=counts.astype(np.uint64),
        total_retained=cfg.n_samples,
        restarts=restarts,
    )


def histogram_to_density(hist: Histogram) -> DensityField:
    """Counts scaled to a density: counts / (total_retained * h^dim)."""
    if hist.in_domain == 0:
        raise EmptyHistogramError("every retained state fell outside the domain")
    scale = 1.0 / (hist.total_retained * hist.grid.cell_volume)
    return DensityField(hist.grid, hist.counts.astype(float) * scale)


def synthetic_reference(exact: DensityField, zeta: float, seed: int = 0) -> DensityField:
    """Exact field plus iid centered Gaussian noise of standard deviation zeta."""
    if zeta < 0.0:
        raise ConfigurationError("noise level must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    noisy = exact.values + zeta * rng.standard_normal(exact.values.size)
    return DensityField(exact.grid, noisy)
