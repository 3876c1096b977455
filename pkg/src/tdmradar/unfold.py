"""Doppler ambiguity resolution for staggered TDM: alias candidate sets from
the two frame PRIs, their intersection, and the final pick by comparing the
phases of overlapped virtual-array elements, followed by per-TX migration
compensation."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import FramePlan, InvalidParameterError, VirtualArray


class UnsupportedGeometryError(ValueError):
    """The virtual array has no overlapped elements from distinct TXs."""


def fold_velocity(v_true: float, vmax: float) -> float:
    """Reduce a velocity into the unambiguous interval [-vmax, vmax)."""
    if vmax <= 0:
        raise InvalidParameterError("vmax must be positive")
    return float((v_true + vmax) % (2.0 * vmax) - vmax)


@dataclass(frozen=True)
class CandidateSet:
    """Alias hypotheses of one frame: folded velocity plus integer multiples
    of 2*vmax out to order M (M = n_tx//2)."""

    frame_index: int
    folded_mps: float
    vmax_mps: float
    order: int
    candidates: np.ndarray


def crt_candidates(folded: float, vmax: float, n_tx: int,
                   frame_index: int = 0) -> CandidateSet:
    if vmax <= 0:
        raise InvalidParameterError("vmax must be positive")
    if n_tx < 1:
        raise InvalidParameterError("n_tx must be at least 1")
    order = n_tx // 2
    candidates = folded + 2.0 * vmax * np.arange(-order, order + 1, dtype=float)
    return CandidateSet(frame_index=frame_index, folded_mps=float(folded),
                        vmax_mps=float(vmax), order=order, candidates=candidates)


def crt_intersect(set_a: CandidateSet, set_b: CandidateSet,
                  tolerance: float) -> np.ndarray:
    """Midpoints of all candidate pairs agreeing within the tolerance,
    deduplicated and sorted.  An empty result is a valid outcome."""
    if tolerance <= 0:
        raise InvalidParameterError("tolerance must be positive")
    a = set_a.candidates[:, None]
    b = set_b.candidates[None, :]
    close = np.abs(a - b) <= tolerance
    midpoints = ((a + b) / 2.0)[close]
    return np.unique(midpoints)


@dataclass
class VirtualSnapshot:
    """Complex response of every physical (tx, rx) source at one
    range/Doppler cell, ordered by virtual position (co-located sources kept
    separate so the overlap phases remain observable)."""

    values: np.ndarray
    source_tx: np.ndarray
    source_rx: np.ndarray
    source_position: np.ndarray
    cell: tuple
    frame_index: int

    def __post_init__(self) -> None:
        n = self.values.size
        if not (self.source_tx.size == self.source_rx.size == self.source_position.size == n):
            raise InvalidParameterError("snapshot source arrays must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("snapshot values must be finite")


def compensate_tdm_phase(snapshot: VirtualSnapshot, velocity_mps: float,
                         plan: FramePlan, wavelength_m: float) -> VirtualSnapshot:
    """Remove the scheduling-delay migration: the value from TX k is rotated
    by exp(-j*(4*pi/lambda)*v*k*slot_interval); TX 0 is the phase reference."""
    if not np.isfinite(velocity_mps):
        raise InvalidParameterError("velocity must be finite")
    rate = 4.0 * np.pi / wavelength_m * velocity_mps * plan.slot_interval_s
    rotated = snapshot.values * np.exp(-1j * rate * snapshot.source_tx)
    return replace(snapshot, values=rotated)


def _overlap_groups(snapshot: VirtualSnapshot, varray: VirtualArray):
    """Averaging matrices for the two TX groups of every overlapped pair."""
    n_src = snapshot.values.size
    n_pairs = len(varray.overlapped_pairs)
    side_a = np.zeros((n_pairs, n_src))
    side_b = np.zeros((n_pairs, n_src))
    for row, (pos, (tx_a, _), (tx_b, _)) in enumerate(varray.overlapped_pairs):
        for side, tx in ((side_a, tx_a), (side_b, tx_b)):
            members = (snapshot.source_position == pos) & (snapshot.source_tx == tx)
            count = int(members.sum())
            if count == 0:
                raise InvalidParameterError(
                    "snapshot does not cover the virtual array's overlapped pairs")
            side[row, members] = 1.0 / count
    return side_a, side_b


def resolve_velocity(snapshot: VirtualSnapshot, candidates, varray: VirtualArray,
                     plan: FramePlan, wavelength_m: float) -> float:
    """Pick the candidate whose migration compensation best aligns the
    phases of overlapped elements (sum of |wrapped phase difference| over
    the overlapped pairs; ties go to the smallest |v|)."""
    candidates = np.atleast_1d(np.asarray(candidates, dtype=float))
    if candidates.size == 0:
        raise InvalidParameterError("candidate list may not be empty")
    if candidates.size == 1:
        return float(candidates[0])
    if not varray.overlapped_pairs:
        raise UnsupportedGeometryError(
            "geometry has no overlapped elements from distinct TXs")

    side_a, side_b = _overlap_groups(snapshot, varray)
    rate = 4.0 * np.pi / wavelength_m * plan.slot_interval_s
    # (n_candidates, n_sources) compensated snapshots in one shot
    rotations = np.exp(-1j * rate * np.outer(candidates, snapshot.source_tx))
    compensated = rotations * snapshot.values[None, :]
    mean_a = compensated @ side_a.T
    mean_b = compensated @ side_b.T
    scores = np.sum(np.abs(np.angle(mean_a * np.conj(mean_b))), axis=1)

    best = np.min(scores)
    tied = np.abs(scores - best) <= 1e-9
    winners = candidates[tied]
    return float(winners[np.argmin(np.abs(winners))])
