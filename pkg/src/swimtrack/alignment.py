"""Cross-interval track alignment.

Candidate detections are harvested at regularly sampled frames, gated by a
prompt score, propagated into whole-video tracks, and a track is only kept
when tracks started at *other* sampled frames land on the same object
(per-frame IOU above a threshold). Objects seen from a single sampled
frame never survive, which is what suppresses transient false positives.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .masks import BinaryMask, BoundingBox, iou

WARN_SINGLE_INTERVAL = "single-interval-video"


class AlignmentError(ValueError):
    """Invalid alignment configuration or inputs."""


class PropagationError(RuntimeError):
    """A track propagator could not produce a track for a candidate."""


@dataclass(frozen=True)
class AlignmentConfig:
    interval_stride: int = 30
    score_threshold: float = 0.95
    iou_threshold: float = 0.7
    shark_prompt_label: str = "shark"
    min_support: int = 1

    def __post_init__(self):
        if self.interval_stride < 1:
            raise AlignmentError("interval_stride must be >= 1")
        if not 0.0 < self.score_threshold < 1.0:
            raise AlignmentError("score_threshold must lie in (0, 1)")
        if not 0.0 < self.iou_threshold < 1.0:
            raise AlignmentError("iou_threshold must lie in (0, 1)")
        if self.min_support < 1:
            raise AlignmentError("min_support must be >= 1")
        if not self.shark_prompt_label:
            raise AlignmentError("shark_prompt_label must be nonempty")


@dataclass(frozen=True)
class CandidateDetection:
    """One gated-or-not detection at a sampled frame."""

    frame_index: int
    mask: BinaryMask
    bbox: BoundingBox
    prompt_scores: Mapping[str, float]
    interval_index: int
    candidate_index: int = 0

    def __post_init__(self):
        for label, p in self.prompt_scores.items():
            if not 0.0 <= p <= 1.0:
                raise AlignmentError(
                    f"score for prompt {label!r} outside [0, 1]: {p}"
                )


@dataclass(frozen=True)
class TrackRecord:
    """One candidate propagated across the video; frames may be absent."""

    origin_interval: int
    origin_candidate: int
    masks: Mapping[int, BinaryMask]

    def __post_init__(self):
        dims = {(m.width, m.height) for m in self.masks.values()}
        if len(dims) > 1:
            raise AlignmentError(
                f"track ({self.origin_interval}, {self.origin_candidate}) "
                f"mixes mask shapes: {sorted(dims)}"
            )
        present = frozenset(f for f, m in self.masks.items() if not m.is_empty)
        object.__setattr__(self, "present", present)

    present: frozenset = field(init=False)

    @property
    def origin(self) -> tuple[int, int]:
        return (self.origin_interval, self.origin_candidate)


@dataclass(frozen=True)
class ConfirmedIndividual:
    id: int
    masks: Mapping[int, BinaryMask]
    supporting_intervals: frozenset


@dataclass
class AlignmentResult:
    individuals: list[ConfirmedIndividual]
    warnings: list[str] = field(default_factory=list)


class TrackPropagator:
    """Turns one candidate into a whole-video track.

    Implementations must be safe to call concurrently for distinct
    candidates and may mark frames absent by omitting them.
    """

    def propagate(self, candidate: CandidateDetection) -> TrackRecord:
        raise NotImplementedError


class FileBackedPropagator(TrackPropagator):
    """Replays tracks precomputed offline, keyed by candidate origin."""

    def __init__(self, tracks: Iterable[TrackRecord]):
        self._by_origin: dict[tuple[int, int], TrackRecord] = {}
        for t in tracks:
            if t.origin in self._by_origin:
                raise AlignmentError(f"duplicate track for origin {t.origin}")
            self._by_origin[t.origin] = t

    def propagate(self, candidate: CandidateDetection) -> TrackRecord:
        origin = (candidate.interval_index, candidate.candidate_index)
        track = self._by_origin.get(origin)
        if track is None:
            raise PropagationError(f"no stored track for origin {origin}")
        return track


def sample_interval_frames(n_frames: int, stride: int) -> list[int]:
    """Frames at which candidates are generated: 0, stride, 2*stride, ..."""
    if n_frames < 1:
        raise AlignmentError("n_frames must be >= 1")
    if stride < 1:
        raise AlignmentError("stride must be >= 1")
    return list(range(0, n_frames, stride))


def filter_candidates(
    dets: Sequence[CandidateDetection], cfg: AlignmentConfig
) -> list[CandidateDetection]:
    """Keep detections whose shark-prompt score strictly exceeds the gate."""
    kept = []
    for d in dets:
        if cfg.shark_prompt_label not in d.prompt_scores:
            raise AlignmentError(
                f"candidate at frame {d.frame_index} (interval "
                f"{d.interval_index}, index {d.candidate_index}) has no score "
                f"for prompt {cfg.shark_prompt_label!r}"
            )
        if d.prompt_scores[cfg.shark_prompt_label] > cfg.score_threshold:
            kept.append(d)
    return kept


def _tracks_aligned(a: TrackRecord, b: TrackRecord, threshold: float) -> bool:
    """True when the two tracks overlap above threshold on any shared frame."""
    shared = a.present & b.present
    for f in shared:
        if iou(a.masks[f], b.masks[f]) > threshold:
            return True
    return False


def _support_map(
    tracks: Sequence[TrackRecord], cfg: AlignmentConfig
) -> tuple[list[set[int]], set[tuple[int, int]]]:
    """Per-track supporting intervals and the aligned index pairs."""
    n = len(tracks)
    supports: list[set[int]] = [set() for _ in range(n)]
    aligned_pairs: set[tuple[int, int]] = set()
    for i in range(n):
        for j in range(i + 1, n):
            if tracks[i].origin_interval == tracks[j].origin_interval:
                continue
            if _tracks_aligned(tracks[i], tracks[j], cfg.iou_threshold):
                aligned_pairs.add((i, j))
                supports[i].add(tracks[j].origin_interval)
                supports[j].add(tracks[i].origin_interval)
    return supports, aligned_pairs


def confirmed_tracks(
    tracks: Sequence[TrackRecord], cfg: AlignmentConfig
) -> list[TrackRecord]:
    """Tracks supported by at least ``cfg.min_support`` other intervals."""
    tracks = list(tracks)
    supports, _ = _support_map(tracks, cfg)
    return [t for t, s in zip(tracks, supports) if len(s) >= cfg.min_support]


def align_tracks(
    tracks: Sequence[TrackRecord], cfg: AlignmentConfig
) -> AlignmentResult:
    """Confirm tracks supported from other intervals and merge them.

    A track is confirmed when at least ``cfg.min_support`` distinct other
    intervals contribute a track that overlaps it (IOU strictly above
    ``cfg.iou_threshold``) on some frame where both are present. Confirmed
    tracks that are mutually aligned collapse into one individual.
    """
    tracks = list(tracks)
    origins = {t.origin_interval for t in tracks}
    if len(origins) < 2:
        return AlignmentResult(individuals=[], warnings=[WARN_SINGLE_INTERVAL])

    n = len(tracks)
    supports, aligned_pairs = _support_map(tracks, cfg)
    confirmed = [i for i in range(n) if len(supports[i]) >= cfg.min_support]
    confirmed_set = set(confirmed)

    # connected components of the aligned relation over confirmed tracks
    parent = {i: i for i in confirmed}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in aligned_pairs:
        if i in confirmed_set and j in confirmed_set:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[ri] = rj

    components: dict[int, list[int]] = {}
    for i in confirmed:
        components.setdefault(find(i), []).append(i)

    groups = [
        [(tracks[i], frozenset(supports[i])) for i in members]
        for members in components.values()
    ]
    return AlignmentResult(individuals=consolidate(groups), warnings=[])


def consolidate(
    groups: Sequence[Sequence[tuple[TrackRecord, frozenset]]],
) -> list[ConfirmedIndividual]:
    """One individual per aligned component, with a deterministic mask choice.

    Per frame the emitted mask comes from the present member with the most
    supporting intervals; ties break by earliest origin interval, then
    lowest candidate index. Ids follow the components' earliest origins.
    """
    def member_key(entry: tuple[TrackRecord, frozenset]):
        track, support = entry
        return (-len(support), track.origin_interval, track.origin_candidate)

    prepared = []
    for group in groups:
        members = sorted(group, key=member_key)
        frames = set()
        for track, _ in members:
            frames |= track.present
        masks = {}
        for f in frames:
            for track, _ in members:
                if f in track.present:
                    masks[f] = track.masks[f]
                    break
        earliest = min(t.origin for t, _ in group)
        support_union = frozenset().union(
            *(support for _, support in group),
            {t.origin_interval for t, _ in group},
        )
        prepared.append((earliest, masks, support_union))

    prepared.sort(key=lambda item: item[0])
    return [
        ConfirmedIndividual(id=k, masks=masks, supporting_intervals=support)
        for k, (_, masks, support) in enumerate(prepared)
    ]


def run_alignment(
    candidates: Sequence[CandidateDetection],
    propagator: TrackPropagator,
    cfg: AlignmentConfig,
    threads: int = 1,
) -> AlignmentResult:
    """Gate candidates, propagate each into a track, then align.

    Propagation failures skip the candidate with a warning; the run aborts
    only when every propagation fails.
    """
    for d in candidates:
        expected = d.interval_index * cfg.interval_stride
        if d.frame_index != expected:
            raise AlignmentError(
                f"candidate frame {d.frame_index} does not match interval "
                f"{d.interval_index} at stride {cfg.interval_stride}"
            )
    gated = filter_candidates(candidates, cfg)
    if not gated:
        return AlignmentResult(individuals=[], warnings=[])

    warnings: list[str] = []

    def _propagate(c: CandidateDetection):
        try:
            return propagator.propagate(c), None
        except Exception as exc:  # noqa: BLE001 - propagators are external code
            return None, f"propagation-failed interval={c.interval_index} candidate={c.candidate_index}: {exc}"

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_propagate, gated))
    else:
        outcomes = [_propagate(c) for c in gated]

    tracks: list[TrackRecord] = []
    for candidate, (track, warning) in zip(gated, outcomes):
        if warning is not None:
            warnings.append(warning)
            continue
        if candidate.frame_index not in track.present:
            warnings.append(
                "propagation-failed interval="
                f"{candidate.interval_index} candidate={candidate.candidate_index}: "
                "track absent at its own origin frame"
            )
            continue
        tracks.append(track)

    if not tracks:
        raise PropagationError("all candidate propagations failed")

    result = align_tracks(tracks, cfg)
    result.warnings = warnings + result.warnings
    return result
