"""SEEDS-style superpixel segmentation by histogram hill climbing.

Segments start as a regular grid. Each segment keeps a color histogram
(5x5x5 Lab bins over the observed range); the objective is
sum over segments of sum_bin h^2 / |seg|, which rewards concentrated
histograms. Boundary blocks (coarse levels) and boundary pixels (final
level) are re-assigned to a neighboring segment whenever that strictly
increases the objective and keeps the donor segment 4-connected.

Moves use a conservative local connectivity test (the donor's labeled
neighbors around the moved pixel/block must form one contiguous arc of
the 8-ring); a repair pass after every block level re-attaches any
stray components, so the returned labeling is always a partition of
4-connected segments with ids dense in [0, count).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ContractError
from .image import ImageF

_HIST_BINS_PER_CHANNEL = 5
_HIST_BINS = _HIST_BINS_PER_CHANNEL ** 3
_MIN_SEGMENT_PIXELS = 1  # segments may shrink to a pixel but never vanish
_ACCEPT_EPS = 1e-7
_BLOCK_SWEEPS = 2


@dataclass
class SegmentLabels:
    """Dense per-pixel segment ids plus the per-sweep energy trace."""

    labels: np.ndarray
    count: int
    energies: list = field(default_factory=list)


def _ring_lut():
    # lut[mask] is True when the set bits of the 8-ring mask form one
    # contiguous arc and at least one 4-neighbor bit is set. Ring order:
    # N, NE, E, SE, S, SW, W, NW (consecutive ring cells are 4-adjacent).
    lut = np.zeros(256, dtype=bool)
    for mask in range(1, 256):
        bits = [(mask >> k) & 1 for k in range(8)]
        transitions = sum(bits[k] and not bits[(k + 1) % 8] for k in range(8))
        has_edge_neighbor = any(bits[k] for k in (0, 2, 4, 6))
        lut[mask] = transitions <= 1 and has_edge_neighbor
    return lut


_RING_LUT = _ring_lut()
_RING_OFFSETS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _color_bins(lab):
    lo = lab.min(axis=(0, 1))
    span = lab.max(axis=(0, 1)) - lo
    span = np.where(span > 1e-9, span, 1.0)
    q = np.minimum((lab - lo) / span * _HIST_BINS_PER_CHANNEL,
                   _HIST_BINS_PER_CHANNEL - 1).astype(np.int32)
    return q[..., 0] * 25 + q[..., 1] * 5 + q[..., 2]


def _grid_labels(h, w, target_k):
    gh = max(1, int(round(np.sqrt(target_k * h / w))))
    gw = max(1, int(round(target_k / gh)))
    while gh * gw > 2 * target_k:
        if gw > gh:
            gw -= 1
        else:
            gh -= 1
    while gh * gw < max(1, (target_k + 1) // 2):
        if gw < gh:
            gw += 1
        else:
            gh += 1
    row_ids = np.minimum(np.arange(h) * gh // h, gh - 1)
    col_ids = np.minimum(np.arange(w) * gw // w, gw - 1)
    return row_ids[:, None] * gw + col_ids[None, :], gh * gw


def _energy(ssq, n):
    return float((ssq / n).sum())


class _State:
    def __init__(self, labels, bins, count):
        self.labels = labels
        self.bins = bins
        self.count = count
        self.h, self.w = labels.shape
        self.rebuild()

    def rebuild(self):
        flat = self.labels.ravel().astype(np.int64) * _HIST_BINS + self.bins.ravel()
        hist = np.bincount(flat, minlength=self.count * _HIST_BINS)
        self.hist = hist.reshape(self.count, _HIST_BINS).astype(np.int64)
        self.n = self.hist.sum(axis=1)
        self.ssq = (self.hist.astype(np.float64) ** 2).sum(axis=1)

    def energy(self):
        return _energy(self.ssq, self.n)

    def move_gain(self, src, dst, g, gsq, gdot_src, gdot_dst, m):
        # g: block histogram, m pixels; precomputed dot products with the
        # source/destination histograms.
        n_a, n_b = self.n[src], self.n[dst]
        ssq_a_new = self.ssq[src] - 2.0 * gdot_src + gsq
        ssq_b_new = self.ssq[dst] + 2.0 * gdot_dst + gsq
        return (ssq_a_new / (n_a - m) + ssq_b_new / (n_b + m)
                - self.ssq[src] / n_a - self.ssq[dst] / n_b)

    def apply_move(self, src, dst, g, gsq, gdot_src, gdot_dst, m):
        self.ssq[src] += gsq - 2.0 * gdot_src
        self.ssq[dst] += gsq + 2.0 * gdot_dst
        self.hist[src] -= g
        self.hist[dst] += g
        self.n[src] -= m
        self.n[dst] += m


def _local_arc_ok(member, y, x, h, w):
    # member(yy, xx) -> bool; builds the 8-ring mask around (y, x).
    mask = 0
    for k, (dy, dx) in enumerate(_RING_OFFSETS):
        yy, xx = y + dy, x + dx
        if 0 <= yy < h and 0 <= xx < w and member(yy, xx):
            mask |= 1 << k
    return _RING_LUT[mask]


def _pixel_sweep(state, order, rng):
    labels = state.labels
    bins = state.bins
    h, w = state.h, state.w
    hist = state.hist
    moved = 0
    for idx in order:
        y, x = divmod(int(idx), w)
        a = int(labels[y, x])
        if state.n[a] <= _MIN_SEGMENT_PIXELS:
            continue
        cands = set()
        if y > 0 and labels[y - 1, x] != a:
            cands.add(int(labels[y - 1, x]))
        if y < h - 1 and labels[y + 1, x] != a:
            cands.add(int(labels[y + 1, x]))
        if x > 0 and labels[y, x - 1] != a:
            cands.add(int(labels[y, x - 1]))
        if x < w - 1 and labels[y, x + 1] != a:
            cands.add(int(labels[y, x + 1]))
        if not cands:
            continue
        if not _local_arc_ok(lambda yy, xx: labels[yy, xx] == a, y, x, h, w):
            continue
        c = int(bins[y, x])
        best_gain, best_b = _ACCEPT_EPS, -1
        for b in sorted(cands):
            gain = state.move_gain(a, b, None, 1.0, float(hist[a, c]),
                                   float(hist[b, c]), 1)
            if gain > best_gain:
                best_gain, best_b = gain, b
        if best_b >= 0:
            g = np.zeros(_HIST_BINS, dtype=np.int64)
            g[c] = 1
            state.apply_move(a, best_b, g, 1.0, float(hist[a, c]),
                             float(hist[best_b, c]), 1)
            labels[y, x] = best_b
            moved += 1
    return moved


def _block_level(state, size, rng):
    labels = state.labels
    h, w = state.h, state.w
    by = (h + size - 1) // size
    bx = (w + size - 1) // size
    for _ in range(_BLOCK_SWEEPS):
        # block-grid view: uniform blocks carry their label, mixed blocks -1
        block_label = np.full((by, bx), -1, dtype=np.int64)
        for i in range(by):
            for j in range(bx):
                patch = labels[i * size:(i + 1) * size, j * size:(j + 1) * size]
                first = patch.flat[0]
                if (patch == first).all():
                    block_label[i, j] = first
        order = rng.permutation(by * bx)
        for idx in order:
            i, j = divmod(int(idx), bx)
            a = block_label[i, j]
            if a < 0:
                continue
            cands = set()
            for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ii, jj = i + dy, j + dx
                if 0 <= ii < by and 0 <= jj < bx and block_label[ii, jj] >= 0 \
                        and block_label[ii, jj] != a:
                    cands.add(int(block_label[ii, jj]))
            if not cands:
                continue
            if not _local_arc_ok(lambda yy, xx: block_label[yy, xx] == a, i, j, by, bx):
                continue
            patch_bins = state.bins[i * size:(i + 1) * size,
                                    j * size:(j + 1) * size].ravel()
            m = patch_bins.size
            if state.n[a] - m < _MIN_SEGMENT_PIXELS:
                continue
            g = np.bincount(patch_bins, minlength=_HIST_BINS).astype(np.int64)
            gsq = float((g.astype(np.float64) ** 2).sum())
            best_gain, best_b, best_dots = _ACCEPT_EPS, -1, None
            for b in sorted(cands):
                dots = (float(g @ state.hist[a]), float(g @ state.hist[b]))
                gain = state.move_gain(a, b, g, gsq, dots[0], dots[1], m)
                if gain > best_gain:
                    best_gain, best_b, best_dots = gain, b, dots
            if best_b >= 0:
                state.apply_move(a, best_b, g, gsq, best_dots[0], best_dots[1], m)
                labels[i * size:(i + 1) * size, j * size:(j + 1) * size] = best_b
                block_label[i, j] = best_b


def _label_components(labels):
    h, w = labels.shape
    idx = np.arange(h * w).reshape(h, w)
    right = labels[:, :-1] == labels[:, 1:]
    down = labels[:-1, :] == labels[1:, :]
    rows = np.concatenate([idx[:, :-1][right], idx[:-1, :][down]])
    cols = np.concatenate([idx[:, 1:][right], idx[1:, :][down]])
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)),
                       shape=(h * w, h * w))
    n_cc, cc = connected_components(graph, directed=False)
    return n_cc, cc.reshape(h, w)


def _repair_connectivity(state):
    """Reattach stray components so every segment is one 4-connected region."""
    labels = state.labels
    h, w = state.h, state.w
    for _ in range(16):
        n_cc, cc = _label_components(labels)
        if n_cc == state.count:
            state.rebuild()
            return
        flat_cc = cc.ravel()
        cc_sizes = np.bincount(flat_cc, minlength=n_cc)
        cc_label = np.full(n_cc, -1, dtype=np.int64)
        cc_label[flat_cc] = labels.ravel()
        keep = np.full(state.count, -1, dtype=np.int64)
        for comp in np.lexsort((np.arange(n_cc), -cc_sizes)):
            seg = cc_label[comp]
            if keep[seg] < 0:
                keep[seg] = comp
        for comp in range(n_cc):
            if keep[cc_label[comp]] == comp:
                continue
            ys, xs = np.nonzero(cc == comp)
            votes = {}
            for y, x in zip(ys, xs):
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and cc[yy, xx] != comp:
                        other = int(labels[yy, xx])
                        votes[other] = votes.get(other, 0) + 1
            if votes:
                target = min(votes, key=lambda k: (-votes[k], k))
                labels[ys, xs] = target
    state.rebuild()


def seeds_segment(img: ImageF, target_k, levels=4, iters=8, seed=0) -> SegmentLabels:
    """Segment a Lab image into ~target_k 4-connected superpixels."""
    img.require_space("lab")
    h, w = img.height, img.width
    if target_k < 1 or target_k > h * w // 16:
        raise ContractError(
            f"target_k must be in [1, {h * w // 16}], got {target_k}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    bins = _color_bins(img.data.astype(np.float64))
    labels, count = _grid_labels(h, w, target_k)
    state = _State(labels.astype(np.int64), bins, count)
    energies = [state.energy()]

    sizes = [2 ** k for k in range(levels, 0, -1)]
    for size in sizes:
        if size >= min(h, w) // 2 or size < 2:
            continue
        _block_level(state, size, rng)
        _repair_connectivity(state)
    for _ in range(iters):
        boundary = np.zeros((h, w), dtype=bool)
        lab = state.labels
        boundary[:, :-1] |= lab[:, :-1] != lab[:, 1:]
        boundary[:, 1:] |= lab[:, :-1] != lab[:, 1:]
        boundary[:-1, :] |= lab[:-1, :] != lab[1:, :]
        boundary[1:, :] |= lab[:-1, :] != lab[1:, :]
        cand = np.flatnonzero(boundary.ravel())
        order = cand[rng.permutation(cand.size)]
        _pixel_sweep(state, order, rng)
        energies.append(state.energy())
    _repair_connectivity(state)
    return SegmentLabels(state.labels.astype(np.int32), count, energies)


def segment_is_partition(seg: SegmentLabels):
    """True when ids are dense in [0, count) and every id is present."""
    present = np.unique(seg.labels)
    return present.size == seg.count and present[0] == 0 and present[-1] == seg.count - 1


def segment_connected(seg: SegmentLabels):
    """True when every segment forms a single 4-connected region."""
    h, w = seg.labels.shape
    idx = np.arange(h * w).reshape(h, w)
    right = seg.labels[:, :-1] == seg.labels[:, 1:]
    down = seg.labels[:-1, :] == seg.labels[1:, :]
    rows = np.concatenate([idx[:, :-1][right], idx[:-1, :][down]])
    cols = np.concatenate([idx[:, 1:][right], idx[1:, :][down]])
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)),
                       shape=(h * w, h * w))
    n_cc, _ = connected_components(graph, directed=False)
    return n_cc == seg.count
