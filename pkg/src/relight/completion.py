"""Shading completion: propagate sparse Lab scribbles over the subject
following its geometry.

Per Lab channel we minimize

    E(s) = sum_{i~j} w_ij (s_i - s_j)^2 + lambda_d sum_i m_i (s_i - c_i)^2

on a low-resolution grid restricted to the subject mask, where the
neighbor weights w_ij = exp(kappa * (n_i . n_j - 1)) fall off with
normal disagreement (1 for identical normals) and m_i is the
(downsampled) scribble validity. The normal equations are solved with
Jacobi-preconditioned conjugate gradients, warm-started from a coarser
solve, and the result is bilinearly upsampled back to full resolution.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import ContractError, SolverError
from .image import ImageF, Mask, lab_to_rgb, resample
from .scribble import ScribbleMap
from .shading import NormalMap

_COARSE_LIMIT = 48


@dataclass
class CompletionParams:
    data_weight: float = 100.0
    normal_sharpness: float = 8.0
    connectivity: int = 4
    solve_h: int = None  # defaults to input height // 4
    tol: float = 1e-6
    max_iter: int = 2000

    def __post_init__(self):
        if self.data_weight <= 0:
            raise ContractError("data_weight must be positive")
        if self.normal_sharpness < 0:
            raise ContractError("normal_sharpness must be >= 0")
        if self.connectivity not in (4, 8):
            raise ContractError("connectivity must be 4 or 8")
        if self.tol <= 0:
            raise ContractError("tol must be positive")


@dataclass
class SolveDiagnostics:
    iterations: int
    residual: float
    energies: list = field(default_factory=list)
    solve_shape: tuple = None

    def to_dict(self):
        return {"iterations": self.iterations, "residual": self.residual,
                "solve_shape": list(self.solve_shape) if self.solve_shape else None}


def solve_screened_poisson(adjacency, constraint_mask, constraint_values,
                           data_weight, tol=1e-6, max_iter=2000, x0=None):
    """CG solve of (L + data_weight*diag(m)) x = data_weight*m*c.

    ``adjacency`` is a symmetric nonnegative sparse matrix of smoothness
    weights; ``constraint_mask`` m (n,) and ``constraint_values`` c
    (n, k) form the screening term. The quadratic energy is
    non-increasing across iterations; returns (x, SolveDiagnostics).
    """
    m = np.asarray(constraint_mask, dtype=np.float64)
    if m.sum() <= 0:
        raise SolverError("system is indefinite: no constraints given")
    c = np.asarray(constraint_values, dtype=np.float64)
    squeeze = c.ndim == 1
    if squeeze:
        c = c[:, None]
    n = m.size
    deg = np.asarray(adjacency.sum(axis=1)).ravel()
    lap = sparse.diags(deg) - adjacency
    A = (lap + data_weight * sparse.diags(m)).tocsr()
    b = data_weight * m[:, None] * c

    x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=np.float64).reshape(b.shape).copy()
    diag = A.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.maximum(diag, 1e-300), 1.0)

    b_norm = np.linalg.norm(b, axis=0)
    b_norm = np.where(b_norm > 0, b_norm, 1.0)
    r = b - A @ x
    z = inv_diag[:, None] * r
    p = z.copy()
    rz = (r * z).sum(axis=0)
    energy = 0.5 * (x * (A @ x)).sum(axis=0) - (b * x).sum(axis=0)
    energies = [float(energy.sum())]
    iterations = 0
    for k in range(max_iter):
        res = np.linalg.norm(r, axis=0) / b_norm
        if (res <= tol).all():
            break
        Ap = A @ p
        pAp = (p * Ap).sum(axis=0)
        alpha = np.where(pAp > 0, rz / np.maximum(pAp, 1e-300), 0.0)
        x += alpha * p
        r -= alpha * Ap
        energy -= 0.5 * alpha * rz
        energies.append(float(energy.sum()))
        z = inv_diag[:, None] * r
        rz_new = (r * z).sum(axis=0)
        beta = np.where(rz > 0, rz_new / np.maximum(rz, 1e-300), 0.0)
        p = z + beta * p
        rz = rz_new
        iterations = k + 1
    residual = float((np.linalg.norm(r, axis=0) / b_norm).max())
    if residual > tol:
        raise SolverError(
            f"conjugate gradients did not reach tol {tol} in {max_iter} "
            f"iterations (residual {residual:.3e})",
            residual=residual, iterations=iterations)
    if squeeze:
        x = x[:, 0]
    return x, SolveDiagnostics(iterations=iterations, residual=residual,
                               energies=energies)


def _grid_adjacency(normals, inside, kappa, connectivity):
    """Sparse normal-affinity weights between neighboring inside pixels."""
    h, w = inside.shape
    idx = np.full((h, w), -1, dtype=np.int64)
    idx[inside] = np.arange(int(inside.sum()))
    offsets = [(0, 1), (1, 0)]
    if connectivity == 8:
        offsets += [(1, 1), (1, -1)]
    rows, cols, vals = [], [], []
    for dy, dx in offsets:
        src = np.s_[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
        dst = np.s_[max(0, dy):h + min(0, dy) or None, max(0, dx):w + min(0, dx) or None]
        ok = inside[src] & inside[dst]
        a = idx[src][ok]
        b = idx[dst][ok]
        ndot = (normals[src][ok] * normals[dst][ok]).sum(axis=-1)
        wgt = np.exp(kappa * (np.clip(ndot, -1.0, 1.0) - 1.0))
        rows.append(a); cols.append(b); vals.append(wgt)
    rows = np.concatenate(rows); cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    n = int(inside.sum())
    adj = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    return (adj + adj.T).tocsr()


def _downsample_level(normals_data, subject_data, m_data, c_data, out_h, out_w):
    def box(arr):
        img = ImageF(arr.astype(np.float32), "scalar" if arr.shape[-1] == 1 else "linear-rgb")
        return resample(img, out_w, out_h, "box").data.astype(np.float64)

    n_low = box(normals_data)
    norm = np.linalg.norm(n_low, axis=-1, keepdims=True)
    n_low = np.where(norm > 1e-6, n_low / np.maximum(norm, 1e-6), [0.0, 0.0, 1.0])
    s_low = box(subject_data[..., None])[..., 0]
    m_low = box(m_data[..., None])[..., 0]
    mc_low = box(c_data * m_data[..., None])
    with np.errstate(invalid="ignore", divide="ignore"):
        c_low = np.where(m_low[..., None] > 1e-9, mc_low / np.maximum(m_low[..., None], 1e-9), 0.0)
    return n_low, s_low, m_low, c_low


class CompletionCache:
    """Per-(normals, subject, params) operators reused across solves."""

    def __init__(self, normals_low, inside, adjacency, solve_shape):
        self.normals_low = normals_low
        self.inside = inside
        self.adjacency = adjacency
        self.solve_shape = solve_shape


def build_completion_cache(normals: NormalMap, subject: Mask,
                           params: CompletionParams) -> CompletionCache:
    h, w = normals.height, normals.width
    solve_h = params.solve_h or max(_COARSE_LIMIT, h // 4)
    solve_h = min(solve_h, h)
    solve_w = max(1, int(round(w * solve_h / h)))
    n_low, s_low, _, _ = _downsample_level(
        normals.image.data.astype(np.float64), subject.data.astype(np.float64),
        np.zeros((h, w)), np.zeros((h, w, 3)), solve_h, solve_w)
    inside = s_low > 0.5
    if not inside.any():
        raise ContractError("subject mask is empty at the solve resolution")
    adjacency = _grid_adjacency(n_low, inside, params.normal_sharpness,
                                params.connectivity)
    return CompletionCache(n_low, inside, adjacency, (solve_h, solve_w))


def _solve_level(n_low, s_low, m_low, c_low, params, inside=None, adjacency=None):
    """Solve at this level, warm-started from a recursively coarser solve."""
    sh, sw = s_low.shape
    if inside is None:
        inside = s_low > 0.5
        if not inside.any():
            raise ContractError("subject mask is empty at the solve resolution")
        adjacency = _grid_adjacency(n_low, inside, params.normal_sharpness,
                                    params.connectivity)
    m_in = m_low[inside]
    if m_in.sum() <= 0:
        raise ContractError("no valid scribble pixel inside the subject")

    x0 = None
    if min(sh, sw) > _COARSE_LIMIT:
        args = _downsample_level(n_low, s_low, m_low, c_low, sh // 2, sw // 2)
        coarse, _ = _solve_level(*args, params)
        up = resample(ImageF(coarse[..., :3].astype(np.float32), "lab"),
                      sw, sh, "bilinear")
        x0 = up.data.astype(np.float64)[inside]

    x, diag = solve_screened_poisson(adjacency, m_in, c_low[inside],
                                     params.data_weight, params.tol,
                                     params.max_iter, x0=x0)
    # carry an indicator channel so the caller can renormalize after
    # upsampling instead of bleeding toward zero at the subject boundary
    field_low = np.zeros((sh, sw, 4))
    field_low[inside, :3] = x
    field_low[inside, 3] = 1.0
    diag.solve_shape = (sh, sw)
    return field_low, diag


def complete_shading(scr: ScribbleMap, normals: NormalMap, subject: Mask,
                     params: CompletionParams = None, cache: CompletionCache = None):
    """Complete a full-resolution shading map from scribbles and normals.

    Returns (shading ImageF[linear-rgb], SolveDiagnostics). Raises
    ContractError when no valid scribble pixel lies inside the subject
    and SolverError when CG fails to converge.
    """
    params = params or CompletionParams()
    subject.require_match(scr.color)
    if (normals.height, normals.width) != (scr.color.height, scr.color.width):
        raise ContractError("normal map size does not match scribble")
    h, w = scr.color.height, scr.color.width
    valid = scr.valid.data * (subject.data > 0.5)
    if valid.sum() <= 0:
        raise ContractError("no valid scribble pixel inside the subject")

    if cache is not None:
        solve_shape = cache.solve_shape
    else:
        solve_h = params.solve_h or max(_COARSE_LIMIT, h // 4)
        solve_h = min(solve_h, h)
        solve_shape = (solve_h, max(1, int(round(w * solve_h / h))))

    n_low, s_low, m_low, c_low = _downsample_level(
        normals.image.data.astype(np.float64),
        (subject.data > 0.5).astype(np.float64),
        valid.astype(np.float64), scr.color.data.astype(np.float64),
        *solve_shape)
    if cache is not None:
        field_low, diag = _solve_level(cache.normals_low, s_low, m_low, c_low,
                                       params, inside=cache.inside,
                                       adjacency=cache.adjacency)
    else:
        field_low, diag = _solve_level(n_low, s_low, m_low, c_low, params)

    up = resample(ImageF(field_low.astype(np.float32), "linear-rgb"), w, h,
                  "bilinear").data.astype(np.float64)
    chi = np.maximum(up[..., 3:4], 1e-6)
    lab_full = up[..., :3] / chi
    lab_full[subject.data <= 0.5] = 0.0
    shading = lab_to_rgb(ImageF(lab_full.astype(np.float32), "lab"))
    shading.data[subject.data <= 0.5] = 0.0
    return shading, diag
