import numpy as np
import pytest
from scipy import sparse

from relight.completion import (CompletionParams, build_completion_cache,
                                complete_shading, solve_screened_poisson)
from relight.errors import ContractError, SolverError
from relight.image import ImageF, Mask, full_mask, rgb_to_lab
from relight.metrics import psnr_masked
from relight.scribble import ScribbleMap, SimParams, simulate
from relight.shading import NormalMap


def flat_normals(h, w):
    n = np.zeros((h, w, 3), np.float32)
    n[..., 2] = 1.0
    return NormalMap(ImageF(n, "linear-rgb"))


def grid_adjacency_random(h, w, seed):
    rng = np.random.default_rng(seed)
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, vals = [], [], []
    for dy, dx in ((0, 1), (1, 0)):
        a = idx[:h - dy, :w - dx] if (dy or dx) else idx
        a = idx[: h - dy or None, : w - dx or None]
        b = idx[dy:, dx:]
        wgt = rng.uniform(0.1, 2.0, a.shape)
        rows.append(a.ravel()); cols.append(b.ravel()); vals.append(wgt.ravel())
    adj = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(h * w, h * w))
    return (adj + adj.T).tocsr()


class TestSolver:
    def test_constraints_everywhere_weights_zero(self):
        n = 12
        A = sparse.csr_matrix((n, n))
        c = np.arange(n, dtype=float)
        x, diag = solve_screened_poisson(A, np.ones(n), c, 100.0)
        np.testing.assert_array_equal(x, c)
        assert diag.residual <= 1e-6

    def test_three_pixel_chain(self):
        adj = sparse.csr_matrix(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], float))
        m = np.array([1.0, 0.0, 1.0])
        c = np.array([0.0, 0.0, 1.0])
        x, _ = solve_screened_poisson(adj, m, c, 1e6, tol=1e-10)
        # hand solve: endpoints pinned hard, middle is their average
        assert x[1] == pytest.approx(0.5, abs=1e-3)
        assert x[0] == pytest.approx(0.0, abs=1e-3)
        assert x[2] == pytest.approx(1.0, abs=1e-3)

    def test_matches_dense_direct_solve(self):
        h = w = 20
        adj = grid_adjacency_random(h, w, seed=3)
        rng = np.random.default_rng(4)
        m = (rng.random(h * w) < 0.1).astype(float)
        c = rng.random(h * w)
        lam = 50.0
        x, _ = solve_screened_poisson(adj, m, c, lam, tol=1e-12, max_iter=5000)
        deg = np.asarray(adj.sum(axis=1)).ravel()
        dense = np.diag(deg) - adj.toarray() + lam * np.diag(m)
        want = np.linalg.solve(dense, lam * m * c)
        assert np.abs(x - want).max() <= 1e-8

    def test_no_constraints_rejected(self):
        adj = grid_adjacency_random(4, 4, seed=5)
        with pytest.raises(SolverError):
            solve_screened_poisson(adj, np.zeros(16), np.zeros(16), 100.0)

    def test_energy_monotone(self):
        adj = grid_adjacency_random(16, 16, seed=6)
        rng = np.random.default_rng(7)
        m = (rng.random(256) < 0.05).astype(float)
        c = rng.random(256)
        _, diag = solve_screened_poisson(adj, m, c, 100.0, tol=1e-10)
        assert all(b <= a + 1e-9 for a, b in zip(diag.energies, diag.energies[1:]))

    def test_nonconvergence_reports_residual(self):
        adj = grid_adjacency_random(16, 16, seed=8)
        rng = np.random.default_rng(9)
        m = (rng.random(256) < 0.05).astype(float)
        c = rng.random(256)
        with pytest.raises(SolverError) as exc:
            solve_screened_poisson(adj, m, c, 100.0, tol=1e-12, max_iter=2)
        assert exc.value.residual is not None and exc.value.residual > 1e-12


class TestCompleteShading:
    def test_dense_scribble_reproduces_shading(self, sphere256, shading_gt):
        # data term dominating at matching resolution: output == scribble
        lab = rgb_to_lab(shading_gt)
        dense = ScribbleMap(color=lab, valid=full_mask(256, 256))
        out, diag = complete_shading(dense, sphere256["normals"],
                                     sphere256["subject"],
                                     CompletionParams(data_weight=1e4,
                                                      solve_h=256))
        assert psnr_masked(out, shading_gt, sphere256["subject"]) >= 50.0
        assert diag.residual <= 1e-6

    def test_single_constraint_constant_field(self):
        nm = flat_normals(64, 64)
        col = np.zeros((64, 64, 3), np.float32)
        col[32, 32] = [60.0, 5.0, -8.0]
        v = np.zeros((64, 64), np.float32)
        v[32, 32] = 1.0
        scr = ScribbleMap(color=ImageF(col, "lab"), valid=Mask(v))
        out, _ = complete_shading(scr, nm, full_mask(64, 64),
                                  CompletionParams(solve_h=64))
        lab = rgb_to_lab(out)
        assert np.ptp(lab.data[..., 0]) <= 0.01
        assert lab.data[32, 32, 0] == pytest.approx(60.0, abs=0.01)

    def test_simulated_scribbles_recover_within_3db_of_rate1(
            self, sphere256, shading_gt):
        base = simulate(shading_gt, sphere256["subject"], SimParams(seed=100),
                        rate=1.0)
        ref, _ = complete_shading(base, sphere256["normals"], sphere256["subject"])
        floor = psnr_masked(ref, shading_gt, sphere256["subject"]) - 3.0
        scr = simulate(shading_gt, sphere256["subject"], SimParams(seed=4))
        out, _ = complete_shading(scr, sphere256["normals"], sphere256["subject"])
        assert psnr_masked(out, shading_gt, sphere256["subject"]) >= floor

    def test_no_valid_scribble_rejected(self, sphere128):
        col = np.zeros((128, 128, 3), np.float32)
        scr = ScribbleMap(color=ImageF(col, "lab"),
                          valid=Mask(np.zeros((128, 128), np.float32)))
        with pytest.raises(ContractError):
            complete_shading(scr, sphere128["normals"], sphere128["subject"])

    def test_scribble_outside_subject_rejected(self, sphere128):
        col = np.zeros((128, 128, 3), np.float32)
        v = np.zeros((128, 128), np.float32)
        v[0, 0] = 1.0  # corner is outside the sphere disk
        scr = ScribbleMap(color=ImageF(col, "lab"), valid=Mask(v))
        with pytest.raises(ContractError):
            complete_shading(scr, sphere128["normals"], sphere128["subject"])

    def test_maximum_principle_flat_normals(self):
        rng = np.random.default_rng(11)
        nm = flat_normals(64, 64)
        col = np.zeros((64, 64, 3), np.float32)
        v = np.zeros((64, 64), np.float32)
        for _ in range(12):
            y, x = rng.integers(0, 64, 2)
            col[y, x] = [rng.uniform(20, 80), rng.uniform(-20, 20),
                         rng.uniform(-20, 20)]
            v[y, x] = 1.0
        scr = ScribbleMap(color=ImageF(col, "lab"), valid=Mask(v))
        out, _ = complete_shading(scr, nm, full_mask(64, 64),
                                  CompletionParams(normal_sharpness=0.0,
                                                   solve_h=64))
        lab = rgb_to_lab(out).data
        cons = col[v > 0]
        for ch in range(3):
            assert lab[..., ch].min() >= cons[:, ch].min() - 0.05
            assert lab[..., ch].max() <= cons[:, ch].max() + 0.05

    def test_geometry_consistency_two_hemispheres(self):
        # two flat plates with opposing tilts; constraints on each side must
        # not bleed across the crease: normal-clustered variance splits
        h = w = 64
        n = np.zeros((h, w, 3), np.float32)
        n[:, :w // 2] = [0.6, 0.0, 0.8]
        n[:, w // 2:] = [-0.6, 0.0, 0.8]
        nm = NormalMap(ImageF(n, "linear-rgb"))
        col = np.zeros((h, w, 3), np.float32)
        v = np.zeros((h, w), np.float32)
        col[h // 2, 8] = [80.0, 0.0, 0.0]
        col[h // 2, w - 8] = [20.0, 0.0, 0.0]
        v[h // 2, 8] = v[h // 2, w - 8] = 1.0
        scr = ScribbleMap(color=ImageF(col, "lab"), valid=Mask(v))
        out, _ = complete_shading(scr, nm, full_mask(h, w),
                                  CompletionParams(normal_sharpness=8.0,
                                                   solve_h=64))
        L = rgb_to_lab(out).data[..., 0]
        left, right = L[:, :w // 2], L[:, w // 2:]
        intra = left.var() + right.var()
        inter = ((left.mean() - L.mean()) ** 2 + (right.mean() - L.mean()) ** 2)
        assert intra < inter

    def test_segment_relabel_invariance(self, sphere128, irr_smooth):
        from relight.shading import phong_shade
        from relight.scribble import average_segments, sample_segments
        from relight.seeds import SegmentLabels, seeds_segment
        shading = phong_shade(sphere128["normals"], irr_smooth)
        lab = rgb_to_lab(shading)
        seg = seeds_segment(lab, 32, seed=1)
        avg = average_segments(lab, seg)
        rng = np.random.Generator(np.random.Philox(key=3))
        scr = sample_segments(seg, avg, SimParams(), rng, rate=0.4)
        # permute segment ids; the raster scribble and hence the completion
        # must not change
        perm = np.random.default_rng(5).permutation(seg.count)
        seg2 = SegmentLabels(perm[seg.labels].astype(np.int32), seg.count)
        avg2 = average_segments(lab, seg2)
        np.testing.assert_allclose(avg2.data, avg.data, atol=1e-4)
        out1, _ = complete_shading(scr, sphere128["normals"], sphere128["subject"])
        out2, _ = complete_shading(ScribbleMap(color=avg2, valid=scr.valid),
                                   sphere128["normals"], sphere128["subject"])
        np.testing.assert_allclose(out2.data, out1.data, atol=1e-4)

    def test_cache_matches_uncached(self, sphere128, irr_smooth):
        from relight.shading import phong_shade
        shading = phong_shade(sphere128["normals"], irr_smooth)
        scr = simulate(shading, sphere128["subject"], SimParams(seed=9,
                                                                superpixels=64))
        params = CompletionParams()
        cache = build_completion_cache(sphere128["normals"], sphere128["subject"],
                                       params)
        a, _ = complete_shading(scr, sphere128["normals"], sphere128["subject"],
                                params, cache=cache)
        b, _ = complete_shading(scr, sphere128["normals"], sphere128["subject"],
                                params)
        np.testing.assert_array_equal(a.data, b.data)

    def test_outside_subject_is_black(self, sphere128, irr_smooth):
        from relight.shading import phong_shade
        shading = phong_shade(sphere128["normals"], irr_smooth)
        scr = simulate(shading, sphere128["subject"], SimParams(seed=2,
                                                                superpixels=64))
        out, _ = complete_shading(scr, sphere128["normals"], sphere128["subject"])
        assert np.abs(out.data[sphere128["subject"].data <= 0.5]).max() == 0.0
