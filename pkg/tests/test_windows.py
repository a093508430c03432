from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import checkerboard, cross, plaquette, stripes, with_block
from ztising.contours import EAbsence, Window
from ztising.dynamics import Engine, SimState, advance_to
from ztising.lattice import Boundary, ConfigError, LatticeGeometry, RngSpec, SpinConfig, init_random, neighbors
from ztising.windows import (
    EVENTS,
    STRIPES,
    WindowClass,
    classify_window,
    grid_blocks,
    grid_centers,
    grid_class_counts,
    grid_event_means,
    is_absorbing_global,
    window_probability_events,
)


def evolved(seed, n=16, t=0.0, p=0.5):
    spec = RngSpec(seed)
    c = init_random(LatticeGeometry(n, n), p, spec)
    if t > 0:
        s = SimState(c)
        advance_to(s, spec.generator(), t)
        c = s.config
    return c


configs = st.builds(evolved, st.integers(0, 2**32), st.sampled_from([12, 16]),
                    st.sampled_from([0.0, 2.0, 16.0, 256.0]), st.sampled_from([0.2, 0.5, 0.8]))


def single_step(n=16, step_x=8):
    """Flat horizontal wall on a free lattice that rises by one row at ``step_x``."""
    ys, xs = np.mgrid[0:n, 0:n]
    level = np.where(xs >= step_x, n // 2 + 1, n // 2)
    return SpinConfig(LatticeGeometry(n, n, Boundary.FREE), np.where(ys >= level, 1, -1))


class TestClassifyWindow:
    def test_constant(self):
        g = LatticeGeometry(16, 16)
        w = Window((8, 8), 3)
        assert classify_window(SpinConfig.constant(g), w).kind is WindowClass.CONSTANT_PLUS
        assert classify_window(SpinConfig.constant(g, -1), w).kind is WindowClass.CONSTANT_MINUS
        # constant inside the window even though the lattice is not
        assert classify_window(plaquette(16, site=(0, 0)), w).kind is WindowClass.CONSTANT_PLUS

    def test_width_two_stripes(self):
        r = classify_window(stripes(16, 16, [2] * 8), Window((8, 8), 3))
        assert r.kind is WindowClass.STRIPE_H
        assert r.wall_offsets == (-3, -1, 1) and r.wall_next_to_center
        v = classify_window(stripes(16, 16, [2] * 8, horizontal=False), Window((8, 8), 3))
        assert v.kind is WindowClass.STRIPE_V and v.wall_offsets == (-3, -1, 1)

    def test_width_one_stripe(self):
        r = classify_window(stripes(16, 16, [1, 15]), Window((8, 0), 3))
        assert r.kind is WindowClass.PROVEN_E_ABSENT and r.e_absence == EAbsence("B")

    def test_single_flat_wall_is_stripe(self):
        r = classify_window(stripes(16, 16, [8, 8]), Window((8, 6), 3))
        assert r.kind is WindowClass.STRIPE_H and r.wall_offsets == (1,)
        assert not r.wall_next_to_center

    def test_single_step(self):
        r = classify_window(single_step(), Window((8, 8), 3))
        assert r.kind is WindowClass.SINGLE_STEP_WALL and r.step_axis == "H" and r.step_offset == -0.5
        r = classify_window(single_step(step_x=10), Window((8, 8), 3))
        assert r.step_offset == 1.5
        t = SpinConfig(single_step().geometry, single_step().spins.T.copy())
        r = classify_window(t, Window((8, 8), 3))
        assert r.kind is WindowClass.SINGLE_STEP_WALL and r.step_axis == "V" and r.step_offset == -0.5

    def test_two_steps_is_not_single_step(self):
        c = single_step()
        spins = c.spins.copy()
        spins[9, 10:] = -1
        r = classify_window(SpinConfig(c.geometry, spins), Window((8, 8), 3))
        assert r.kind is not WindowClass.SINGLE_STEP_WALL

    def test_cross_and_loop(self):
        assert classify_window(cross(16), Window((8, 8), 3)).kind is WindowClass.OTHER
        r = classify_window(plaquette(16), Window((8, 8), 2))
        assert r.kind is WindowClass.PROVEN_E_ABSENT and r.e_absence.reason == "A"

    @given(configs, st.data())
    def test_global_flip_symmetry(self, c, data):
        g = c.geometry
        L = data.draw(st.integers(1, (g.width - 3) // 2))
        w = Window(g.origin, L)
        a, b = classify_window(c, w), classify_window(c.flipped(), w)
        assert b.kind is a.kind.swapped()
        assert (b.wall_offsets, b.step_offset, b.e_absence) == (a.wall_offsets, a.step_offset, a.e_absence)
        ea, eb = window_probability_events(c, L), window_probability_events(c.flipped(), L)
        for p, m in (("C+", "C-"), ("V+", "V-"), ("H+", "H-")):
            assert ea[p] == eb[m] and ea[m] == eb[p]
        assert ea["A"] == eb["A"]

    @given(configs, st.data())
    def test_containment(self, c, data):
        g = c.geometry
        L = data.draw(st.integers(1, (g.width - 3) // 2))
        kind = classify_window(c, Window(g.origin, L)).kind
        ev = window_probability_events(c, L)
        if kind in (WindowClass.CONSTANT_PLUS, WindowClass.CONSTANT_MINUS) or kind in STRIPES:
            assert ev["A"] == 1
        assert ev["C+"] == (kind is WindowClass.CONSTANT_PLUS)
        assert ev["C-"] == (kind is WindowClass.CONSTANT_MINUS)
        if ev["C+"]:
            assert ev["V+"] and ev["H+"]
        if ev["C-"]:
            assert ev["V-"] and ev["H-"]

    @given(configs, st.data())
    def test_stripe_sites_agree_with_three_neighbours(self, c, data):
        g = c.geometry
        L = data.draw(st.integers(1, (g.width - 3) // 2))
        w = Window(g.origin, L)
        if classify_window(c, w).kind not in STRIPES:
            return
        cx, cy = w.center
        inside = lambda s: abs(s[0] - cx) <= L and abs(s[1] - cy) <= L  # noqa: E731
        for y in range(cy - L, cy + L + 1):
            for x in range(cx - L, cx + L + 1):
                nbrs = [n for n in neighbors(g, (x, y)) if inside(n)]
                disagree = sum(c[n] != c[(x, y)] for n in nbrs)
                # neighbours outside the window are unobserved
                assert disagree <= 1
                if len(nbrs) == 4:
                    assert 4 - disagree >= 3


class TestAbsorbing:
    def test_examples(self, torus8):
        assert is_absorbing_global(SpinConfig.constant(torus8, -1))
        assert is_absorbing_global(stripes(8, 8, [3, 5]))
        assert not is_absorbing_global(stripes(8, 8, [1, 7]))
        assert not is_absorbing_global(plaquette(8))
        assert not is_absorbing_global(with_block(LatticeGeometry(16, 16), 0, 0, 8, 8))

    def test_free_rejected(self):
        with pytest.raises(ConfigError):
            is_absorbing_global(SpinConfig.constant(LatticeGeometry(8, 8, Boundary.FREE)))

    @given(configs)
    def test_matches_engine_rate(self, c):
        s = SimState(c, Engine.ACTIVE_SET)
        assert is_absorbing_global(c) == (s.total_rate == 0)

    @given(configs)
    def test_corners_prevent_absorption(self, c):
        from ztising.contours import extract_contours
        if extract_contours(c).corner_counts.any():
            assert not is_absorbing_global(c)

    @pytest.mark.parametrize("seed", range(6))
    def test_evolved_to_absorption(self, seed):
        c = evolved(7700 + seed, n=8)
        s = SimState(c, Engine.ACTIVE_SET)
        advance_to(s, RngSpec(7700 + seed).generator(), 1e9)
        assert s.absorbed_time is not None
        assert s.total_rate == 0 and is_absorbing_global(s.config)


class TestEvents:
    def test_all_plus(self):
        ev = window_probability_events(SpinConfig.constant(LatticeGeometry(16, 16)), 3)
        assert ev == {"C+": 1, "C-": 0, "A": 1, "V+": 1, "H+": 1, "V-": 0, "H-": 0}

    def test_stripe_row(self):
        ev = window_probability_events(stripes(16, 16, [2] * 8), 3, center=(8, 8))
        assert ev["H+"] == 1 and ev["V+"] == 0 and ev["A"] == 1 and ev["C+"] == 0

    def test_checkerboard(self):
        ev = window_probability_events(checkerboard(16, 16), 3)
        assert all(ev[k] == 0 for k in ("V+", "H+", "V-", "H-", "C+", "C-", "A"))

    def test_width_one_stripe_not_absorbing(self):
        assert window_probability_events(stripes(16, 16, [1, 15]), 3, center=(8, 0))["A"] == 0

    def test_vertical_line(self):
        spins = np.full((16, 16), -1, dtype=np.int8)
        spins[:, 5] = 1
        ev = window_probability_events(SpinConfig(LatticeGeometry(16, 16), spins), 3, center=(8, 8))
        assert ev["V+"] == 1 and ev["H+"] == 0 and ev["V-"] == 1 and ev["H-"] == 0

    @given(configs, st.integers(1, 3))
    def test_grid_means_match_single_windows(self, c, L):
        g = c.geometry
        if 2 * L + 3 > g.width:
            return
        xs, ys = grid_centers(g, L)
        rows = [window_probability_events(c, L, center=(x, y)) for y in ys.tolist() for x in xs.tolist()]
        means = grid_event_means(c, L)
        for ev in EVENTS:
            assert means[ev] == pytest.approx(np.mean([r[ev] for r in rows]), abs=1e-15)
        counts = grid_class_counts(c, L)
        assert sum(counts.values()) == len(rows)
        assert counts["CONSTANT_PLUS"] == sum(r["C+"] for r in rows)


class TestGrid:
    def test_torus_tiling(self):
        xs, ys = grid_centers(LatticeGeometry(64, 64), 2)
        assert xs.tolist() == list(range(2, 64, 5))[:12] and len(ys) == 12

    def test_free_grid_keeps_margin(self):
        g = LatticeGeometry(20, 20, Boundary.FREE)
        xs, ys = grid_centers(g, 2)
        for x in xs.tolist():
            Window((x, x), 2).validate(g)
        assert xs.tolist() == [3, 8, 13]

    def test_blocks(self):
        c = evolved(4, n=16)
        blocks = grid_blocks(c, 2)
        xs, ys = grid_centers(c.geometry, 2)
        assert blocks.shape == (len(ys), len(xs), 5, 5)
        assert np.array_equal(blocks[1, 2], Window((int(xs[2]), int(ys[1])), 2).spins(c))

    def test_too_small(self):
        with pytest.raises(ConfigError):
            grid_centers(LatticeGeometry(8, 8), 3)
