"""Group, ball, shell, window, and boundary-defect tests."""

import numpy as np
import pytest

from amenpois import groups as G
from amenpois.errors import DomainError, ResourceBudgetError

Z2_GENS = [(1, 0), (-1, 0), (0, 1), (0, -1)]


@pytest.fixture(scope="module")
def grid1():
    return G.grid_group(1)


@pytest.fixture(scope="module")
def grid2():
    return G.grid_group(2)


@pytest.fixture(scope="module")
def word_z2():
    return G.fin_gen_group(Z2_GENS)


@pytest.fixture(scope="module")
def sym4():
    return G.sym_group(4)


def random_grid_elements(rng, group, count, span=6):
    return [tuple(int(x) for x in rng.integers(-span, span + 1, size=group.r)) for _ in range(count)]


class TestCompose:
    def test_grid_componentwise(self, grid2):
        assert G.compose(grid2, (1, 0), (0, 1)) == (1, 1)

    def test_identity_law(self, grid2, word_z2, sym4):
        rng = np.random.default_rng(0)
        for group in (grid2, word_z2):
            e = G.identity(group)
            for g in random_grid_elements(rng, group, 20):
                assert G.compose(group, g, e) == g
                assert G.compose(group, e, g) == g
        e = G.identity(sym4)
        assert G.compose(sym4, (2, 1, 4, 3), e) == (2, 1, 4, 3)

    def test_word_composition_reduces(self, word_z2):
        # "e1 e2" followed by "e1^-1" lands on (0, 1)
        word_a = G.compose(word_z2, (1, 0), (0, 1))
        assert G.compose(word_z2, word_a, (-1, 0)) == (0, 1)

    def test_inverse_law(self, grid2, word_z2, sym4):
        rng = np.random.default_rng(1)
        for group in (grid2, word_z2):
            for g in random_grid_elements(rng, group, 20):
                assert G.compose(group, g, G.inverse(group, g)) == G.identity(group)
        perm = (3, 1, 4, 2)
        assert G.compose(sym4, perm, G.inverse(sym4, perm)) == G.identity(sym4)

    def test_associativity_spot(self, word_z2):
        rng = np.random.default_rng(2)
        for _ in range(50):
            g, h, k = random_grid_elements(rng, word_z2, 3)
            left = G.compose(word_z2, G.compose(word_z2, g, h), k)
            right = G.compose(word_z2, g, G.compose(word_z2, h, k))
            assert left == right

    def test_non_member_rejected(self, grid2, sym4):
        with pytest.raises(DomainError):
            G.compose(grid2, (1, 2, 3), (0, 0))
        with pytest.raises(DomainError):
            G.compose(sym4, (1, 1, 2, 3), G.identity(sym4))


class TestDistance:
    def test_grid_sup(self, grid2):
        assert G.distance(grid2, (0, 0), (3, -2)) == 3.0

    def test_zero_on_diagonal(self, grid2, word_z2, sym4):
        rng = np.random.default_rng(3)
        for group in (grid2, word_z2):
            for g in random_grid_elements(rng, group, 10):
                assert G.distance(group, g, g) == 0.0
        assert G.distance(sym4, (2, 1, 3, 4), (2, 1, 3, 4)) == 0.0

    def test_word_metric_bfs(self, word_z2):
        assert G.distance(word_z2, (0, 0), (2, 1)) == 3.0

    def test_metric_axioms_random(self, grid2, word_z2):
        rng = np.random.default_rng(4)
        for group in (grid2, word_z2):
            for _ in range(60):
                g, h, k = random_grid_elements(rng, group, 3, span=4)
                dgh = G.distance(group, g, h)
                assert dgh == G.distance(group, h, g)
                assert dgh >= 0
                assert (dgh == 0) == (g == h)
                assert G.distance(group, g, k) <= dgh + G.distance(group, h, k)

    def test_left_invariance_exact(self, grid2, word_z2):
        rng = np.random.default_rng(5)
        for group in (grid2, word_z2):
            for _ in range(1000):
                phi, psi, pi = random_grid_elements(rng, group, 3, span=3)
                lhs = G.distance(group, G.compose(group, phi, psi), G.compose(group, phi, pi))
                assert lhs == G.distance(group, psi, pi)

    def test_sym_right_invariance(self, sym4):
        # the inverse-prefix metric is right- (not left-) invariant
        rng = np.random.default_rng(6)
        perms = [tuple(rng.permutation(4) + 1) for _ in range(60)]
        for i in range(0, 60, 3):
            phi, psi, pi = perms[i], perms[i + 1], perms[i + 2]
            lhs = G.distance(sym4, G.compose(sym4, psi, phi), G.compose(sym4, pi, phi))
            assert lhs == G.distance(sym4, psi, pi)


class TestBalls:
    def test_grid2_unit_ball(self, grid2):
        assert len(G.ball(grid2, (0, 0), 1)) == 9

    def test_zero_radius(self, grid2, word_z2):
        for group in (grid2, word_z2):
            c = G.identity(group)
            assert G.ball(group, c, 0) == frozenset({c})

    def test_word_ball_13(self, word_z2):
        assert len(G.ball(word_z2, (0, 0), 2)) == 13

    def test_translation_identity(self, grid2, word_z2):
        rng = np.random.default_rng(7)
        for group in (grid2, word_z2):
            for _ in range(10):
                phi = random_grid_elements(rng, group, 1, span=3)[0]
                for t in (1, 2, 3):
                    unit = G.ball(group, G.identity(group), t)
                    translated = frozenset(G.compose(group, phi, g) for g in unit)
                    assert G.ball(group, phi, t) == translated

    def test_real_radius_floored(self, grid1):
        assert len(G.ball(grid1, (0,), 2.9)) == 5

    def test_negative_radius(self, grid1):
        with pytest.raises(DomainError):
            G.ball(grid1, (0,), -1)


class TestShells:
    def test_grid1_arithmetic(self, grid1):
        st = G.shell_table(grid1, 4)
        assert st.ball_sizes == (1, 3, 5, 7, 9)
        assert st.shell_sizes == (2, 2, 2, 2)

    def test_grid2_difference_of_squares(self, grid2):
        st = G.shell_table(grid2, 5)
        for i in range(5):
            assert st.shell_sizes[i] == (2 * i + 3) ** 2 - (2 * i + 1) ** 2
        # cross-check against explicit ball enumeration
        for i in range(4):
            assert st.ball_sizes[i] == len(G.ball(grid2, (0, 0), i))

    def test_word_z2_formula(self, word_z2):
        st = G.shell_table(word_z2, 6)
        for k in range(7):
            assert st.ball_sizes[k] == 2 * k * k + 2 * k + 1
        for k in range(4):
            assert st.ball_sizes[k] == len(G.ball(word_z2, (0, 0), k))

    def test_shell_consistency(self, grid2, word_z2):
        for group in (grid2, word_z2):
            st = G.shell_table(group, 6)
            for i in range(st.r_max + 1):
                assert sum(st.shell_sizes[:i]) + st.ball_sizes[0] == st.ball_sizes[i]

    def test_nondecreasing(self, word_z2):
        st = G.shell_table(word_z2, 8)
        assert all(a <= b for a, b in zip(st.ball_sizes, st.ball_sizes[1:]))
        assert all(s >= 0 for s in st.shell_sizes)


class TestWindows:
    def test_grid1_window(self, grid1):
        w = G.folner_set(grid1, 2)
        assert w.size == 5
        assert w.elements == frozenset({(-2,), (-1,), (0,), (1,), (2,)})

    def test_sym_window(self, sym4):
        w = G.folner_set(sym4, 3)
        assert w.size == 6
        assert all(p[3] == 4 for p in w.elements)  # embedded copy fixes the top point

    def test_grid2_window_size(self, grid2):
        assert G.folner_set(grid2, 1).size == 9
        assert G.window_size(grid2, 1) == 9

    def test_contains_identity(self, grid2, word_z2, sym4):
        for group in (grid2, word_z2, sym4):
            w = G.folner_set(group, 2)
            assert G.identity(group) in w.elements

    def test_sym_budget(self):
        with pytest.raises(DomainError):
            G.sym_group(9)


class TestBoundaryDefect:
    def test_grid1_example(self, grid1):
        assert G.boundary_defect(grid1, 2, 1) == pytest.approx(0.4)

    def test_zero_ball(self, grid1):
        assert G.boundary_defect(grid1, 3, 0) == 0.0

    def test_grid2_example(self, grid2):
        assert G.boundary_defect(grid2, 10, 1) == pytest.approx(88 / 441)

    def test_nonincreasing_in_n(self, grid1, grid2):
        for group, ns in ((grid1, [2, 5, 10, 20, 40, 60]), (grid2, [2, 4, 8, 12])):
            vals = [G.boundary_defect(group, n, 1) for n in ns]
            assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_small_for_large_windows(self, grid1):
        assert G.boundary_defect(grid1, 40, 1) < 0.05
        assert G.boundary_defect(grid1, 80, 2) < 0.05


class TestBudgets:
    def test_word_bfs_budget(self):
        tiny = G.fin_gen_group(Z2_GENS, node_budget=10)
        with pytest.raises(ResourceBudgetError):
            G.distance(tiny, (0, 0), (5, 5))

    def test_unreachable_target(self):
        even = G.fin_gen_group([(2,), (-2,)])
        with pytest.raises(ResourceBudgetError):
            G.distance(even, (0,), (1,))  # odd point is outside the subgroup

    def test_generator_symmetry_required(self):
        with pytest.raises(DomainError):
            G.fin_gen_group([(1, 0), (0, 1)])
