"""Ratings model: link identities, design assembly, fit recovery, inference."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from parley.ratings import (
    DesignMatrices,
    EmptyPlaysError,
    NonConvergenceError,
    PlayRecord,
    RatingsError,
    SingularNormalEquationsError,
    UnknownAnchorError,
    UnknownPlayerError,
    build_design,
    fit_skill_model,
    leaderboard,
    link_g,
    link_g_prime,
    read_plays,
    skill_gap_test,
    write_plays,
)


def logistic(t):
    return 1.0 / (1.0 + np.exp(-np.asarray(t, dtype=float)))


class TestLink:
    def test_identities_at_zero(self):
        assert link_g(0.0) == 0.0
        assert link_g_prime(0.0) == pytest.approx(0.5)

    def test_value_at_one(self):
        # high-precision tanh(0.5)
        assert link_g(1.0) == pytest.approx(0.46211715726000974, abs=1e-15)

    def test_two_forms_agree(self):
        grid = np.linspace(-20.0, 20.0, 4001)
        assert np.max(np.abs(link_g(grid) - (2.0 * logistic(grid) - 1.0))) < 1e-12

    def test_odd_symmetry(self):
        grid = np.linspace(-8.0, 8.0, 33)
        assert np.allclose(link_g(-grid), -link_g(grid), atol=1e-15)

    def test_derivative_matches_finite_differences(self):
        grid = np.linspace(-6.0, 6.0, 121)
        h = 1e-6
        numeric = (link_g(grid + h) - link_g(grid - h)) / (2 * h)
        assert np.max(np.abs(link_g_prime(grid) - numeric)) < 1e-6


def synthetic_plays(theta_a=0.8, gamma=0.1, phi=0.05, copies=2):
    """Noiseless generator covering both role orders and both mover flags."""
    theta = {"A": theta_a, "B": 0.0}
    plays = []
    for i, j in (("A", "B"), ("B", "A")):
        for flag in (1, -1):
            eta = theta[i] - theta[j] + gamma * flag + phi
            plays.append(PlayRecord(i, j, "s1", flag, float(link_g(eta))))
    return plays * copies


class TestBuildDesign:
    def test_single_play(self):
        design = build_design([PlayRecord("A", "B", "s", 1, 0.2)], anchor="B")
        assert design.players == ("A", "B")
        assert design.A.tolist() == [[1.0, -1.0]]
        assert design.Z.tolist() == [[1.0]]
        reduced = design.reduced()
        assert reduced.shape == (1, 3)  # theta_A, gamma, phi
        assert design.param_names() == ["theta[A]", "gamma", "phi[s]"]

    def test_rows_have_one_plus_and_one_minus(self):
        design = build_design(synthetic_plays(), anchor="B")
        assert np.all(design.A.sum(axis=1) == 0)
        assert np.all(np.sort(np.abs(design.A), axis=1)[:, -2:] == 1)
        assert np.all(design.Z.sum(axis=1) == 1)

    def test_duplicates_kept(self):
        plays = [PlayRecord("A", "B", "s", 1, 0.2)] * 3
        assert build_design(plays, anchor="A").A.shape[0] == 3

    def test_self_play_rejected_at_construction(self):
        with pytest.raises(RatingsError):
            PlayRecord("A", "A", "s", 1, 0.0)

    def test_validation(self):
        with pytest.raises(RatingsError):
            PlayRecord("A", "B", "s", 0, 0.0)
        with pytest.raises(RatingsError):
            PlayRecord("A", "B", "s", 1, 1.5)
        with pytest.raises(EmptyPlaysError):
            build_design([], anchor="A")
        with pytest.raises(UnknownAnchorError):
            build_design([PlayRecord("A", "B", "s", 1, 0.0)], anchor="Z")


class TestFit:
    def test_all_zero_shares_give_zero_parameters(self):
        plays = [PlayRecord(i, j, "s1", f, 0.0)
                 for i, j in (("A", "B"), ("B", "A")) for f in (1, -1)]
        fit = fit_skill_model(plays, anchor="B")
        assert fit.theta == {"A": 0.0, "B": 0.0}
        assert fit.gamma == 0.0
        assert fit.phi == {"s1": 0.0}
        assert fit.sigma2 == 0.0

    def test_noiseless_recovery(self):
        fit = fit_skill_model(synthetic_plays(), anchor="B")
        assert fit.converged
        assert fit.theta["A"] == pytest.approx(0.8, abs=1e-6)
        assert fit.theta["B"] == 0.0
        assert fit.gamma == pytest.approx(0.1, abs=1e-6)
        assert fit.phi["s1"] == pytest.approx(0.05, abs=1e-6)
        assert fit.sigma2 == pytest.approx(0.0, abs=1e-12)

    def test_row_order_invariance(self):
        plays = synthetic_plays()
        fit = fit_skill_model(plays, anchor="B")
        rng = random.Random(3)
        for _ in range(5):
            shuffled = plays[:]
            rng.shuffle(shuffled)
            other = fit_skill_model(shuffled, anchor="B")
            assert other.theta["A"] == pytest.approx(fit.theta["A"], abs=1e-9)
            assert other.gamma == pytest.approx(fit.gamma, abs=1e-9)
            assert other.phi["s1"] == pytest.approx(fit.phi["s1"], abs=1e-9)

    def test_objective_never_worse_than_start(self):
        rng = np.random.default_rng(0)
        plays = []
        for k in range(200):
            i, j = ("A", "B") if k % 2 == 0 else ("B", "A")
            flag = 1 if k % 4 < 2 else -1
            d = float(np.clip(rng.normal(0.3 if i == "A" else -0.3, 0.2), -1, 1))
            plays.append(PlayRecord(i, j, "s1", flag, d))
        design = build_design(plays, anchor="B")
        ssr_at_zero = float(np.sum((design.d - link_g(np.zeros(len(plays)))) ** 2))
        fit = fit_skill_model(plays, anchor="B")
        assert fit.sigma2 * fit.n_plays <= ssr_at_zero + 1e-12

    def test_translation_gauge(self):
        base = fit_skill_model(synthetic_plays(), anchor="B")
        # generator thetas shifted by +c produce identical observable d, hence
        # an identical anchored fit
        theta = {"A": 0.8 + 3.7, "B": 3.7}
        shifted_plays = []
        for i, j in (("A", "B"), ("B", "A")):
            for flag in (1, -1):
                eta = theta[i] - theta[j] + 0.1 * flag + 0.05
                shifted_plays.append(PlayRecord(i, j, "s1", flag, float(link_g(eta))))
        shifted = fit_skill_model(shifted_plays * 2, anchor="B")
        assert shifted.theta["A"] == pytest.approx(base.theta["A"], abs=1e-9)
        assert shifted.gamma == pytest.approx(base.gamma, abs=1e-9)

    def test_swap_antisymmetry_with_zero_role_effect(self):
        rng = np.random.default_rng(7)
        plays, swapped = [], []
        for k in range(400):
            i, j = ("A", "B") if k % 2 == 0 else ("B", "A")
            flag = 1 if k % 4 < 2 else -1
            eta = (0.8 if i == "A" else -0.8) + 0.1 * flag  # phi = 0 generator
            d = float(np.clip(link_g(eta) + rng.normal(0, 0.05), -1, 1))
            plays.append(PlayRecord(i, j, "s1", flag, d))
            swapped.append(PlayRecord(j, i, "s1", -flag, -d))
        fit = fit_skill_model(plays, anchor="B")
        fit_swapped = fit_skill_model(swapped, anchor="B")
        # the slot-1-minus-slot-2 skill difference negates; per-player gaps are
        # preserved, gamma is preserved, phi flips sign
        assert fit_swapped.theta["A"] - fit_swapped.theta["B"] == pytest.approx(
            fit.theta["A"] - fit.theta["B"], abs=1e-6)
        assert fit_swapped.gamma == pytest.approx(fit.gamma, abs=1e-6)
        assert fit_swapped.phi["s1"] == pytest.approx(-fit.phi["s1"], abs=1e-6)

    def test_btl_mean_consistency(self):
        # signed binary outcomes with P(+1) = logistic(eta) have mean g(eta)
        rng = np.random.default_rng(11)
        eta = 0.6
        n = 100_000
        wins = rng.random(n) < logistic(eta)
        d = np.where(wins, 1.0, -1.0)
        se = math.sqrt((1.0 - link_g(eta) ** 2) / n)  # Var(d) = 1 - g(eta)^2
        assert abs(d.mean() - link_g(eta)) < 3 * se

    def test_gamma_unidentified_without_mover_variation(self):
        plays = [PlayRecord("A", "B", "s1", 1, 0.1)] * 6
        with pytest.raises(SingularNormalEquationsError) as err:
            fit_skill_model(plays, anchor="B")
        assert "variation in who speaks first" in str(err.value)

    def test_optional_ridge_handles_degenerate_designs(self):
        # same degenerate design: the ridge (off by default) makes it solvable
        plays = [PlayRecord("A", "B", "s1", 1, 0.1)] * 6
        fit = fit_skill_model(plays, anchor="B", ridge=1e-8)
        assert fit.converged
        predicted = fit.theta["A"] + fit.gamma + fit.phi["s1"]
        assert link_g(predicted) == pytest.approx(0.1, abs=1e-4)

    def test_nonconvergence_raises(self):
        plays = synthetic_plays()
        with pytest.raises(NonConvergenceError):
            fit_skill_model(plays, anchor="B", max_iter=1, tol=1e-300)

    def test_cov_psd_and_symmetric(self):
        rng = np.random.default_rng(5)
        plays = []
        for k in range(300):
            i, j = ("A", "B") if k % 2 == 0 else ("B", "A")
            flag = 1 if k % 4 < 2 else -1
            d = float(np.clip(link_g(0.5 if i == "A" else -0.5) + rng.normal(0, 0.1), -1, 1))
            plays.append(PlayRecord(i, j, "s1", flag, d))
        fit = fit_skill_model(plays, anchor="B")
        assert np.max(np.abs(fit.cov - fit.cov.T)) < 1e-10
        assert np.min(np.linalg.eigvalsh(fit.cov)) >= -1e-10


class TestLeaderboard:
    def test_anchor_row_exact_zero(self):
        fit = fit_skill_model(synthetic_plays(), anchor="B")
        entries = leaderboard(fit)
        anchor_entry = next(e for e in entries if e.player == "B")
        assert anchor_entry.theta == 0.0
        assert anchor_entry.ci == (0.0, 0.0)
        assert entries[0].player == "A"
        assert entries[0].theta == pytest.approx(0.8, abs=1e-6)

    def test_ties_break_by_player_id(self):
        plays = []
        for i, j in (("A", "B"), ("B", "A"), ("A", "C"), ("C", "A"), ("B", "C"), ("C", "B")):
            for flag in (1, -1):
                plays.append(PlayRecord(i, j, "s1", flag, 0.0))
        entries = leaderboard(fit_skill_model(plays, anchor="A"))
        assert [e.player for e in entries] == ["A", "B", "C"]
        assert [e.rank for e in entries] == [1, 2, 3]


class TestSkillGap:
    def noisy_fit(self):
        rng = np.random.default_rng(2)
        plays = []
        for k in range(600):
            i, j = ("A", "B") if k % 2 == 0 else ("B", "A")
            flag = 1 if k % 4 < 2 else -1
            eta = (0.8 if i == "A" else -0.8) + 0.1 * flag + 0.05
            d = float(np.clip(link_g(eta) + rng.normal(0, 0.08), -1, 1))
            plays.append(PlayRecord(i, j, "s1", flag, d))
        return fit_skill_model(plays, anchor="B")

    def test_self_gap(self):
        fit = self.noisy_fit()
        gap = skill_gap_test(fit, "A", "A")
        assert gap.gap == 0.0 and gap.variance == 0.0 and gap.p == 1.0

    def test_anchor_variance_is_single_diagonal(self):
        fit = self.noisy_fit()
        gap = skill_gap_test(fit, "A", "B")  # B is the anchor
        assert gap.variance == pytest.approx(fit.theta_variance("A"), abs=1e-15)

    def test_quadratic_form_matches_hand_computation(self):
        rng = np.random.default_rng(9)
        plays = []
        for k in range(900):
            i, j = [("A", "B"), ("B", "C"), ("A", "C")][k % 3]
            if k % 2 == 0:
                i, j = j, i
            flag = 1 if k % 4 < 2 else -1
            truth = {"A": 0.5, "B": 0.0, "C": -0.4}
            eta = truth[i] - truth[j] + 0.1 * flag
            d = float(np.clip(link_g(eta) + rng.normal(0, 0.1), -1, 1))
            plays.append(PlayRecord(i, j, "s1", flag, d))
        fit = fit_skill_model(plays, anchor="B")
        gap = skill_gap_test(fit, "A", "C")
        reduced = [p for p in fit.players if p != fit.anchor]
        e = np.zeros(fit.cov.shape[0])
        e[reduced.index("A")] = 1.0
        e[reduced.index("C")] = -1.0
        assert gap.variance == pytest.approx(float(e @ fit.cov @ e), abs=1e-12)

    def test_unknown_player(self):
        fit = self.noisy_fit()
        with pytest.raises(UnknownPlayerError):
            skill_gap_test(fit, "A", "nobody")


class TestPlaysIO:
    def test_csv_and_jsonl_round_trip(self, tmp_path):
        plays = synthetic_plays(copies=1)
        for name in ("plays.csv", "plays.jsonl"):
            path = tmp_path / name
            write_plays(plays, path)
            assert read_plays(path) == plays
