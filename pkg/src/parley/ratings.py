"""Skill ratings for continuous pairwise share differences.

Each play k pairs player i (role 1) against player j (role 2) in a scenario s,
records which side spoke first (x_F in {+1, -1}), and observes the share
difference d = p_i - p_j in [-1, 1]. The observation model is Gaussian with a
bounded mean,

    d ~ Normal(g(eta), sigma^2),   eta = theta_i - theta_j + gamma * x_F + phi_s,

with link g(t) = 2*logistic(t) - 1 = tanh(t/2) mapping the linear predictor
into (-1, 1). theta are latent skills (one player anchored at exactly 0 for
identifiability), gamma a global first-speaker effect, and phi_s a per-scenario
role-1-vs-role-2 advantage.

Fitting is batch Gauss-Newton / iteratively reweighted least squares on the
full play set, so estimates are invariant to row order (unlike online
Elo-style updates) and come with an approximate covariance
sigma_hat^2 * (J'J)^-1 for confidence intervals and pairwise skill-gap tests.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit, ndtr, ndtri


class RatingsError(ValueError):
    pass


class UnknownAnchorError(RatingsError):
    pass


class UnknownPlayerError(RatingsError):
    pass


class EmptyPlaysError(RatingsError):
    pass


class SingularNormalEquationsError(RatingsError):
    """Design is not identifiable; message describes the null space."""


class NonConvergenceError(RatingsError):
    pass


@dataclass(frozen=True)
class PlayRecord:
    """One play: players i (role 1) and j (role 2), scenario, mover flag, share gap."""

    i: str
    j: str
    scenario: str
    first_flag: int  # +1 if side 1 spoke first, -1 if side 2 did
    d: float         # share difference p_i - p_j

    def __post_init__(self):
        if self.i == self.j:
            raise RatingsError("a play needs two distinct players")
        if self.first_flag not in (1, -1):
            raise RatingsError("first_flag must be +1 or -1")
        if not -1.0 <= self.d <= 1.0:
            raise RatingsError(f"d={self.d} outside [-1, 1]")


@dataclass(frozen=True)
class DesignMatrices:
    """Assembled regression design: signed incidence, mover flags, scenario one-hots."""

    A: np.ndarray       # K x N, +1 at column of i_k, -1 at column of j_k
    xF: np.ndarray      # K
    Z: np.ndarray       # K x S one-hot
    d: np.ndarray       # K
    players: tuple[str, ...]
    scenarios: tuple[str, ...]
    anchor: str

    @property
    def anchor_index(self) -> int:
        return self.players.index(self.anchor)

    def reduced(self) -> np.ndarray:
        """[A with anchor column dropped | xF | Z], the full predictor matrix."""
        a_red = np.delete(self.A, self.anchor_index, axis=1)
        return np.hstack([a_red, self.xF[:, None], self.Z])

    def param_names(self) -> list[str]:
        thetas = [f"theta[{p}]" for p in self.players if p != self.anchor]
        return thetas + ["gamma"] + [f"phi[{s}]" for s in self.scenarios]


@dataclass(frozen=True)
class FitResult:
    players: tuple[str, ...]
    scenarios: tuple[str, ...]
    anchor: str
    theta: dict[str, float]      # anchor mapped to exactly 0.0
    gamma: float
    phi: dict[str, float]
    sigma2: float
    cov: np.ndarray              # over (theta_-anchor..., gamma, phi...)
    param_names: tuple[str, ...]
    iterations: int
    converged: bool
    n_plays: int

    def theta_variance(self, player: str) -> float:
        if player == self.anchor:
            return 0.0
        index = self._theta_index(player)
        return float(self.cov[index, index])

    def _theta_index(self, player: str) -> int:
        reduced = [p for p in self.players if p != self.anchor]
        try:
            return reduced.index(player)
        except ValueError:
            raise UnknownPlayerError(player) from None


def link_g(t):
    """Bounded link g(t) = 2*logistic(t) - 1, computed via the stabler tanh form."""
    return np.tanh(np.asarray(t, dtype=float) / 2.0)


def link_g_prime(t):
    """g'(t) = 2*logistic(t)*(1 - logistic(t))."""
    p = expit(np.asarray(t, dtype=float))
    return 2.0 * p * (1.0 - p)


def build_design(plays: Sequence[PlayRecord], anchor: str) -> DesignMatrices:
    """Signed incidence + mover flags + scenario one-hots, columns in sorted order."""
    if not plays:
        raise EmptyPlaysError("no plays")
    players = tuple(sorted({p.i for p in plays} | {p.j for p in plays}))
    if anchor not in players:
        raise UnknownAnchorError(f"anchor {anchor!r} does not appear in the plays")
    scenarios = tuple(sorted({p.scenario for p in plays}))
    player_col = {p: c for c, p in enumerate(players)}
    scenario_col = {s: c for c, s in enumerate(scenarios)}
    K = len(plays)
    A = np.zeros((K, len(players)))
    Z = np.zeros((K, len(scenarios)))
    xF = np.zeros(K)
    d = np.zeros(K)
    for k, play in enumerate(plays):
        A[k, player_col[play.i]] = 1.0
        A[k, player_col[play.j]] = -1.0
        Z[k, scenario_col[play.scenario]] = 1.0
        xF[k] = play.first_flag
        d[k] = play.d
    return DesignMatrices(A=A, xF=xF, Z=Z, d=d, players=players, scenarios=scenarios, anchor=anchor)


def _diagnose_singularity(X: np.ndarray, names: list[str], xF: np.ndarray) -> str:
    _, singular_values, vt = np.linalg.svd(X, full_matrices=False)
    threshold = singular_values.max() * max(X.shape) * np.finfo(float).eps if singular_values.size else 0.0
    null_rows = vt[singular_values <= threshold] if singular_values.size else vt
    involved: list[str] = []
    for row in null_rows:
        for index in np.nonzero(np.abs(row) > 1e-8)[0]:
            if names[index] not in involved:
                involved.append(names[index])
    message = f"normal equations are singular; null space involves {involved or names}"
    if np.allclose(xF, xF[0]):
        message += " (estimating gamma requires variation in who speaks first)"
    return message


def fit_skill_model(
    plays: Sequence[PlayRecord],
    anchor: str,
    tol: float = 1e-10,
    max_iter: int = 100,
    min_alpha: float = 2.0 ** -20,
    ridge: float = 0.0,
) -> FitResult:
    """Maximize the Gaussian log-likelihood by Gauss-Newton / IRLS.

    Starts at beta = 0; each step solves (J'J) dbeta = J'r with J = diag(g'(eta)) X
    and backtracks (halving alpha, floor ``min_alpha``) until the residual sum of
    squares does not increase. Converges when the step's max-norm falls below
    ``tol`` or the relative objective change is below 1e-14. sigma2 is the MLE
    ||r||^2 / K and cov is sigma2 * (J'J)^-1 at the optimum.

    ``ridge`` (default off) adds a tiny diagonal for degenerate research data;
    genuine rank deficiency raises SingularNormalEquationsError instead.
    """
    design = build_design(plays, anchor)
    X = design.reduced()
    d = design.d
    K, p = X.shape
    names = design.param_names()

    if ridge == 0.0 and np.linalg.matrix_rank(X) < p:
        raise SingularNormalEquationsError(_diagnose_singularity(X, names, design.xF))

    beta = np.zeros(p)
    eta = X @ beta
    residual = d - link_g(eta)
    ssr = float(residual @ residual)

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        weights = link_g_prime(eta)
        J = weights[:, None] * X
        gram = J.T @ J
        if ridge > 0.0:
            gram = gram + ridge * np.eye(p)
        try:
            step = np.linalg.solve(gram, J.T @ residual)
        except np.linalg.LinAlgError:
            raise SingularNormalEquationsError(_diagnose_singularity(J, names, design.xF)) from None

        alpha = 1.0
        while True:
            candidate = beta + alpha * step
            candidate_residual = d - link_g(X @ candidate)
            candidate_ssr = float(candidate_residual @ candidate_residual)
            if candidate_ssr <= ssr + 1e-15 or alpha < min_alpha:
                break
            alpha *= 0.5
        if alpha < min_alpha:
            converged = True  # no productive step remains
            break

        beta = candidate
        eta = X @ beta
        residual = candidate_residual
        previous_ssr, ssr = ssr, candidate_ssr
        if np.max(np.abs(alpha * step)) < tol:
            converged = True
            break
        if previous_ssr > 0 and abs(previous_ssr - ssr) / previous_ssr < 1e-14:
            converged = True
            break
        if ssr == 0.0:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(f"no convergence after {max_iter} iterations (ssr={ssr:.3e})")

    sigma2 = ssr / K
    weights = link_g_prime(eta)
    J = weights[:, None] * X
    gram = J.T @ J
    if ridge > 0.0:
        gram = gram + ridge * np.eye(p)
    # rank-revealing inverse via SVD; symmetric by construction
    u, s, vt = np.linalg.svd(gram)
    threshold = s.max() * p * np.finfo(float).eps if s.size else 0.0
    if np.any(s <= threshold):
        raise SingularNormalEquationsError(_diagnose_singularity(J, names, design.xF))
    gram_inv = (vt.T * (1.0 / s)) @ u.T
    cov = sigma2 * gram_inv
    cov = (cov + cov.T) / 2.0

    n_players_reduced = len(design.players) - 1
    theta = {design.anchor: 0.0}
    reduced_players = [q for q in design.players if q != design.anchor]
    for index, player in enumerate(reduced_players):
        theta[player] = float(beta[index])
    gamma = float(beta[n_players_reduced])
    phi = {s: float(beta[n_players_reduced + 1 + k]) for k, s in enumerate(design.scenarios)}

    return FitResult(
        players=design.players,
        scenarios=design.scenarios,
        anchor=anchor,
        theta=theta,
        gamma=gamma,
        phi=phi,
        sigma2=float(sigma2),
        cov=cov,
        param_names=tuple(names),
        iterations=iterations,
        converged=converged,
        n_plays=K,
    )


@dataclass(frozen=True)
class LeaderboardEntry:
    rank: int
    player: str
    theta: float
    ci: tuple[float, float]


def leaderboard(fit: FitResult, level: float = 0.95) -> list[LeaderboardEntry]:
    """Players sorted by skill, with normal CIs; the anchor is pinned at (0, [0, 0]).

    Ties in theta break by player id, so ordering is stable.
    """
    if not fit.converged:
        raise RatingsError("leaderboard requires a converged fit")
    z = float(ndtri(0.5 + level / 2.0))
    entries = []
    for player in fit.players:
        theta = fit.theta[player]
        half = z * math.sqrt(max(fit.theta_variance(player), 0.0))
        entries.append((player, theta, (theta - half, theta + half)))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return [LeaderboardEntry(rank=r, player=p, theta=t, ci=ci)
            for r, (p, t, ci) in enumerate(entries, start=1)]


@dataclass(frozen=True)
class SkillGap:
    player_i: str
    player_j: str
    gap: float
    variance: float
    ci: tuple[float, float]
    z: float
    p: float


def skill_gap_test(fit: FitResult, i: str, j: str, level: float = 0.95) -> SkillGap:
    """Gap theta_i - theta_j with variance e' Cov e and a two-sided normal p."""
    if not fit.converged:
        raise RatingsError("skill_gap_test requires a converged fit")
    for player in (i, j):
        if player not in fit.theta:
            raise UnknownPlayerError(player)
    reduced = [q for q in fit.players if q != fit.anchor]
    e = np.zeros(fit.cov.shape[0])
    if i != fit.anchor:
        e[reduced.index(i)] += 1.0
    if j != fit.anchor:
        e[reduced.index(j)] -= 1.0
    gap = fit.theta[i] - fit.theta[j]
    variance = float(e @ fit.cov @ e)
    variance = max(variance, 0.0)
    se = math.sqrt(variance)
    zcrit = float(ndtri(0.5 + level / 2.0))
    if se == 0.0:
        zstat = 0.0 if gap == 0.0 else math.inf * (1 if gap > 0 else -1)
        p = 1.0 if gap == 0.0 else 0.0
    else:
        zstat = gap / se
        p = 2.0 * (1.0 - float(ndtr(abs(zstat))))
    return SkillGap(
        player_i=i, player_j=j, gap=gap, variance=variance,
        ci=(gap - zcrit * se, gap + zcrit * se), z=zstat, p=min(p, 1.0),
    )


# ---------------------------------------------------------------------------
# plays and leaderboard I/O

PLAY_FIELDS = ("i", "j", "scenario", "first_flag", "d")


def read_plays(path: str | Path) -> list[PlayRecord]:
    """Plays from CSV (header i,j,scenario,first_flag,d) or JSONL, by extension."""
    path = Path(path)
    rows: list[dict] = []
    if path.suffix.lower() == ".csv":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    else:
        with open(path, encoding="utf-8") as fh:
            rows = [json.loads(line) for line in fh if line.strip()]
    return [
        PlayRecord(
            i=str(row["i"]),
            j=str(row["j"]),
            scenario=str(row["scenario"]),
            first_flag=int(row["first_flag"]),
            d=float(row["d"]),
        )
        for row in rows
    ]


def write_plays(plays: Sequence[PlayRecord], path: str | Path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(PLAY_FIELDS)
            for play in plays:
                writer.writerow([play.i, play.j, play.scenario, play.first_flag, play.d])
    else:
        with open(path, "w", encoding="utf-8") as fh:
            for play in plays:
                fh.write(json.dumps({
                    "i": play.i, "j": play.j, "scenario": play.scenario,
                    "first_flag": play.first_flag, "d": play.d,
                }) + "\n")


def leaderboard_to_dict(fit: FitResult, level: float = 0.95) -> dict:
    entries = leaderboard(fit, level)
    return {
        "anchor": fit.anchor,
        "level": level,
        "sigma2": fit.sigma2,
        "gamma": fit.gamma,
        "phi": fit.phi,
        "n_plays": fit.n_plays,
        "entries": [
            {"rank": e.rank, "player": e.player, "theta": e.theta,
             "ci_low": e.ci[0], "ci_high": e.ci[1]}
            for e in entries
        ],
    }


def write_leaderboard_json(fit: FitResult, path: str | Path, level: float = 0.95) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(leaderboard_to_dict(fit, level), fh, indent=2)
        fh.write("\n")


def write_leaderboard_csv(fit: FitResult, path: str | Path, level: float = 0.95) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "player", "theta", "ci_low", "ci_high"])
        for e in leaderboard(fit, level):
            writer.writerow([e.rank, e.player, e.theta, e.ci[0], e.ci[1]])


def write_plot_data(fit: FitResult, path: str | Path, level: float = 0.95) -> None:
    """Point + CI per player, for external rendering."""
    entries = leaderboard(fit, level)
    payload = {
        "players": [e.player for e in entries],
        "theta": [e.theta for e in entries],
        "ci_low": [e.ci[0] for e in entries],
        "ci_high": [e.ci[1] for e in entries],
        "level": level,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
