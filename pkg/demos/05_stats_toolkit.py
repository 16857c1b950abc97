"""Tour of the analysis statistics on synthetic outcome data.

Rank tests with exact small-sample modes, the step-up FDR correction,
nonparametric effect sizes, seeded bootstrap intervals, and a fractional-logit
regression of shares on behavioral gaps with cluster-robust uncertainty.
"""

import numpy as np

from parley.stats import (
    bh_adjust,
    bootstrap_ci,
    cliffs_delta,
    fractional_logit_fit,
    mann_whitney_u,
    wilcoxon_signed_rank,
)

rng = np.random.default_rng(0)

# two groups of normalized-pie outcomes
model_pies = np.clip(rng.normal(0.93, 0.05, 20), 0, 1)
human_pies = np.clip(rng.normal(0.87, 0.08, 23), 0, 1)

mwu = mann_whitney_u(model_pies, human_pies)
print(f"Mann-Whitney U = {mwu.statistic:.1f}, p = {mwu.p_value:.4f} ({mwu.method})")
print(f"Cliff's delta = {mwu.effect:+.3f} "
      f"(P(model > human) - P(model < human) over all cross pairs)")

# exact small-sample mode kicks in automatically
small = mann_whitney_u([1, 2, 3], [4, 5, 6])
print(f"\nsmall samples: U = {small.statistic:.0f}, exact p = {small.p_value:.3f}")

# paired comparison: same sessions before/after a prompt change
before = rng.normal(0.85, 0.05, 10)
after = before + rng.normal(0.03, 0.04, 10)
wilcoxon = wilcoxon_signed_rank(after, before, alternative="greater")
print(f"Wilcoxon W+ = {wilcoxon.statistic:.1f}, one-sided p = {wilcoxon.p_value:.4f}, "
      f"rank-biserial r = {wilcoxon.effect:+.3f}")

# multiplicity: step-up FDR over a family of comparisons
p_values = [0.001, 0.012, 0.034, 0.21, 0.04, 0.6]
print(f"\nraw p:      {p_values}")
print(f"BH q-values: {[round(q, 4) for q in bh_adjust(p_values)]}")

# seeded percentile bootstrap
low, high = bootstrap_ci(model_pies, "mean", b=10_000, level=0.95, seed=42)
print(f"\nbootstrap 95% CI for the model mean pie: [{low:.4f}, {high:.4f}] (10,000 resamples)")

# fractional logit: does a behavioral gap predict share capture?
rows = []
for k in range(400):
    lie_gap = rng.normal(0, 0.3)
    reputation_gap = rng.normal(0, 0.1)
    eta = 0.15 * lie_gap - 0.9 * reputation_gap
    share = float(np.clip(1 / (1 + np.exp(-eta)) + rng.normal(0, 0.05), 0.01, 0.99))
    rows.append({
        "p": share,
        "lie_gap": float(lie_gap),
        "reputation_gap": float(reputation_gap),
        "scenario": ["jobs", "price"][k % 2],
        "pairing": f"pair-{k % 25}",
    })
fit = fractional_logit_fit(rows, predictors=["lie_gap", "reputation_gap"],
                           fixed_effects=["scenario"], cluster="pairing")
print(f"\nfractional logit on {fit.n} runs, {fit.n_clusters} pairing clusters")
for name in ("lie_gap", "reputation_gap"):
    print(f"  {name:<16} beta = {fit.coefficients[name]:+.3f} "
          f"(cluster-robust se {fit.cluster_robust_se[name]:.3f}, p = {fit.p_values[name]:.4f}) "
          f"AME = {fit.ames[name]:+.2f} pp")
