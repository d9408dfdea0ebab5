# %% [markdown]
# # Filtering a corpus by quality scores
#
# Scores come from an external quality-estimation model, one per sentence
# pair. Pairs below the p-th percentile are dropped; the percentile is the
# nearest-rank value, and ties at the threshold are kept.

# %%
import numpy as np

from alignfreeze.qe_filter import QE_PERCENTILES, ScoredPair, filter_corpus, percentile_threshold

scores = [0.1 * k for k in range(1, 11)]
for p in QE_PERCENTILES:
    kept = filter_corpus([ScoredPair(i, s) for i, s in enumerate(scores)], p)
    print(f"p={p:2d}: threshold {percentile_threshold(scores, p):.1f}, kept {len(kept)}")

# %% [markdown]
# Raising p only ever removes pairs.

# %%
rng = np.random.default_rng(3)
noisy = [ScoredPair(i, float(s)) for i, s in enumerate(np.round(rng.random(25), 1))]
previous = None
for p in QE_PERCENTILES:
    kept = {sp.index for sp in filter_corpus(noisy, p)}
    assert previous is None or kept <= previous
    previous = kept
    print(f"p={p:2d}: {len(kept)} of {len(noisy)}")
