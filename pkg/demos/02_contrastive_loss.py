# %% [markdown]
# # The realignment loss
#
# Each aligned word pair contributes two rows to a batch. A row is scored
# by how much closer it sits to its partner than to every other row, using
# temperature-scaled cosine similarity.

# %%
import numpy as np

from alignfreeze.realign_loss import LossConfig, RealignBatch, contrastive_loss

rng = np.random.default_rng(0)

# %% [markdown]
# A single pair has no negatives, so its loss is exactly zero.

# %%
one = RealignBatch.from_pairs(rng.standard_normal((1, 4)), rng.standard_normal((1, 4)))
print("B=1 loss:", abs(contrastive_loss(one)[0]))

# %% [markdown]
# With unrelated vectors the loss is high. Moving each target close to its
# source drives it down.

# %%
src = rng.standard_normal((8, 16))
noise = rng.standard_normal((8, 16))
for mix in (0.0, 0.5, 0.9, 1.0):
    tgt = mix * src + (1 - mix) * noise
    loss, _ = contrastive_loss(RealignBatch.from_pairs(src, tgt))
    print(f"mix {mix:.1f}: loss {loss:.4f}")

# %% [markdown]
# ## Temperature
#
# Lower temperatures sharpen the softmax and magnify differences.

# %%
tgt = 0.7 * src + 0.3 * noise
for T in (0.05, 0.1, 1.0):
    loss, grads = contrastive_loss(RealignBatch.from_pairs(src, tgt), LossConfig(temperature=T))
    print(f"T={T}: loss {loss:.4f}, grad norm {np.linalg.norm(grads):.4f}")

# %% [markdown]
# ## A few steps of plain gradient descent on the representations

# %%
batch = RealignBatch.from_pairs(src, noise.copy())
for step in range(5):
    loss, grads = contrastive_loss(batch)
    batch.reps[:] -= 0.5 * grads
    print(f"step {step}: {loss:.4f}")
