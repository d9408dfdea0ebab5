# %% [markdown]
# # Extracting word alignments
#
# Realignment needs word pairs. This demo builds them two ways: by
# dictionary lookup and by symmetrizing two directional aligner outputs
# given in Pharaoh format.

# %%
from alignfreeze.align_extract import (
    AlignmentSet,
    BilingualDictionary,
    SentencePair,
    candidate_links,
    dictionary_align,
    format_pharaoh,
    parse_pharaoh,
    symmetrize_gdfa,
)

# %% [markdown]
# ## Dictionary lookup
#
# Every (source, target) pair listed in the dictionary is a candidate.
# A word with more than one candidate is dropped entirely, and pairs whose
# two surface strings match are discarded as uninformative.

# %%
pair = SentencePair.from_text("the cat saw the taxi", "le chat a vu le taxi")
lexicon = BilingualDictionary({"the": {"le"}, "cat": {"chat"}, "saw": {"vu", "a"}, "taxi": {"taxi"}})

print("candidates:", format_pharaoh(AlignmentSet(frozenset(candidate_links(pair, lexicon)), 5, 6)))
kept = dictionary_align(pair, lexicon)
print("kept:      ", format_pharaoh(kept))

# %% [markdown]
# Only `cat-chat` survives. "the" and "le" occur twice, "saw" has two
# translations, and "taxi" is identical on both sides.

# %% [markdown]
# ## Symmetrizing directional alignments
#
# External aligners emit one alignment per direction. Grow-diag-final-and
# starts from their intersection, grows into neighbouring union links, then
# adds leftover links whose two words are both still unaligned.

# %%
fwd = parse_pharaoh("0-0 1-1 2-2 3-2", 4, 3)
bwd = parse_pharaoh("0-0 1-1 3-2", 4, 3)
sym = symmetrize_gdfa(fwd, bwd)
print("forward  :", format_pharaoh(fwd))
print("backward :", format_pharaoh(bwd))
print("gdfa     :", format_pharaoh(sym))
assert (fwd.links & bwd.links) <= sym.links <= (fwd.links | bwd.links)
