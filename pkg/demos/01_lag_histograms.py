"""
Lag histograms of short words
=============================

Count the distances between consecutive occurrences of every 3-letter
word in a random sequence with a few planted tandem repeats.
"""

import numpy as np

from lagdist.genomescan import count_lags

rng = np.random.default_rng(0)

########################################
## a toy sequence
########################################

seq = "".join(rng.choice(list("ACGT"), 200_000))
# plant a motif every 23 bases in one stretch
block = "".join(("GATTACA" + "".join(rng.choice(list("ACGT"), 16))) for _ in range(300))
seq = seq[:50_000] + block + "NNNN" + seq[50_000:]

hists = count_lags([seq], k=3, max_lag=300)
print(len(hists), "words")

########################################
## look at two words
########################################

by_word = {h.word: h for h in hists}
for w in ("ATT", "CCG"):
    h = by_word[w]
    f = h.frequencies()
    top = np.argsort(f)[::-1][:5]
    print(w, "n =", h.n, " most frequent lags:", h.lags[top], np.round(f[top], 4))

# the planted period shows up as a spike at lag 23 for words inside the motif
att = by_word["ATT"]
print("ATT count at lag 23:", att.counts[23 - att.k - 1],
      " median count:", np.median(att.counts))

# lags 1..k are never counted: overlapping occurrences like AAAA for AA
print(count_lags(["AAAA"], 2, 10)[0].as_dict())
