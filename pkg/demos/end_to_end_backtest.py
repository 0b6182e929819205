# coding: utf-8

# # From CSV files to a backtest report
#
# The `newsfactor` command runs the whole pipeline in five stages, each reading
# the previous stage's outputs from one run directory:
#
#     prepare -> train -> predict -> backtest -> report
#
# Licensed news and price data are not available here, so this walk-through
# fabricates a small corpus with the same file layout: daily open/close prices
# per ticker and daily article counts per word.

# In[1]:

import csv
import tempfile
from pathlib import Path

import numpy as np

from newsfactor.cli import main
from newsfactor.data import generate_synthetic_corpus, write_counts_csv, write_prices_csv

work = Path(tempfile.mkdtemp(prefix="newsfactor-demo-"))
corpus = generate_synthetic_corpus(n=15, m=25, s=300, d=3, seed=4, noise_sigma=0.004)
write_prices_csv(corpus.prices, work / "prices.csv")
write_counts_csv(corpus.counts, work / "counts.csv")

# An equal-weighted index of the closes stands in for a market reference.
with open(work / "reference.csv", "w", newline="") as fh:
    out = csv.writer(fh)
    out.writerow(["date", "value"])
    for date, level in zip(corpus.prices.dates, corpus.prices.close.mean(axis=0)):
        out.writerow([date, repr(float(level))])

print(open(work / "prices.csv").read().splitlines()[:3])
print(open(work / "counts.csv").read().splitlines()[:3])


# # Running the stages
#
# Every flag can also live in a key=value config file passed with --config.
# Here the first 210 days train the model, days 211-255 choose the ridge penalty
# of the cross-regression baseline, and the rest are the test period.

# In[2]:

common = [
    "--prices", str(work / "prices.csv"), "--counts", str(work / "counts.csv"),
    "--reference", str(work / "reference.csv"), "--out", str(work / "run"),
    "--d", "3", "--split", "210,255", "--seed", "0",
]
for stage in ("prepare", "train", "predict", "backtest", "report"):
    code = main([stage, *common])
    print(f"{stage:<9} exit {code}")


# # Directional accuracy on the test days

# In[3]:

def show(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))


show(work / "run/predict/accuracy.csv")


# # Trading on the predictions
#
# Each test day the strategy splits its capital equally across the stocks
# predicted to rise, buying at the open and selling at the close. It is
# compared with uniform and minimum-variance portfolios, held (BAH) or
# rebalanced daily (CBAL).

# In[4]:

show(work / "run/backtest/report.csv")


# # Report tables
#
# The report stage writes plain CSV tables meant for plotting elsewhere:
# the W heatmap, a stock similarity graph from U, per-stock accuracy and
# cumulative return curves.

# In[5]:

for path in sorted((work / "run/report").iterdir()):
    print(path.name)

w = np.loadtxt(work / "run/report/w_heatmap.csv", delimiter=",", skiprows=1, usecols=range(1, 26))
print("word columns kept by the model:", int(np.count_nonzero(np.abs(w).max(axis=0) > 0)), "of", w.shape[1])
print("outputs are in", work / "run")
