"""Hand-sized tour of the three measurement primitives.

No corpus, no pipeline: just the estimators on numbers small enough to
check on paper.

    python3 demos/estimator_tour.py
"""

from newslens.corpus import phrase_counts
from newslens.metrics import divergence
from newslens.polarize import leave_out_estimate

# --- leave-out polarization -------------------------------------------------
# Two stations saying exactly the same thing should measure 0.5 ... but the
# naive plug-in estimate is biased upward: each segment's own phrases leak
# into the posterior on its side. The leave-out estimator removes the
# segment being scored before computing the posterior.

pv = phrase_counts("economy growth report jobs".split())
for n in (2, 3, 5, 10):
    est = leave_out_estimate([pv] * n, [pv] * n)
    # with n identical segments per side the answer has a closed form
    print(f"identical speech, {n:>2} segments/side: "
          f"leave-out {est:.4f}   closed form {(n - 1) / (2 * n - 1):.4f}")

print()
left = [phrase_counts("single payer coverage".split())] * 4
right = [phrase_counts("death tax repeal".split())] * 4
print(f"disjoint vocabularies: {leave_out_estimate(left, right):.4f} "
      "(a perfect classifier)")

mixed = left + right
print(f"both sides quoting the same mix: {leave_out_estimate(mixed, mixed):.4f}\n")

# --- topic-selection divergence ----------------------------------------------
# Half the L1 distance between two stations' topic-share vectors. Shares
# need not sum to one (segments can carry zero or two topics).

a = {"economy": 0.2, "immigration": 0.1}
b = {"economy": 0.1, "immigration": 0.3}
d = divergence(a, b, ["economy", "immigration"])
print(f"share gap economy 0.2 vs 0.1, immigration 0.1 vs 0.3: "
      f"divergence {d}")
print(f"identical shares: {divergence(a, a, list(a))}")
print(f"order swapped:    {divergence(b, a, list(a))} (symmetric)")
