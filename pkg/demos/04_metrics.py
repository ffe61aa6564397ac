"""
Accuracy-efficiency scores and keyword statistics
=================================================

epsilon^3 = ACC^2 / A.Tok rewards accuracy quadratically and divides by the
mean token count.
"""

# %%
from vpgea.metrics import EvalRecord, epsilon_cubed, eval_report, keyword_scan

print(round(epsilon_cubed(81.00, 519.90), 2))

table = eval_report([
    ("GSM8K", EvalRecord(81.00, 519.90)),
    ("MATH-500", EvalRecord(82.40, 1891.80)),
    ("AIME24", EvalRecord(33.33, 6659.73)),
    ("AIME25", EvalRecord(20.00, 6678.70)),
])
print(table.to_csv())
# The two ways of averaging disagree; both are kept.
print("mean of row scores:", round(table.epsilon3_mean_of_rows, 3))
print("score of the means:", round(table.epsilon3_of_means, 3))

# %%
# Keyword frequencies per thousand whitespace tokens.
text = "Wait, the sum is 12. But hold on. Let me confirm: 5 + 7 = 12. Therefore 12."
for cat, c in keyword_scan(text).items():
    print(f"{cat:22} count={c.count}  per 1k={c.per_thousand:.1f}")
