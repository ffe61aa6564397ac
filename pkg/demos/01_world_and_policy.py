"""
The arithmetic world and the two policy streams
================================================

A task starts from an integer and asks for a reference answer on a small
grid. A trajectory is a short sequence of arithmetic ops ending in STOP, and
the answer head scores how close the final value lands to each grid point.
"""

# %%
# One task, drawn deterministically from a seed.
import numpy as np

from vpgea.env import WorldConfig, execute, generate_task, answer_log_likelihood

world = WorldConfig()
task = generate_task(3, world)
print(task.start_value, "->", task.reference_answer)
print(world.trajectory_count(), "trajectories in this world")

z = execute(task, ["*2", "+1", "STOP"])
print(z, "log L =", round(answer_log_likelihood(task, z), 4))

# %%
# The same weights serve both streams. The posterior stream also sees the
# signed distance to the reference answer, through its own block of weights.
from vpgea.policy import PRIOR, Conditioning, PolicyParams, step_distribution

params = PolicyParams.random(world, np.random.default_rng(0), scale=1.0)
post = Conditioning.posterior(task.reference_answer)
print("prior     ", np.round(step_distribution(params, task, task.start_value, PRIOR), 3))
print("posterior ", np.round(step_distribution(params, task, task.start_value, post), 3))

# %%
# Exact enumeration gives every trajectory's probability under both streams,
# plus the Bayes posterior obtained by reweighting the prior with L.
from vpgea.oracle import enumerate_world

rep = enumerate_world(params, task)
print("E_pi[length] =", round(rep.expected(rep.lengths, "pi"), 3))
print("E_pi[acc]    =", round(rep.expected(rep.correct, "pi"), 3))
print("E_q[acc]     =", round(rep.expected(rep.correct, "q_theta"), 3), "(answer-conditioned stream)")
for row in sorted(rep.table_rows(), key=lambda r: -r["pi"])[:5]:
    print(f"{row['actions']:<16} pi={row['pi']:.3f}  q={row['q_true']:.3f}  L={row['L']:.3f}")
