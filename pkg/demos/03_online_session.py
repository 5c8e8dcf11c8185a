"""Online elicitation: a simulated user answers queries one at a time.

The session picks each query by a one-step lookahead, updates the
uncertainty set with the answer, and the recommendation's guarantee
improves monotonically. The simulated user has a hidden weight vector and
answers with a small amount of noise.
"""

from pathlib import Path

import numpy as np

from prefelicit import NoiseConfig, PreferencePolyhedron, load_item_bank
from prefelicit.online import (
    Session,
    choose_query,
    current_recommendation,
    record_response,
)
from prefelicit.simulate import SimAgent, simulate_response

bank = load_item_bank((Path(__file__).parents[1] / "data" / "e1.csv").read_text())
base = PreferencePolyhedron.simplex(2)

hidden = np.array([0.65, 0.35])
agent = SimAgent(hidden / np.linalg.norm(hidden), seed=0)
print(f"hidden weights (unknown to the system): {agent.u.round(3)}")

sigma = 0.05
session = Session(bank, base, "mmu", NoiseConfig(sigma, 0.9), k_max=4)
rng = np.random.default_rng(1)

while session.status == "active":
    choice = choose_query(session)
    q = choice.query
    answer = simulate_response(agent, q, bank, sigma, rng)
    session = record_response(session, answer, query=q)
    rec = current_recommendation(session)
    word = "first" if answer == 1 else "second"
    print(f"k={session.k}: asked {bank.ids[q.first - 1]} vs "
          f"{bank.ids[q.second - 1]} (budget {choice.gamma:.3f}), "
          f"user said {word!r}; recommend {rec.item_id} "
          f"with guarantee {rec.guarantee:.3f}")

final = current_recommendation(session)
truth = {i: float(agent.u @ bank.vector(i)) for i in sorted(bank.rec_ids)}
best = max(truth, key=truth.get)
print(f"\nfinal recommendation: {final.item_id} "
      f"(true best item: {bank.ids[best - 1]})")
