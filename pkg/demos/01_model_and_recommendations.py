"""Walk through the core model on a three-item example.

Three items with two attributes each, a simplex prior over the attribute
weights, and the two robust recommendation criteria. Shows how answering a
single comparison reshapes the uncertainty set and the recommendation.
"""

from pathlib import Path

from prefelicit import (
    PreferencePolyhedron,
    Query,
    UncertaintyModel,
    load_item_bank,
    recommend_mmr,
    recommend_mmu,
    worst_case_regret,
    worst_case_utility,
)

bank = load_item_bank((Path(__file__).parents[1] / "data" / "e1.csv").read_text())
print(f"bank: {bank.size} items x {bank.num_attributes} attributes")
for i, item_id in enumerate(bank.ids, start=1):
    print(f"  {i}: {item_id} -> {bank.vector(i)}")

# prior: non-negative weights summing to one
model = UncertaintyModel(PreferencePolyhedron.simplex(2))

print("\nworst-case utility of each item over the prior:")
for i in range(1, 4):
    print(f"  item {i}: {worst_case_utility(bank.vector(i), model, bank):.3f}")

print("\nworst-case regret of each item over the prior:")
for i in range(1, 4):
    print(f"  item {i}: {worst_case_regret(bank.vector(i), bank, model):.3f}")

print("\nbefore any questions:")
print(f"  max-min utility pick: {recommend_mmu(bank, model)}")
print(f"  min-max regret pick:  {recommend_mmr(bank, model)}")

# the user says they prefer item 1 over item 2
updated = model.with_response(Query(1, 2), +1)
print("\nafter answering (1 vs 2) with 'first':")
print(f"  max-min utility pick: {recommend_mmu(bank, updated)}")
print(f"  min-max regret pick:  {recommend_mmr(bank, updated)}")

# a budget of inconsistency keeps contradictions survivable
noisy = UncertaintyModel(PreferencePolyhedron.simplex(2), gamma=0.4)
noisy = noisy.with_response(Query(1, 2), +1).with_response(Query(1, 2), -1)
print("\ncontradictory answers under a 0.4 inconsistency budget:")
print(f"  max-min utility pick: {recommend_mmu(bank, noisy)}")
