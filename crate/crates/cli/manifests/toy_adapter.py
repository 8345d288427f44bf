"""Toy evaluator speaking the mosrs wire protocol.

Reads {"params": {...}} from stdin and prints {"objectives": [f1, f2]}.
Stands in for a docking wrapper: f1 plays the role of a binding energy and
f2 of an RMSD, with a trade-off driven by the population size.
"""
import json
import sys

request = json.loads(sys.stdin.readline())
p = request["params"]
pop = (p["ga_pop_size"] - 50) / 450
mut = p["ga_mutation_rate"]
cross = p["ga_crossover_rate"]
elite = p["ga_elitism"]

energy = -18 + 6 * (1 - pop) ** 2 + 3 * (mut - 0.3) ** 2 + 2 * (cross - 0.8) ** 2 - 0.2 * elite
rmsd = 0.1 + 4 * pop ** 2 + 2 * (mut - 0.5) ** 2 + 0.01 * (p["seed"] % 10)

print(json.dumps({"objectives": [energy, rmsd]}))
