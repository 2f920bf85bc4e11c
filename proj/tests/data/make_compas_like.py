"""Writes compas_like.csv: 500 rows shaped like a preprocessed recidivism table."""
import csv
import math
import random

rng = random.Random(2018)
rows = []
for _ in range(500):
    sex = 1 if rng.random() < 0.8 else 0
    age = rng.randint(18, 70)
    priors = min(int(rng.expovariate(1 / (3.5 if sex else 2.0))), 30)
    juv = 1 if rng.random() < 0.1 else 0
    felony = 1 if rng.random() < 0.65 else 0
    t = -0.4 + 0.18 * priors - 0.035 * (age - 35) + 0.5 * juv + 0.2 * felony + 0.25 * sex
    recid = 1 if rng.random() < 1 / (1 + math.exp(-t)) else 0
    rows.append([(age - 35) / 12, priors / 5, juv, felony, sex, recid])

with open("compas_like.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["age", "priors_count", "juv_fel_count", "c_charge_degree", "sex", "two_year_recid"])
    for r in rows:
        w.writerow([f"{r[0]:.6f}", f"{r[1]:.6f}", *r[2:]])
