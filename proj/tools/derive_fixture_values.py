#!/usr/bin/env python3
"""Independent brute-force derivations of the numeric fixtures used in the C++ tests.

Everything here is computed from first principles with exact fractions where
possible, deliberately *not* sharing any code with the library, so the values
frozen into tests/ have an independent origin.  Run: python3 tools/derive_fixture_values.py
"""

from fractions import Fraction as F
import math
from itertools import product


def header(s):
    print()
    print("##", s)


# ---------------------------------------------------------------------------
# Two-action contracting fixture: a1 (value 1, cost 1/4), a2 (value 2, cost 1/2).
# Single state, so expected values equal per-state values.
# U(a,p) = p*value(a) - cost(a);  V(a,p) = (1-p)*value(a).
# ---------------------------------------------------------------------------
header("two-action impossibility fixture")

VALUE = {1: F(1), 2: F(2)}
COST = {1: F(1, 4), 2: F(1, 2)}


def U(a, p):
    return p * VALUE[a] - COST[a]


def V(a, p):
    return (1 - p) * VALUE[a]


for p in (F(1, 4), F(1, 2)):
    print(f"p={p}: U(a1)={U(1,p)} U(a2)={U(2,p)} V(a1)={V(1,p)} V(a2)={V(2,p)}")

# exact best-response sets and the optimistic pick (max V among ties)
for p in (F(1, 4), F(1, 2)):
    best = max(U(a, p) for a in (1, 2))
    brs = [a for a in (1, 2) if U(a, p) == best]
    opti = max(brs, key=lambda a: V(a, p))
    print(f"p={p}: BR set={brs} optimistic={opti} V(optimistic)={V(opti,p)}")

# principal best policy over P0 = {1/4, 1/2}
vals = {}
for p in (F(1, 4), F(1, 2)):
    best = max(U(a, p) for a in (1, 2))
    brs = [a for a in (1, 2) if U(a, p) == best]
    opti = max(brs, key=lambda a: V(a, p))
    vals[p] = V(opti, p)
print("principal values over P0:", vals, "-> best policy", max(vals, key=lambda p: vals[p]))

# tie contract between the pair: p = (c1-c2)/(f1-f2)
tie = (COST[1] - COST[2]) / (VALUE[1] - VALUE[2])
print("tie contract:", tie)


def stable(p, beta, gamma):
    """(beta,gamma)-stability: every action either loses the agent >= beta
    or costs the principal <= gamma, vs the optimistic best response."""
    best = max(U(a, p) for a in (1, 2))
    brs = [a for a in (1, 2) if U(a, p) == best]
    star = max(brs, key=lambda a: V(a, p))
    for a in (1, 2):
        if a == star:
            continue
        agent_gap_ok = U(a, p) <= U(star, p) - beta
        principal_ok = V(a, p) >= V(star, p) - gamma
        if not (agent_gap_ok or principal_ok):
            return False
    return True


print("stable(p=1/4, beta=0.01, gamma=1/2):", stable(F(1, 4), F(1, 100), F(1, 2)))
print("stable(p=1/4, beta=0.01, gamma=3/4):", stable(F(1, 4), F(1, 100), F(3, 4)))
print("stable(p=0.30, beta=0.0125, gamma=0):", stable(F(30, 100), F(125, 10000), F(0)))
print("stable(p=1, beta=5, gamma=0):", stable(F(1), F(5), F(0)))

# the ascending-scan oracle on the delta-grid: first stable point >= p_optimistic
header("linear oracle example (beta=0.1, delta=0.05)")
beta = F(1, 10)
delta = F(1, 20)
dc = abs(COST[1] - COST[2])  # min pairwise cost gap
eps = dc * beta / 2
print("Delta_c =", dc, " eps = Delta_c*beta/2 =", eps)


def eps_br_set(p, e):
    best = max(U(a, p) for a in (1, 2))
    return [a for a in (1, 2) if U(a, p) >= best - e]


# p_optimistic = argmax over P0 of max_{a in eps-BR} V(a,p)
p0set = (F(1, 4), F(1, 2))
scores = {p: max(V(a, p) for a in eps_br_set(p, eps)) for p in p0set}
p_opt = max(p0set, key=lambda p: (scores[p], -p0set.index(p)))
print("optimistic scores:", scores, "-> p_optimistic =", p_opt)

grid = [F(k, 20) for k in range(21)]
cands = [p for p in grid if p >= p_opt and stable(p, eps, F(0))]
out = min(cands) if cands else F(1)
print("oracle output:", out, "=", float(out))
print("agent gap at output:", abs(U(1, out) - U(2, out)), ">= eps:", abs(U(1, out) - U(2, out)) >= eps)

# impossibility sweep: neither p in {1/4,1/2} is (c,eps,beta,gamma)-optimal stable
# for c <= 1/4, gamma <= 1/2, any beta > 0, any eps >= 0.
header("impossibility certification sweep")


def opti_eps_value(p, e):
    return max(V(a, p) for a in eps_br_set(p, e))


fails = 0
checked = 0
for c_num in range(0, 26):          # c in {0, 0.01, ..., 0.25}
    for g_num in range(0, 51):      # gamma in {0, 0.01, ..., 0.50}
        for b_exp in range(0, 7):   # beta in {1e-6 ... 1}
            c = F(c_num, 100)
            gamma = F(g_num, 100)
            beta_ = F(1, 10 ** b_exp)
            for e_exp in (0, 2, 6):  # eps in {1, 0.01, 1e-6}
                e = F(1, 10 ** e_exp)
                bench = max(opti_eps_value(p0, e) for p0 in p0set)
                for p in p0set:
                    checked += 1
                    ok_opt = V(max(eps_br_set(p, F(0)), key=lambda a: V(a, p)), p) >= bench - c
                    if stable(p, beta_, gamma) and ok_opt:
                        fails += 1
print(f"checked {checked} tuples, optimal-stable hits: {fails} (expect 0)")

# ---------------------------------------------------------------------------
# Prosecutor persuasion fixture.
# Strategies: acquit (index 0), convict (index 1); state y in {0,1} = {innocent, guilty}.
# Judge: u(acquit, y) = 1-y ... modeled as u(acquit,0)=1, u(acquit,1)=0,
#        u(convict,0)=0, u(convict,1)=1  => E_mu u(acquit)=1-mu, E u(convict)=mu.
# Prosecutor: v(acquit)=0, v(convict)=1.
# ---------------------------------------------------------------------------
header("prosecutor persuasion fixture")

ua = {(0, 0): F(1), (0, 1): F(0), (1, 0): F(0), (1, 1): F(1)}  # (strategy, state)
vv = {0: F(0), 1: F(1)}


def eu(s, mu):
    return (1 - mu) * ua[(s, 0)] + mu * ua[(s, 1)]


# envelope: intervals where each strategy is optimal; boundary at mu = 1/2
# slopes: d/dmu eu(acquit) = -1, eu(convict) = +1 -> c1 = min pairwise slope gap = 2
print("boundary mu where eu ties:", F(1, 2))
print("C (min interval length):", F(1, 2), " c1 (min slope gap):", 2)

# concave closure of mu -> v(s*(mu)) with principal-favoring tie at 1/2:
# v(s*(mu)) = 0 on [0,1/2), 1 on [1/2,1]; upper concave hull through (0,0),(1/2,1),(1,1)
def vstar(mu):
    if mu <= F(1, 2):
        return 2 * mu
    return F(1)


print("v*(0.3) =", vstar(F(3, 10)))

# Bayes-plausible decomposition of prior 0.3 into posteriors {0, 1/2}
tau_half = F(3, 10) / F(1, 2)
print("weights: tau(mu=1/2) =", tau_half, " tau(mu=0) =", 1 - tau_half)

# signal scheme via p(s|y=1) = tau*mu/prior, p(s|y=0) = tau*(1-mu)/(1-prior)
prior = F(3, 10)
post = [(1 - tau_half, F(0)), (tau_half, F(1, 2))]  # (tau, mu): signal i=acquit, g=convict
for (t, mu), name in zip(post, ("i", "g")):
    ps_y1 = t * mu / prior
    ps_y0 = t * (1 - mu) / (1 - prior)
    print(f"p({name}|y=1)={ps_y1}  p({name}|y=0)={ps_y0}")

# stabilization with beta = 0.05: boundary point 1/2 moves into the convict
# interval -> 0.55; closure over {(0,0), (0.55,1), (1,1)}
header("stabilized closure (beta=0.05)")
b = F(1, 20)
moved = F(1, 2) + b
tau2 = prior / moved
print("moved extreme point:", moved)
print("v'(0.3) =", tau2 * 1, "=", float(tau2 * 1))
print("v*(0.3) - v'(0.3) =", vstar(prior) - tau2, "<= 3*beta/C =", 3 * b / F(1, 2))

# c2 as operationalized
c1 = 2
C = 0.5
c2 = 2 * math.sqrt((1 / (c1 * C)) * (1 + 1 / C))
print("c2 =", c2)

# discretization: delta <= beta^2/16
draw = float(b) ** 2 / 16
print("delta_raw = beta^2/16 =", draw, " 1/ceil(1/draw) =", 1 / math.ceil(1 / draw))

# stability of the stabilized scheme, brute force over all 4 signal->strategy maps.
# scheme: p(g|y=1)=1, p(g|y=0) = tau2*(1-moved)/(1-prior), p(i|y=0)=1-that
header("stabilized scheme stability (all maps)")
pg1 = tau2 * moved / prior          # = 1
pg0 = tau2 * (1 - moved) / (1 - prior)
pi0 = 1 - pg0
pi1 = 1 - pg1
print("scheme: p(g|1)=", pg1, " p(g|0)=", pg0, " p(i|0)=", pi0)


def map_u(m, y):
    # m = (strategy for signal i, strategy for signal g)
    pi_y = {0: pi0, 1: pi1}[y]
    pg_y = {0: pg0, 1: pg1}[y]
    return pi_y * ua[(m[0], y)] + pg_y * ua[(m[1], y)]


def map_v(m, y):
    pi_y = {0: pi0, 1: pi1}[y]
    pg_y = {0: pg0, 1: pg1}[y]
    return pi_y * vv[m[0]] + pg_y * vv[m[1]]


def exp_u(m, mu):
    return (1 - mu) * map_u(m, 0) + mu * map_u(m, 1)


def exp_v(m, mu):
    return (1 - mu) * map_v(m, 0) + mu * map_v(m, 1)


maps = list(product((0, 1), repeat=2))
mu0 = prior
us = {m: exp_u(m, mu0) for m in maps}
vs = {m: exp_v(m, mu0) for m in maps}
best_u = max(us.values())
brm = [m for m in maps if us[m] == best_u]
star = max(brm, key=lambda m: vs[m])
print("map utilities:", {str(m): float(us[m]) for m in maps})
print("identity map (0,1) is optimistic BR:", star == (0, 1))
x = b  # x = beta in the default schedule
beta_p = x * c1 * b / 2  # x*c1*beta/2 with c1=2 -> x*beta
for m in maps:
    if m == star:
        continue
    agent_ok = us[m] <= us[star] - beta_p
    print(f"map {m}: U-gap {float(us[star]-us[m]):.4f} >= {float(beta_p):.4f}? {agent_ok}  "
          f"V-drop {float(vs[star]-vs[m]):.4f}")

# ---------------------------------------------------------------------------
# bias arithmetic
# ---------------------------------------------------------------------------
header("bias arithmetic")
# pi=(.5,.5) three rounds, y = 0,1,0, always-on event:
# sum of (pi - onehot(y)) = (.5-1,.5-0)+(.5-0,.5-1)+(.5-1,.5-0) = (-.5,.5)
s = [F(0), F(0)]
for y in (0, 1, 0):
    s[0] += F(1, 2) - (1 if y == 0 else 0)
    s[1] += F(1, 2) - (1 if y == 1 else 0)
alpha = (abs(s[0]) + abs(s[1])) / 3
print("three-round alpha:", alpha)

# ---------------------------------------------------------------------------
# balanced threshold
# ---------------------------------------------------------------------------
header("balanced threshold")
for T in (2, 2 ** 10, 2 ** 14, 2 ** 16):
    th = math.sqrt(12 * T * math.log(2 * (1 + math.log2(T)) ** 2))
    print(f"theta({T}) = {th!r}   theta/T = {th/T!r}")

# ---------------------------------------------------------------------------
# hand swap-regret fixture: one context, 2 actions, 4 rounds.
# utilities U(a, y_t) with the agent playing a1 all 4 rounds; rounds 1-2 have
# U(a2)-U(a1) = 1, rounds 3-4 have 0 -> switching a1->a2 gains 2 total.
# ---------------------------------------------------------------------------
header("hand swap fixture")
played = [0, 0, 0, 0]
gain_by_round = [(0, 1), (0, 1), (0, 0), (0, 0)]  # (U(a1), U(a2)) per round
best_total = 0
for m in product((0, 1), repeat=2):  # all maps from played-action to action
    tot = sum(gain_by_round[t][m[played[t]]] - gain_by_round[t][played[t]] for t in range(4))
    best_total = max(best_total, tot)
print("best modification gain:", best_total, " rate:", F(best_total, 4))

# Blum-Mansour style bound shape used in the agent test
T = 2 ** 14
print("3*sqrt(ln2 * 2 / T) at T=2^14:", 3 * math.sqrt(math.log(2) * 2 / T))
