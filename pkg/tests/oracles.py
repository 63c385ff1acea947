"""Independent reference computations used as test oracles.

Nothing here imports the package: each value is obtained a different way
(brute-force enumeration, exact rationals, direct definitions).
"""

from fractions import Fraction
from itertools import product
import math


def nacc_moments_bruteforce(alpha, n):
    """Mean and variance of the leading run of accepts over all 2^n accept patterns."""
    a = Fraction(alpha)
    mean = Fraction(0)
    second = Fraction(0)
    for pattern in product((0, 1), repeat=n):
        p = Fraction(1)
        for bit in pattern:
            p *= a if bit else 1 - a
        run = 0
        for bit in pattern:
            if not bit:
                break
            run += 1
        mean += p * run
        second += p * run * run
    return mean, second - mean * mean


def tv(p, q):
    return sum(abs(Fraction(x) - Fraction(y)) for x, y in zip(p, q)) / 2


def ucb_index(means, counts, t, beta):
    return [m + beta * math.sqrt(2 * math.log(t) / n) for m, n in zip(means, counts)]


def exp_tokens_exact(alpha, n):
    """Exact rational E[N_acc] as a sum of survival probabilities."""
    a = Fraction(alpha)
    return sum(a**j for j in range(1, n + 1))


def stopping_time_exact(pmf, budget):
    """E[tau] for i.i.d. per-round token counts ``pmf[j]`` = P(round emits j + 1 tokens).

    Forward recursion over the probability of having emitted exactly m tokens
    after some round: E[tau] = sum over m < B of P(visit m).
    """
    visit = [0.0] * budget
    visit[0] = 1.0
    for m in range(budget):
        if visit[m] == 0.0:
            continue
        for j, p in enumerate(pmf):
            nxt = m + j + 1
            if nxt < budget:
                visit[nxt] += visit[m] * p
    return sum(visit)


def switching_cost_definition(arms, l_after, lam):
    """Cost straight from the definition: at a switch to arm i in round t, pay
    lam * (l(t) - l(tau_i(t))) where l(t) counts tokens before round t and
    tau_i(t) is the last round before t that played i (its tokens included)."""
    total = 0
    for t in range(1, len(arms)):
        if arms[t] == arms[t - 1]:
            continue
        l_t = l_after[t - 1]
        previous = [s for s in range(t) if arms[s] == arms[t]]
        seen = l_after[previous[-1]] if previous else 0
        total += l_t - seen
    return lam * total


def feedback_signal(delta, var_i, var_star):
    return delta**2 / max(var_i, var_star)
