"""Outside the monotone case a trap can beat both one-step bets.

Under the log-series prior with q = 1 the bygone/next roots decrease in k,
so the myopic rule is not optimal.  At x = alpha_2 with two trials seen,
bygone and next tie, and the best z-trap improves on both.
"""
from lastsuccess import mixture, simulate
from lastsuccess.logseries import best_trap
from lastsuccess.priors import GameState, logseries
from lastsuccess.profiles import records


def main():
    prior, prof = logseries(1.0), records()
    verdict = mixture.monotone_case_test(prior, prof, 10)
    print("monotone:", verdict.monotone, "witness k =", verdict.witness)
    print("alpha_k:", " ".join(f"{a:.6f}" for a in verdict.alphas[:5]))

    a2 = verdict.alphas[1]
    state = GameState(1 - a2, 2)
    z, _ = best_trap(2, a2)
    exact = {
        "bygone": mixture.mixture_S0(prior, prof, state),
        "next": mixture.mixture_S1(prior, prof, state, 0.0),
        f"z:{z:.4f}": mixture.mixture_S1(prior, prof, state, z),
    }
    strategies = [simulate.Bygone(), simulate.Next(), simulate.ZTrap(z)]
    sims = simulate.estimate_many(strategies, prior, prof, state, 10 ** 6, seed=1, crn=True)
    print(f"state t = {state.t:.6f}, k = 2  (x = alpha_2)")
    for (name, v), r in zip(exact.items(), sims):
        print(f"  {name:>9}: exact {v:.6f}   simulated {r.estimate:.6f} +- {r.std_error:.6f}")


if __name__ == "__main__":
    main()
